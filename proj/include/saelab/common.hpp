#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace saelab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Error taxonomy. The CLI maps these onto exit codes, the python bindings
// onto exception types, so keep the hierarchy flat and the names stable.
struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DimensionMismatch : InvalidArgument {
  using InvalidArgument::InvalidArgument;
};

struct InfeasibleSpec : InvalidArgument {
  using InvalidArgument::InvalidArgument;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FormatError : IoError {
  using IoError::IoError;
};

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Deterministic RNG. mt19937_64 plus explicit bit-level double conversion;
// std::uniform_real_distribution is not pinned across standard libraries,
// so streams here never touch <random> distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // [0, 1), 53-bit mantissa
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // (0, 1], safe as a log argument
  double open_unit() { return 1.0 - uniform01(); }

  // Box-Muller, pair cached
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = open_unit();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// splitmix64 mix, used to derive independent stream seeds from a base seed
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Worker cap for embarrassingly parallel drivers. SAE_LAB_THREADS wins,
// otherwise hardware concurrency, never less than 1.
int thread_cap();

}  // namespace saelab
