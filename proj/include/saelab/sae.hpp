#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "saelab/common.hpp"
#include "saelab/synth.hpp"

namespace saelab::sae {

enum class ActivationKind : std::uint8_t { Relu = 0, TopK = 1, JumpRelu = 2 };

struct ActivationSpec {
  ActivationKind kind = ActivationKind::Relu;
  int k = 0;       // TopK
  double c = 0.0;  // JumpRelu threshold

  static ActivationSpec relu() { return {}; }
  static ActivationSpec topk(int k);
  static ActivationSpec jumprelu(double c);

  std::string name() const;  // "relu", "topk(4)", "jumprelu(0.3)"
};

ActivationSpec parse_activation(const std::string& text);

// relu: max(z, 0). topk: keep the k largest entries (ties resolved toward
// the lowest index), zero the rest. jumprelu: z kept only where z > c.
Vector activate(const ActivationSpec& spec, const Vector& z);
Matrix activate_rows(const ActivationSpec& spec, const Matrix& z_rows);

// 0/1 pass-through gradient masks: relu uses z > 0, jumprelu z > c, topk the
// selected set (straight-through on kept coordinates).
Vector activation_mask(const ActivationSpec& spec, const Vector& z);
Matrix activation_mask_rows(const ActivationSpec& spec, const Matrix& z_rows);

// Tied-weight autoencoder without biases: latents = act(W_m x_p),
// reconstruction = W_m^T latents.
struct SaeModel {
  Matrix w_m;  // n_m x n_p
  ActivationSpec activation;

  int n_m() const { return static_cast<int>(w_m.rows()); }
  int n_p() const { return static_cast<int>(w_m.cols()); }
};

Vector encode(const SaeModel& m, const Vector& x_p);
Matrix encode_rows(const SaeModel& m, const Matrix& x_p_rows);
Vector decode(const SaeModel& m, const Vector& latents);
Matrix decode_rows(const SaeModel& m, const Matrix& latents_rows);
Vector reconstruct(const SaeModel& m, const Vector& x_p);
Matrix reconstruct_rows(const SaeModel& m, const Matrix& x_p_rows);

enum class WeightScheme { Uniform, InputVariancePower, ConsistencyPower, Explicit };

std::string weight_scheme_name(WeightScheme s);
WeightScheme parse_weight_scheme(const std::string& text);

// Diagonal reconstruction weights. compute_gamma returns the raw powers
// gamma_i = stat_i^alpha (statistics below 1e-8 are floored to 1e-8,
// negative statistics are rejected). Only relative weights matter for the
// argmin, so the trainer renormalizes power-scheme gammas to mean 1 to
// keep weighted losses comparable across schemes; uniform is already
// mean 1 and explicit gammas are respected as given.
struct GammaDiag {
  Vector gammas;
  WeightScheme scheme = WeightScheme::Uniform;
  double alpha = 1.0;

  int dim() const { return static_cast<int>(gammas.size()); }
  static GammaDiag uniform(int n_p);
  GammaDiag normalized_mean1() const;
};

GammaDiag compute_gamma(WeightScheme scheme, const Vector& stats, double alpha);
GammaDiag explicit_gamma(const Vector& gammas);

// Mean over rows of ||Gamma (x_p - reconstruct(x_p))||^2.
double weighted_loss(const SaeModel& m, const Matrix& x_p_rows, const GammaDiag& gamma);
double weighted_loss(const SaeModel& m, const Vector& x_p, const GammaDiag& gamma);

// d(weighted_loss)/dW_m with straight-through masks, same batch convention.
Matrix loss_gradient(const SaeModel& m, const Matrix& x_p_rows, const GammaDiag& gamma);

// Deterministic batch provider: the trainer derives one seed per step and
// the source must return the same rows for the same (seed, rows) pair.
class BatchSource {
 public:
  virtual ~BatchSource() = default;
  virtual int n_p() const = 0;
  virtual Matrix batch(std::uint64_t mixed_seed, int rows) const = 0;
};

// Fresh sparse features pushed through a superposition map each step.
class SyntheticSource : public BatchSource {
 public:
  SyntheticSource(synth::SuperpositionMatrix wp, double sparse_factor);
  int n_p() const override;
  Matrix batch(std::uint64_t mixed_seed, int rows) const override;
  const synth::SuperpositionMatrix& wp() const { return wp_; }
  double sparse_factor() const { return sparse_factor_; }

 private:
  synth::SuperpositionMatrix wp_;
  double sparse_factor_;
};

// Fixed activation matrix (e.g. an ingested dump), served as wrapped
// contiguous slices with a seed-chosen offset.
class MatrixSource : public BatchSource {
 public:
  explicit MatrixSource(Matrix rows);
  int n_p() const override;
  Matrix batch(std::uint64_t mixed_seed, int rows) const override;

 private:
  Matrix rows_;
};

struct InitSpec {
  enum class Kind { ScaledGaussian, TransposeOracle };
  Kind kind = Kind::ScaledGaussian;
  double stddev = -1.0;  // < 0 picks the default 0.1 / sqrt(n_p)
  Matrix oracle;         // TransposeOracle: W_m starts at oracle^T, zero-padded rows
};

struct SaeTrainConfig {
  int steps = 4000;
  int batch_size = 512;
  double learning_rate = 3e-3;
  std::uint64_t seed = 0;
  int eval_every = 200;
  int eval_batch = 2048;
  InitSpec init;
};

// How gammas are derived before training. InputVariancePower takes the
// per-dimension variance of x_p over a stats batch; with
// stats_from_reconstruction set, a first uniform-gamma phase is trained and
// the statistics are taken from that phase's reconstructions instead, then
// training restarts from the same init with the reweighted loss.
struct GammaPlan {
  WeightScheme scheme = WeightScheme::Uniform;
  double alpha = 1.0;
  bool stats_from_reconstruction = false;
  int stats_batch = 8192;
};

struct TrainReport {
  SaeModel model;
  GammaDiag gamma;  // the gammas actually optimized
  double initial_loss = 0.0;  // held-out eval batch, before any update
  double final_loss = 0.0;    // same held-out eval batch, after training
  std::vector<std::pair<int, double>> loss_curve;
  double wall_time_seconds = 0.0;  // informational; never serialized
  std::uint64_t seed = 0;
};

TrainReport train_sae(const BatchSource& source, int n_m, const ActivationSpec& activation,
                      const GammaDiag& gamma, const SaeTrainConfig& cfg);
TrainReport train_sae(const BatchSource& source, int n_m, const ActivationSpec& activation,
                      const GammaPlan& plan, const SaeTrainConfig& cfg);

Vector input_variance_stats(const BatchSource& source, std::uint64_t seed, int rows);

// Model container format (little-endian, atomic rename on write): magic
// "SAEW", u32 version, u64 n_m, u64 n_p, u8 activation tag, f64 activation
// parameter, row-major f64 W_m, u64 gamma count, f64 gammas.
void save_model(const std::string& path, const SaeModel& m, const GammaDiag& gamma);
std::pair<SaeModel, GammaDiag> load_model(const std::string& path);

}  // namespace saelab::sae
