#include "saelab/synth.hpp"

#include <cmath>
#include <numeric>

#include "saelab/adam.hpp"

namespace saelab::synth {

GroundTruthBatch sample_ground_truth(int n, double sparse_factor, int batch_size,
                                     std::uint64_t seed) {
  if (n <= 0) throw InvalidArgument("sample_ground_truth: n must be positive");
  if (batch_size <= 0) throw InvalidArgument("sample_ground_truth: batch must be positive");
  if (!(sparse_factor >= 0.0 && sparse_factor <= 1.0)) {
    throw InvalidArgument("sample_ground_truth: sparse factor must lie in [0,1]");
  }
  Rng rng(seed);
  Matrix m(batch_size, n);
  // entry order is fixed (row-major) so a seed pins the batch bit for bit
  for (int r = 0; r < batch_size; ++r) {
    for (int c = 0; c < n; ++c) {
      const bool zero = rng.uniform01() < sparse_factor;
      const double value = rng.open_unit();
      m(r, c) = zero ? 0.0 : value;
    }
  }
  return GroundTruthBatch{std::move(m), sparse_factor, seed};
}

Matrix SuperpositionMatrix::gram() const {
  if (geometry == Geometry::AnalyticBlocks && !block_spec.empty()) {
    Matrix g = Matrix::Zero(n(), n());
    int at = 0;
    for (const int p : block_spec) {
      for (int a = 0; a < p; ++a) {
        for (int b = 0; b < p; ++b) {
          g(at + a, at + b) = (a == b) ? 1.0 : -1.0 / (p - 1);
        }
      }
      at += p;
    }
    return g;
  }
  return w_p.transpose() * w_p;
}

namespace {

// p unit columns in p-1 dimensions with pairwise inner product -1/(p-1):
// the orthonormal rows of the Helmert basis (those orthogonal to the
// all-ones vector) scaled by sqrt(p/(p-1)).
Matrix polygon_block(int p) {
  Matrix f(p - 1, p);
  for (int k = 1; k < p; ++k) {
    const double denom = std::sqrt(static_cast<double>(k) * (k + 1));
    for (int j = 0; j < p; ++j) {
      double h = 0.0;
      if (j < k) h = 1.0 / denom;
      else if (j == k) h = -static_cast<double>(k) / denom;
      f(k - 1, j) = h;
    }
  }
  return std::sqrt(static_cast<double>(p) / (p - 1)) * f;
}

}  // namespace

SuperpositionMatrix make_polytope_wp(const std::vector<int>& block_spec, int n_p) {
  if (block_spec.empty()) throw InvalidArgument("make_polytope_wp: empty block spec");
  if (n_p <= 0) throw InvalidArgument("make_polytope_wp: n_p must be positive");
  int dims = 0;
  int n = 0;
  for (const int p : block_spec) {
    if (p < 1) throw InvalidArgument("make_polytope_wp: block sizes must be >= 1");
    dims += (p == 1) ? 1 : p - 1;
    n += p;
  }
  if (dims != n_p) {
    throw InfeasibleSpec("make_polytope_wp: block embedding dimensions sum to " +
                         std::to_string(dims) + ", not n_p = " + std::to_string(n_p));
  }
  Matrix w = Matrix::Zero(n_p, n);
  int row = 0;
  int col = 0;
  for (const int p : block_spec) {
    if (p == 1) {
      w(row, col) = 1.0;
      row += 1;
      col += 1;
    } else {
      w.block(row, col, p - 1, p) = polygon_block(p);
      row += p - 1;
      col += p;
    }
  }
  SuperpositionMatrix out;
  out.w_p = std::move(w);
  out.geometry = Geometry::AnalyticBlocks;
  out.block_spec = block_spec;
  return out;
}

SuperpositionMatrix digon_wp() { return make_polytope_wp({1, 2}, 2); }

SuperpositionMatrix trigon_wp() {
  // the canonical 120-degree frame, pinned to these coordinates because the
  // demo values below are quoted against them
  const double s = std::sqrt(3.0) / 2.0;
  SuperpositionMatrix out;
  out.w_p = Matrix(2, 3);
  out.w_p << 0.0, s, -s,
             1.0, -0.5, -0.5;
  out.geometry = Geometry::AnalyticBlocks;
  out.block_spec = {3};
  return out;
}

Vector digon_demo_input() {
  Vector x(3);
  x << 0.5, 1.0, 0.8;
  return x;
}

Vector trigon_demo_input() {
  Vector x(3);
  x << 0.7, 0.5, 0.3;
  return x;
}

Vector superpose(const SuperpositionMatrix& wp, const Vector& x) {
  if (x.size() != wp.n()) {
    throw DimensionMismatch("superpose: x has " + std::to_string(x.size()) +
                            " entries, W_p expects " + std::to_string(wp.n()));
  }
  return wp.w_p * x;
}

Matrix superpose_rows(const SuperpositionMatrix& wp, const Matrix& x_rows) {
  if (x_rows.cols() != wp.n()) {
    throw DimensionMismatch("superpose: batch has " + std::to_string(x_rows.cols()) +
                            " columns, W_p expects " + std::to_string(wp.n()));
  }
  return x_rows * wp.w_p.transpose();
}

double toy_loss(const Matrix& w, const Vector& b, const Matrix& x_rows) {
  const Matrix p = x_rows * w.transpose();
  Matrix z = p * w;
  z.rowwise() += b.transpose();
  const Matrix xhat = z.cwiseMax(0.0);
  return (xhat - x_rows).squaredNorm() / static_cast<double>(x_rows.rows());
}

void toy_gradient(const Matrix& w, const Vector& b, const Matrix& x_rows,
                  Matrix& grad_w, Vector& grad_b) {
  const auto batch = static_cast<double>(x_rows.rows());
  const Matrix p = x_rows * w.transpose();
  Matrix z = p * w;
  z.rowwise() += b.transpose();
  const Matrix mask = (z.array() > 0.0).cast<double>();
  const Matrix g = 2.0 * ((z.cwiseMax(0.0) - x_rows).array() * mask.array()).matrix();
  grad_w = (p.transpose() * g + (g * w.transpose()).transpose() * x_rows) / batch;
  grad_b = g.colwise().mean().transpose();
}

ToyTrainReport train_toy_superposition(int n, int n_p, double sparse_factor,
                                       const ToyTrainConfig& cfg) {
  if (n_p <= 0 || n < n_p) throw InvalidArgument("toy training needs n >= n_p > 0");
  if (cfg.steps <= 0 || cfg.batch_size <= 0 || cfg.learning_rate <= 0.0) {
    throw InvalidArgument("toy training needs positive steps, batch size, learning rate");
  }
  const std::uint64_t data_seed = derive_seed(cfg.seed, 1);
  const std::uint64_t init_seed = derive_seed(cfg.seed, 2);
  const std::uint64_t eval_seed = derive_seed(cfg.seed, 3);

  Rng init_rng(init_seed);
  Matrix w(n_p, n);
  const double std0 = 1.0 / std::sqrt(static_cast<double>(n_p));
  for (int r = 0; r < n_p; ++r) {
    for (int c = 0; c < n; ++c) w(r, c) = std0 * init_rng.gaussian();
  }
  Vector b = Vector::Zero(n);

  AdamConfig acfg;
  acfg.learning_rate = cfg.learning_rate;
  Adam opt_w(n_p, n, acfg);
  Adam opt_b(n, 1, acfg);

  // initial and final losses share one held-out batch so the descent
  // comparison is not at the mercy of which training batch came first
  const Matrix eval =
      sample_ground_truth(n, sparse_factor, 4096, derive_seed(eval_seed, 0)).data;

  ToyTrainReport report;
  report.initial_loss = toy_loss(w, b, eval);
  Matrix grad_w(n_p, n);
  Vector grad_b(n);
  for (int step = 0; step < cfg.steps; ++step) {
    const Matrix batch =
        sample_ground_truth(n, sparse_factor, cfg.batch_size, derive_seed(data_seed, step))
            .data;
    const double loss = toy_loss(w, b, batch);
    if (!std::isfinite(loss)) {
      throw DivergenceError("toy training diverged at step " + std::to_string(step));
    }
    if (cfg.eval_every > 0 && step % cfg.eval_every == 0) {
      report.loss_curve.emplace_back(step, loss);
    }
    toy_gradient(w, b, batch, grad_w, grad_b);
    opt_w.step(w, grad_w);
    if (cfg.use_bias) opt_b.step(b, grad_b);
  }
  report.final_loss = toy_loss(w, b, eval);
  report.loss_curve.emplace_back(cfg.steps, report.final_loss);
  report.wp.w_p = std::move(w);
  report.wp.geometry = Geometry::Learned;
  report.bias = std::move(b);
  return report;
}

}  // namespace saelab::synth
