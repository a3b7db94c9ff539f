#include "saelab/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace saelab::theory {

sae::SaeModel closed_form_solution(const synth::SuperpositionMatrix& wp, int n_m,
                                   const std::vector<int>& permutation,
                                   const sae::ActivationSpec& activation) {
  const int n = wp.n();
  if (n_m < n) {
    throw DimensionMismatch("closed form needs n_m >= n (" + std::to_string(n_m) + " < " +
                            std::to_string(n) + ")");
  }
  Matrix base = Matrix::Zero(n_m, wp.n_p());
  base.topRows(n) = wp.w_p.transpose();
  sae::SaeModel model;
  model.activation = activation;
  if (permutation.empty()) {
    model.w_m = std::move(base);
    return model;
  }
  if (static_cast<int>(permutation.size()) != n_m) {
    throw InvalidArgument("permutation must have n_m entries");
  }
  std::vector<bool> seen(permutation.size(), false);
  Matrix permuted(n_m, wp.n_p());
  for (int r = 0; r < n_m; ++r) {
    const int src = permutation[r];
    if (src < 0 || src >= n_m || seen[src]) {
      throw InvalidArgument("permutation is not a bijection on 0.." +
                            std::to_string(n_m - 1));
    }
    seen[src] = true;
    permuted.row(r) = base.row(src);
  }
  model.w_m = std::move(permuted);
  return model;
}

RecoveryReport recovery_check(const synth::SuperpositionMatrix& wp, const Vector& x,
                              const sae::ActivationSpec& activation, double tolerance) {
  if (x.size() != wp.n()) {
    throw DimensionMismatch("recovery_check: x has " + std::to_string(x.size()) +
                            " entries, W_p expects " + std::to_string(wp.n()));
  }
  RecoveryReport rep;
  // the analytic Gram (exact for block geometry) keeps the clipping of
  // negative cross terms exact, so 1-sparse inputs recover bit for bit
  rep.x_m = sae::activate(activation, wp.gram() * x);
  rep.per_dim_error = (rep.x_m - x).cwiseAbs();
  rep.recovered = rep.per_dim_error.maxCoeff() < tolerance;
  int true_argmax = -1;
  int rec_argmax = -1;
  for (int i = 0; i < x.size(); ++i) {
    if (x(i) <= 0.0) continue;
    if (true_argmax < 0 || x(i) > x(true_argmax)) true_argmax = i;
    if (rec_argmax < 0 || rep.x_m(i) > rep.x_m(rec_argmax)) rec_argmax = i;
    if (rep.x_m(i) < x(i) - tolerance) rep.shrunk_dims.push_back(i);
    if (rep.x_m(i) <= tolerance) rep.vanished_dims.push_back(i);
  }
  rep.argmax_preserved = (true_argmax == rec_argmax);
  return rep;
}

Matrix interference_matrix(const synth::SuperpositionMatrix& wp, const sae::GammaDiag& gamma) {
  if (gamma.dim() != wp.n_p()) {
    throw DimensionMismatch("interference_matrix: gamma dims must equal n_p");
  }
  const Matrix gw = gamma.gammas.asDiagonal() * wp.w_p;
  return gw.transpose() * gw - Matrix::Identity(wp.n(), wp.n());
}

GapCheck gap_identity(const synth::SuperpositionMatrix& wp, const Vector& x,
                      const sae::GammaDiag& gamma) {
  if (x.size() != wp.n()) {
    throw DimensionMismatch("gap_identity: x has " + std::to_string(x.size()) +
                            " entries, W_p expects " + std::to_string(wp.n()));
  }
  if (gamma.dim() != wp.n_p()) {
    throw DimensionMismatch("gap_identity: gamma dims must equal n_p");
  }
  const sae::SaeModel model = closed_form_solution(wp, wp.n());
  const Vector x_p = synth::superpose(wp, x);

  // loss-evaluation side
  const double weighted = sae::weighted_loss(model, x_p, gamma);
  const Vector x_m = sae::encode(model, x_p);
  const double ground_truth = (x - x_m).squaredNorm();

  // quadratic-form side, assembled without the sae forward pass
  const Vector e = x - (wp.w_p.transpose() * (wp.w_p * x)).cwiseMax(0.0);
  const Matrix sigma = interference_matrix(wp, gamma);

  GapCheck gap;
  gap.lhs = weighted - ground_truth;
  gap.rhs = e.dot(sigma * e);
  gap.abs_diff = std::abs(gap.lhs - gap.rhs);
  return gap;
}

StationarityResult stationarity_check(const synth::SuperpositionMatrix& wp,
                                      double sparse_factor, long samples,
                                      std::uint64_t seed) {
  if (samples <= 0) throw InvalidArgument("stationarity_check: samples must be positive");
  const int n_p = wp.n_p();
  const Matrix gram = wp.gram();
  Vector sum = Vector::Zero(n_p);
  Vector sum_sq = Vector::Zero(n_p);
  constexpr int kChunk = 16384;
  long done = 0;
  int chunk_index = 0;
  while (done < samples) {
    const int take = static_cast<int>(std::min<long>(kChunk, samples - done));
    const Matrix x = synth::sample_ground_truth(wp.n(), sparse_factor, take,
                                                derive_seed(seed, chunk_index))
                         .data;
    // residual per sample: W_p x - W_p relu(G x)
    const Matrix recovered = (x * gram.transpose()).cwiseMax(0.0);
    const Matrix res = (x - recovered) * wp.w_p.transpose();
    sum += res.colwise().sum().transpose();
    sum_sq += res.array().square().colwise().sum().matrix().transpose();
    done += take;
    ++chunk_index;
  }
  StationarityResult out;
  out.samples = samples;
  const double inv = 1.0 / static_cast<double>(samples);
  out.residual_mean = sum * inv;
  out.std_error.resize(n_p);
  out.max_sigmas = 0.0;
  out.passed = true;
  for (int i = 0; i < n_p; ++i) {
    const double var =
        std::max(0.0, sum_sq(i) * inv - out.residual_mean(i) * out.residual_mean(i));
    out.std_error(i) = std::sqrt(var * inv);
    const double mean_abs = std::abs(out.residual_mean(i));
    if (out.std_error(i) == 0.0) {
      if (mean_abs > 0.0) {
        out.passed = false;
        out.max_sigmas = std::numeric_limits<double>::infinity();
      }
      continue;
    }
    const double sigmas = mean_abs / out.std_error(i);
    out.max_sigmas = std::max(out.max_sigmas, sigmas);
    if (sigmas > 4.0) out.passed = false;
  }
  return out;
}

AlignmentResult alignment_score(const Matrix& w_m, const synth::SuperpositionMatrix& wp) {
  const int n = wp.n();
  const int n_m = static_cast<int>(w_m.rows());
  if (w_m.cols() != wp.n_p()) {
    throw DimensionMismatch("alignment_score: W_m columns must equal n_p");
  }
  if (n_m < n) {
    throw DimensionMismatch("alignment_score needs n_m >= n");
  }
  Matrix cos(n_m, n);
  for (int r = 0; r < n_m; ++r) {
    const double rn = w_m.row(r).norm();
    for (int c = 0; c < n; ++c) {
      const double cn = wp.w_p.col(c).norm();
      cos(r, c) = (rn == 0.0 || cn == 0.0)
                      ? 0.0
                      : w_m.row(r).dot(wp.w_p.col(c).transpose()) / (rn * cn);
    }
  }
  struct Cand {
    double sim;
    int row;
    int col;
  };
  std::vector<Cand> cands;
  cands.reserve(static_cast<std::size_t>(n_m) * n);
  for (int r = 0; r < n_m; ++r) {
    for (int c = 0; c < n; ++c) cands.push_back({cos(r, c), r, c});
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.sim != b.sim) return a.sim > b.sim;
    if (a.col != b.col) return a.col < b.col;
    return a.row < b.row;
  });
  AlignmentResult out;
  out.matched_row.assign(n, -1);
  out.similarity.assign(n, 0.0);
  std::vector<bool> row_used(n_m, false);
  int matched = 0;
  for (const Cand& c : cands) {
    if (matched == n) break;
    if (row_used[c.row] || out.matched_row[c.col] >= 0) continue;
    out.matched_row[c.col] = c.row;
    out.similarity[c.col] = c.sim;
    row_used[c.row] = true;
    ++matched;
  }
  for (int r = 0; r < n_m; ++r) {
    if (!row_used[r]) out.unmatched_rows.push_back(r);
  }
  out.score = std::accumulate(out.similarity.begin(), out.similarity.end(), 0.0) /
              static_cast<double>(n);
  return out;
}

}  // namespace saelab::theory
