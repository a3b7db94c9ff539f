#include "saelab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "saelab/theory.hpp"

namespace saelab::metrics {

double ground_truth_loss(const sae::SaeModel& m, const synth::SuperpositionMatrix& wp,
                         const Matrix& x_rows, bool mask_nonsparse) {
  if (x_rows.cols() != wp.n()) {
    throw DimensionMismatch("ground_truth_loss: batch has " + std::to_string(x_rows.cols()) +
                            " columns, W_p expects " + std::to_string(wp.n()));
  }
  if (x_rows.rows() == 0) throw InvalidArgument("ground_truth_loss: empty batch");
  const int n = wp.n();
  const Matrix latents = sae::encode_rows(m, synth::superpose_rows(wp, x_rows));

  // with extra latents, features are read off the greedily aligned rows and
  // whatever mass lands on unmatched latents is pure error
  Matrix recovered(x_rows.rows(), n);
  double extra_energy = 0.0;  // mean over samples, added to the unmasked loss
  if (m.n_m() == n) {
    recovered = latents;
  } else if (m.n_m() > n) {
    const theory::AlignmentResult match = theory::alignment_score(m.w_m, wp);
    for (int c = 0; c < n; ++c) recovered.col(c) = latents.col(match.matched_row[c]);
    double sq = 0.0;
    for (const int r : match.unmatched_rows) sq += latents.col(r).squaredNorm();
    extra_energy = sq / static_cast<double>(x_rows.rows());
  } else {
    throw DimensionMismatch("ground_truth_loss: n_m < n has no feature mapping");
  }

  const Matrix err = recovered - x_rows;
  if (!mask_nonsparse) {
    return err.squaredNorm() / static_cast<double>(x_rows.rows()) + extra_energy;
  }
  double total = 0.0;
  long counted_rows = 0;
  for (Eigen::Index r = 0; r < x_rows.rows(); ++r) {
    double sq = 0.0;
    int active = 0;
    for (Eigen::Index c = 0; c < n; ++c) {
      if (x_rows(r, c) > 0.0) {
        sq += err(r, c) * err(r, c);
        ++active;
      }
    }
    if (active > 0) {
      total += sq / active;
      ++counted_rows;
    }
  }
  return counted_rows == 0 ? 0.0 : total / static_cast<double>(counted_rows);
}

Vector per_dim_variance(const Matrix& latents_rows) {
  if (latents_rows.rows() < 2) {
    throw InvalidArgument("per_dim_variance needs at least 2 samples");
  }
  const Matrix centered = latents_rows.rowwise() - latents_rows.colwise().mean();
  return centered.array().square().colwise().sum().transpose() /
         static_cast<double>(latents_rows.rows() - 1);
}

ActivatedFeatures avg_activated_features(const sae::SaeModel& m,
                                         const synth::SuperpositionMatrix& wp,
                                         const Matrix& x_rows, double threshold) {
  if (x_rows.cols() != wp.n()) {
    throw DimensionMismatch("avg_activated_features: batch columns must equal n");
  }
  if (x_rows.rows() == 0) throw InvalidArgument("avg_activated_features: empty batch");
  const int n = wp.n();
  const int n_m = m.n_m();

  // probe x^i = x_i e_i maps to x_i * (W_m W_p e_i); precompute the columns
  const Matrix latent_dirs = m.w_m * wp.w_p;  // n_m x n
  Matrix response = Matrix::Zero(n_m, n);     // M_j^i
  if (m.activation.kind == sae::ActivationKind::Relu && (x_rows.array() >= 0.0).all()) {
    // relu commutes with the nonnegative probe scale, so the sample sum
    // collapses to one scaled column per feature
    const Vector col_sums = x_rows.colwise().sum().transpose();
    for (int i = 0; i < n; ++i) {
      response.col(i) = col_sums(i) * latent_dirs.col(i).cwiseMax(0.0);
    }
  } else {
    Vector z(n_m);
    for (int i = 0; i < n; ++i) {
      for (Eigen::Index s = 0; s < x_rows.rows(); ++s) {
        const double xi = x_rows(s, i);
        if (xi == 0.0) continue;  // a zero probe contributes zero response
        z = xi * latent_dirs.col(i);
        response.col(i) += sae::activate(m.activation, z);
      }
    }
  }
  // auto threshold: 1% of the strongest response, a single cut shared by all
  // latents, separating real activations from interference-level residue
  double resolved = threshold;
  if (resolved < 0.0) resolved = 0.01 * response.cwiseAbs().maxCoeff();
  ActivatedFeatures out;
  out.threshold = resolved;
  long live = 0;
  long total_active = 0;
  for (int j = 0; j < n_m; ++j) {
    int active = 0;
    for (int i = 0; i < n; ++i) {
      if (response(j, i) > resolved && response(j, i) > 0.0) ++active;
    }
    if (active == 0) {
      ++out.dead_latents;
    } else {
      ++live;
      total_active += active;
    }
  }
  out.mean = live == 0 ? 0.0 : static_cast<double>(total_active) / static_cast<double>(live);
  return out;
}

Vector semantic_consistency(const Matrix& latents_rows,
                            const std::vector<long long>& labels, int top_m) {
  if (static_cast<Eigen::Index>(labels.size()) != latents_rows.rows()) {
    throw DimensionMismatch("semantic_consistency: labels must match batch rows");
  }
  std::vector<Eigen::Index> labeled;
  for (Eigen::Index r = 0; r < latents_rows.rows(); ++r) {
    if (labels[static_cast<std::size_t>(r)] >= 0) labeled.push_back(r);
  }
  if (top_m <= 0 || top_m > static_cast<int>(labeled.size())) {
    throw InvalidArgument("semantic_consistency: top_m must lie in [1, labeled rows]");
  }
  Vector out = Vector::Zero(latents_rows.cols());
  std::vector<Eigen::Index> order(labeled.size());
  for (Eigen::Index d = 0; d < latents_rows.cols(); ++d) {
    if ((latents_rows.col(d).array() == 0.0).all()) {
      out(d) = 0.0;
      continue;
    }
    order = labeled;
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return latents_rows(a, d) > latents_rows(b, d);
    });
    std::map<long long, int> counts;
    int best = 0;
    for (int t = 0; t < top_m; ++t) {
      const int c = ++counts[labels[static_cast<std::size_t>(order[t])]];
      best = std::max(best, c);
    }
    out(d) = static_cast<double>(best) / static_cast<double>(top_m);
  }
  return out;
}

}  // namespace saelab::metrics
