#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "saelab/common.hpp"
#include "saelab/sae.hpp"
#include "saelab/synth.hpp"

namespace saelab::metrics {

// Mean over rows x of ||x - recovered(x)||^2 where the model runs on
// x_p = W_p x. With n_m == n latents compare against x directly; with
// n_m > n each ground-truth feature is compared against its greedily
// aligned latent and the energy of unmatched latents counts as error.
// With mask_nonsparse, each sample instead contributes its squared error
// summed over active (x_i > 0) coordinates divided by their count;
// all-zero samples are skipped.
double ground_truth_loss(const sae::SaeModel& m, const synth::SuperpositionMatrix& wp,
                         const Matrix& x_rows, bool mask_nonsparse);

// Unbiased per-column sample variance of a latent batch; needs >= 2 rows.
Vector per_dim_variance(const Matrix& latents_rows);

struct ActivatedFeatures {
  double mean = 0.0;       // over live latents: how many isolated inputs fire them
  int dead_latents = 0;    // latents no probe activates, excluded from the mean
  double threshold = 0.0;  // the threshold actually applied
};

// One-hot probes x^i = x_i e_i are built from every sample and every
// ground-truth index; latent j counts feature i when the summed response
// M_j^i = sum_x h_j(x^i) exceeds the threshold, a single cut shared by all
// latents. Passing a negative threshold resolves it to 1% of the largest
// response in the matrix, so interference-level residue does not register
// while anything comparable to a real activation does.
ActivatedFeatures avg_activated_features(const sae::SaeModel& m,
                                         const synth::SuperpositionMatrix& wp,
                                         const Matrix& x_rows, double threshold = -1.0);

// Per column of latents_rows: among the top_m rows by activation value,
// the fraction belonging to the most frequent label. Columns that never
// activate (all zero) score 0. Labels are class ids; -1 means unlabeled
// and such rows are skipped when ranking.
Vector semantic_consistency(const Matrix& latents_rows,
                            const std::vector<long long>& labels, int top_m);

struct SweepMetrics {
  double sparse_factor = 0.0;
  double l_gt = 0.0;            // ground-truth loss, all coordinates
  double l_gt_nonsparse = 0.0;  // ground-truth loss over active coordinates
  double l_poly = 0.0;          // reconstruction of x_p under uniform gamma
  double l_weighted = 0.0;      // reconstruction of x_p under the trained gamma
  double mean_dim_variance = 0.0;
  double avg_activated_features = 0.0;
  int dead_latents = 0;
};

}  // namespace saelab::metrics
