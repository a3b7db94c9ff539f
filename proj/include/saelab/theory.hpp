#pragma once

#include <cstdint>
#include <vector>

#include "saelab/common.hpp"
#include "saelab/sae.hpp"
#include "saelab/synth.hpp"

namespace saelab::theory {

// W_m = W_p^T with optional latent permutation and zero-row padding up to
// n_m rows. This is the configuration the recovery results are about.
sae::SaeModel closed_form_solution(const synth::SuperpositionMatrix& wp, int n_m,
                                   const std::vector<int>& permutation = {},
                                   const sae::ActivationSpec& activation =
                                       sae::ActivationSpec::relu());

struct RecoveryReport {
  bool recovered = false;
  Vector per_dim_error;  // |x_m - x| per ground-truth dimension
  std::vector<int> shrunk_dims;
  std::vector<int> vanished_dims;
  bool argmax_preserved = false;
  Vector x_m;
};

// Pushes x through the closed-form model (x_m = act(W_p^T W_p x)) and
// reports exact-recovery status, interference-shrunk coordinates, and
// whether the strongest active feature keeps its rank.
RecoveryReport recovery_check(const synth::SuperpositionMatrix& wp, const Vector& x,
                              const sae::ActivationSpec& activation, double tolerance);

struct GapCheck {
  double lhs = 0.0;  // weighted loss minus ground-truth loss, both at W_m = W_p^T
  double rhs = 0.0;  // e^T (W_p^T Gamma^2 W_p - I) e with e = x - relu(W_p^T W_p x)
  double abs_diff = 0.0;
};

GapCheck gap_identity(const synth::SuperpositionMatrix& wp, const Vector& x,
                      const sae::GammaDiag& gamma);

// W_p^T Gamma^T Gamma W_p - I
Matrix interference_matrix(const synth::SuperpositionMatrix& wp, const sae::GammaDiag& gamma);

struct StationarityResult {
  Vector residual_mean;  // E[x_p - W_p relu(W_p^T W_p x)] estimate
  Vector std_error;      // per-coordinate standard error of that estimate
  long samples = 0;
  double max_sigmas = 0.0;  // max_i |mean_i| / se_i
  bool passed = false;      // every coordinate within 4 standard errors of zero
};

StationarityResult stationarity_check(const synth::SuperpositionMatrix& wp,
                                      double sparse_factor, long samples,
                                      std::uint64_t seed);

struct AlignmentResult {
  double score = 0.0;                // mean matched cosine similarity
  std::vector<int> matched_row;      // per feature, the greedily matched W_m row
  std::vector<double> similarity;    // per feature, cosine of that match
  std::vector<int> unmatched_rows;   // W_m rows left over (n_m > n)
};

// Greedy one-to-one matching of decoder rows to ground-truth feature
// directions by descending cosine (sign kept, a flipped row is a bad
// match); requires n_m >= n.
AlignmentResult alignment_score(const Matrix& w_m, const synth::SuperpositionMatrix& wp);

}  // namespace saelab::theory
