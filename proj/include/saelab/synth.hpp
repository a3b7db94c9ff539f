#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "saelab/common.hpp"

namespace saelab::synth {

// Sparse nonnegative ground-truth features. Each coordinate is 0 with
// probability S, otherwise uniform on (0, 1]. Rows are samples.
struct GroundTruthBatch {
  Matrix data;
  double sparse_factor = 0.0;
  std::uint64_t seed = 0;
};

GroundTruthBatch sample_ground_truth(int n, double sparse_factor, int batch_size,
                                     std::uint64_t seed);

enum class Geometry {
  AnalyticBlocks,  // built from a block spec, exact Gram known
  Learned,         // produced by the toy superposition trainer
  Loaded,          // arbitrary, e.g. read from a file
};

// Column i is the n_p-dimensional direction feature i is packed into.
struct SuperpositionMatrix {
  Matrix w_p;  // n_p x n
  Geometry geometry = Geometry::Loaded;
  std::vector<int> block_spec;  // AnalyticBlocks only

  int n() const { return static_cast<int>(w_p.cols()); }
  int n_p() const { return static_cast<int>(w_p.rows()); }

  // W_p^T W_p. For AnalyticBlocks the exact block Gram (unit diagonal,
  // -1/(p-1) inside a p-gon block) is assembled directly so downstream
  // checks that rely on exact cancellation are not at the mercy of
  // rounding in the stored coordinates.
  Matrix gram() const;
};

// Packs features into regular polytopes: a block of size 1 gets its own
// basis direction, a block of size p >= 2 becomes p unit vectors in a
// (p-1)-dimensional subspace with pairwise inner product -1/(p-1).
// Block embedding dimensions must sum to exactly n_p.
SuperpositionMatrix make_polytope_wp(const std::vector<int>& block_spec, int n_p);

// Canonical small fixtures used throughout the tests and the CLI demos:
// one free feature plus an antipodal pair in 2 dims, and three features
// at 120 degrees in 2 dims.
SuperpositionMatrix digon_wp();
SuperpositionMatrix trigon_wp();
Vector digon_demo_input();
Vector trigon_demo_input();

Vector superpose(const SuperpositionMatrix& wp, const Vector& x);
Matrix superpose_rows(const SuperpositionMatrix& wp, const Matrix& x_rows);

// Toy reconstruction model x_hat = relu(W^T W x + b), trained with Adam on
// fresh synthetic batches. Loss and gradient are exposed separately so the
// gradient can be checked against finite differences.
struct ToyTrainConfig {
  int steps = 3000;
  int batch_size = 256;
  double learning_rate = 1e-2;
  std::uint64_t seed = 0;
  bool use_bias = true;
  int eval_every = 100;
};

struct ToyTrainReport {
  SuperpositionMatrix wp;  // geometry == Learned
  Vector bias;
  double initial_loss = 0.0;  // held-out eval batch, before any update
  double final_loss = 0.0;    // same held-out eval batch, after training
  std::vector<std::pair<int, double>> loss_curve;
};

double toy_loss(const Matrix& w, const Vector& b, const Matrix& x_rows);
void toy_gradient(const Matrix& w, const Vector& b, const Matrix& x_rows,
                  Matrix& grad_w, Vector& grad_b);

ToyTrainReport train_toy_superposition(int n, int n_p, double sparse_factor,
                                       const ToyTrainConfig& cfg);

}  // namespace saelab::synth
