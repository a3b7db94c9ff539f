#include <doctest.h>

#include <cmath>

#include "saelab/theory.hpp"

using namespace saelab;

namespace {

Vector random_sparse(int n, double s, std::uint64_t seed) {
  return synth::sample_ground_truth(n, s, 1, seed).data.row(0).transpose();
}

sae::GammaDiag random_gamma(int n_p, std::uint64_t seed) {
  Rng rng(seed);
  Vector g(n_p);
  for (int i = 0; i < n_p; ++i) g(i) = 0.1 + 1.9 * rng.uniform01();
  return sae::explicit_gamma(g);
}

}  // namespace

TEST_SUITE("theory") {

TEST_CASE("closed form is the transpose with optional zero-row padding") {
  const auto digon = synth::digon_wp();
  const auto m = theory::closed_form_solution(digon, 3);
  CHECK(m.w_m == digon.w_p.transpose());

  const auto padded = theory::closed_form_solution(digon, 5);
  CHECK(padded.w_m.rows() == 5);
  CHECK(padded.w_m.topRows(3) == digon.w_p.transpose());
  CHECK(padded.w_m.bottomRows(2).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(theory::closed_form_solution(digon, 2), DimensionMismatch);
}

TEST_CASE("closed form applies a latent permutation") {
  const auto digon = synth::digon_wp();
  const auto m = theory::closed_form_solution(digon, 4, {3, 0, 2, 1});
  CHECK(m.w_m.row(0).cwiseAbs().maxCoeff() == 0.0);  // padding row moved up
  CHECK(m.w_m.row(1) == digon.w_p.transpose().row(0));
  CHECK(m.w_m.row(2) == digon.w_p.transpose().row(2));
  CHECK(m.w_m.row(3) == digon.w_p.transpose().row(1));

  CHECK_THROWS_AS(theory::closed_form_solution(digon, 4, {0, 1, 2}), InvalidArgument);
  CHECK_THROWS_AS(theory::closed_form_solution(digon, 4, {0, 0, 1, 2}), InvalidArgument);
  CHECK_THROWS_AS(theory::closed_form_solution(digon, 4, {0, 1, 2, 4}), InvalidArgument);
}

TEST_CASE("digon demo input loses a feature and flips the argmax") {
  const auto wp = synth::digon_wp();
  const auto rep = theory::recovery_check(wp, synth::digon_demo_input(),
                                          sae::ActivationSpec::relu(), 1e-9);
  CHECK(!rep.recovered);
  REQUIRE(rep.x_m.size() == 3);
  CHECK(rep.x_m(0) == 0.5);
  CHECK(rep.x_m(1) == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(rep.x_m(2) == 0.0);
  CHECK(rep.per_dim_error(0) == 0.0);
  CHECK(rep.per_dim_error(1) == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(rep.per_dim_error(2) == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(rep.shrunk_dims == std::vector<int>{1, 2});
  CHECK(rep.vanished_dims == std::vector<int>{2});
  // the strongest true feature (dim 1 at 1.0) is overtaken by dim 0
  CHECK(!rep.argmax_preserved);
}

TEST_CASE("trigon demo input keeps only the dominant feature") {
  const auto wp = synth::trigon_wp();
  const auto rep = theory::recovery_check(wp, synth::trigon_demo_input(),
                                          sae::ActivationSpec::relu(), 1e-9);
  CHECK(!rep.recovered);
  CHECK(rep.x_m(0) == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(std::abs(rep.x_m(1)) < 1e-15);
  CHECK(rep.x_m(2) == 0.0);
  CHECK(rep.vanished_dims == std::vector<int>{1, 2});
  CHECK(rep.shrunk_dims == std::vector<int>{0, 1, 2});
  CHECK(rep.argmax_preserved);
}

TEST_CASE("one-hot inputs recover exactly for every polytope block") {
  for (const auto& blocks : {std::vector<int>{1, 1}, std::vector<int>{2},
                             std::vector<int>{3, 2}, std::vector<int>{5}}) {
    int n = 0;
    for (int b : blocks) n += b;
    int n_p = 0;
    for (int b : blocks) n_p += (b == 1 ? 1 : b - 1);
    const auto wp = synth::make_polytope_wp(blocks, n_p);
    for (int i = 0; i < n; ++i) {
      Vector x = Vector::Zero(n);
      x(i) = 0.7;
      const auto rep = theory::recovery_check(wp, x, sae::ActivationSpec::relu(), 1e-9);
      CHECK(rep.recovered);
      CHECK(rep.argmax_preserved);
      CHECK(rep.vanished_dims.empty());
    }
  }
}

TEST_CASE("recovery check validates input size") {
  CHECK_THROWS_AS(theory::recovery_check(synth::digon_wp(), Vector::Ones(4),
                                         sae::ActivationSpec::relu(), 1e-9),
                  DimensionMismatch);
}

TEST_CASE("interference matrix worked examples") {
  const auto digon = synth::digon_wp();
  const Matrix sigma = theory::interference_matrix(digon, sae::GammaDiag::uniform(2));
  Matrix expected(3, 3);
  expected << 0, 0, 0, 0, 0, -1, 0, -1, 0;
  CHECK((sigma - expected).cwiseAbs().maxCoeff() == 0.0);

  Vector g(2);
  g << 1.0, 0.5;
  const Matrix weighted = theory::interference_matrix(digon, sae::explicit_gamma(g));
  CHECK(weighted(0, 0) == 0.0);
  CHECK(weighted(1, 1) == -0.75);
  CHECK(weighted(1, 2) == -0.25);
  CHECK(weighted(2, 1) == -0.25);
  CHECK(weighted(2, 2) == -0.75);

  CHECK_THROWS_AS(theory::interference_matrix(digon, sae::GammaDiag::uniform(3)),
                  DimensionMismatch);
}

TEST_CASE("interference matrix vanishes when features are orthogonal") {
  const auto wp = synth::make_polytope_wp({1, 1, 1}, 3);
  const Matrix sigma = theory::interference_matrix(wp, sae::GammaDiag::uniform(3));
  CHECK(sigma.cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("gap identity on the digon demo gives the exact fixture value") {
  const auto wp = synth::digon_wp();
  const auto gap =
      theory::gap_identity(wp, synth::digon_demo_input(), sae::GammaDiag::uniform(2));
  // reconstruction is perfect, so the gap is minus the ground-truth loss:
  // e = (0, 0.8, 0.8) and e' Sigma e = -2 * 0.64 = -1.28
  CHECK(gap.lhs == doctest::Approx(-1.28).epsilon(1e-13));
  CHECK(gap.rhs == doctest::Approx(-1.28).epsilon(1e-13));
  CHECK(gap.abs_diff < 1e-12);
}

TEST_CASE("gap identity holds over random geometry, sparsity, and weights") {
  int trial = 0;
  for (std::uint64_t seed = 0; seed < 250; ++seed) {
    Rng rng(derive_seed(9000, seed));
    const std::vector<std::vector<int>> grids = {
        {2}, {3}, {1, 2}, {2, 2}, {4}, {1, 1, 3}, {5, 2}};
    const auto& blocks =
        grids[static_cast<std::size_t>(rng.uniform01() * static_cast<double>(grids.size())) %
              grids.size()];
    int n = 0;
    for (int b : blocks) n += b;
    int n_p = 0;
    for (int b : blocks) n_p += (b == 1 ? 1 : b - 1);
    const auto wp = synth::make_polytope_wp(blocks, n_p);
    const double s = rng.uniform01();
    for (int rep = 0; rep < 4; ++rep, ++trial) {
      const Vector x = random_sparse(n, s, derive_seed(seed, 17 + rep));
      const auto gamma = (rep % 2 == 0) ? sae::GammaDiag::uniform(n_p)
                                        : random_gamma(n_p, derive_seed(seed, 33 + rep));
      const auto gap = theory::gap_identity(wp, x, gamma);
      REQUIRE_MESSAGE(gap.abs_diff < 1e-10, "trial ", trial, " blocks n=", n,
                      " s=", s, " diff=", gap.abs_diff);
    }
  }
  CHECK(trial == 1000);
}

TEST_CASE("gap identity validates dimensions") {
  const auto wp = synth::digon_wp();
  CHECK_THROWS_AS(theory::gap_identity(wp, Vector::Ones(2), sae::GammaDiag::uniform(2)),
                  DimensionMismatch);
  CHECK_THROWS_AS(theory::gap_identity(wp, Vector::Ones(3), sae::GammaDiag::uniform(3)),
                  DimensionMismatch);
}

TEST_CASE("digon residual cancels per sample, so stationarity is exact") {
  const auto res = theory::stationarity_check(synth::digon_wp(), 0.5, 2000, 3);
  CHECK(res.samples == 2000);
  CHECK(res.residual_mean.cwiseAbs().maxCoeff() == 0.0);
  CHECK(res.max_sigmas == 0.0);
  CHECK(res.passed);
}

TEST_CASE("orthogonal features give an exactly zero residual") {
  const auto wp = synth::make_polytope_wp({1, 1}, 2);
  const auto res = theory::stationarity_check(wp, 0.3, 1000, 4);
  CHECK(res.residual_mean.cwiseAbs().maxCoeff() < 1e-15);
  CHECK(res.passed);
}

TEST_CASE("pentagon stationarity holds within four standard errors") {
  const auto wp = synth::make_polytope_wp({5}, 4);
  const auto res = theory::stationarity_check(wp, 0.5, 200000, 11);
  MESSAGE("pentagon max sigmas: ", res.max_sigmas);
  CHECK(res.passed);
  CHECK(res.max_sigmas <= 4.0);
  CHECK(res.std_error.minCoeff() > 0.0);
}

TEST_CASE("fully sparse input stream has no residual at all") {
  const auto res = theory::stationarity_check(synth::trigon_wp(), 1.0, 500, 5);
  CHECK(res.residual_mean.cwiseAbs().maxCoeff() == 0.0);
  CHECK(res.passed);
}

TEST_CASE("stationarity is deterministic per seed and validates arguments") {
  const auto wp = synth::trigon_wp();
  const auto a = theory::stationarity_check(wp, 0.4, 5000, 21);
  const auto b = theory::stationarity_check(wp, 0.4, 5000, 21);
  CHECK(a.residual_mean == b.residual_mean);
  CHECK(a.std_error == b.std_error);
  CHECK(a.max_sigmas == b.max_sigmas);
  CHECK_THROWS_AS(theory::stationarity_check(wp, 0.4, 0, 21), InvalidArgument);
}

TEST_CASE("alignment is perfect for the closed form, padded or permuted") {
  const auto wp = synth::make_polytope_wp({3, 2}, 3);
  const auto direct = theory::alignment_score(wp.w_p.transpose(), wp);
  CHECK(direct.score == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(direct.unmatched_rows.empty());

  const auto padded_model = theory::closed_form_solution(wp, 8, {7, 0, 6, 1, 2, 5, 3, 4});
  const auto padded = theory::alignment_score(padded_model.w_m, wp);
  CHECK(padded.score == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(padded.unmatched_rows.size() == 3);
  for (int c = 0; c < 5; ++c) {
    CHECK(padded.similarity[c] == doctest::Approx(1.0).epsilon(1e-14));
  }
  // matched rows point back at the permuted positions of the original rows
  CHECK(padded.matched_row[0] == 1);
  CHECK(padded.matched_row[1] == 3);
}

TEST_CASE("alignment degrades smoothly under small perturbations") {
  const auto wp = synth::make_polytope_wp({4}, 3);
  Rng rng(77);
  Matrix noisy = wp.w_p.transpose();
  for (Eigen::Index i = 0; i < noisy.size(); ++i) noisy.data()[i] += 0.005 * rng.gaussian();
  const auto res = theory::alignment_score(noisy, wp);
  CHECK(res.score > 0.999);
  CHECK(res.score < 1.0);
}

TEST_CASE("alignment penalizes sign-flipped rows instead of matching them") {
  const auto wp = synth::digon_wp();
  Matrix flipped = wp.w_p.transpose();
  flipped.row(0) *= -1.0;
  const auto res = theory::alignment_score(flipped, wp);
  CHECK(res.score < 0.9);
}

TEST_CASE("alignment requires at least as many rows as features") {
  const auto wp = synth::trigon_wp();
  CHECK_THROWS_AS(theory::alignment_score(Matrix::Ones(2, 2), wp), DimensionMismatch);
  CHECK_THROWS_AS(theory::alignment_score(Matrix::Ones(3, 3), wp), DimensionMismatch);
}

}  // TEST_SUITE
