#include "saelab/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>

#include "saelab/metrics.hpp"
#include "saelab/sae.hpp"
#include "saelab/synth.hpp"
#include "saelab/theory.hpp"

namespace saelab::verify {

namespace {

constexpr double kExampleTol = 1e-12;
constexpr double kGapTol = 1e-10;
constexpr double kPaddingTol = 1e-12;
constexpr double kStationaritySigmas = 4.0;
constexpr double kAlignmentTol = 1e-12;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

CheckResult check_example1(const VerifyOptions&) {
  CheckResult r;
  r.name = "example1";
  r.ops_used = {"recovery_check"};
  r.threshold = kExampleTol;
  const synth::SuperpositionMatrix wp = synth::digon_wp();
  const Vector x = synth::digon_demo_input();

  Vector expect_xp(2);
  expect_xp << 0.5, 0.2;
  const double xp_err = (synth::superpose(wp, x) - expect_xp).cwiseAbs().maxCoeff();

  const theory::RecoveryReport rep = theory::recovery_check(wp, x, sae::ActivationSpec::relu(), 1e-9);
  Vector expect_xm(3);
  expect_xm << 0.5, 0.2, 0.0;
  const double xm_err = (rep.x_m - expect_xm).cwiseAbs().maxCoeff();

  r.statistic = std::max(xp_err, xm_err);
  const bool structure = !rep.recovered && rep.shrunk_dims == std::vector<int>{1, 2} &&
                         rep.vanished_dims == std::vector<int>{2} && !rep.argmax_preserved;
  r.pass = structure && r.statistic < r.threshold;
  r.detail = structure ? "shrunk={1,2} vanished={2} argmax flip detected"
                       : "recovery structure mismatch";
  return r;
}

CheckResult check_example2(const VerifyOptions&) {
  CheckResult r;
  r.name = "example2";
  r.ops_used = {"recovery_check"};
  r.threshold = kExampleTol;
  const synth::SuperpositionMatrix wp = synth::trigon_wp();
  const Vector x = synth::trigon_demo_input();

  Vector expect_xp(2);
  expect_xp << 0.1 * std::sqrt(3.0), 0.3;
  const double xp_err = (synth::superpose(wp, x) - expect_xp).cwiseAbs().maxCoeff();

  const theory::RecoveryReport rep = theory::recovery_check(wp, x, sae::ActivationSpec::relu(), 1e-9);
  Vector expect_xm(3);
  expect_xm << 0.3, 0.0, 0.0;
  const double xm_err = (rep.x_m - expect_xm).cwiseAbs().maxCoeff();

  r.statistic = std::max(xp_err, xm_err);
  const bool structure = !rep.recovered && rep.vanished_dims == std::vector<int>{1, 2};
  r.pass = structure && r.statistic < r.threshold;
  r.detail = structure ? "vanished={1,2} (feature vanishing)" : "recovery structure mismatch";
  return r;
}

CheckResult check_closed_form_padding(const VerifyOptions& opt) {
  CheckResult r;
  r.name = "closed_form_padding";
  r.ops_used = {"closed_form_solution"};
  r.threshold = kPaddingTol;
  const synth::SuperpositionMatrix wp = synth::trigon_wp();
  const sae::SaeModel exact = theory::closed_form_solution(wp, wp.n());
  const sae::SaeModel padded = theory::closed_form_solution(wp, wp.n() + 2);

  double stat = 0.0;
  stat = std::max(stat, (exact.w_m - wp.w_p.transpose()).cwiseAbs().maxCoeff());
  stat = std::max(stat, padded.w_m.bottomRows(2).cwiseAbs().maxCoeff());

  const Matrix x =
      synth::sample_ground_truth(wp.n(), 0.4, 64, derive_seed(opt.seed, 11)).data;
  const Matrix x_p = synth::superpose_rows(wp, x);
  const sae::GammaDiag gamma = sae::GammaDiag::uniform(wp.n_p());
  stat = std::max(stat, std::abs(sae::weighted_loss(exact, x_p, gamma) -
                                 sae::weighted_loss(padded, x_p, gamma)));
  r.statistic = stat;
  r.pass = stat < r.threshold;
  r.detail = "zero-row padding leaves the loss unchanged";
  return r;
}

synth::SuperpositionMatrix random_blocks(Rng& rng) {
  const int nblocks = 1 + static_cast<int>(rng.next_u64() % 3);
  std::vector<int> spec;
  int dims = 0;
  for (int b = 0; b < nblocks; ++b) {
    const int p = 1 + static_cast<int>(rng.next_u64() % 5);
    spec.push_back(p);
    dims += (p == 1) ? 1 : p - 1;
  }
  return synth::make_polytope_wp(spec, dims);
}

CheckResult gap_check(const VerifyOptions& opt, const std::string& name, bool random_gamma) {
  CheckResult r;
  r.name = name;
  r.ops_used = {"gap_identity", "interference_matrix"};
  r.threshold = kGapTol;
  const bool fault = opt.inject_fault == name;
  const double sparse_grid[] = {0.0, 0.5, 0.9};
  Rng rng(derive_seed(opt.seed, random_gamma ? 23 : 22));
  double worst = 0.0;
  for (int t = 0; t < opt.gap_trials; ++t) {
    const synth::SuperpositionMatrix wp = random_blocks(rng);
    const double s = sparse_grid[t % 3];
    const Vector x =
        synth::sample_ground_truth(wp.n(), s, 1, rng.next_u64()).data.row(0).transpose();
    sae::GammaDiag gamma = sae::GammaDiag::uniform(wp.n_p());
    if (random_gamma) {
      Vector g(wp.n_p());
      for (int i = 0; i < wp.n_p(); ++i) g(i) = 2.0 * rng.open_unit();
      gamma = sae::explicit_gamma(g);
    }
    theory::GapCheck gap = theory::gap_identity(wp, x, gamma);
    if (fault) {
      // deliberately wrong sign on the quadratic form, exercising the
      // failure path end to end
      gap.abs_diff = std::abs(gap.lhs + gap.rhs);
      if (gap.rhs == 0.0) gap.abs_diff = 1.0;
    }
    worst = std::max(worst, gap.abs_diff);
  }
  r.statistic = worst;
  r.pass = worst < r.threshold;
  r.detail = std::to_string(opt.gap_trials) + " random trials, " +
             (random_gamma ? "gamma in (0,2]" : "uniform gamma");
  return r;
}

CheckResult check_extreme_sparsity(const VerifyOptions&) {
  CheckResult r;
  r.name = "extreme_sparsity";
  r.ops_used = {"recovery_check", "closed_form_solution"};
  r.threshold = kPaddingTol;
  const std::vector<synth::SuperpositionMatrix> fixtures = {
      synth::digon_wp(), synth::trigon_wp(), synth::make_polytope_wp({5}, 4),
      synth::make_polytope_wp({1, 2, 3}, 4), synth::make_polytope_wp({1, 1}, 2)};
  double exact_err = 0.0;
  double loss_stat = 0.0;
  for (const auto& wp : fixtures) {
    const int n = wp.n();
    Matrix one_hots(2 * n, n);
    int row = 0;
    for (int i = 0; i < n; ++i) {
      for (const double c : {0.3, 1.0}) {
        Vector x = Vector::Zero(n);
        x(i) = c;
        const theory::RecoveryReport rep =
            theory::recovery_check(wp, x, sae::ActivationSpec::relu(), 1e-9);
        exact_err = std::max(exact_err, rep.per_dim_error.maxCoeff());
        one_hots.row(row++) = x.transpose();
      }
    }
    const sae::SaeModel model = theory::closed_form_solution(wp, n);
    loss_stat = std::max(loss_stat,
                         sae::weighted_loss(model, synth::superpose_rows(wp, one_hots),
                                            sae::GammaDiag::uniform(wp.n_p())));
  }
  r.statistic = std::max(exact_err, loss_stat);
  r.pass = exact_err == 0.0 && loss_stat < r.threshold;
  r.detail = "one-hot recovery exact, closed-form loss " + fmt(loss_stat);
  return r;
}

CheckResult stationarity(const VerifyOptions& opt, const std::string& name,
                         const synth::SuperpositionMatrix& wp, double s) {
  CheckResult r;
  r.name = name;
  r.ops_used = {"stationarity_check"};
  r.threshold = kStationaritySigmas;
  const theory::StationarityResult res =
      theory::stationarity_check(wp, s, opt.stationarity_samples, derive_seed(opt.seed, 31));
  r.statistic = res.max_sigmas;
  r.pass = res.passed;
  r.detail = std::to_string(res.samples) + " samples at S=" + fmt(s);
  return r;
}

CheckResult check_alignment(const VerifyOptions& opt) {
  CheckResult r;
  r.name = "alignment_invariance";
  r.ops_used = {"alignment_score", "closed_form_solution"};
  r.threshold = kAlignmentTol;
  const synth::SuperpositionMatrix wp = synth::trigon_wp();
  const int n = wp.n();

  double stat = 0.0;
  const Matrix ident = theory::closed_form_solution(wp, n).w_m;
  stat = std::max(stat, std::abs(1.0 - theory::alignment_score(ident, wp).score));

  // permuted rows plus two zero rows must still match perfectly
  std::vector<int> perm = {3, 0, 4, 1, 2};
  const Matrix padded = theory::closed_form_solution(wp, n + 2, perm).w_m;
  stat = std::max(stat, std::abs(1.0 - theory::alignment_score(padded, wp).score));
  r.statistic = stat;

  Rng rng(derive_seed(opt.seed, 41));
  Matrix noisy = ident;
  for (Eigen::Index i = 0; i < noisy.rows(); ++i) {
    for (Eigen::Index j = 0; j < noisy.cols(); ++j) noisy(i, j) += 0.01 * rng.gaussian();
  }
  const double noisy_score = theory::alignment_score(noisy, wp).score;

  r.pass = stat < r.threshold && noisy_score > 0.999;
  r.detail = "perturbed score " + fmt(noisy_score);
  return r;
}

CheckResult check_interference(const VerifyOptions&) {
  CheckResult r;
  r.name = "interference_example";
  r.ops_used = {"interference_matrix"};
  r.threshold = kExampleTol;
  const synth::SuperpositionMatrix wp = synth::digon_wp();

  Matrix expect(3, 3);
  expect << 0, 0, 0,
            0, 0, -1,
            0, -1, 0;
  const Matrix uniform = theory::interference_matrix(wp, sae::GammaDiag::uniform(2));
  double stat = (uniform - expect).cwiseAbs().maxCoeff();

  Vector g(2);
  g << 1.0, 0.5;
  const Matrix weighted = theory::interference_matrix(wp, sae::explicit_gamma(g));
  stat = std::max(stat, std::abs(weighted(1, 1) - (-0.75)));
  stat = std::max(stat, std::abs(weighted(1, 2) - (-0.25)));

  r.statistic = stat;
  r.pass = stat < r.threshold;
  r.detail = "digon interference entries match direct arithmetic";
  return r;
}

using Runner = std::function<CheckResult(const VerifyOptions&)>;

const std::vector<std::pair<std::string, Runner>>& registry() {
  static const std::vector<std::pair<std::string, Runner>> reg = {
      {"example1", check_example1},
      {"example2", check_example2},
      {"closed_form_padding", check_closed_form_padding},
      {"gap_identity", [](const VerifyOptions& o) { return gap_check(o, "gap_identity", false); }},
      {"gap_identity_weighted",
       [](const VerifyOptions& o) { return gap_check(o, "gap_identity_weighted", true); }},
      {"extreme_sparsity", check_extreme_sparsity},
      {"stationarity_digon",
       [](const VerifyOptions& o) {
         return stationarity(o, "stationarity_digon", synth::digon_wp(), 0.5);
       }},
      {"stationarity_pentagon",
       [](const VerifyOptions& o) {
         return stationarity(o, "stationarity_pentagon", synth::make_polytope_wp({5}, 4), 0.3);
       }},
      {"alignment_invariance", check_alignment},
      {"interference_example", check_interference},
  };
  return reg;
}

}  // namespace

const std::vector<std::string>& check_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, fn] : registry()) out.push_back(name);
    return out;
  }();
  return names;
}

const std::vector<std::string>& theory_operation_names() {
  static const std::vector<std::string> ops = {
      "closed_form_solution", "recovery_check",     "gap_identity",
      "interference_matrix",  "stationarity_check", "alignment_score"};
  return ops;
}

std::vector<CheckResult> run_checks(const VerifyOptions& opt) {
  for (const std::string& want : opt.only) {
    const auto& names = check_names();
    if (std::find(names.begin(), names.end(), want) == names.end()) {
      std::string known;
      for (const auto& n : names) known += n + " ";
      throw InvalidArgument("unknown check \"" + want + "\"; available: " + known);
    }
  }
  std::vector<CheckResult> results;
  for (const auto& [name, fn] : registry()) {
    if (!opt.only.empty() &&
        std::find(opt.only.begin(), opt.only.end(), name) == opt.only.end()) {
      continue;
    }
    CheckResult r = fn(opt);
    if (opt.inject_fault == r.name && r.pass) {
      r.pass = false;
      r.detail += " [fault injected]";
    }
    results.push_back(std::move(r));
  }
  return results;
}

bool coverage_complete(const std::vector<CheckResult>& results) {
  std::set<std::string> used;
  for (const CheckResult& r : results) {
    used.insert(r.ops_used.begin(), r.ops_used.end());
  }
  for (const std::string& op : theory_operation_names()) {
    if (used.count(op) == 0) return false;
  }
  return true;
}

}  // namespace saelab::verify
