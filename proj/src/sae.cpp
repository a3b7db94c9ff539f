#include "saelab/sae.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "saelab/adam.hpp"
#include "saelab/binio.hpp"

namespace saelab::sae {

ActivationSpec ActivationSpec::topk(int k) {
  if (k < 1) throw InvalidArgument("topk needs k >= 1");
  ActivationSpec s;
  s.kind = ActivationKind::TopK;
  s.k = k;
  return s;
}

ActivationSpec ActivationSpec::jumprelu(double c) {
  if (!(c >= 0.0)) throw InvalidArgument("jumprelu needs threshold c >= 0");
  ActivationSpec s;
  s.kind = ActivationKind::JumpRelu;
  s.c = c;
  return s;
}

std::string ActivationSpec::name() const {
  switch (kind) {
    case ActivationKind::Relu:
      return "relu";
    case ActivationKind::TopK:
      return "topk(" + std::to_string(k) + ")";
    case ActivationKind::JumpRelu: {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "jumprelu(%.17g)", c);
      return buf;
    }
  }
  return "relu";
}

ActivationSpec parse_activation(const std::string& text) {
  if (text == "relu") return ActivationSpec::relu();
  auto param = [&](const std::string& prefix) -> std::string {
    // accept both "topk(4)" and "topk:4"
    if (text.rfind(prefix + "(", 0) == 0 && text.back() == ')') {
      return text.substr(prefix.size() + 1, text.size() - prefix.size() - 2);
    }
    if (text.rfind(prefix + ":", 0) == 0) return text.substr(prefix.size() + 1);
    return {};
  };
  try {
    if (const std::string p = param("topk"); !p.empty()) {
      return ActivationSpec::topk(std::stoi(p));
    }
    if (const std::string p = param("jumprelu"); !p.empty()) {
      return ActivationSpec::jumprelu(std::stod(p));
    }
  } catch (const std::exception&) {
    throw InvalidArgument("cannot parse activation parameter in: " + text);
  }
  throw InvalidArgument("unknown activation: " + text +
                        " (expected relu, topk(K), jumprelu(C))");
}

namespace {

void check_finite(const Vector& z) {
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (!std::isfinite(z(i))) {
      throw InvalidArgument("nonfinite activation input at index " + std::to_string(i));
    }
  }
}

// indices of the k largest entries, ties toward the lowest index
void topk_select(const Vector& z, int k, std::vector<int>& keep) {
  const int n = static_cast<int>(z.size());
  keep.resize(n);
  std::iota(keep.begin(), keep.end(), 0);
  std::stable_sort(keep.begin(), keep.end(),
                   [&](int a, int b) { return z(a) > z(b); });
  keep.resize(std::min(k, n));
}

}  // namespace

Vector activate(const ActivationSpec& spec, const Vector& z) {
  check_finite(z);
  switch (spec.kind) {
    case ActivationKind::Relu:
      return z.cwiseMax(0.0);
    case ActivationKind::JumpRelu:
      return (z.array() > spec.c).select(z, Vector::Zero(z.size()));
    case ActivationKind::TopK: {
      if (spec.k > z.size()) {
        throw InvalidArgument("topk k exceeds the latent dimension");
      }
      std::vector<int> keep;
      topk_select(z, spec.k, keep);
      Vector out = Vector::Zero(z.size());
      for (const int i : keep) out(i) = z(i);
      return out;
    }
  }
  return z;
}

Vector activation_mask(const ActivationSpec& spec, const Vector& z) {
  check_finite(z);
  switch (spec.kind) {
    case ActivationKind::Relu:
      return (z.array() > 0.0).cast<double>();
    case ActivationKind::JumpRelu:
      return (z.array() > spec.c).cast<double>();
    case ActivationKind::TopK: {
      if (spec.k > z.size()) {
        throw InvalidArgument("topk k exceeds the latent dimension");
      }
      std::vector<int> keep;
      topk_select(z, spec.k, keep);
      Vector out = Vector::Zero(z.size());
      for (const int i : keep) out(i) = 1.0;
      return out;
    }
  }
  return Vector::Ones(z.size());
}

Matrix activate_rows(const ActivationSpec& spec, const Matrix& z_rows) {
  if (spec.kind == ActivationKind::Relu) {
    if (!z_rows.allFinite()) throw InvalidArgument("nonfinite activation input");
    return z_rows.cwiseMax(0.0);
  }
  if (spec.kind == ActivationKind::JumpRelu) {
    if (!z_rows.allFinite()) throw InvalidArgument("nonfinite activation input");
    return (z_rows.array() > spec.c).select(z_rows, Matrix::Zero(z_rows.rows(), z_rows.cols()));
  }
  Matrix out(z_rows.rows(), z_rows.cols());
  for (Eigen::Index r = 0; r < z_rows.rows(); ++r) {
    out.row(r) = activate(spec, z_rows.row(r).transpose()).transpose();
  }
  return out;
}

Matrix activation_mask_rows(const ActivationSpec& spec, const Matrix& z_rows) {
  if (spec.kind == ActivationKind::Relu) {
    if (!z_rows.allFinite()) throw InvalidArgument("nonfinite activation input");
    return (z_rows.array() > 0.0).cast<double>();
  }
  if (spec.kind == ActivationKind::JumpRelu) {
    if (!z_rows.allFinite()) throw InvalidArgument("nonfinite activation input");
    return (z_rows.array() > spec.c).cast<double>();
  }
  Matrix out(z_rows.rows(), z_rows.cols());
  for (Eigen::Index r = 0; r < z_rows.rows(); ++r) {
    out.row(r) = activation_mask(spec, z_rows.row(r).transpose()).transpose();
  }
  return out;
}

namespace {

void check_model_input(const SaeModel& m, Eigen::Index dim, const char* what) {
  if (dim != m.n_p()) {
    throw DimensionMismatch(std::string(what) + ": input has " + std::to_string(dim) +
                            " dims, model expects " + std::to_string(m.n_p()));
  }
}

}  // namespace

Vector encode(const SaeModel& m, const Vector& x_p) {
  check_model_input(m, x_p.size(), "encode");
  return activate(m.activation, m.w_m * x_p);
}

Matrix encode_rows(const SaeModel& m, const Matrix& x_p_rows) {
  check_model_input(m, x_p_rows.cols(), "encode");
  return activate_rows(m.activation, x_p_rows * m.w_m.transpose());
}

Vector decode(const SaeModel& m, const Vector& latents) {
  if (latents.size() != m.n_m()) {
    throw DimensionMismatch("decode: latents have " + std::to_string(latents.size()) +
                            " dims, model expects " + std::to_string(m.n_m()));
  }
  return m.w_m.transpose() * latents;
}

Matrix decode_rows(const SaeModel& m, const Matrix& latents_rows) {
  if (latents_rows.cols() != m.n_m()) {
    throw DimensionMismatch("decode: latents have " + std::to_string(latents_rows.cols()) +
                            " dims, model expects " + std::to_string(m.n_m()));
  }
  return latents_rows * m.w_m;
}

Vector reconstruct(const SaeModel& m, const Vector& x_p) {
  return decode(m, encode(m, x_p));
}

Matrix reconstruct_rows(const SaeModel& m, const Matrix& x_p_rows) {
  return decode_rows(m, encode_rows(m, x_p_rows));
}

std::string weight_scheme_name(WeightScheme s) {
  switch (s) {
    case WeightScheme::Uniform:
      return "uniform";
    case WeightScheme::InputVariancePower:
      return "input-variance-power";
    case WeightScheme::ConsistencyPower:
      return "consistency-power";
    case WeightScheme::Explicit:
      return "explicit";
  }
  return "uniform";
}

WeightScheme parse_weight_scheme(const std::string& text) {
  if (text == "uniform") return WeightScheme::Uniform;
  if (text == "input-variance-power") return WeightScheme::InputVariancePower;
  if (text == "consistency-power") return WeightScheme::ConsistencyPower;
  if (text == "explicit") return WeightScheme::Explicit;
  throw InvalidArgument("unknown weight scheme: " + text);
}

GammaDiag GammaDiag::uniform(int n_p) {
  if (n_p <= 0) throw InvalidArgument("gamma needs a positive dimension");
  GammaDiag g;
  g.gammas = Vector::Ones(n_p);
  g.scheme = WeightScheme::Uniform;
  return g;
}

GammaDiag GammaDiag::normalized_mean1() const {
  GammaDiag g = *this;
  const double mean = gammas.mean();
  if (!(mean > 0.0)) throw InvalidArgument("gamma renormalization needs positive mean");
  g.gammas /= mean;
  return g;
}

GammaDiag compute_gamma(WeightScheme scheme, const Vector& stats, double alpha) {
  GammaDiag g;
  g.scheme = scheme;
  g.alpha = alpha;
  switch (scheme) {
    case WeightScheme::Uniform:
      if (stats.size() == 0) throw InvalidArgument("compute_gamma: empty statistics");
      g.gammas = Vector::Ones(stats.size());
      return g;
    case WeightScheme::Explicit:
      return explicit_gamma(stats);
    case WeightScheme::InputVariancePower:
    case WeightScheme::ConsistencyPower: {
      if (!(alpha > 0.0)) throw InvalidArgument("power scheme needs alpha > 0");
      if (stats.size() == 0) throw InvalidArgument("compute_gamma: empty statistics");
      g.gammas.resize(stats.size());
      for (Eigen::Index i = 0; i < stats.size(); ++i) {
        const double s = stats(i);
        if (!(s >= 0.0)) {
          throw InvalidArgument("compute_gamma: nonpositive statistic at index " +
                                std::to_string(i));
        }
        g.gammas(i) = std::pow(std::max(s, 1e-8), alpha);
      }
      return g;
    }
  }
  throw InvalidArgument("compute_gamma: unknown scheme");
}

GammaDiag explicit_gamma(const Vector& gammas) {
  if (gammas.size() == 0) throw InvalidArgument("explicit gamma cannot be empty");
  for (Eigen::Index i = 0; i < gammas.size(); ++i) {
    if (!(gammas(i) > 0.0) || !std::isfinite(gammas(i))) {
      throw InvalidArgument("explicit gamma must be strictly positive at index " +
                            std::to_string(i));
    }
  }
  GammaDiag g;
  g.gammas = gammas;
  g.scheme = WeightScheme::Explicit;
  return g;
}

namespace {

void check_gamma(const SaeModel& m, const GammaDiag& gamma) {
  if (gamma.dim() != m.n_p()) {
    throw DimensionMismatch("gamma has " + std::to_string(gamma.dim()) +
                            " dims, model expects " + std::to_string(m.n_p()));
  }
}

}  // namespace

double weighted_loss(const SaeModel& m, const Matrix& x_p_rows, const GammaDiag& gamma) {
  check_model_input(m, x_p_rows.cols(), "weighted_loss");
  check_gamma(m, gamma);
  if (x_p_rows.rows() == 0) throw InvalidArgument("weighted_loss: empty batch");
  const Matrix diff = reconstruct_rows(m, x_p_rows) - x_p_rows;
  const double loss =
      (diff * gamma.gammas.asDiagonal()).squaredNorm() / static_cast<double>(diff.rows());
  if (!std::isfinite(loss)) throw DivergenceError("weighted loss is not finite");
  return loss;
}

double weighted_loss(const SaeModel& m, const Vector& x_p, const GammaDiag& gamma) {
  return weighted_loss(m, Matrix(x_p.transpose()), gamma);
}

Matrix loss_gradient(const SaeModel& m, const Matrix& x_p_rows, const GammaDiag& gamma) {
  check_model_input(m, x_p_rows.cols(), "loss_gradient");
  check_gamma(m, gamma);
  const auto batch = static_cast<double>(x_p_rows.rows());
  if (x_p_rows.rows() == 0) return Matrix::Zero(m.n_m(), m.n_p());
  const Matrix z = x_p_rows * m.w_m.transpose();
  const Matrix h = activate_rows(m.activation, z);
  const Matrix mask = activation_mask_rows(m.activation, z);
  const Matrix diff = h * m.w_m - x_p_rows;
  const Matrix dg = diff * gamma.gammas.array().square().matrix().asDiagonal();
  return 2.0 / batch *
         (h.transpose() * dg +
          ((dg * m.w_m.transpose()).cwiseProduct(mask)).transpose() * x_p_rows);
}

SyntheticSource::SyntheticSource(synth::SuperpositionMatrix wp, double sparse_factor)
    : wp_(std::move(wp)), sparse_factor_(sparse_factor) {
  if (!(sparse_factor >= 0.0 && sparse_factor <= 1.0)) {
    throw InvalidArgument("sparse factor must lie in [0,1]");
  }
}

int SyntheticSource::n_p() const { return wp_.n_p(); }

Matrix SyntheticSource::batch(std::uint64_t mixed_seed, int rows) const {
  return synth::superpose_rows(
      wp_, synth::sample_ground_truth(wp_.n(), sparse_factor_, rows, mixed_seed).data);
}

MatrixSource::MatrixSource(Matrix rows) : rows_(std::move(rows)) {
  if (rows_.rows() == 0 || rows_.cols() == 0) {
    throw InvalidArgument("matrix source needs a nonempty matrix");
  }
}

int MatrixSource::n_p() const { return static_cast<int>(rows_.cols()); }

Matrix MatrixSource::batch(std::uint64_t mixed_seed, int rows) const {
  if (rows <= 0) throw InvalidArgument("batch size must be positive");
  const auto total = rows_.rows();
  Matrix out(rows, rows_.cols());
  auto at = static_cast<Eigen::Index>(mixed_seed % static_cast<std::uint64_t>(total));
  for (Eigen::Index r = 0; r < rows; ++r) {
    out.row(r) = rows_.row(at);
    at = (at + 1) % total;
  }
  return out;
}

Vector input_variance_stats(const BatchSource& source, std::uint64_t seed, int rows) {
  if (rows < 2) throw InvalidArgument("variance statistics need at least 2 rows");
  const Matrix b = source.batch(seed, rows);
  const Matrix centered = b.rowwise() - b.colwise().mean();
  return centered.array().square().colwise().sum().transpose() /
         static_cast<double>(b.rows() - 1);
}

namespace {

// stream ids for per-purpose seed derivation inside training
constexpr std::uint64_t kDataStream = 1;
constexpr std::uint64_t kInitStream = 2;
constexpr std::uint64_t kEvalStream = 3;
constexpr std::uint64_t kStatsStream = 4;

Matrix initial_w(const InitSpec& init, int n_m, int n_p, std::uint64_t init_seed) {
  if (init.kind == InitSpec::Kind::TransposeOracle) {
    if (init.oracle.size() == 0) {
      throw InvalidArgument("transpose-oracle init needs an oracle matrix");
    }
    if (init.oracle.rows() != n_p) {
      throw DimensionMismatch("oracle has " + std::to_string(init.oracle.rows()) +
                              " rows, expected n_p = " + std::to_string(n_p));
    }
    if (init.oracle.cols() > n_m) {
      throw DimensionMismatch("oracle needs n_m >= " + std::to_string(init.oracle.cols()));
    }
    Matrix w = Matrix::Zero(n_m, n_p);
    w.topRows(init.oracle.cols()) = init.oracle.transpose();
    return w;
  }
  const double stddev =
      init.stddev < 0.0 ? 0.1 / std::sqrt(static_cast<double>(n_p)) : init.stddev;
  Rng rng(init_seed);
  Matrix w(n_m, n_p);
  for (int r = 0; r < n_m; ++r) {
    for (int c = 0; c < n_p; ++c) w(r, c) = stddev * rng.gaussian();
  }
  return w;
}

}  // namespace

TrainReport train_sae(const BatchSource& source, int n_m, const ActivationSpec& activation,
                      const GammaDiag& gamma, const SaeTrainConfig& cfg) {
  if (n_m <= 0) throw InvalidArgument("train_sae: n_m must be positive");
  if (cfg.steps <= 0 || cfg.batch_size <= 0 || cfg.learning_rate <= 0.0) {
    throw InvalidArgument("train_sae: steps, batch size, learning rate must be positive");
  }
  if (activation.kind == ActivationKind::TopK && activation.k > n_m) {
    throw InvalidArgument("train_sae: topk k exceeds n_m");
  }
  const int n_p = source.n_p();
  if (gamma.dim() != n_p) {
    throw DimensionMismatch("train_sae: gamma dims do not match the data source");
  }
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t data_seed = derive_seed(cfg.seed, kDataStream);
  const std::uint64_t init_seed = derive_seed(cfg.seed, kInitStream);
  const std::uint64_t eval_seed = derive_seed(cfg.seed, kEvalStream);

  GammaDiag used = gamma;
  if (gamma.scheme == WeightScheme::InputVariancePower ||
      gamma.scheme == WeightScheme::ConsistencyPower) {
    used = gamma.normalized_mean1();
  }

  TrainReport report;
  report.seed = cfg.seed;
  report.gamma = used;
  report.model.activation = activation;
  report.model.w_m = initial_w(cfg.init, n_m, n_p, init_seed);

  AdamConfig acfg;
  acfg.learning_rate = cfg.learning_rate;
  Adam opt(n_m, n_p, acfg);

  // initial and final losses share one held-out batch so descent can be
  // judged on the same data; the curve tracks per-step training batches
  const Matrix eval = source.batch(derive_seed(eval_seed, 0), cfg.eval_batch);
  report.initial_loss = weighted_loss(report.model, eval, used);

  for (int step = 0; step < cfg.steps; ++step) {
    const Matrix batch = source.batch(derive_seed(data_seed, step), cfg.batch_size);
    const double loss = weighted_loss(report.model, batch, used);
    if (!std::isfinite(loss)) {
      throw DivergenceError("sae training diverged at step " + std::to_string(step));
    }
    if (cfg.eval_every > 0 && step % cfg.eval_every == 0) {
      report.loss_curve.emplace_back(step, loss);
    }
    const Matrix grad = loss_gradient(report.model, batch, used);
    opt.step(report.model.w_m, grad);
  }
  report.final_loss = weighted_loss(report.model, eval, used);
  report.loss_curve.emplace_back(cfg.steps, report.final_loss);
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

TrainReport train_sae(const BatchSource& source, int n_m, const ActivationSpec& activation,
                      const GammaPlan& plan, const SaeTrainConfig& cfg) {
  const int n_p = source.n_p();
  switch (plan.scheme) {
    case WeightScheme::Uniform:
      return train_sae(source, n_m, activation, GammaDiag::uniform(n_p), cfg);
    case WeightScheme::InputVariancePower: {
      Vector stats;
      if (plan.stats_from_reconstruction) {
        // phase 1 with uniform weights, then reweight by the variance of
        // that model's reconstructions and retrain from the same init
        const TrainReport phase1 =
            train_sae(source, n_m, activation, GammaDiag::uniform(n_p), cfg);
        const Matrix probe =
            source.batch(derive_seed(derive_seed(cfg.seed, kStatsStream), 0), plan.stats_batch);
        const Matrix recon = reconstruct_rows(phase1.model, probe);
        const Matrix centered = recon.rowwise() - recon.colwise().mean();
        stats = centered.array().square().colwise().sum().transpose() /
                static_cast<double>(recon.rows() - 1);
      } else {
        stats = input_variance_stats(source, derive_seed(derive_seed(cfg.seed, kStatsStream), 0),
                                     plan.stats_batch);
      }
      GammaDiag g = compute_gamma(WeightScheme::InputVariancePower, stats, plan.alpha);
      return train_sae(source, n_m, activation, g, cfg);
    }
    case WeightScheme::ConsistencyPower:
      throw InvalidArgument(
          "consistency statistics need labeled data; compute them with "
          "semantic_consistency and pass an explicit gamma");
    case WeightScheme::Explicit:
      throw InvalidArgument("explicit scheme needs a concrete gamma vector");
  }
  throw InvalidArgument("train_sae: unknown weight scheme");
}

void save_model(const std::string& path, const SaeModel& m, const GammaDiag& gamma) {
  check_gamma(m, gamma);
  binio::Writer w;
  w.magic("SAEW");
  w.u32(1);
  w.u64(static_cast<std::uint64_t>(m.n_m()));
  w.u64(static_cast<std::uint64_t>(m.n_p()));
  w.u8(static_cast<std::uint8_t>(m.activation.kind));
  w.f64(m.activation.kind == ActivationKind::TopK ? static_cast<double>(m.activation.k)
                                                  : m.activation.c);
  for (int r = 0; r < m.n_m(); ++r) {
    for (int c = 0; c < m.n_p(); ++c) w.f64(m.w_m(r, c));
  }
  w.u64(static_cast<std::uint64_t>(gamma.dim()));
  for (int i = 0; i < gamma.dim(); ++i) w.f64(gamma.gammas(i));
  w.commit(path);
}

std::pair<SaeModel, GammaDiag> load_model(const std::string& path) {
  binio::Reader r(path);
  r.expect_magic("SAEW");
  const std::uint32_t version = r.u32();
  if (version != 1) {
    throw FormatError("unsupported model version " + std::to_string(version) + " in " + path);
  }
  const std::uint64_t n_m = r.u64();
  const std::uint64_t n_p = r.u64();
  if (n_m == 0 || n_p == 0 || n_m > (1u << 24) || n_p > (1u << 24)) {
    throw FormatError("implausible model dimensions in " + path);
  }
  const std::uint8_t tag = r.u8();
  const double param = r.f64();
  SaeModel m;
  switch (tag) {
    case 0:
      m.activation = ActivationSpec::relu();
      break;
    case 1:
      m.activation = ActivationSpec::topk(static_cast<int>(param));
      break;
    case 2:
      m.activation = ActivationSpec::jumprelu(param);
      break;
    default:
      throw FormatError("unknown activation tag in " + path);
  }
  m.w_m.resize(static_cast<Eigen::Index>(n_m), static_cast<Eigen::Index>(n_p));
  for (Eigen::Index i = 0; i < m.w_m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.w_m.cols(); ++j) {
      const double v = r.f64();
      if (!std::isfinite(v)) {
        throw FormatError("nonfinite weight at (" + std::to_string(i) + "," +
                          std::to_string(j) + ") in " + path);
      }
      m.w_m(i, j) = v;
    }
  }
  const std::uint64_t gdim = r.u64();
  if (gdim != n_p) throw FormatError("gamma dimension does not match n_p in " + path);
  Vector g(static_cast<Eigen::Index>(gdim));
  for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = r.f64();
  return {std::move(m), explicit_gamma(g)};
}

}  // namespace saelab::sae
