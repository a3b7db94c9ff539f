#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "saelab/binio.hpp"
#include "saelab/ingest.hpp"
#include "saelab/metrics.hpp"
#include "saelab/sae.hpp"
#include "saelab/svg.hpp"
#include "saelab/synth.hpp"
#include "saelab/theory.hpp"
#include "saelab/verify.hpp"

namespace fs = std::filesystem;
using namespace saelab;

namespace {

// exit codes: 0 ok, 1 failed check or diverged run, 2 usage, 3 I/O
constexpr int kExitOk = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

std::vector<int> parse_blocks(const std::string& csv) {
  std::vector<int> blocks;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      blocks.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw InvalidArgument("cannot parse block size: " + item);
    }
  }
  if (blocks.empty()) throw InvalidArgument("empty block spec");
  return blocks;
}

std::vector<double> parse_doubles(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw InvalidArgument("cannot parse number: " + item);
    }
  }
  if (out.empty()) throw InvalidArgument("empty number list");
  return out;
}

int blocks_embedding_dims(const std::vector<int>& blocks) {
  int dims = 0;
  for (const int p : blocks) dims += (p == 1) ? 1 : p - 1;
  return dims;
}

void write_text_atomic(const std::string& path, const std::string& text) {
  binio::Writer w;
  w.bytes(text.data(), text.size());
  w.commit(path);
}

void write_curve_csv(const std::string& path,
                     const std::vector<std::pair<int, double>>& curve) {
  std::ostringstream out;
  out << "step,loss\n";
  for (const auto& [step, loss] : curve) {
    out << step << ',' << ingest::format_double(loss) << '\n';
  }
  write_text_atomic(path, out.str());
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

// options shared by every subcommand that needs a superposition map
struct WpOptions {
  std::string blocks;
  std::string wp_file;
  bool learned = false;
  int n = 200;
  int n_p = 20;
  int toy_steps = 3000;
  int toy_batch = 256;
  double toy_lr = 1e-2;
  bool toy_no_bias = false;
};

void add_wp_options(CLI::App* cmd, WpOptions& o, bool with_learned) {
  cmd->add_option("--blocks", o.blocks,
                  "analytic block spec, comma separated polygon sizes (e.g. 1,2,3)");
  cmd->add_option("--wp-file", o.wp_file, "read the superposition matrix from a SAED dump");
  if (with_learned) {
    cmd->add_flag("--learned", o.learned,
                  "learn the superposition matrix with the toy reconstruction model");
    cmd->add_option("--n", o.n, "ground-truth feature count for --learned");
    cmd->add_option("--np", o.n_p, "superposed dimension count for --learned");
    cmd->add_option("--toy-steps", o.toy_steps, "toy model training steps");
    cmd->add_option("--toy-batch-size", o.toy_batch, "toy model batch size");
    cmd->add_option("--toy-lr", o.toy_lr, "toy model learning rate");
    cmd->add_flag("--toy-no-bias", o.toy_no_bias, "train the toy model without bias");
  }
}

synth::SuperpositionMatrix resolve_wp(const WpOptions& o, double sparse_factor,
                                      std::uint64_t seed) {
  const int sources = (!o.blocks.empty() ? 1 : 0) + (!o.wp_file.empty() ? 1 : 0) +
                      (o.learned ? 1 : 0);
  if (sources != 1) {
    throw InvalidArgument("choose exactly one of --blocks, --wp-file, --learned");
  }
  if (!o.blocks.empty()) {
    const std::vector<int> blocks = parse_blocks(o.blocks);
    return synth::make_polytope_wp(blocks, blocks_embedding_dims(blocks));
  }
  if (!o.wp_file.empty()) {
    synth::SuperpositionMatrix wp;
    wp.w_p = ingest::read_activation_dump(o.wp_file).data;
    wp.geometry = synth::Geometry::Loaded;
    return wp;
  }
  synth::ToyTrainConfig cfg;
  cfg.steps = o.toy_steps;
  cfg.batch_size = o.toy_batch;
  cfg.learning_rate = o.toy_lr;
  cfg.use_bias = !o.toy_no_bias;
  cfg.seed = seed;
  return synth::train_toy_superposition(o.n, o.n_p, sparse_factor, cfg).wp;
}

int run_gen(const WpOptions& wp_opts, const std::string& fixture, double s, int batch,
            std::uint64_t seed, const std::string& out, const std::string& tag) {
  ensure_out_dir(out);
  const fs::path dir(out);
  if (!fixture.empty()) {
    synth::SuperpositionMatrix wp;
    Vector x;
    if (fixture == "digon") {
      wp = synth::digon_wp();
      x = synth::digon_demo_input();
    } else if (fixture == "trigon") {
      wp = synth::trigon_wp();
      x = synth::trigon_demo_input();
    } else {
      throw InvalidArgument("unknown fixture: " + fixture + " (digon or trigon)");
    }
    const Vector x_p = synth::superpose(wp, x);
    ingest::write_activation_dump((dir / "x.saed").string(), x.transpose(), "x");
    ingest::write_activation_dump((dir / "xp.saed").string(), x_p.transpose(), "x_p");
    ingest::write_activation_dump((dir / "wp.saed").string(), wp.w_p, "w_p");
    std::cout << "wrote fixture " << fixture << " to " << out << "\n";
    return kExitOk;
  }
  const synth::SuperpositionMatrix wp = resolve_wp(wp_opts, s, seed);
  const Matrix x = synth::sample_ground_truth(wp.n(), s, batch, seed).data;
  const Matrix x_p = synth::superpose_rows(wp, x);
  ingest::write_activation_dump((dir / "x.saed").string(), x, tag.empty() ? "x" : tag);
  ingest::write_activation_dump((dir / "xp.saed").string(), x_p,
                                tag.empty() ? "x_p" : tag);
  ingest::write_activation_dump((dir / "wp.saed").string(), wp.w_p, "w_p");
  std::cout << "wrote " << batch << "x" << wp.n() << " ground truth and " << batch << "x"
            << wp.n_p() << " superposed dumps to " << out << "\n";
  return kExitOk;
}

int run_train_toy(int n, int n_p, double s, const synth::ToyTrainConfig& cfg,
                  const std::string& out) {
  ensure_out_dir(out);
  const synth::ToyTrainReport report = synth::train_toy_superposition(n, n_p, s, cfg);
  const fs::path dir(out);
  ingest::write_activation_dump((dir / "wp.saed").string(), report.wp.w_p, "w_p learned");
  ingest::write_activation_dump((dir / "toy_bias.saed").string(), report.bias.transpose(),
                                "toy bias");
  write_curve_csv((dir / "toy_curve.csv").string(), report.loss_curve);
  std::cout << "toy model trained: initial loss " << ingest::format_double(report.initial_loss)
            << ", final loss " << ingest::format_double(report.final_loss) << "\n"
            << "wrote wp.saed, toy_bias.saed, toy_curve.csv to " << out << "\n";
  return kExitOk;
}

struct TrainSaeOptions {
  bool synthetic = false;
  std::string dump;
  double s = 0.9;
  int n_m = 0;
  std::string activation = "relu";
  std::string scheme = "uniform";
  double alpha = 1.0;
  std::string gamma_csv;
  std::string labels;
  int top_m = 16;
  bool latent_stats = false;
  sae::SaeTrainConfig cfg;
  std::string init = "gaussian";
  double init_std = -1.0;
  std::string out;
};

int run_train_sae(const WpOptions& wp_opts, const TrainSaeOptions& o) {
  ensure_out_dir(o.out);
  std::optional<synth::SuperpositionMatrix> wp;
  std::unique_ptr<sae::BatchSource> source;
  Matrix dump_rows;
  if (o.synthetic == !o.dump.empty()) {
    throw InvalidArgument("choose exactly one input: --synthetic or --dump FILE");
  }
  if (o.synthetic) {
    wp = resolve_wp(wp_opts, o.s, derive_seed(o.cfg.seed, 101));
    source = std::make_unique<sae::SyntheticSource>(*wp, o.s);
  } else {
    dump_rows = ingest::read_activation_dump(o.dump).data;
    source = std::make_unique<sae::MatrixSource>(dump_rows);
  }
  const int n_p = source->n_p();
  const int n_m = o.n_m > 0 ? o.n_m : (wp ? wp->n() : n_p);

  sae::SaeTrainConfig cfg = o.cfg;
  if (o.init == "oracle") {
    if (!wp) throw InvalidArgument("transpose-oracle init needs a synthetic W_p source");
    cfg.init.kind = sae::InitSpec::Kind::TransposeOracle;
    cfg.init.oracle = wp->w_p;
  } else if (o.init == "gaussian") {
    cfg.init.kind = sae::InitSpec::Kind::ScaledGaussian;
    cfg.init.stddev = o.init_std;
  } else {
    throw InvalidArgument("unknown init: " + o.init + " (gaussian or oracle)");
  }

  const sae::ActivationSpec act = sae::parse_activation(o.activation);
  const sae::WeightScheme scheme = sae::parse_weight_scheme(o.scheme);

  sae::TrainReport report;
  if (scheme == sae::WeightScheme::Explicit) {
    if (o.gamma_csv.empty()) throw InvalidArgument("explicit scheme needs --gamma CSV");
    const std::vector<double> vals = parse_doubles(o.gamma_csv);
    Vector g(static_cast<Eigen::Index>(vals.size()));
    for (std::size_t i = 0; i < vals.size(); ++i) g(static_cast<Eigen::Index>(i)) = vals[i];
    report = sae::train_sae(*source, n_m, act, sae::explicit_gamma(g), cfg);
  } else if (scheme == sae::WeightScheme::ConsistencyPower) {
    if (o.dump.empty() || o.labels.empty()) {
      throw InvalidArgument("consistency-power needs --dump and --labels");
    }
    const ingest::LabelFile lf = ingest::read_labels(o.labels);
    if (static_cast<Eigen::Index>(lf.labels.size()) != dump_rows.rows()) {
      throw DimensionMismatch("label count does not match dump rows");
    }
    const Vector beta = metrics::semantic_consistency(dump_rows, lf.labels, o.top_m);
    report = sae::train_sae(*source, n_m, act,
                            sae::compute_gamma(sae::WeightScheme::ConsistencyPower, beta, o.alpha),
                            cfg);
  } else {
    sae::GammaPlan plan;
    plan.scheme = scheme;
    plan.alpha = o.alpha;
    plan.stats_from_reconstruction = o.latent_stats;
    report = sae::train_sae(*source, n_m, act, plan, cfg);
  }

  const fs::path dir(o.out);
  sae::save_model((dir / "model.saew").string(), report.model, report.gamma);
  write_curve_csv((dir / "train_curve.csv").string(), report.loss_curve);
  std::cout << "trained " << act.name() << " model " << n_m << "x" << n_p << ": initial loss "
            << ingest::format_double(report.initial_loss) << ", final loss "
            << ingest::format_double(report.final_loss) << "\n";
  if (wp && n_m >= wp->n()) {
    const theory::AlignmentResult align = theory::alignment_score(report.model.w_m, *wp);
    std::cout << "alignment to ground-truth directions: "
              << ingest::format_double(align.score) << "\n";
  }
  std::cout << "wrote model.saew, train_curve.csv to " << o.out << "\n";
  return kExitOk;
}

struct SweepOptions {
  std::string grid;
  int n_m = 0;
  std::string activation = "relu";
  double alpha = 1.0;
  sae::SaeTrainConfig cfg;
  int metric_batch = 4096;
  bool latent_stats = false;
  std::string out;
  bool plot = false;
};

metrics::SweepMetrics evaluate_point(const sae::TrainReport& report,
                                     const synth::SuperpositionMatrix& wp, double s,
                                     std::uint64_t point_seed, int metric_batch) {
  const Matrix x_eval =
      synth::sample_ground_truth(wp.n(), s, metric_batch, derive_seed(point_seed, 202)).data;
  const Matrix xp_eval = synth::superpose_rows(wp, x_eval);
  metrics::SweepMetrics m;
  m.sparse_factor = s;
  m.l_gt = metrics::ground_truth_loss(report.model, wp, x_eval, false);
  m.l_gt_nonsparse = metrics::ground_truth_loss(report.model, wp, x_eval, true);
  m.l_poly = sae::weighted_loss(report.model, xp_eval,
                                sae::GammaDiag::uniform(report.model.n_p()));
  m.l_weighted = sae::weighted_loss(report.model, xp_eval, report.gamma);
  m.mean_dim_variance = metrics::per_dim_variance(sae::encode_rows(report.model, xp_eval)).mean();
  const metrics::ActivatedFeatures aaf =
      metrics::avg_activated_features(report.model, wp, x_eval, -1.0);
  m.avg_activated_features = aaf.mean;
  m.dead_latents = aaf.dead_latents;
  return m;
}

int run_sweep(const WpOptions& wp_opts, const SweepOptions& o) {
  ensure_out_dir(o.out);
  const std::vector<double> grid =
      o.grid.empty() ? std::vector<double>{0.0, 0.2, 0.4, 0.6, 0.8, 0.9, 0.95, 0.99, 0.999}
                     : parse_doubles(o.grid);
  for (const double s : grid) {
    if (!(s >= 0.0 && s <= 1.0)) throw InvalidArgument("sweep grid values must lie in [0,1]");
  }
  const sae::ActivationSpec act = sae::parse_activation(o.activation);
  const int workers =
      std::max(1, std::min<int>(thread_cap(), static_cast<int>(grid.size())));

  struct PointRows {
    std::vector<ingest::RunRecord> rows;
    std::string error;
  };
  std::vector<PointRows> points(grid.size());
  std::atomic<std::size_t> cursor{0};

  auto run_point = [&](std::size_t idx) {
    const double s = grid[idx];
    // independent seeds per grid point; both schemes share one so their
    // runs are paired (same init, same data stream)
    const std::uint64_t point_seed = o.cfg.seed + idx;
    synth::SuperpositionMatrix wp =
        resolve_wp(wp_opts, s, derive_seed(point_seed, 101));
    sae::SyntheticSource source(wp, s);
    const int n_m = o.n_m > 0 ? o.n_m : wp.n();
    sae::SaeTrainConfig cfg = o.cfg;
    cfg.seed = point_seed;
    for (const sae::WeightScheme scheme :
         {sae::WeightScheme::Uniform, sae::WeightScheme::InputVariancePower}) {
      sae::GammaPlan plan;
      plan.scheme = scheme;
      plan.alpha = o.alpha;
      plan.stats_from_reconstruction = o.latent_stats;
      const sae::TrainReport report = sae::train_sae(source, n_m, act, plan, cfg);
      const metrics::SweepMetrics m =
          evaluate_point(report, wp, s, point_seed, o.metric_batch);
      ingest::RunRecord rec;
      rec.sparse_factor = s;
      rec.scheme = sae::weight_scheme_name(scheme);
      rec.alpha = o.alpha;
      rec.n = wp.n();
      rec.n_p = wp.n_p();
      rec.n_m = n_m;
      rec.activation = act.name();
      rec.steps = cfg.steps;
      rec.batch_size = cfg.batch_size;
      rec.learning_rate = cfg.learning_rate;
      rec.seed = point_seed;
      rec.workers = workers;
      rec.l_gt = m.l_gt;
      rec.l_gt_nonsparse = m.l_gt_nonsparse;
      rec.l_poly = m.l_poly;
      rec.l_weighted = m.l_weighted;
      rec.mean_dim_variance = m.mean_dim_variance;
      rec.avg_activated_features = m.avg_activated_features;
      rec.dead_latents = m.dead_latents;
      points[idx].rows.push_back(rec);
    }
  };

  auto worker = [&] {
    for (;;) {
      const std::size_t idx = cursor.fetch_add(1);
      if (idx >= grid.size()) return;
      try {
        run_point(idx);
      } catch (const std::exception& e) {
        points[idx].error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  std::vector<ingest::RunRecord> rows;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points[i].error.empty()) {
      throw DivergenceError("sweep point S=" + ingest::format_double(grid[i]) +
                            " failed: " + points[i].error);
    }
    rows.insert(rows.end(), points[i].rows.begin(), points[i].rows.end());
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ingest::RunRecord& a, const ingest::RunRecord& b) {
                     if (a.sparse_factor != b.sparse_factor) {
                       return a.sparse_factor < b.sparse_factor;
                     }
                     return a.scheme < b.scheme;
                   });

  const fs::path csv_path = fs::path(o.out) / "sweep.csv";
  std::error_code ec;
  fs::remove(csv_path, ec);
  for (const ingest::RunRecord& rec : rows) {
    ingest::append_run_record(csv_path.string(), rec);
    std::cout << "S=" << ingest::format_double(rec.sparse_factor) << " scheme=" << rec.scheme
              << " l_gt=" << ingest::format_double(rec.l_gt)
              << " l_poly=" << ingest::format_double(rec.l_poly)
              << " mean_dim_variance=" << ingest::format_double(rec.mean_dim_variance)
              << " avg_activated_features="
              << ingest::format_double(rec.avg_activated_features) << "\n";
  }
  std::cout << "wrote " << rows.size() << " rows to " << csv_path.string() << "\n";

  if (o.plot) {
    const struct {
      const char* file;
      const char* label;
      double(ingest::RunRecord::*field);
    } charts[] = {
        {"l_gt.svg", "ground-truth loss (squared error, unitless)", &ingest::RunRecord::l_gt},
        {"l_gt_nonsparse.svg", "active-coordinate ground-truth loss (squared error, unitless)",
         &ingest::RunRecord::l_gt_nonsparse},
        {"l_poly.svg", "reconstruction loss of x_p (squared error, unitless)",
         &ingest::RunRecord::l_poly},
        {"mean_dim_variance.svg", "mean per-dimension latent variance (unitless)",
         &ingest::RunRecord::mean_dim_variance},
    };
    for (const auto& chart : charts) {
      std::vector<svg::Series> series;
      for (const std::string scheme : {"uniform", "input-variance-power"}) {
        svg::Series ser;
        ser.name = scheme;
        for (const ingest::RunRecord& rec : rows) {
          if (rec.scheme != scheme) continue;
          ser.x.push_back(rec.sparse_factor);
          ser.y.push_back(rec.*(chart.field));
        }
        series.push_back(std::move(ser));
      }
      const std::string doc =
          svg::line_chart(std::string("sweep: ") + chart.file, "sparse factor S (probability)",
                          chart.label, series);
      write_text_atomic((fs::path(o.out) / chart.file).string(), doc);
    }
    std::cout << "wrote 4 SVG charts to " << o.out << "\n";
  }
  return kExitOk;
}

int run_verify(const verify::VerifyOptions& opt, const std::string& csv_path) {
  const std::vector<verify::CheckResult> results = verify::run_checks(opt);
  bool all_pass = true;
  for (const verify::CheckResult& r : results) {
    all_pass = all_pass && r.pass;
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name
              << "  statistic=" << ingest::format_double(r.statistic)
              << " threshold=" << ingest::format_double(r.threshold);
    if (!r.detail.empty()) std::cout << "  (" << r.detail << ")";
    std::cout << "\n";
  }
  if (!csv_path.empty()) {
    std::ostringstream out;
    out << "check_name,status,statistic,threshold\n";
    for (const verify::CheckResult& r : results) {
      out << ingest::csv_escape(r.name) << ',' << (r.pass ? "pass" : "fail") << ','
          << ingest::format_double(r.statistic) << ',' << ingest::format_double(r.threshold)
          << '\n';
    }
    write_text_atomic(csv_path, out.str());
    std::cout << "wrote report to " << csv_path << "\n";
  }
  if (opt.only.empty() && !verify::coverage_complete(results)) {
    std::cout << "[FAIL] coverage: not every theory operation was exercised\n";
    return kExitCheckFailure;
  }
  if (!all_pass) {
    std::cout << "verification FAILED\n";
    return kExitCheckFailure;
  }
  std::cout << "all " << results.size() << " checks passed\n";
  return kExitOk;
}

struct MetricsOptions {
  std::string model;
  std::string dump;
  std::string x_dump;
  bool synthetic = false;
  double s = 0.9;
  int batch = 4096;
  std::uint64_t seed = 7;
  std::string labels;
  int top_m = 16;
  std::string out;
};

int run_metrics(const WpOptions& wp_opts, const MetricsOptions& o) {
  auto [model, gamma] = sae::load_model(o.model);
  std::optional<synth::SuperpositionMatrix> wp;
  Matrix x;
  Matrix x_p;
  const bool have_wp_source =
      !wp_opts.blocks.empty() || !wp_opts.wp_file.empty() || wp_opts.learned;
  if (o.synthetic == !o.dump.empty()) {
    throw InvalidArgument("choose exactly one data source: --synthetic or --dump FILE");
  }
  if (o.synthetic) {
    wp = resolve_wp(wp_opts, o.s, derive_seed(o.seed, 101));
    x = synth::sample_ground_truth(wp->n(), o.s, o.batch, derive_seed(o.seed, 202)).data;
    x_p = synth::superpose_rows(*wp, x);
  } else {
    x_p = ingest::read_activation_dump(o.dump).data;
    if (have_wp_source) wp = resolve_wp(wp_opts, o.s, derive_seed(o.seed, 101));
    if (!o.x_dump.empty()) {
      x = ingest::read_activation_dump(o.x_dump).data;
      if (x.rows() != x_p.rows()) {
        throw DimensionMismatch("x dump rows do not match x_p dump rows");
      }
    }
  }

  std::vector<std::pair<std::string, double>> values;
  values.emplace_back("l_poly",
                      sae::weighted_loss(model, x_p, sae::GammaDiag::uniform(model.n_p())));
  values.emplace_back("l_weighted", sae::weighted_loss(model, x_p, gamma));
  const Matrix latents = sae::encode_rows(model, x_p);
  values.emplace_back("mean_dim_variance", metrics::per_dim_variance(latents).mean());
  if (wp && x.size() > 0) {
    values.emplace_back("l_gt", metrics::ground_truth_loss(model, *wp, x, false));
    values.emplace_back("l_gt_nonsparse", metrics::ground_truth_loss(model, *wp, x, true));
    const metrics::ActivatedFeatures aaf =
        metrics::avg_activated_features(model, *wp, x, -1.0);
    values.emplace_back("avg_activated_features", aaf.mean);
    values.emplace_back("dead_latents", aaf.dead_latents);
  }
  if (!o.labels.empty()) {
    const ingest::LabelFile lf = ingest::read_labels(o.labels);
    if (static_cast<Eigen::Index>(lf.labels.size()) != latents.rows()) {
      throw DimensionMismatch("label count does not match data rows");
    }
    const Vector cons = metrics::semantic_consistency(latents, lf.labels, o.top_m);
    values.emplace_back("mean_semantic_consistency", cons.mean());
    values.emplace_back("max_semantic_consistency", cons.maxCoeff());
  }

  std::ostringstream csv;
  csv << "metric,value\n";
  for (const auto& [name, value] : values) {
    std::cout << name << "," << ingest::format_double(value) << "\n";
    csv << name << ',' << ingest::format_double(value) << '\n';
  }
  if (!o.out.empty()) write_text_atomic(o.out, csv.str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sae-lab: a numerical laboratory for sparse-autoencoder feature recovery "
               "under superposition"};
  app.set_config("--config", "", "read options from a TOML-style key=value file "
                                 "(command-line flags win; subcommand options go in "
                                 "[subcommand] sections)");
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate ground-truth and superposed dumps");
  gen->configurable();
  WpOptions gen_wp;
  add_wp_options(gen, gen_wp, false);
  std::string gen_fixture;
  double gen_s = 0.9;
  int gen_batch = 1024;
  std::uint64_t gen_seed = 7;
  std::string gen_out = "out";
  std::string gen_tag;
  gen->add_option("--fixture", gen_fixture, "write a canonical demo pair (digon or trigon)");
  gen->add_option("--s", gen_s, "sparse factor in [0,1]");
  gen->add_option("--batch", gen_batch, "number of samples");
  gen->add_option("--seed", gen_seed, "rng seed");
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--tag", gen_tag, "source tag stored in the dumps (max 32 bytes)");

  // train-toy
  auto* toy = app.add_subcommand("train-toy", "learn a superposition matrix with the toy "
                                              "reconstruction model");
  toy->configurable();
  int toy_n = 200, toy_np = 20;
  double toy_s = 0.999;
  synth::ToyTrainConfig toy_cfg;
  bool toy_no_bias = false;
  std::string toy_out = "out";
  toy->add_option("--n", toy_n, "ground-truth feature count");
  toy->add_option("--np", toy_np, "superposed dimension count");
  toy->add_option("--s", toy_s, "sparse factor in [0,1]");
  toy->add_option("--steps", toy_cfg.steps, "training steps");
  toy->add_option("--batch-size", toy_cfg.batch_size, "batch size");
  toy->add_option("--lr", toy_cfg.learning_rate, "learning rate");
  toy->add_option("--seed", toy_cfg.seed, "rng seed");
  toy->add_option("--eval-every", toy_cfg.eval_every, "loss curve interval");
  toy->add_flag("--no-bias", toy_no_bias, "train without bias");
  toy->add_option("--out", toy_out, "output directory");

  // train-sae
  auto* train = app.add_subcommand("train-sae", "train an SAE or weighted SAE");
  train->configurable();
  WpOptions train_wp;
  add_wp_options(train, train_wp, true);
  TrainSaeOptions train_o;
  train->add_flag("--synthetic", train_o.synthetic, "train on fresh synthetic batches");
  train->add_option("--dump", train_o.dump, "train on an ingested activation dump");
  train->add_option("--s", train_o.s, "sparse factor for --synthetic");
  train->add_option("--nm", train_o.n_m, "latent count (default: n for synthetic, n_p for dumps)");
  train->add_option("--activation", train_o.activation, "relu, topk(K), jumprelu(C)");
  train->add_option("--scheme", train_o.scheme,
                    "uniform, input-variance-power, consistency-power, explicit");
  train->add_option("--alpha", train_o.alpha, "weight exponent for power schemes");
  train->add_option("--gamma", train_o.gamma_csv, "explicit gamma values, comma separated");
  train->add_option("--labels", train_o.labels, "SAEL label file for consistency-power");
  train->add_option("--top-m", train_o.top_m, "top samples per dimension for consistency");
  train->add_flag("--latent-stats", train_o.latent_stats,
                  "derive variance statistics from phase-1 reconstructions (two-phase)");
  train->add_option("--steps", train_o.cfg.steps, "training steps");
  train->add_option("--batch-size", train_o.cfg.batch_size, "batch size");
  train->add_option("--lr", train_o.cfg.learning_rate, "learning rate");
  train->add_option("--seed", train_o.cfg.seed, "rng seed");
  train->add_option("--eval-every", train_o.cfg.eval_every, "loss curve interval");
  train->add_option("--eval-batch", train_o.cfg.eval_batch, "held-out eval batch size");
  train->add_option("--init", train_o.init, "gaussian or oracle");
  train->add_option("--init-std", train_o.init_std,
                    "gaussian init stddev (default 0.1/sqrt(n_p))");
  train->add_option("--out", train_o.out, "output directory")->default_val("out");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "train SAE and WSAE across a sparsity grid");
  sweep->configurable();
  WpOptions sweep_wp;
  add_wp_options(sweep, sweep_wp, true);
  SweepOptions sweep_o;
  sweep->add_option("--grid", sweep_o.grid,
                    "comma-separated S values (default 0.0,0.2,0.4,0.6,0.8,0.9,0.95,0.99,0.999)");
  sweep->add_option("--nm", sweep_o.n_m, "latent count (default: n)");
  sweep->add_option("--activation", sweep_o.activation, "relu, topk(K), jumprelu(C)");
  sweep->add_option("--alpha", sweep_o.alpha, "weight exponent for the reweighted runs");
  sweep->add_option("--steps", sweep_o.cfg.steps, "sae training steps");
  sweep->add_option("--batch-size", sweep_o.cfg.batch_size, "sae batch size");
  sweep->add_option("--lr", sweep_o.cfg.learning_rate, "sae learning rate");
  sweep->add_option("--seed", sweep_o.cfg.seed, "base seed; each grid point uses seed + index");
  sweep->add_option("--eval-batch", sweep_o.cfg.eval_batch, "held-out eval batch size");
  sweep->add_option("--metric-batch", sweep_o.metric_batch, "evaluation batch for metrics");
  sweep->add_flag("--latent-stats", sweep_o.latent_stats,
                  "two-phase reweighting from phase-1 reconstruction variance");
  sweep->add_option("--out", sweep_o.out, "output directory")->default_val("out");
  sweep->add_flag("--plot", sweep_o.plot, "emit SVG line charts next to sweep.csv");
  sweep->footer("sweep.csv columns: sparse_factor,scheme,alpha,n,n_p,n_m,activation,steps,"
                "batch_size,learning_rate,seed,workers,l_gt,l_gt_nonsparse,l_poly,l_weighted,"
                "mean_dim_variance,avg_activated_features,dead_latents\n"
                "SAE_LAB_THREADS caps the number of grid points trained in parallel.");

  // verify
  auto* ver = app.add_subcommand("verify", "machine-check the closed-form and recovery results");
  ver->configurable();
  verify::VerifyOptions ver_o;
  std::string ver_csv;
  ver->add_option("--only", ver_o.only, "run only the named checks")->delimiter(',');
  ver->add_option("--seed", ver_o.seed, "rng seed");
  ver->add_option("--samples", ver_o.stationarity_samples, "stationarity sample count");
  ver->add_option("--trials", ver_o.gap_trials, "random trials per gap check");
  ver->add_option("--csv", ver_csv, "write the machine-readable report here");
  ver->add_option("--inject-fault", ver_o.inject_fault,
                  "deliberately break the named check (testing the failure path)")
      ->group("");  // hidden
  ver->footer("report columns: check_name,status,statistic,threshold");

  // metrics
  auto* met = app.add_subcommand("metrics", "evaluate a saved model on a dump or synthetic data");
  met->configurable();
  WpOptions met_wp;
  add_wp_options(met, met_wp, true);
  MetricsOptions met_o;
  met->add_option("--model", met_o.model, "SAEW model file")->required();
  met->add_option("--dump", met_o.dump, "x_p activation dump to evaluate on");
  met->add_option("--x-dump", met_o.x_dump, "matching ground-truth dump (enables l_gt)");
  met->add_flag("--synthetic", met_o.synthetic, "evaluate on fresh synthetic data");
  met->add_option("--s", met_o.s, "sparse factor for --synthetic");
  met->add_option("--batch", met_o.batch, "evaluation batch size");
  met->add_option("--seed", met_o.seed, "rng seed");
  met->add_option("--labels", met_o.labels, "SAEL labels for semantic consistency");
  met->add_option("--top-m", met_o.top_m, "top samples per dimension for consistency");
  met->add_option("--out", met_o.out, "write metric,value rows to this CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  auto guarded = [&](auto&& fn) -> int {
    try {
      return fn();
    } catch (const InvalidArgument& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitUsage;
    } catch (const IoError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitIo;
    } catch (const DivergenceError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitCheckFailure;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitCheckFailure;
    }
  };

  if (*gen) {
    return guarded([&] {
      return run_gen(gen_wp, gen_fixture, gen_s, gen_batch, gen_seed, gen_out, gen_tag);
    });
  }
  if (*toy) {
    return guarded([&] {
      toy_cfg.use_bias = !toy_no_bias;
      return run_train_toy(toy_n, toy_np, toy_s, toy_cfg, toy_out);
    });
  }
  if (*train) {
    return guarded([&] { return run_train_sae(train_wp, train_o); });
  }
  if (*sweep) {
    return guarded([&] { return run_sweep(sweep_wp, sweep_o); });
  }
  if (*ver) {
    return guarded([&] { return run_verify(ver_o, ver_csv); });
  }
  if (*met) {
    return guarded([&] { return run_metrics(met_wp, met_o); });
  }
  std::cerr << "error: no subcommand\n";
  return kExitUsage;
}
