#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "saelab/ingest.hpp"
#include "saelab/metrics.hpp"
#include "saelab/sae.hpp"
#include "saelab/synth.hpp"
#include "saelab/theory.hpp"
#include "saelab/verify.hpp"

namespace py = pybind11;
using namespace saelab;

namespace {

void BindExceptions(py::module_& m) {
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<DimensionMismatch>(m, "DimensionMismatch", PyExc_ValueError);
  py::register_exception<InfeasibleSpec>(m, "InfeasibleSpec", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_OSError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_RuntimeError);
}

void BindSynth(py::module_& m) {
  py::class_<synth::SuperpositionMatrix>(m, "SuperpositionMatrix")
      .def_readonly("w_p", &synth::SuperpositionMatrix::w_p)
      .def_property_readonly("n", &synth::SuperpositionMatrix::n)
      .def_property_readonly("n_p", &synth::SuperpositionMatrix::n_p)
      .def("gram", &synth::SuperpositionMatrix::gram);

  m.def("sample_ground_truth",
        [](int n, double s, int batch, std::uint64_t seed) {
          return synth::sample_ground_truth(n, s, batch, seed).data;
        },
        py::arg("n"), py::arg("sparse_factor"), py::arg("batch"), py::arg("seed"));
  m.def("make_polytope_wp", &synth::make_polytope_wp, py::arg("blocks"), py::arg("n_p"));
  m.def("digon_wp", &synth::digon_wp);
  m.def("trigon_wp", &synth::trigon_wp);
  m.def("digon_demo_input", &synth::digon_demo_input);
  m.def("trigon_demo_input", &synth::trigon_demo_input);
  m.def("superpose", &synth::superpose, py::arg("wp"), py::arg("x"));
  m.def("superpose_rows", &synth::superpose_rows, py::arg("wp"), py::arg("x_rows"));

  py::class_<synth::ToyTrainReport>(m, "ToyTrainReport")
      .def_readonly("wp", &synth::ToyTrainReport::wp)
      .def_readonly("bias", &synth::ToyTrainReport::bias)
      .def_readonly("initial_loss", &synth::ToyTrainReport::initial_loss)
      .def_readonly("final_loss", &synth::ToyTrainReport::final_loss)
      .def_readonly("loss_curve", &synth::ToyTrainReport::loss_curve);
  m.def("train_toy_superposition",
        [](int n, int n_p, double s, int steps, int batch_size, double lr,
           std::uint64_t seed, bool use_bias) {
          synth::ToyTrainConfig cfg;
          cfg.steps = steps;
          cfg.batch_size = batch_size;
          cfg.learning_rate = lr;
          cfg.seed = seed;
          cfg.use_bias = use_bias;
          return synth::train_toy_superposition(n, n_p, s, cfg);
        },
        py::arg("n"), py::arg("n_p"), py::arg("sparse_factor"), py::arg("steps") = 3000,
        py::arg("batch_size") = 256, py::arg("learning_rate") = 1e-2, py::arg("seed") = 0,
        py::arg("use_bias") = true);
}

void BindSae(py::module_& m) {
  py::class_<sae::SaeModel>(m, "SaeModel")
      .def_readonly("w_m", &sae::SaeModel::w_m)
      .def_property_readonly("activation",
                             [](const sae::SaeModel& s) { return s.activation.name(); })
      .def_property_readonly("n_m", &sae::SaeModel::n_m)
      .def_property_readonly("n_p", &sae::SaeModel::n_p);

  py::class_<sae::GammaDiag>(m, "GammaDiag")
      .def_readonly("gammas", &sae::GammaDiag::gammas)
      .def_property_readonly("scheme",
                             [](const sae::GammaDiag& g) {
                               return sae::weight_scheme_name(g.scheme);
                             })
      .def_readonly("alpha", &sae::GammaDiag::alpha);

  m.def("activate",
        [](const std::string& activation, const Vector& z) {
          return sae::activate(sae::parse_activation(activation), z);
        },
        py::arg("activation"), py::arg("z"));
  m.def("encode_rows",
        [](const sae::SaeModel& model, const Matrix& xp) {
          return sae::encode_rows(model, xp);
        },
        py::arg("model"), py::arg("xp_rows"));
  m.def("reconstruct_rows",
        [](const sae::SaeModel& model, const Matrix& xp) {
          return sae::reconstruct_rows(model, xp);
        },
        py::arg("model"), py::arg("xp_rows"));
  m.def("weighted_loss",
        [](const sae::SaeModel& model, const Matrix& xp, const Vector& gammas) {
          return sae::weighted_loss(model, xp, sae::explicit_gamma(gammas));
        },
        py::arg("model"), py::arg("xp_rows"), py::arg("gammas"));
  m.def("uniform_loss",
        [](const sae::SaeModel& model, const Matrix& xp) {
          return sae::weighted_loss(model, xp, sae::GammaDiag::uniform(model.n_p()));
        },
        py::arg("model"), py::arg("xp_rows"));
  m.def("compute_gamma",
        [](const std::string& scheme, const Vector& stats, double alpha) {
          return sae::compute_gamma(sae::parse_weight_scheme(scheme), stats, alpha).gammas;
        },
        py::arg("scheme"), py::arg("stats"), py::arg("alpha"));

  py::class_<sae::TrainReport>(m, "TrainReport")
      .def_readonly("model", &sae::TrainReport::model)
      .def_readonly("gamma", &sae::TrainReport::gamma)
      .def_readonly("initial_loss", &sae::TrainReport::initial_loss)
      .def_readonly("final_loss", &sae::TrainReport::final_loss)
      .def_readonly("loss_curve", &sae::TrainReport::loss_curve)
      .def_readonly("seed", &sae::TrainReport::seed);

  auto train = [](const sae::BatchSource& source, int n_m, const std::string& activation,
                  const std::string& scheme, double alpha, bool latent_stats, int steps,
                  int batch_size, double lr, std::uint64_t seed) {
    sae::SaeTrainConfig cfg;
    cfg.steps = steps;
    cfg.batch_size = batch_size;
    cfg.learning_rate = lr;
    cfg.seed = seed;
    sae::GammaPlan plan;
    plan.scheme = sae::parse_weight_scheme(scheme);
    plan.alpha = alpha;
    plan.stats_from_reconstruction = latent_stats;
    return sae::train_sae(source, n_m, sae::parse_activation(activation), plan, cfg);
  };
  m.def("train_sae_synthetic",
        [train](const synth::SuperpositionMatrix& wp, double s, int n_m,
                const std::string& activation, const std::string& scheme, double alpha,
                bool latent_stats, int steps, int batch_size, double lr,
                std::uint64_t seed) {
          sae::SyntheticSource source(wp, s);
          return train(source, n_m, activation, scheme, alpha, latent_stats, steps,
                       batch_size, lr, seed);
        },
        py::arg("wp"), py::arg("sparse_factor"), py::arg("n_m"),
        py::arg("activation") = "relu", py::arg("scheme") = "uniform",
        py::arg("alpha") = 1.0, py::arg("latent_stats") = false, py::arg("steps") = 4000,
        py::arg("batch_size") = 512, py::arg("learning_rate") = 3e-3, py::arg("seed") = 0);
  m.def("train_sae_on",
        [train](const Matrix& xp_rows, int n_m, const std::string& activation,
                const std::string& scheme, double alpha, int steps, int batch_size,
                double lr, std::uint64_t seed) {
          sae::MatrixSource source(xp_rows);
          return train(source, n_m, activation, scheme, alpha, false, steps, batch_size,
                       lr, seed);
        },
        py::arg("xp_rows"), py::arg("n_m"), py::arg("activation") = "relu",
        py::arg("scheme") = "uniform", py::arg("alpha") = 1.0, py::arg("steps") = 4000,
        py::arg("batch_size") = 512, py::arg("learning_rate") = 3e-3, py::arg("seed") = 0);

  m.def("save_model",
        [](const std::string& path, const sae::SaeModel& model, const Vector& gammas) {
          sae::save_model(path, model, sae::explicit_gamma(gammas));
        },
        py::arg("path"), py::arg("model"), py::arg("gammas"));
  m.def("load_model", &sae::load_model, py::arg("path"));
}

void BindTheory(py::module_& m) {
  m.def("closed_form_solution",
        [](const synth::SuperpositionMatrix& wp, int n_m,
           const std::vector<int>& permutation, const std::string& activation) {
          return theory::closed_form_solution(wp, n_m, permutation,
                                              sae::parse_activation(activation));
        },
        py::arg("wp"), py::arg("n_m"), py::arg("permutation") = std::vector<int>{},
        py::arg("activation") = "relu");

  py::class_<theory::RecoveryReport>(m, "RecoveryReport")
      .def_readonly("recovered", &theory::RecoveryReport::recovered)
      .def_readonly("per_dim_error", &theory::RecoveryReport::per_dim_error)
      .def_readonly("shrunk_dims", &theory::RecoveryReport::shrunk_dims)
      .def_readonly("vanished_dims", &theory::RecoveryReport::vanished_dims)
      .def_readonly("argmax_preserved", &theory::RecoveryReport::argmax_preserved)
      .def_readonly("x_m", &theory::RecoveryReport::x_m);
  m.def("recovery_check",
        [](const synth::SuperpositionMatrix& wp, const Vector& x,
           const std::string& activation, double tolerance) {
          return theory::recovery_check(wp, x, sae::parse_activation(activation), tolerance);
        },
        py::arg("wp"), py::arg("x"), py::arg("activation") = "relu",
        py::arg("tolerance") = 1e-9);

  py::class_<theory::GapCheck>(m, "GapCheck")
      .def_readonly("lhs", &theory::GapCheck::lhs)
      .def_readonly("rhs", &theory::GapCheck::rhs)
      .def_readonly("abs_diff", &theory::GapCheck::abs_diff);
  m.def("gap_identity",
        [](const synth::SuperpositionMatrix& wp, const Vector& x, const Vector& gammas) {
          return theory::gap_identity(wp, x, sae::explicit_gamma(gammas));
        },
        py::arg("wp"), py::arg("x"), py::arg("gammas"));

  m.def("interference_matrix",
        [](const synth::SuperpositionMatrix& wp, const Vector& gammas) {
          return theory::interference_matrix(wp, sae::explicit_gamma(gammas));
        },
        py::arg("wp"), py::arg("gammas"));

  py::class_<theory::StationarityResult>(m, "StationarityResult")
      .def_readonly("residual_mean", &theory::StationarityResult::residual_mean)
      .def_readonly("std_error", &theory::StationarityResult::std_error)
      .def_readonly("samples", &theory::StationarityResult::samples)
      .def_readonly("max_sigmas", &theory::StationarityResult::max_sigmas)
      .def_readonly("passed", &theory::StationarityResult::passed);
  m.def("stationarity_check", &theory::stationarity_check, py::arg("wp"),
        py::arg("sparse_factor"), py::arg("samples"), py::arg("seed"));

  py::class_<theory::AlignmentResult>(m, "AlignmentResult")
      .def_readonly("score", &theory::AlignmentResult::score)
      .def_readonly("matched_row", &theory::AlignmentResult::matched_row)
      .def_readonly("similarity", &theory::AlignmentResult::similarity)
      .def_readonly("unmatched_rows", &theory::AlignmentResult::unmatched_rows);
  m.def("alignment_score", &theory::alignment_score, py::arg("w_m"), py::arg("wp"));
}

void BindMetrics(py::module_& m) {
  m.def("ground_truth_loss", &metrics::ground_truth_loss, py::arg("model"), py::arg("wp"),
        py::arg("x_rows"), py::arg("mask_nonsparse") = false);
  m.def("per_dim_variance", &metrics::per_dim_variance, py::arg("latents_rows"));

  py::class_<metrics::ActivatedFeatures>(m, "ActivatedFeatures")
      .def_readonly("mean", &metrics::ActivatedFeatures::mean)
      .def_readonly("dead_latents", &metrics::ActivatedFeatures::dead_latents)
      .def_readonly("threshold", &metrics::ActivatedFeatures::threshold);
  m.def("avg_activated_features", &metrics::avg_activated_features, py::arg("model"),
        py::arg("wp"), py::arg("x_rows"), py::arg("threshold") = -1.0);
  m.def("semantic_consistency", &metrics::semantic_consistency, py::arg("latents_rows"),
        py::arg("labels"), py::arg("top_m"));
}

void BindIngest(py::module_& m) {
  m.def("write_activation_dump",
        [](const std::string& path, const Matrix& data, const std::string& tag) {
          ingest::write_activation_dump(path, data, tag);
        },
        py::arg("path"), py::arg("data"), py::arg("tag") = "");
  m.def("read_activation_dump",
        [](const std::string& path) {
          const ingest::ActivationDump dump = ingest::read_activation_dump(path);
          return py::make_tuple(dump.data, dump.source_tag);
        },
        py::arg("path"));
  m.def("write_labels",
        [](const std::string& path, const std::vector<long long>& labels) {
          ingest::write_labels(path, labels);
        },
        py::arg("path"), py::arg("labels"));
  m.def("read_labels",
        [](const std::string& path) { return ingest::read_labels(path).labels; },
        py::arg("path"));
}

void BindVerify(py::module_& m) {
  py::class_<verify::CheckResult>(m, "CheckResult")
      .def_readonly("name", &verify::CheckResult::name)
      .def_readonly("passed", &verify::CheckResult::pass)
      .def_readonly("statistic", &verify::CheckResult::statistic)
      .def_readonly("threshold", &verify::CheckResult::threshold)
      .def_readonly("detail", &verify::CheckResult::detail)
      .def_readonly("ops_used", &verify::CheckResult::ops_used);
  m.def("run_checks",
        [](const std::vector<std::string>& only, std::uint64_t seed, long samples,
           int trials) {
          verify::VerifyOptions opt;
          opt.only = only;
          opt.seed = seed;
          opt.stationarity_samples = samples;
          opt.gap_trials = trials;
          return verify::run_checks(opt);
        },
        py::arg("only") = std::vector<std::string>{}, py::arg("seed") = 7,
        py::arg("samples") = 200000L, py::arg("trials") = 1000);
  m.def("check_names", [] { return verify::check_names(); });
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "numerical laboratory for sparse-autoencoder feature recovery under "
            "superposition";
  BindExceptions(m);
  BindSynth(m);
  BindSae(m);
  BindTheory(m);
  BindMetrics(m);
  BindIngest(m);
  BindVerify(m);
  m.def("derive_seed", &derive_seed, py::arg("base"), py::arg("stream"));
}
