#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "saelab/common.hpp"

namespace saelab::ingest {

// Activation dump: magic "SAED", u32 version=1, u64 rows, u64 cols,
// f32 little-endian row-major payload, then an optional 32-byte source
// tag. Values are f32 on disk and promoted to f64 in memory. Writers go
// through a temp file plus rename so readers never see partial files.
struct ActivationDump {
  Matrix data;
  std::string source_tag;

  long rows() const { return data.rows(); }
  long cols() const { return data.cols(); }
};

ActivationDump read_activation_dump(const std::string& path);
void write_activation_dump(const std::string& path, const Matrix& m,
                           const std::string& source_tag);

// Labels: magic "SAEL", u32 version=1, u64 count, i64 little-endian
// labels; -1 means unlabeled.
struct LabelFile {
  std::vector<long long> labels;
};

LabelFile read_labels(const std::string& path);
void write_labels(const std::string& path, const std::vector<long long>& labels);

// CSV, RFC-4180-style quoting, '.' decimal separator, LF line endings.
// Doubles are printed with enough digits to round trip.
std::string csv_escape(const std::string& field);
std::string format_double(double v);
void append_csv_row(const std::string& path, const std::vector<std::string>& header,
                    const std::vector<std::string>& row);
std::vector<std::vector<std::string>> read_csv(const std::string& path);

// One sweep point: metrics plus enough config echo to rerun it. The
// column set is fixed; wall-clock time deliberately stays out so reruns
// with equal seeds produce byte-identical files.
struct RunRecord {
  double sparse_factor = 0.0;
  std::string scheme;
  double alpha = 1.0;
  int n = 0;
  int n_p = 0;
  int n_m = 0;
  std::string activation;
  int steps = 0;
  int batch_size = 0;
  double learning_rate = 0.0;
  std::uint64_t seed = 0;
  int workers = 1;
  double l_gt = 0.0;
  double l_gt_nonsparse = 0.0;
  double l_poly = 0.0;
  double l_weighted = 0.0;
  double mean_dim_variance = 0.0;
  double avg_activated_features = 0.0;
  int dead_latents = 0;
};

const std::vector<std::string>& run_record_header();
std::vector<std::string> run_record_row(const RunRecord& rec);
void append_run_record(const std::string& path, const RunRecord& rec);

}  // namespace saelab::ingest
