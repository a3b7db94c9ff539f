#include "saelab/ingest.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "saelab/binio.hpp"

namespace saelab::ingest {

namespace {

constexpr std::size_t kTagBytes = 32;

}  // namespace

ActivationDump read_activation_dump(const std::string& path) {
  binio::Reader r(path);
  r.expect_magic("SAED");
  const std::uint32_t version = r.u32();
  if (version != 1) {
    throw FormatError("unsupported dump version " + std::to_string(version) + " in " + path);
  }
  const std::uint64_t rows = r.u64();
  const std::uint64_t cols = r.u64();
  if (rows > (1ull << 32) || cols > (1ull << 24)) {
    throw FormatError("implausible dump dimensions in " + path);
  }
  const std::uint64_t payload = rows * cols * 4;
  if (r.remaining() < payload) {
    throw FormatError("truncated file " + path + ": expected " + std::to_string(payload) +
                      " payload bytes, have " + std::to_string(r.remaining()));
  }
  ActivationDump d;
  d.data.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < d.data.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.data.cols(); ++j) {
      const float v = r.f32();
      if (!std::isfinite(v)) {
        throw FormatError("nonfinite entry at (" + std::to_string(i) + "," +
                          std::to_string(j) + ") in " + path);
      }
      d.data(i, j) = static_cast<double>(v);
    }
  }
  if (r.remaining() == kTagBytes) {
    d.source_tag = r.fixed_string(kTagBytes);
  } else if (r.remaining() != 0) {
    throw FormatError("unexpected trailing bytes in " + path + ": " +
                      std::to_string(r.remaining()) + " after payload (tag must be " +
                      std::to_string(kTagBytes) + " bytes or absent)");
  }
  return d;
}

void write_activation_dump(const std::string& path, const Matrix& m,
                           const std::string& source_tag) {
  if (source_tag.size() > kTagBytes) {
    throw InvalidArgument("source tag longer than 32 bytes");
  }
  binio::Writer w;
  w.magic("SAED");
  w.u32(1);
  w.u64(static_cast<std::uint64_t>(m.rows()));
  w.u64(static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (!std::isfinite(m(i, j))) {
        throw InvalidArgument("refusing to write nonfinite entry at (" +
                              std::to_string(i) + "," + std::to_string(j) + ")");
      }
      w.f32(static_cast<float>(m(i, j)));
    }
  }
  std::string tag = source_tag;
  tag.resize(kTagBytes, '\0');
  w.bytes(tag.data(), kTagBytes);
  w.commit(path);
}

LabelFile read_labels(const std::string& path) {
  binio::Reader r(path);
  r.expect_magic("SAEL");
  const std::uint32_t version = r.u32();
  if (version != 1) {
    throw FormatError("unsupported label version " + std::to_string(version) + " in " + path);
  }
  const std::uint64_t count = r.u64();
  if (r.remaining() < count * 8) {
    throw FormatError("truncated file " + path + ": expected " + std::to_string(count * 8) +
                      " label bytes, have " + std::to_string(r.remaining()));
  }
  LabelFile f;
  f.labels.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) f.labels.push_back(r.i64());
  return f;
}

void write_labels(const std::string& path, const std::vector<long long>& labels) {
  binio::Writer w;
  w.magic("SAEL");
  w.u32(1);
  w.u64(labels.size());
  for (const long long v : labels) w.i64(v);
  w.commit(path);
}

std::string csv_escape(const std::string& field) {
  const bool needs_quotes =
      field.find_first_of(",\"\n\r") != std::string::npos;
  if (!needs_quotes) return field;
  std::string out = "\"";
  for (const char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void append_csv_row(const std::string& path, const std::vector<std::string>& header,
                    const std::vector<std::string>& row) {
  if (row.size() != header.size()) {
    throw InvalidArgument("csv row width does not match header");
  }
  namespace fs = std::filesystem;
  std::error_code ec;
  const bool fresh = !fs::exists(path, ec) || fs::file_size(path, ec) == 0;
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw IoError("cannot open for append: " + path);
  auto emit = [&out](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out << ',';
      out << csv_escape(fields[i]);
    }
    out << '\n';
  };
  if (fresh) emit(header);
  emit(row);
  out.flush();
  if (!out) throw IoError("append failed: " + path);
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  char c;
  auto end_field = [&] {
    row.push_back(field);
    field.clear();
    any = true;
  };
  auto end_row = [&] {
    if (any || !row.empty()) {
      end_field();
      rows.push_back(row);
      row.clear();
      any = false;
      field.clear();
    }
  };
  while (in.get(c)) {
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_row();
        break;
      default:
        field += c;
        any = true;
    }
  }
  if (!field.empty() || any || !row.empty()) end_row();
  return rows;
}

const std::vector<std::string>& run_record_header() {
  static const std::vector<std::string> header = {
      "sparse_factor", "scheme", "alpha", "n", "n_p", "n_m", "activation",
      "steps", "batch_size", "learning_rate", "seed", "workers",
      "l_gt", "l_gt_nonsparse", "l_poly", "l_weighted",
      "mean_dim_variance", "avg_activated_features", "dead_latents"};
  return header;
}

std::vector<std::string> run_record_row(const RunRecord& rec) {
  return {format_double(rec.sparse_factor),
          rec.scheme,
          format_double(rec.alpha),
          std::to_string(rec.n),
          std::to_string(rec.n_p),
          std::to_string(rec.n_m),
          rec.activation,
          std::to_string(rec.steps),
          std::to_string(rec.batch_size),
          format_double(rec.learning_rate),
          std::to_string(rec.seed),
          std::to_string(rec.workers),
          format_double(rec.l_gt),
          format_double(rec.l_gt_nonsparse),
          format_double(rec.l_poly),
          format_double(rec.l_weighted),
          format_double(rec.mean_dim_variance),
          format_double(rec.avg_activated_features),
          std::to_string(rec.dead_latents)};
}

void append_run_record(const std::string& path, const RunRecord& rec) {
  append_csv_row(path, run_record_header(), run_record_row(rec));
}

}  // namespace saelab::ingest
