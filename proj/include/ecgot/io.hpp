#pragma once

// File formats and configuration: the "ECGB" beats container, the "WCST"
// cost-matrix cache keyed by a content digest, CSV record import, flat
// key=value run configuration, dataset summaries, and JSON metric reports.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ecgot/beat.hpp"
#include "ecgot/eval.hpp"
#include "ecgot/ot.hpp"
#include "ecgot/sha256.hpp"

namespace ecgot {

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
}

inline void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

inline void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<char>(bits >> (8 * i)));
}

struct ByteReader {
  std::string_view data;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) const {
    if (pos + n > data.size())
      throw std::runtime_error(std::string("truncated file while reading ") +
                               what);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(
               static_cast<unsigned char>(data[pos + i]))
           << (8 * i);
    pos += 4;
    return v;
  }
  float f32(const char* what) {
    const std::uint32_t bits = u32(what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  double f64(const char* what) {
    need(8, what);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
      bits |= static_cast<std::uint64_t>(
                  static_cast<unsigned char>(data[pos + i]))
              << (8 * i);
    pos += 8;
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string out(data.substr(pos, n));
    pos += n;
    return out;
  }
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// single-writer atomic replace: write a sibling temp file, then rename
inline void write_file_atomic(const std::filesystem::path& path,
                              std::string_view content) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out.write(content.data(),
              static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace detail

// --- beats container --------------------------------------------------------

constexpr std::uint32_t kBeatsVersion = 1;

/// Serializes beats to the ECGB layout: magic, version, counts, sample rate,
/// then per beat the class id, source id, and float32 little-endian samples
/// row-major by lead. All beats must share one shape.
inline std::string encode_beats(std::span<const BeatTensor> beats) {
  std::string out;
  out += "ECGB";
  detail::put_u32(out, kBeatsVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(beats.size()));
  const int n_leads = beats.empty() ? 0 : beats.front().n_leads;
  const int beat_len = beats.empty() ? 0 : beats.front().beat_len;
  const double fs = beats.empty() ? 0.0 : beats.front().sample_rate;
  detail::put_u32(out, static_cast<std::uint32_t>(n_leads));
  detail::put_u32(out, static_cast<std::uint32_t>(beat_len));
  detail::put_f64(out, fs);
  for (const auto& beat : beats) {
    beat.validate();
    if (beat.n_leads != n_leads || beat.beat_len != beat_len ||
        beat.sample_rate != fs)
      throw std::invalid_argument("save_beats: beats must share one shape");
    detail::put_u32(out, static_cast<std::uint32_t>(beat.label));
    detail::put_u32(out, static_cast<std::uint32_t>(beat.source_id.size()));
    out += beat.source_id;
    for (float v : beat.samples) detail::put_f32(out, v);
  }
  return out;
}

inline std::vector<BeatTensor> decode_beats(std::string_view bytes) {
  detail::ByteReader reader{bytes};
  if (reader.bytes(4, "magic") != "ECGB")
    throw std::runtime_error("beats file: bad magic");
  const std::uint32_t version = reader.u32("version");
  if (version != kBeatsVersion)
    throw std::runtime_error("beats file: unsupported version " +
                             std::to_string(version));
  const std::uint32_t n_beats = reader.u32("beat count");
  const std::uint32_t n_leads = reader.u32("lead count");
  const std::uint32_t beat_len = reader.u32("beat length");
  const double fs = reader.f64("sample rate");
  std::vector<BeatTensor> beats;
  beats.reserve(n_beats);
  for (std::uint32_t b = 0; b < n_beats; ++b) {
    BeatTensor beat;
    beat.n_leads = static_cast<int>(n_leads);
    beat.beat_len = static_cast<int>(beat_len);
    beat.sample_rate = fs;
    beat.label = static_cast<int>(reader.u32("label"));
    beat.source_id = reader.bytes(reader.u32("source id length"), "source id");
    const std::size_t count =
        static_cast<std::size_t>(n_leads) * beat_len;
    beat.samples.resize(count);
    for (std::size_t i = 0; i < count; ++i)
      beat.samples[i] = reader.f32("samples");
    beats.push_back(std::move(beat));
  }
  if (reader.pos != bytes.size())
    throw std::runtime_error("beats file: trailing bytes after payload");
  return beats;
}

inline void save_beats(const std::filesystem::path& path,
                       std::span<const BeatTensor> beats) {
  detail::write_file_atomic(path, encode_beats(beats));
}

inline std::vector<BeatTensor> load_beats(const std::filesystem::path& path) {
  return decode_beats(detail::read_file(path));
}

inline std::string beats_digest_hex(std::span<const BeatTensor> beats) {
  const std::string blob = encode_beats(beats);
  return sha256_hex(blob.data(), blob.size());
}

// --- cost cache --------------------------------------------------------------

/// Digest binding a cost matrix to its inputs: both beat payloads plus the
/// metric configuration string.
inline std::array<std::uint8_t, 32> cost_cache_digest(
    std::span<const BeatTensor> batch_a, std::span<const BeatTensor> batch_b,
    const std::string& metric_config) {
  Sha256 sha;
  const std::string a = encode_beats(batch_a);
  const std::string b = encode_beats(batch_b);
  sha.update(a.data(), a.size());
  sha.update(b.data(), b.size());
  sha.update(metric_config.data(), metric_config.size());
  return sha.finish();
}

inline void save_cost_cache(const std::filesystem::path& path,
                            const CostMatrix& cost,
                            const std::array<std::uint8_t, 32>& digest) {
  std::string out;
  out += "WCST";
  out.append(reinterpret_cast<const char*>(digest.data()), digest.size());
  detail::put_u32(out, static_cast<std::uint32_t>(cost.m.rows()));
  detail::put_u32(out, static_cast<std::uint32_t>(cost.m.cols()));
  for (Eigen::Index i = 0; i < cost.m.rows(); ++i)
    for (Eigen::Index j = 0; j < cost.m.cols(); ++j)
      detail::put_f64(out, cost.m(i, j));
  detail::write_file_atomic(path, out);
}

/// Strict load: throws on malformed files, returns the stored digest.
inline std::pair<CostMatrix, std::array<std::uint8_t, 32>> load_cost_cache(
    const std::filesystem::path& path) {
  const std::string blob = detail::read_file(path);
  detail::ByteReader reader{blob};
  if (reader.bytes(4, "magic") != "WCST")
    throw std::runtime_error("cost cache: bad magic");
  std::array<std::uint8_t, 32> digest;
  const std::string d = reader.bytes(32, "digest");
  std::copy(d.begin(), d.end(), digest.begin());
  const std::uint32_t n = reader.u32("rows");
  const std::uint32_t m = reader.u32("cols");
  CostMatrix cost;
  cost.metric_tag = "beat-shape";
  cost.m.resize(n, m);
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = 0; j < m; ++j) cost.m(i, j) = reader.f64("entries");
  if (reader.pos != blob.size())
    throw std::runtime_error("cost cache: trailing bytes");
  return {std::move(cost), digest};
}

/// Cache lookup: only a well-formed file whose digest matches is used;
/// anything else reports empty so the caller recomputes.
inline std::optional<CostMatrix> try_load_cost_cache(
    const std::filesystem::path& path,
    const std::array<std::uint8_t, 32>& expected_digest) {
  if (!std::filesystem::exists(path)) return std::nullopt;
  try {
    auto [cost, digest] = load_cost_cache(path);
    if (digest != expected_digest) return std::nullopt;
    return cost;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

// --- CSV import --------------------------------------------------------------

/// Reads one multi-lead record from CSV (rows = time steps, columns =
/// leads, optional header line). Ragged rows and non-finite cells are
/// rejected with the offending line number.
inline std::vector<RawRecord> import_csv(const std::filesystem::path& path,
                                         int n_leads, double sample_rate) {
  if (n_leads < 1 || sample_rate <= 0.0)
    throw std::invalid_argument("import: bad lead count or sample rate");
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());

  std::vector<std::vector<double>> columns(n_leads);
  std::string line;
  long line_no = 0;
  bool first_data_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string trimmed = line;
    trimmed.erase(0, trimmed.find_first_not_of(" \t"));
    if (trimmed.empty()) continue;

    std::vector<std::string> cells;
    std::stringstream ss(trimmed);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cell.erase(0, cell.find_first_not_of(" \t"));
      cell.erase(cell.find_last_not_of(" \t") + 1);
      cells.push_back(cell);
    }

    std::vector<double> values;
    values.reserve(cells.size());
    bool numeric = true;
    for (const auto& c : cells) {
      try {
        std::size_t used = 0;
        const double v = std::stod(c, &used);
        if (used != c.size()) {
          numeric = false;
          break;
        }
        values.push_back(v);
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }

    if (!numeric) {
      if (first_data_line) continue;  // header row
      throw std::runtime_error("csv line " + std::to_string(line_no) +
                               ": non-numeric cell");
    }
    if (static_cast<int>(values.size()) != n_leads)
      throw std::runtime_error(
          "csv line " + std::to_string(line_no) + ": expected " +
          std::to_string(n_leads) + " columns, got " +
          std::to_string(values.size()));
    for (double v : values)
      if (!std::isfinite(v))
        throw std::runtime_error("csv line " + std::to_string(line_no) +
                                 ": non-finite value");
    for (int l = 0; l < n_leads; ++l) columns[l].push_back(values[l]);
    first_data_line = false;
  }
  if (columns[0].empty())
    throw std::runtime_error("csv: no data rows in " + path.string());

  RawRecord record;
  record.n_leads = n_leads;
  record.record_len = static_cast<long>(columns[0].size());
  record.sample_rate = sample_rate;
  record.record_id = path.stem().string();
  record.samples.reserve(static_cast<std::size_t>(n_leads) *
                         record.record_len);
  for (int l = 0; l < n_leads; ++l)
    record.samples.insert(record.samples.end(), columns[l].begin(),
                          columns[l].end());
  record.validate();
  return {std::move(record)};
}

// --- run configuration --------------------------------------------------------

struct RunConfig {
  int window_n = 5;
  double notch_hz = 50.0;
  double notch_q = 30.0;
  double fs_out = 50.0;
  double pre_s = 0.5;
  double post_s = 0.5;
  int grid_len = 0;    // 0: beat length after downsampling
  double lambda = 0.0; // 0: auto (1e-2 * max cost)
  double alpha_min = 0.5;
  double alpha_max = 0.9;
  int batch_source = 32;
  int batch_target = 32;
  int n_augment = 0;  // 0: balance every class to the majority count
  double lr = 0.1;
  double l2 = 1e-4;
  int epochs = 500;
  std::vector<double> epsilons{0.001, 0.002, 0.003, 0.004};
  std::uint64_t seed = 0;

  static RunConfig parse(const std::string& text) {
    RunConfig config;
    std::istringstream in(text);
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash_pos = line.find('#');
      if (hash_pos != std::string::npos) line.erase(hash_pos);
      line.erase(0, line.find_first_not_of(" \t\r"));
      line.erase(line.find_last_not_of(" \t\r") + 1);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("config line " + std::to_string(line_no) +
                                    ": expected key=value");
      std::string key = line.substr(0, eq);
      std::string value = line.substr(eq + 1);
      key.erase(key.find_last_not_of(" \t") + 1);
      value.erase(0, value.find_first_not_of(" \t"));
      config.set(key, value, line_no);
    }
    if (!(config.alpha_min >= 0.0 && config.alpha_min <= config.alpha_max &&
          config.alpha_max <= 1.0))
      throw std::invalid_argument("config: need 0 <= alpha_min <= alpha_max <= 1");
    return config;
  }

  static RunConfig load(const std::filesystem::path& path) {
    return parse(detail::read_file(path));
  }

  std::string canonical_text() const {
    std::ostringstream out;
    out.precision(17);
    out << "alpha_max=" << alpha_max << "\nalpha_min=" << alpha_min
        << "\nbatch_source=" << batch_source
        << "\nbatch_target=" << batch_target << "\nepochs=" << epochs
        << "\nepsilons=";
    for (std::size_t i = 0; i < epsilons.size(); ++i)
      out << (i ? "," : "") << epsilons[i];
    out << "\nfs_out=" << fs_out << "\ngrid_len=" << grid_len
        << "\nl2=" << l2 << "\nlambda=" << lambda << "\nlr=" << lr
        << "\nn_augment=" << n_augment << "\nnotch_hz=" << notch_hz
        << "\nnotch_q=" << notch_q << "\npost_s=" << post_s
        << "\npre_s=" << pre_s << "\nseed=" << seed
        << "\nwindow_n=" << window_n << "\n";
    return out.str();
  }

  std::string hash() const { return sha256_hex(canonical_text()); }

 private:
  void set(const std::string& key, const std::string& value, long line_no) {
    auto as_double = [&] { return std::stod(value); };
    auto as_int = [&] { return std::stoi(value); };
    try {
      if (key == "window_n") window_n = as_int();
      else if (key == "notch_hz") notch_hz = as_double();
      else if (key == "notch_q") notch_q = as_double();
      else if (key == "fs_out") fs_out = as_double();
      else if (key == "pre_s") pre_s = as_double();
      else if (key == "post_s") post_s = as_double();
      else if (key == "grid_len") grid_len = as_int();
      else if (key == "lambda") lambda = as_double();
      else if (key == "alpha_min") alpha_min = as_double();
      else if (key == "alpha_max") alpha_max = as_double();
      else if (key == "batch_source") batch_source = as_int();
      else if (key == "batch_target") batch_target = as_int();
      else if (key == "n_augment") n_augment = as_int();
      else if (key == "lr") lr = as_double();
      else if (key == "l2") l2 = as_double();
      else if (key == "epochs") epochs = as_int();
      else if (key == "seed") seed = std::stoull(value);
      else if (key == "epsilons") {
        epsilons.clear();
        std::stringstream ss(value);
        std::string tok;
        while (std::getline(ss, tok, ','))
          if (!tok.empty()) epsilons.push_back(std::stod(tok));
        if (epsilons.empty())
          throw std::invalid_argument("empty epsilon list");
      } else {
        throw std::invalid_argument("config: unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument& e) {
      if (std::string(e.what()).rfind("config:", 0) == 0) throw;
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": bad value for " + key);
    } catch (const std::exception&) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": bad value for " + key);
    }
  }
};

// --- dataset summary -----------------------------------------------------------

struct SummaryRow {
  int label = 0;
  std::string name;
  long patients = 0;
  double patient_pct = 0.0;
  long beats = 0;
  double beat_pct = 0.0;
};

struct DatasetSummary {
  std::vector<SummaryRow> rows;
  long total_patients = 0;
  long total_beats = 0;
};

inline double round_one_decimal(double v) { return std::round(v * 10.0) / 10.0; }

/// Percentages (one decimal) from per-class patient and beat counts.
inline DatasetSummary summary_from_counts(
    const std::vector<std::pair<int, std::pair<long, long>>>& class_counts) {
  DatasetSummary summary;
  for (const auto& [label, counts] : class_counts) {
    summary.total_patients += counts.first;
    summary.total_beats += counts.second;
  }
  for (const auto& [label, counts] : class_counts) {
    SummaryRow row;
    row.label = label;
    row.name = ecg_class_name(label);
    row.patients = counts.first;
    row.beats = counts.second;
    row.patient_pct = summary.total_patients > 0
                          ? round_one_decimal(100.0 * counts.first /
                                              summary.total_patients)
                          : 0.0;
    row.beat_pct =
        summary.total_beats > 0
            ? round_one_decimal(100.0 * counts.second / summary.total_beats)
            : 0.0;
    summary.rows.push_back(std::move(row));
  }
  return summary;
}

/// Per-class patient (distinct source ids) and beat statistics.
inline DatasetSummary dataset_summary(std::span<const BeatTensor> beats) {
  if (beats.empty()) throw std::invalid_argument("summary: empty dataset");
  std::map<int, std::set<std::string>> patients;
  std::map<int, long> counts;
  for (const auto& beat : beats) {
    patients[beat.label].insert(beat.source_id);
    counts[beat.label] += 1;
  }
  std::vector<std::pair<int, std::pair<long, long>>> class_counts;
  for (const auto& [label, count] : counts)
    class_counts.push_back(
        {label, {static_cast<long>(patients[label].size()), count}});
  return summary_from_counts(class_counts);
}

inline std::string format_summary(const DatasetSummary& summary) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-8s %10s %8s %10s %8s\n", "class",
                "patients", "pct", "beats", "pct");
  out << line;
  for (const auto& row : summary.rows) {
    std::snprintf(line, sizeof(line), "%-8s %10ld %7.1f%% %10ld %7.1f%%\n",
                  row.name.c_str(), row.patients, row.patient_pct, row.beats,
                  row.beat_pct);
    out << line;
  }
  std::snprintf(line, sizeof(line), "%-8s %10ld %8s %10ld\n", "total",
                summary.total_patients, "", summary.total_beats);
  out << line;
  return out.str();
}

// --- feature matrices ------------------------------------------------------------

/// "ECGF" container: labeled feature rows as float64 little-endian.
inline void save_features(const std::filesystem::path& path,
                          const Eigen::MatrixXd& x,
                          const std::vector<int>& y) {
  if (x.rows() != static_cast<Eigen::Index>(y.size()))
    throw std::invalid_argument("features: row/label count mismatch");
  std::string out;
  out += "ECGF";
  detail::put_u32(out, 1);
  detail::put_u32(out, static_cast<std::uint32_t>(x.rows()));
  detail::put_u32(out, static_cast<std::uint32_t>(x.cols()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    detail::put_u32(out, static_cast<std::uint32_t>(y[i]));
    for (Eigen::Index j = 0; j < x.cols(); ++j) detail::put_f64(out, x(i, j));
  }
  detail::write_file_atomic(path, out);
}

inline std::pair<Eigen::MatrixXd, std::vector<int>> load_features(
    const std::filesystem::path& path) {
  const std::string blob = detail::read_file(path);
  detail::ByteReader reader{blob};
  if (reader.bytes(4, "magic") != "ECGF")
    throw std::runtime_error("features file: bad magic");
  if (reader.u32("version") != 1)
    throw std::runtime_error("features file: unsupported version");
  const std::uint32_t n = reader.u32("rows");
  const std::uint32_t d = reader.u32("cols");
  Eigen::MatrixXd x(n, d);
  std::vector<int> y(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(reader.u32("label"));
    for (std::uint32_t j = 0; j < d; ++j) x(i, j) = reader.f64("values");
  }
  return {std::move(x), std::move(y)};
}

// --- classifier model -------------------------------------------------------------

inline nlohmann::ordered_json model_to_json(const ClassifierModel& model) {
  nlohmann::ordered_json j;
  j["n_classes"] = model.n_classes();
  j["dim"] = model.dim();
  auto vec = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  j["bias"] = vec(model.bias);
  j["feature_mean"] = vec(model.feature_mean);
  j["feature_std"] = vec(model.feature_std);
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < model.weights.rows(); ++r) {
    std::vector<double> row(model.weights.cols());
    for (Eigen::Index c = 0; c < model.weights.cols(); ++c)
      row[c] = model.weights(r, c);
    rows.push_back(row);
  }
  j["weights"] = std::move(rows);
  return j;
}

inline ClassifierModel model_from_json(const nlohmann::json& j) {
  ClassifierModel model;
  const int k = j.at("n_classes").get<int>();
  const int d = j.at("dim").get<int>();
  model.weights.resize(k, d);
  const auto& rows = j.at("weights");
  if (static_cast<int>(rows.size()) != k)
    throw std::runtime_error("model: weight row count mismatch");
  for (int r = 0; r < k; ++r)
    for (int c = 0; c < d; ++c) model.weights(r, c) = rows[r][c].get<double>();
  auto vec = [&](const char* key, Eigen::Index size) {
    const auto& arr = j.at(key);
    if (static_cast<Eigen::Index>(arr.size()) != size)
      throw std::runtime_error(std::string("model: bad length for ") + key);
    Eigen::VectorXd v(size);
    for (Eigen::Index i = 0; i < size; ++i) v[i] = arr[i].get<double>();
    return v;
  };
  model.bias = vec("bias", k);
  model.feature_mean = vec("feature_mean", d);
  model.feature_std = vec("feature_std", d);
  return model;
}

inline void save_model(const std::filesystem::path& path,
                       const ClassifierModel& model) {
  detail::write_file_atomic(path, model_to_json(model).dump(2) + "\n");
}

inline ClassifierModel load_model(const std::filesystem::path& path) {
  return model_from_json(nlohmann::json::parse(detail::read_file(path)));
}

// --- JSON reports ---------------------------------------------------------------

inline nlohmann::ordered_json metrics_to_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["auroc_macro"] = report.auroc_macro;
  j["f1_macro"] = report.f1_macro;
  j["per_class_auroc"] = report.per_class_auroc;
  j["per_class_f1"] = report.per_class_f1;
  j["confusion"] = report.confusion;
  j["epsilon"] = report.epsilon;
  return j;
}

inline nlohmann::ordered_json robustness_to_json(
    const std::vector<RobustnessRow>& rows) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& row : rows) {
    nlohmann::ordered_json j;
    j["epsilon"] = row.epsilon;
    j["auroc_macro"] = row.auroc_macro;
    j["per_class_auroc"] = row.per_class_auroc;
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace ecgot
