/*
 * Copyright 2026 The mcdrop Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// File formats.
//
// Checkpoint (.opn):
//   "OPN1" | u32 version | u64 header length L | L bytes UTF-8 JSON header |
//   float32 weights in header order
// The header lists the layer specs, the split index, every tensor's shape and
// byte offset into the weight block, and the base seed. All integers and
// floats are little-endian.
//
// Dataset (.opt):
//   "OPT1" | u32 version | u64 sample count | u32 rank | u64 dims[rank] |
//   float32 sample data, sample after sample
// Labels live in a sibling CSV (`<stem>.labels.csv`) with a header row
// `sample_index,label_0,...` and one 0/1 row per sample.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mcdrop/datasets.hpp"
#include "mcdrop/errors.hpp"
#include "mcdrop/metrics.hpp"
#include "mcdrop/network.hpp"
#include "mcdrop/training.hpp"
#include "mcdrop/uncertainty.hpp"

namespace mcdrop {

using Json = nlohmann::json;

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr const char* kReportSchema = "mcdrop.eval_report.v1";

// --- raw bytes ---------------------------------------------------------------

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

namespace detail {

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * b)) & 0xffu));
  }
}

inline void put_f32(std::string& out, double value) {
  put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(value)));
}

class ByteReader {
 public:
  ByteReader(const std::string& bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  template <typename T>
  T get_le() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    }
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  double get_f32() { return static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>())); }

  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (n > remaining()) throw IoError(what_ + ": truncated file");
  }

  const std::string& bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

// Rejects keys outside `allowed`, naming the offending field.
inline void require_known_keys(const Json& obj, std::initializer_list<const char*> allowed,
                               const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected a JSON object");
  const std::set<std::string> known(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!known.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get_field(const Json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + ": field '" + key + "' has the wrong type");
  }
}

template <typename T>
T get_field_or(const Json& obj, const char* key, T fallback, const std::string& where) {
  return obj.contains(key) ? get_field<T>(obj, key, where) : fallback;
}

inline std::size_t get_positive(const Json& obj, const char* key, const std::string& where) {
  const Json& v = obj.contains(key) ? obj.at(key) : Json();
  if (!v.is_number_unsigned() || v.get<std::uint64_t>() == 0) {
    throw ConfigError(where + ": field '" + key + "' must be a positive integer");
  }
  return v.get<std::size_t>();
}

}  // namespace detail

// --- layer specs ---------------------------------------------------------------

inline Json layer_to_json(const LayerSpec& spec) {
  Json j{{"kind", kind_name(spec.kind)}};
  switch (spec.kind) {
    case LayerKind::Dense:
      j["in"] = spec.in;
      j["out"] = spec.out;
      break;
    case LayerKind::Conv:
      j["in"] = spec.in;
      j["out"] = spec.out;
      j["kernel"] = {spec.kernel_h, spec.kernel_w};
      break;
    case LayerKind::Maxout:
      j["group"] = spec.group;
      break;
    default:
      break;
  }
  return j;
}

inline LayerSpec layer_from_json(const Json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a layer object");
  const auto kind = parse_kind(detail::get_field<std::string>(j, "kind", where));
  switch (kind) {
    case LayerKind::Dense:
      detail::require_known_keys(j, {"kind", "in", "out"}, where);
      return LayerSpec::dense(detail::get_positive(j, "in", where),
                              detail::get_positive(j, "out", where));
    case LayerKind::Conv: {
      detail::require_known_keys(j, {"kind", "in", "out", "kernel"}, where);
      const auto kernel = detail::get_field<std::vector<std::size_t>>(j, "kernel", where);
      if (kernel.size() != 2 || kernel[0] == 0 || kernel[1] == 0) {
        throw ConfigError(where + ": field 'kernel' must be [kh, kw] with positive sizes");
      }
      return LayerSpec::conv(detail::get_positive(j, "in", where),
                             detail::get_positive(j, "out", where), kernel[0], kernel[1]);
    }
    case LayerKind::Maxout: {
      detail::require_known_keys(j, {"kind", "group"}, where);
      const auto group = detail::get_field_or<std::size_t>(j, "group", 2, where);
      if (group < 2) throw ConfigError(where + ": field 'group' must be at least 2");
      return LayerSpec::maxout(group);
    }
    default:
      detail::require_known_keys(j, {"kind"}, where);
      return LayerSpec{kind};
  }
}

// Architecture object: {"input_shape": [...], "feature": [...], "head": [...]}.
inline SplitNetwork network_from_json(const Json& j, const std::string& where = "architecture") {
  detail::require_known_keys(j, {"input_shape", "feature", "head"}, where);
  const auto input = detail::get_field<std::vector<std::size_t>>(j, "input_shape", where);
  auto parse_list = [&](const char* key) {
    std::vector<LayerSpec> out;
    if (!j.contains(key)) return out;
    if (!j.at(key).is_array()) throw ConfigError(where + ": field '" + key + "' must be an array");
    for (std::size_t i = 0; i < j.at(key).size(); ++i) {
      out.push_back(layer_from_json(j.at(key)[i], where + "." + key + "[" + std::to_string(i) + "]"));
    }
    return out;
  };
  SplitNetwork net(Shape(input.begin(), input.end()), parse_list("feature"), parse_list("head"));
  validate_split(net);
  return net;
}

inline Json network_to_json(const SplitNetwork& net) {
  Json feature = Json::array(), head = Json::array();
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    (i < net.split_index() ? feature : head).push_back(layer_to_json(net.layer(i)));
  }
  return {{"input_shape", net.input_shape()}, {"feature", feature}, {"head", head}};
}

// --- checkpoints -------------------------------------------------------------------

struct Checkpoint {
  SplitNetwork net;
  std::uint64_t base_seed = 0;
};

inline std::string encode_checkpoint(const SplitNetwork& net, std::uint64_t base_seed) {
  validate_split(net);
  Json tensors = Json::array();
  std::string weights;
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    const auto& p = net.params(i);
    for (const auto& [role, t] : {std::pair<const char*, const Tensor*>{"weight", &p.weight},
                                  std::pair<const char*, const Tensor*>{"bias", &p.bias}}) {
      if (t->empty()) continue;
      tensors.push_back({{"layer", i}, {"role", role}, {"shape", t->shape()},
                         {"offset", weights.size()}});
      for (double v : t->data()) detail::put_f32(weights, v);
    }
  }
  Json header = network_to_json(net);
  header["split_index"] = net.split_index();
  header["tensors"] = tensors;
  header["base_seed"] = base_seed;
  header["dtype"] = "float32_le";
  const std::string text = header.dump();
  std::string out = "OPN1";
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  detail::put_le<std::uint64_t>(out, text.size());
  out += text;
  out += weights;
  return out;
}

inline Checkpoint decode_checkpoint(const std::string& bytes, const std::string& what = "checkpoint") {
  detail::ByteReader in(bytes, what);
  if (in.get_bytes(4) != "OPN1") throw IoError(what + ": bad magic, not an OPN1 checkpoint");
  const auto version = in.get_le<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw IoError(what + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto length = in.get_le<std::uint64_t>();
  Json header;
  try {
    header = Json::parse(in.get_bytes(length));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(what + ": malformed header: " + e.what());
  }
  Checkpoint cp;
  try {
    Json arch{{"input_shape", header.at("input_shape")}};
    const std::size_t split = header.at("split_index").get<std::size_t>();
    Json feature = Json::array(), head = Json::array();
    const Json all = header.at("feature");
    for (const auto& l : all) feature.push_back(l);
    for (const auto& l : header.at("head")) head.push_back(l);
    if (feature.size() != split) throw IoError(what + ": split index disagrees with layers");
    arch["feature"] = feature;
    arch["head"] = head;
    cp.net = network_from_json(arch, what);
    cp.base_seed = header.at("base_seed").get<std::uint64_t>();
    if (header.at("dtype").get<std::string>() != "float32_le") {
      throw IoError(what + ": unsupported dtype");
    }
    const std::string block = in.get_bytes(in.remaining());
    std::size_t expected = 0;
    for (const auto& t : header.at("tensors")) {
      const auto layer = t.at("layer").get<std::size_t>();
      const auto role = t.at("role").get<std::string>();
      const auto shape = t.at("shape").get<Shape>();
      const auto offset = t.at("offset").get<std::size_t>();
      if (layer >= cp.net.layer_count() || (role != "weight" && role != "bias")) {
        throw IoError(what + ": bad tensor entry");
      }
      Tensor& dst = role == "weight" ? cp.net.params(layer).weight : cp.net.params(layer).bias;
      if (dst.shape() != shape || offset != expected || offset + 4 * dst.size() > block.size()) {
        throw IoError(what + ": tensor " + role + " of layer " + std::to_string(layer) +
                      " has inconsistent shape or offset");
      }
      detail::ByteReader data(block, what);
      data.get_bytes(offset);
      for (auto& v : dst.data()) v = data.get_f32();
      expected += 4 * dst.size();
    }
    std::size_t stored = 0;
    for (const auto& p : cp.net.parameters()) stored += 4 * (p.weight.size() + p.bias.size());
    if (expected != stored || expected != block.size()) {
      throw IoError(what + ": missing or trailing weight data");
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(what + ": malformed header: " + e.what());
  } catch (const ConfigError& e) {
    throw IoError(what + ": " + e.what());
  }
  return cp;
}

inline void save_checkpoint(const std::filesystem::path& path, const SplitNetwork& net,
                            std::uint64_t base_seed) {
  write_file(path, encode_checkpoint(net, base_seed));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path), "checkpoint '" + path.string() + "'");
}

// --- datasets ------------------------------------------------------------------------

inline std::filesystem::path labels_path_for(const std::filesystem::path& data_path) {
  auto p = data_path;
  p.replace_extension(".labels.csv");
  return p;
}

inline std::string encode_samples(const std::vector<Tensor>& inputs) {
  if (inputs.empty()) throw IoError("dataset has no samples");
  const Shape& shape = inputs.front().shape();
  std::string out = "OPT1";
  detail::put_le<std::uint32_t>(out, kDatasetVersion);
  detail::put_le<std::uint64_t>(out, inputs.size());
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
  for (auto d : shape) detail::put_le<std::uint64_t>(out, d);
  for (const auto& x : inputs) {
    if (x.shape() != shape) throw DimensionError("dataset samples differ in shape");
    for (double v : x.data()) detail::put_f32(out, v);
  }
  return out;
}

inline std::vector<Tensor> decode_samples(const std::string& bytes, const std::string& what) {
  detail::ByteReader in(bytes, what);
  if (in.get_bytes(4) != "OPT1") throw IoError(what + ": bad magic, not an OPT1 dataset");
  const auto version = in.get_le<std::uint32_t>();
  if (version != kDatasetVersion) {
    throw IoError(what + ": unsupported dataset version " + std::to_string(version));
  }
  const auto count = in.get_le<std::uint64_t>();
  const auto rank = in.get_le<std::uint32_t>();
  Shape shape;
  for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(in.get_le<std::uint64_t>());
  if (count == 0 || shape.empty() || shape_size(shape) == 0) throw IoError(what + ": empty dataset");
  if (in.remaining() != count * shape_size(shape) * 4) throw IoError(what + ": size mismatch");
  std::vector<Tensor> inputs;
  inputs.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    Tensor x(shape);
    for (auto& v : x.data()) v = in.get_f32();
    inputs.push_back(std::move(x));
  }
  return inputs;
}

inline std::string encode_labels(const Tensor& labels) {
  std::string out = "sample_index";
  for (std::size_t c = 0; c < labels.dim(1); ++c) out += ",label_" + std::to_string(c);
  out += "\n";
  for (std::size_t i = 0; i < labels.dim(0); ++i) {
    out += std::to_string(i);
    for (std::size_t c = 0; c < labels.dim(1); ++c) {
      const double v = labels.at(i, c);
      if (v != 0.0 && v != 1.0) throw LabelError("labels must be binary");
      out += v == 1.0 ? ",1" : ",0";
    }
    out += "\n";
  }
  return out;
}

inline Tensor decode_labels(const std::string& text, const std::string& what) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("sample_index", 0) != 0) {
    throw IoError(what + ": missing header row");
  }
  const auto classes = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  if (classes == 0) throw IoError(what + ": no label columns");
  std::vector<double> values;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream cells(line);
    std::string cell;
    std::getline(cells, cell, ',');
    if (cell != std::to_string(row)) throw IoError(what + ": row " + std::to_string(row) + " out of order");
    std::size_t n = 0;
    while (std::getline(cells, cell, ',')) {
      if (cell != "0" && cell != "1") throw IoError(what + ": non-binary label in row " + std::to_string(row));
      values.push_back(cell == "1" ? 1.0 : 0.0);
      ++n;
    }
    if (n != classes) throw IoError(what + ": row " + std::to_string(row) + " has wrong column count");
    ++row;
  }
  if (row == 0) throw IoError(what + ": no label rows");
  return Tensor({row, classes}, std::move(values));
}

inline void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  write_file(path, encode_samples(data.inputs));
  write_file(labels_path_for(path), encode_labels(data.labels));
}

inline Dataset load_dataset(const std::filesystem::path& path) {
  Dataset ds;
  ds.inputs = decode_samples(read_file(path), "dataset '" + path.string() + "'");
  const auto lpath = labels_path_for(path);
  ds.labels = decode_labels(read_file(lpath), "labels '" + lpath.string() + "'");
  if (ds.labels.dim(0) != ds.inputs.size()) {
    throw IoError("dataset '" + path.string() + "' has " + std::to_string(ds.inputs.size()) +
                  " samples but " + std::to_string(ds.labels.dim(0)) + " label rows");
  }
  return ds;
}

// --- training configuration ----------------------------------------------------------

struct TrainJob {
  SplitNetwork net;
  TrainConfig train;
  std::filesystem::path train_data;
};

inline TrainConfig train_config_from_json(const Json& j, const std::string& where = "training") {
  detail::require_known_keys(j, {"learning_rate", "weight_decay", "batch_size", "iterations",
                                 "lr_drop", "dropout_rate", "loss", "noise_sigma",
                                 "max_translation"},
                             where);
  TrainConfig cfg;
  cfg.learning_rate = detail::get_field_or<double>(j, "learning_rate", cfg.learning_rate, where);
  cfg.weight_decay = detail::get_field_or<double>(j, "weight_decay", cfg.weight_decay, where);
  if (j.contains("batch_size")) cfg.batch_size = detail::get_positive(j, "batch_size", where);
  if (j.contains("iterations")) {
    if (!j.at("iterations").is_number_unsigned()) {
      throw ConfigError(where + ": field 'iterations' must be a nonnegative integer");
    }
    cfg.iterations = j.at("iterations").get<std::size_t>();
  }
  cfg.dropout_rate = detail::get_field_or<double>(j, "dropout_rate", cfg.dropout_rate, where);
  cfg.loss = parse_loss(detail::get_field_or<std::string>(j, "loss", "cross_entropy", where));
  cfg.augment.noise_sigma = detail::get_field_or<double>(j, "noise_sigma", 0.0, where);
  cfg.augment.max_translation = detail::get_field_or<double>(j, "max_translation", 0.0, where);
  if (j.contains("lr_drop")) {
    if (!j.at("lr_drop").is_array()) throw ConfigError(where + ": field 'lr_drop' must be an array");
    for (std::size_t i = 0; i < j.at("lr_drop").size(); ++i) {
      const auto& d = j.at("lr_drop")[i];
      const std::string w = where + ".lr_drop[" + std::to_string(i) + "]";
      detail::require_known_keys(d, {"iteration", "factor"}, w);
      cfg.lr_drops.push_back({detail::get_field<std::size_t>(d, "iteration", w),
                              detail::get_field<double>(d, "factor", w)});
    }
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return cfg;
}

// {"architecture": {...}, "training": {...}, "train_data": "path"}; relative
// data paths resolve against the directory of the config file.
inline TrainJob train_job_from_json(const Json& j, const std::filesystem::path& base_dir) {
  detail::require_known_keys(j, {"architecture", "training", "train_data"}, "config");
  TrainJob job;
  if (!j.contains("architecture")) throw ConfigError("config: missing field 'architecture'");
  job.net = network_from_json(j.at("architecture"));
  job.train = train_config_from_json(j.contains("training") ? j.at("training") : Json::object());
  const auto data = std::filesystem::path(detail::get_field<std::string>(j, "train_data", "config"));
  job.train_data = data.is_absolute() ? data : base_dir / data;
  return job;
}

inline TrainJob load_train_job(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
  return train_job_from_json(j, path.parent_path());
}

// --- evaluation reports --------------------------------------------------------------

namespace detail {

inline Json matrix_to_json(const Tensor& m) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < m.dim(0); ++i) rows.push_back(m.row(i));
  return rows;
}

inline Tensor matrix_from_json(const Json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw IoError(what + ": expected a nonempty matrix");
  const std::size_t cols = j[0].size();
  std::vector<double> values;
  for (const auto& row : j) {
    if (!row.is_array() || row.size() != cols || cols == 0) throw IoError(what + ": ragged matrix");
    for (const auto& v : row) values.push_back(v.get<double>());
  }
  return Tensor({j.size(), cols}, std::move(values));
}

inline Json aggregates_to_json(const Aggregates& a) {
  Json j = Json::object();
  if (!a.top_k_error.empty()) {
    Json tk = Json::object();
    for (const auto& [k, v] : a.top_k_error) tk[std::to_string(k)] = v;
    j["top_k_error"] = tk;
  }
  if (a.map) {
    Json ap = Json::array();
    for (const auto& v : a.per_class_ap) ap.push_back(v ? Json(*v) : Json(nullptr));
    j["per_class_ap"] = ap;
    j["map"] = *a.map;
  }
  return j;
}

inline Aggregates aggregates_from_json(const Json& j) {
  Aggregates a;
  if (j.contains("top_k_error")) {
    for (const auto& [k, v] : j.at("top_k_error").items()) {
      a.top_k_error[std::stoul(k)] = v.get<double>();
    }
  }
  if (j.contains("map")) {
    a.map = j.at("map").get<double>();
    for (const auto& v : j.at("per_class_ap")) {
      a.per_class_ap.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
    }
  }
  return a;
}

inline bool close(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

}  // namespace detail

inline Json report_to_json(const EvalReport& r) {
  const auto& m = r.metadata;
  Json j{{"schema", kReportSchema},
         {"metadata",
          {{"mode", m.mode}, {"T", m.T}, {"p_drop", m.p_drop}, {"alpha", m.alpha},
           {"seed", m.seed}, {"head", m.head}, {"tau_mode", m.tau_mode},
           {"tau_inverse", m.tau_inverse}, {"label_hash", m.label_hash},
           {"samples", r.scores.dim(0)}, {"classes", r.scores.dim(1)}}},
         {"scores", detail::matrix_to_json(r.scores)},
         {"labels", detail::matrix_to_json(r.labels)},
         {"aggregates", detail::aggregates_to_json(r.aggregates)}};
  if (!r.correct.empty()) j["per_sample_correct"] = r.correct;
  return j;
}

// Tolerance for aggregates recomputed from per-sample data.
inline constexpr double kAggregateTolerance = 1e-12;

// Parses a report and verifies that its aggregates, correctness flags and
// label hash agree with its per-sample data.
inline EvalReport report_from_json(const Json& j, const std::string& what = "report") {
  EvalReport r;
  try {
    if (j.at("schema").get<std::string>() != kReportSchema) throw IoError(what + ": unknown schema");
    const auto& m = j.at("metadata");
    r.metadata.mode = m.at("mode").get<std::string>();
    r.metadata.T = m.at("T").get<std::size_t>();
    r.metadata.p_drop = m.at("p_drop").get<double>();
    r.metadata.alpha = m.at("alpha").get<double>();
    r.metadata.seed = m.at("seed").get<std::uint64_t>();
    r.metadata.head = m.at("head").get<std::string>();
    r.metadata.tau_mode = m.at("tau_mode").get<std::string>();
    r.metadata.tau_inverse = m.at("tau_inverse").get<double>();
    r.metadata.label_hash = m.at("label_hash").get<std::string>();
    r.scores = detail::matrix_from_json(j.at("scores"), what + " scores");
    r.labels = detail::matrix_from_json(j.at("labels"), what + " labels");
    if (j.contains("per_sample_correct")) r.correct = j.at("per_sample_correct").get<std::vector<int>>();
    r.aggregates = detail::aggregates_from_json(j.at("aggregates"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(what + ": malformed report: " + e.what());
  }
  if (r.scores.shape() != r.labels.shape()) throw IoError(what + ": scores/labels shape mismatch");
  if (label_hash(r.labels) != r.metadata.label_hash) throw IoError(what + ": label hash mismatch");
  const bool classification = r.metadata.head == "softmax";
  const Aggregates fresh = compute_aggregates(r.scores, r.labels, classification);
  bool ok = fresh.top_k_error.size() == r.aggregates.top_k_error.size() &&
            fresh.per_class_ap.size() == r.aggregates.per_class_ap.size() &&
            fresh.map.has_value() == r.aggregates.map.has_value();
  for (const auto& [k, v] : fresh.top_k_error) {
    ok = ok && r.aggregates.top_k_error.count(k) &&
         detail::close(v, r.aggregates.top_k_error.at(k), kAggregateTolerance);
  }
  for (std::size_t c = 0; ok && c < fresh.per_class_ap.size(); ++c) {
    const auto& a = fresh.per_class_ap[c];
    const auto& b = r.aggregates.per_class_ap[c];
    ok = a.has_value() == b.has_value() && (!a || detail::close(*a, *b, kAggregateTolerance));
  }
  if (ok && fresh.map) ok = detail::close(*fresh.map, *r.aggregates.map, kAggregateTolerance);
  if (ok && classification) ok = r.correct == top_k_correct(r.scores, r.labels, 1);
  if (!ok) throw IoError(what + ": aggregates do not match per-sample data");
  return r;
}

inline void save_report(const std::filesystem::path& path, const EvalReport& r) {
  write_file(path, report_to_json(r).dump(1) + "\n");
}

inline EvalReport load_report(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("report '" + path.string() + "': " + e.what());
  }
  return report_from_json(j, "report '" + path.string() + "'");
}

// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

}  // namespace mcdrop
