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

// Implementations of the command line subcommands. Each command takes a plain
// options struct so the tool and the tests drive the same code.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mcdrop/datasets.hpp"
#include "mcdrop/errors.hpp"
#include "mcdrop/io.hpp"
#include "mcdrop/metrics.hpp"
#include "mcdrop/network.hpp"
#include "mcdrop/training.hpp"
#include "mcdrop/uncertainty.hpp"

namespace mcdrop {

// --- gen-data ---

struct GenDataOptions {
  DatasetSpec spec;
  std::filesystem::path out_dir;
};

// Writes train.opt / test.opt and their label CSVs into out_dir.
inline std::pair<Dataset, Dataset> cmd_gen_data(const GenDataOptions& opt) {
  auto [train, test] = generate(opt.spec);
  std::error_code ec;
  std::filesystem::create_directories(opt.out_dir, ec);
  if (ec) throw IoError("cannot create directory '" + opt.out_dir.string() + "'");
  save_dataset(opt.out_dir / "train.opt", train);
  save_dataset(opt.out_dir / "test.opt", test);
  return {std::move(train), std::move(test)};
}

// --- train ---

struct TrainOptions {
  std::filesystem::path config;
  std::filesystem::path out;
  std::optional<std::filesystem::path> loss_csv;
  std::uint64_t seed = 0;
};

// Trains and saves the network. Weights are rounded to float32 before saving so
// the returned network evaluates exactly like the reloaded checkpoint.
inline SplitNetwork cmd_train(const TrainOptions& opt) {
  TrainJob job = load_train_job(opt.config);
  const Dataset data = load_dataset(job.train_data);
  job.train.base_seed = opt.seed;
  initialize_weights(job.net, opt.seed);
  auto result = train(std::move(job.net), data, job.train);
  round_to_float(result.net);
  save_checkpoint(opt.out, result.net, opt.seed);
  if (opt.loss_csv) {
    std::ostringstream csv;
    write_loss_csv(csv, result.loss_curve);
    write_file(*opt.loss_csv, csv.str());
  }
  return std::move(result.net);
}

// --- eval ---

inline std::string head_name(const SplitNetwork& net) {
  const auto act = net.output_activation();
  if (act == LayerKind::Softmax) return "softmax";
  if (act == LayerKind::Sigmoid) return "sigmoid";
  throw ConfigError("evaluation needs a network ending in softmax or sigmoid");
}

// Scores every sample of `data`. Sample i draws its dropout masks from the
// child seed mix_seed(seed, i), so samples are independent of each other and
// of the evaluation order.
inline EvalReport evaluate(const SplitNetwork& net, const Dataset& data, const ScoringConfig& cfg,
                           std::uint64_t seed) {
  validate_split(net);
  const std::string head = head_name(net);
  const std::size_t classes = shape_size(net.output_shape());
  if (data.labels.dim(1) != classes) {
    throw DimensionError("model has " + std::to_string(classes) + " outputs but data has " +
                         std::to_string(data.labels.dim(1)) + " label columns");
  }
  if (cfg.mode != BehaviorMode::Plain && cfg.T == 0) throw ConfigError("T must be at least 1");
  std::vector<double> scores;
  scores.reserve(data.size() * classes);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Tensor s = score_sample(net, data.inputs[i], cfg, mix_seed(seed, i));
    scores.insert(scores.end(), s.data().begin(), s.data().end());
  }
  EvalReport r;
  r.scores = Tensor({data.size(), classes}, std::move(scores));
  r.labels = data.labels;
  const bool classification = head == "softmax";
  r.aggregates = compute_aggregates(r.scores, r.labels, classification);
  if (classification) r.correct = top_k_correct(r.scores, r.labels, 1);
  auto& m = r.metadata;
  m.mode = mode_name(cfg.mode);
  m.T = cfg.mode == BehaviorMode::Plain ? 0 : cfg.T;
  m.p_drop = cfg.mode == BehaviorMode::Plain ? 0.0 : cfg.p_drop;
  m.alpha = cfg.confidence.alpha;
  m.seed = seed;
  m.head = head;
  m.tau_mode = tau_mode_name(cfg.tau_mode);
  m.tau_inverse = (cfg.tau_mode != TauMode::Empirical && cfg.tau) ? 1.0 / *cfg.tau : 0.0;
  m.label_hash = label_hash(r.labels);
  return r;
}

struct EvalOptions {
  std::filesystem::path model;
  std::filesystem::path data;
  ScoringConfig scoring;
  std::uint64_t seed = 0;
  std::filesystem::path report;
};

inline EvalReport cmd_eval(const EvalOptions& opt) {
  const auto cp = load_checkpoint(opt.model);
  const auto data = load_dataset(opt.data);
  auto report = evaluate(cp.net, data, opt.scoring, opt.seed);
  save_report(opt.report, report);
  return report;
}

// --- sweep ---

struct SweepCell {
  BehaviorMode mode = BehaviorMode::Plain;
  std::size_t T = 0;
  double p_drop = 0.0;
};

struct SweepOptions {
  std::filesystem::path model;
  std::filesystem::path data;
  std::vector<BehaviorMode> modes;
  std::vector<std::size_t> Ts;
  std::vector<double> p_drops;
  double alpha = 0.01;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  unsigned threads = 1;
};

// One plain baseline cell followed by the cartesian grid in p_drop, T, mode
// order (the row order of the classic results tables).
inline std::vector<SweepCell> sweep_grid(const std::vector<BehaviorMode>& modes,
                                         const std::vector<std::size_t>& Ts,
                                         const std::vector<double>& p_drops) {
  std::vector<BehaviorMode> stochastic;
  for (auto m : modes) {
    if (m != BehaviorMode::Plain) stochastic.push_back(m);
  }
  if (stochastic.empty() || Ts.empty() || p_drops.empty()) {
    throw ConfigError("sweep grid is empty (need at least one non-plain mode, T and p_drop)");
  }
  std::vector<SweepCell> cells{{BehaviorMode::Plain, 0, 0.0}};
  for (double p : p_drops) {
    for (std::size_t T : Ts) {
      for (auto m : stochastic) cells.push_back({m, T, p});
    }
  }
  return cells;
}

inline constexpr const char* kSweepHeader =
    "mode,T,p_drop,alpha,seed,top1_error,top3_error,top5_error,map,status\n";

inline std::string sweep_row(const SweepCell& cell, double alpha, std::uint64_t seed,
                             const Aggregates* agg, const std::string& status) {
  const bool plain = cell.mode == BehaviorMode::Plain;
  std::string row = mode_name(cell.mode) + "," + (plain ? "" : std::to_string(cell.T)) + "," +
                    (plain ? "" : format_double(cell.p_drop)) + "," + format_double(alpha) + "," +
                    std::to_string(seed);
  for (std::size_t k : {1, 3, 5}) {
    row += ",";
    if (agg && agg->top_k_error.count(k)) row += format_double(agg->top_k_error.at(k));
  }
  row += ",";
  if (agg && agg->map) row += format_double(*agg->map);
  return row + "," + status + "\n";
}

struct SweepResult {
  std::vector<SweepCell> cells;
  std::vector<Aggregates> aggregates;
  std::vector<double> runtime_ms;
};

// Evaluates every cell of the grid, writing the metrics CSV to `out` and
// wall-clock times to `<out>.timing.csv`. On failure the rows finished so far
// are written, followed by a row whose status starts with "failed".
inline SweepResult cmd_sweep(const SweepOptions& opt) {
  const auto cells = sweep_grid(opt.modes, opt.Ts, opt.p_drops);
  const auto cp = load_checkpoint(opt.model);
  const auto data = load_dataset(opt.data);
  const auto conf = ConfidenceConfig::from_alpha(opt.alpha);
  SweepResult result;
  std::string csv = kSweepHeader;
  std::string timing = "mode,T,p_drop,runtime_ms\n";
  auto flush = [&] {
    write_file(opt.out, csv);
    auto tpath = opt.out;
    tpath += ".timing.csv";
    write_file(tpath, timing);
  };
  for (const auto& cell : cells) {
    ScoringConfig sc;
    sc.mode = cell.mode;
    sc.T = cell.T;
    sc.p_drop = cell.p_drop;
    sc.confidence = conf;
    sc.threads = opt.threads;
    try {
      const auto start = std::chrono::steady_clock::now();
      const auto report = evaluate(cp.net, data, sc, opt.seed);
      const double ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      csv += sweep_row(cell, opt.alpha, opt.seed, &report.aggregates, "ok");
      timing += mode_name(cell.mode) + "," + std::to_string(cell.T) + "," +
                format_double(cell.p_drop) + "," + format_double(ms) + "\n";
      result.cells.push_back(cell);
      result.aggregates.push_back(report.aggregates);
      result.runtime_ms.push_back(ms);
    } catch (const std::exception& e) {
      std::string why = e.what();
      std::replace(why.begin(), why.end(), ',', ';');
      std::replace(why.begin(), why.end(), '\n', ' ');
      csv += sweep_row(cell, opt.alpha, opt.seed, nullptr, "failed: " + why);
      flush();
      throw;
    }
  }
  flush();
  return result;
}

// --- significance ---

struct SignificanceOptions {
  std::filesystem::path report_a;
  std::filesystem::path report_b;
  PermutationConfig permutation;
  std::optional<std::filesystem::path> out;
  unsigned threads = 1;
};

inline constexpr double kSignificanceLevel = 0.01;

inline Json significance_json(const PermutationResult& r) {
  return {{"statistic", r.statistic},
          {"n", r.n},
          {"at_least_as_extreme", r.at_least_as_extreme},
          {"p_value", r.p_value},
          {"seed", r.seed},
          {"level", kSignificanceLevel},
          {"significant", r.p_value < kSignificanceLevel}};
}

inline PermutationResult compare_reports(const EvalReport& a, const EvalReport& b,
                                         const PermutationConfig& cfg, unsigned threads = 1) {
  if (a.correct.empty() || b.correct.empty()) {
    throw ComparabilityError("significance needs per-sample correctness (softmax reports)");
  }
  if (a.correct.size() != b.correct.size()) {
    throw ComparabilityError("reports cover " + std::to_string(a.correct.size()) + " and " +
                             std::to_string(b.correct.size()) + " samples");
  }
  if (a.metadata.label_hash != b.metadata.label_hash) {
    throw ComparabilityError("reports were produced on different test sets (label hash " +
                             a.metadata.label_hash + " vs " + b.metadata.label_hash + ")");
  }
  return paired_permutation_test(a.correct, b.correct, cfg, threads);
}

inline Json cmd_significance(const SignificanceOptions& opt) {
  const auto a = load_report(opt.report_a);
  const auto b = load_report(opt.report_b);
  const Json verdict = significance_json(compare_reports(a, b, opt.permutation, opt.threads));
  if (opt.out) write_file(*opt.out, verdict.dump(1) + "\n");
  return verdict;
}

// --- bench-cache ---

struct BenchOptions {
  std::filesystem::path model;
  std::optional<std::filesystem::path> data;
  std::vector<std::size_t> Ts{1, 10, 100};
  std::size_t repetitions = 5;
  std::size_t samples = 4;
  double p_drop = 0.5;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> out;
};

struct BenchRow {
  std::size_t T = 0;
  double naive_ms = 0.0;
  double fast_ms = 0.0;
  double speedup() const { return fast_ms > 0.0 ? naive_ms / fast_ms : 0.0; }
};

inline std::vector<Tensor> bench_inputs(const SplitNetwork& net, std::size_t count,
                                        std::uint64_t seed) {
  std::vector<Tensor> inputs;
  for (std::size_t i = 0; i < count; ++i) {
    CounterStream rng(seed, Stream::Bench, static_cast<std::uint32_t>(i));
    Tensor x(net.input_shape());
    for (auto& v : x.data()) v = rng.uniform();
    inputs.push_back(std::move(x));
  }
  return inputs;
}

// Times T full passes per input (naive) against one feature pass plus T head
// passes (fast). Outputs of both paths are compared bit for bit first.
inline std::vector<BenchRow> bench_cache(const SplitNetwork& net, const std::vector<Tensor>& inputs,
                                         const std::vector<std::size_t>& Ts,
                                         std::size_t repetitions, double p_drop,
                                         std::uint64_t seed) {
  validate_split(net);
  if (net.split_index() == 0) throw ConfigError("bench-cache needs a nonempty feature part");
  if (inputs.empty() || Ts.empty() || repetitions == 0) {
    throw ConfigError("bench-cache needs inputs, at least one T and one repetition");
  }
  const double keep = 1.0 - p_drop;
  auto naive = [&](std::size_t T, std::vector<Tensor>* out) {
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      for (std::size_t t = 0; t < T; ++t) {
        const auto mask = make_dropout_mask(net, keep, mix_seed(seed, i), static_cast<std::uint32_t>(t));
        Tensor y = forward_full(net, inputs[i], mask);
        if (out) out->push_back(std::move(y));
      }
    }
  };
  auto fast = [&](std::size_t T, std::vector<Tensor>* out) {
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const Tensor features = compute_features(net, inputs[i]);
      for (std::size_t t = 0; t < T; ++t) {
        const auto mask = make_dropout_mask(net, keep, mix_seed(seed, i), static_cast<std::uint32_t>(t));
        Tensor y = forward_head(net, features, mask);
        if (out) out->push_back(std::move(y));
      }
    }
  };
  auto median_ms = [&](auto&& fn, std::size_t T) {
    std::vector<double> times;
    for (std::size_t r = 0; r < repetitions; ++r) {
      const auto start = std::chrono::steady_clock::now();
      fn(T, nullptr);
      times.push_back(
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
    }
    std::sort(times.begin(), times.end());
    const std::size_t n = times.size();
    return n % 2 ? times[n / 2] : 0.5 * (times[n / 2 - 1] + times[n / 2]);
  };
  std::vector<BenchRow> rows;
  for (std::size_t T : Ts) {
    if (T == 0) throw ConfigError("bench-cache: T must be at least 1");
    std::vector<Tensor> a, b;
    naive(T, &a);
    fast(T, &b);
    if (a != b) {
      throw CorrectnessError("bench-cache: cached and uncached outputs differ at T = " +
                             std::to_string(T));
    }
    rows.push_back({T, median_ms(naive, T), median_ms(fast, T)});
  }
  return rows;
}

inline std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::string csv = "T,naive_ms,fast_ms,speedup\n";
  for (const auto& r : rows) {
    csv += std::to_string(r.T) + "," + format_double(r.naive_ms) + "," + format_double(r.fast_ms) +
           "," + format_double(r.speedup()) + "\n";
  }
  return csv;
}

inline std::vector<BenchRow> cmd_bench_cache(const BenchOptions& opt) {
  const auto cp = load_checkpoint(opt.model);
  std::vector<Tensor> inputs;
  if (opt.data) {
    auto data = load_dataset(*opt.data);
    const std::size_t n = std::min(opt.samples, data.size());
    inputs.assign(data.inputs.begin(), data.inputs.begin() + static_cast<std::ptrdiff_t>(n));
  } else {
    inputs = bench_inputs(cp.net, opt.samples, opt.seed);
  }
  auto rows = bench_cache(cp.net, inputs, opt.Ts, opt.repetitions, opt.p_drop, opt.seed);
  if (opt.out) write_file(*opt.out, bench_csv(rows));
  return rows;
}

}  // namespace mcdrop
