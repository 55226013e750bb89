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

// mcdrop command line tool: gen-data, train, eval, sweep, significance,
// bench-cache. Exit codes: 0 success, 1 usage/config error, 2 data or
// correctness error.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mcdrop/commands.hpp"

namespace {

using mcdrop::BehaviorMode;

std::vector<BehaviorMode> parse_modes(const std::vector<std::string>& names) {
  std::vector<BehaviorMode> modes;
  for (const auto& n : names) modes.push_back(mcdrop::parse_mode(n));
  return modes;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte-Carlo dropout inference with optimistic and pessimistic scoring"};
  app.require_subcommand(1);

  // gen-data
  mcdrop::GenDataOptions gen;
  std::string gen_kind = "blobs";
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic train/test dataset");
  gen_cmd->add_option("--kind", gen_kind, "blobs or patches")
      ->check(CLI::IsMember({"blobs", "patches"}));
  gen_cmd->add_option("--classes", gen.spec.classes, "Number of classes");
  gen_cmd->add_option("--dim", gen.spec.dim, "Blobs: feature dimension");
  gen_cmd->add_option("--spread", gen.spec.spread, "Blobs: standard deviation around centers");
  gen_cmd->add_option("--image-size", gen.spec.image_size, "Patches: image side length");
  gen_cmd->add_option("--max-objects", gen.spec.max_objects, "Patches: maximum glyphs per image");
  gen_cmd->add_option("--noise", gen.spec.background_noise, "Patches: background noise sigma");
  gen_cmd->add_option("--train-count", gen.spec.train_count, "Training samples");
  gen_cmd->add_option("--test-count", gen.spec.test_count, "Test samples");
  gen_cmd->add_option("--seed", gen.spec.seed, "Generator seed")->required();
  gen_cmd->add_option("--out-dir", gen_out, "Output directory")->required();

  // train
  mcdrop::TrainOptions tr;
  std::string tr_config, tr_out, tr_loss;
  auto* train_cmd = app.add_subcommand("train", "Train a network from a JSON config");
  train_cmd->add_option("--config", tr_config, "Config JSON")->required();
  train_cmd->add_option("--seed", tr.seed, "Initialization/training seed")->required();
  train_cmd->add_option("--out", tr_out, "Checkpoint path (.opn)")->required();
  train_cmd->add_option("--loss-csv", tr_loss, "Loss curve CSV");

  // eval
  mcdrop::EvalOptions ev;
  std::string ev_model, ev_data, ev_report, ev_mode = "mean", ev_tau_mode = "empirical";
  double ev_alpha = 0.01;
  mcdrop::PrecisionParams ev_precision;
  double ev_tau = 0.0;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model on a dataset");
  eval_cmd->add_option("--model", ev_model, "Checkpoint")->required();
  eval_cmd->add_option("--data", ev_data, "Dataset (.opt)")->required();
  eval_cmd->add_option("--mode", ev_mode, "plain, mean, optimistic or pessimistic");
  eval_cmd->add_option("--T", ev.scoring.T, "Number of stochastic passes");
  eval_cmd->add_option("--p-drop", ev.scoring.p_drop, "Test-time dropout rate");
  eval_cmd->add_option("--alpha", ev_alpha, "Confidence level alpha");
  eval_cmd->add_option("--seed", ev.seed, "Dropout seed")->required();
  eval_cmd->add_option("--report", ev_report, "Report JSON path")->required();
  eval_cmd->add_option("--tau-mode", ev_tau_mode, "empirical, variance_offset or literal");
  auto* tau_opt = eval_cmd->add_option("--tau", ev_tau, "Model precision tau");
  auto* keep_opt = eval_cmd->add_option("--keep-prob", ev_precision.keep_prob, "tau: keep probability p");
  eval_cmd->add_option("--length-scale-sq", ev_precision.length_scale_sq, "tau: prior length scale l^2");
  eval_cmd->add_option("--sample-count", ev_precision.sample_count, "tau: training samples N");
  eval_cmd->add_option("--weight-decay", ev_precision.weight_decay, "tau: weight decay lambda");
  eval_cmd->add_option("--threads", ev.scoring.threads, "Worker threads for the passes");
  tau_opt->excludes(keep_opt);

  // sweep
  mcdrop::SweepOptions sw;
  std::string sw_model, sw_data, sw_out;
  std::vector<std::string> sw_modes{"mean", "optimistic", "pessimistic"};
  sw.Ts = {10, 100};
  sw.p_drops = {0.1, 0.5};
  auto* sweep_cmd = app.add_subcommand("sweep", "Evaluate a grid of modes, T and p_drop");
  sweep_cmd->add_option("--model", sw_model, "Checkpoint")->required();
  sweep_cmd->add_option("--data", sw_data, "Dataset (.opt)")->required();
  sweep_cmd->add_option("--modes", sw_modes, "Comma-separated modes")->delimiter(',');
  sweep_cmd->add_option("--T", sw.Ts, "Comma-separated T values")->delimiter(',');
  sweep_cmd->add_option("--p-drop", sw.p_drops, "Comma-separated dropout rates")->delimiter(',');
  sweep_cmd->add_option("--alpha", sw.alpha, "Confidence level alpha");
  sweep_cmd->add_option("--seed", sw.seed, "Dropout seed")->required();
  sweep_cmd->add_option("--out", sw_out, "Results CSV")->required();
  sweep_cmd->add_option("--threads", sw.threads, "Worker threads for the passes");

  // significance
  mcdrop::SignificanceOptions sig;
  std::string sig_a, sig_b, sig_out;
  auto* sig_cmd = app.add_subcommand("significance", "Paired permutation test of two reports");
  sig_cmd->add_option("--a", sig_a, "First report")->required();
  sig_cmd->add_option("--b", sig_b, "Second report")->required();
  sig_cmd->add_option("--sigma-p", sig.permutation.sigma_p, "Target std of the p-value estimate");
  sig_cmd->add_option("--p-anchor", sig.permutation.p_anchor, "Assumed p for sizing n");
  sig_cmd->add_option("--seed", sig.permutation.seed, "Permutation seed")->required();
  sig_cmd->add_option("--out", sig_out, "Verdict JSON path");
  sig_cmd->add_option("--threads", sig.threads, "Worker threads");

  // bench-cache
  mcdrop::BenchOptions bench;
  std::string bench_model, bench_data, bench_out;
  auto* bench_cmd = app.add_subcommand("bench-cache", "Time cached against uncached sampling");
  bench_cmd->add_option("--model", bench_model, "Checkpoint")->required();
  bench_cmd->add_option("--data", bench_data, "Dataset (.opt); random inputs if absent");
  bench_cmd->add_option("--T", bench.Ts, "Comma-separated T values")->delimiter(',');
  bench_cmd->add_option("--repetitions", bench.repetitions, "Timing repetitions (median)");
  bench_cmd->add_option("--samples", bench.samples, "Inputs per timing");
  bench_cmd->add_option("--p-drop", bench.p_drop, "Test-time dropout rate");
  bench_cmd->add_option("--seed", bench.seed, "Dropout/input seed")->required();
  bench_cmd->add_option("--out", bench_out, "Timing CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen_cmd) {
      gen.spec.kind = gen_kind == "blobs" ? mcdrop::DatasetKind::Blobs
                                          : mcdrop::DatasetKind::MultiHotPatches;
      gen.out_dir = gen_out;
      mcdrop::cmd_gen_data(gen);
    } else if (*train_cmd) {
      tr.config = tr_config;
      tr.out = tr_out;
      if (!tr_loss.empty()) tr.loss_csv = tr_loss;
      mcdrop::cmd_train(tr);
    } else if (*eval_cmd) {
      ev.model = ev_model;
      ev.data = ev_data;
      ev.report = ev_report;
      ev.scoring.mode = mcdrop::parse_mode(ev_mode);
      ev.scoring.confidence = mcdrop::ConfidenceConfig::from_alpha(ev_alpha);
      ev.scoring.tau_mode = mcdrop::parse_tau_mode(ev_tau_mode);
      if (ev.scoring.tau_mode != mcdrop::TauMode::Empirical) {
        ev.scoring.tau = *tau_opt ? ev_tau : mcdrop::model_precision(ev_precision);
      }
      const auto report = mcdrop::cmd_eval(ev);
      std::cout << mcdrop::detail::aggregates_to_json(report.aggregates).dump() << "\n";
    } else if (*sweep_cmd) {
      sw.model = sw_model;
      sw.data = sw_data;
      sw.out = sw_out;
      sw.modes = parse_modes(sw_modes);
      mcdrop::cmd_sweep(sw);
    } else if (*sig_cmd) {
      sig.report_a = sig_a;
      sig.report_b = sig_b;
      if (!sig_out.empty()) sig.out = sig_out;
      std::cout << mcdrop::cmd_significance(sig).dump() << "\n";
    } else if (*bench_cmd) {
      bench.model = bench_model;
      if (!bench_data.empty()) bench.data = bench_data;
      if (!bench_out.empty()) bench.out = bench_out;
      std::cout << mcdrop::bench_csv(mcdrop::cmd_bench_cache(bench));
    }
  } catch (const mcdrop::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.error_class());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
