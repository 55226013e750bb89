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

#include <filesystem>

#include <gtest/gtest.h>

#include "mcdrop/commands.hpp"
#include "mcdrop/io.hpp"
#include "test_support.hpp"

namespace mcdrop {
namespace {

namespace fs = std::filesystem;
using testing::Head;

class IoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("mcdrop_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

SplitNetwork trained_like(std::uint64_t seed) {
  auto net = testing::fcn_net(Head::Sigmoid);
  CounterStream rng(seed, Stream::Bench);
  testing::randomize(net, rng);
  round_to_float(net);
  return net;
}

TEST_F(IoTest, CheckpointRoundTripIsByteIdentical) {
  for (auto net : {trained_like(1), testing::dense_net(Head::Softmax), testing::conv_net(Head::None)}) {
    const auto path = dir_ / "a.opn";
    save_checkpoint(path, net, 42);
    const auto cp = load_checkpoint(path);
    EXPECT_EQ(cp.base_seed, 42u);
    save_checkpoint(dir_ / "b.opn", cp.net, cp.base_seed);
    EXPECT_EQ(read_file(path), read_file(dir_ / "b.opn"));
  }
}

TEST_F(IoTest, CheckpointPreservesOutputs) {
  const auto net = trained_like(2);
  save_checkpoint(dir_ / "m.opn", net, 7);
  const auto loaded = load_checkpoint(dir_ / "m.opn").net;
  CounterStream rng(3, Stream::Bench);
  for (int i = 0; i < 5; ++i) {
    const auto x = testing::random_tensor(net.input_shape(), rng);
    EXPECT_EQ(forward_deterministic(net, x), forward_deterministic(loaded, x));
  }
}

TEST_F(IoTest, CheckpointLayout) {
  const auto bytes = encode_checkpoint(testing::dense_net(Head::Softmax), 5);
  ASSERT_GE(bytes.size(), 16u);
  EXPECT_EQ(bytes.substr(0, 4), "OPN1");
  EXPECT_EQ(bytes[4], 1);
  std::uint64_t length = 0;
  for (int b = 0; b < 8; ++b) length |= std::uint64_t(std::uint8_t(bytes[8 + b])) << (8 * b);
  const auto header = Json::parse(bytes.substr(16, length));
  EXPECT_EQ(header.at("split_index"), 2);
  EXPECT_EQ(header.at("dtype"), "float32_le");
  std::size_t params = 0;
  for (const auto& p : testing::dense_net(Head::Softmax).parameters()) {
    params += p.weight.size() + p.bias.size();
  }
  EXPECT_EQ(bytes.size(), 16 + length + 4 * params);
}

TEST_F(IoTest, CheckpointCorruption) {
  const auto bytes = encode_checkpoint(trained_like(4), 1);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad), IoError);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), IoError);
  EXPECT_THROW(decode_checkpoint(bytes + "extra"), IoError);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, 10)), IoError);
  bad = bytes;
  bad[4] = 9;
  EXPECT_THROW(decode_checkpoint(bad), IoError);
  try {
    load_checkpoint(dir_ / "missing.opn");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("missing.opn"), std::string::npos);
  }
}

TEST_F(IoTest, DatasetRoundTrip) {
  DatasetSpec spec;
  spec.kind = DatasetKind::MultiHotPatches;
  spec.classes = 4;
  spec.train_count = 12;
  spec.test_count = 1;
  auto data = generate(spec).first;
  for (auto& x : data.inputs) x = map(x, [](double v) { return double(float(v)); });
  save_dataset(dir_ / "d.opt", data);
  EXPECT_TRUE(fs::exists(dir_ / "d.labels.csv"));
  const auto back = load_dataset(dir_ / "d.opt");
  EXPECT_EQ(back.inputs, data.inputs);
  EXPECT_EQ(back.labels, data.labels);
  const auto csv = read_file(dir_ / "d.labels.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "sample_index,label_0,label_1,label_2,label_3");
  EXPECT_EQ(read_file(dir_ / "d.opt").substr(0, 4), "OPT1");
}

TEST_F(IoTest, DatasetErrors) {
  DatasetSpec spec;
  spec.train_count = 3;
  spec.test_count = 1;
  const auto data = generate(spec).first;
  save_dataset(dir_ / "d.opt", data);
  write_file(dir_ / "d.labels.csv", "sample_index,label_0,label_1,label_2\n0,1,0,0\n");
  EXPECT_THROW(load_dataset(dir_ / "d.opt"), IoError);
  write_file(dir_ / "d.labels.csv", "sample_index,label_0\n0,2\n");
  EXPECT_THROW(load_dataset(dir_ / "d.opt"), IoError);
  fs::remove(dir_ / "d.labels.csv");
  EXPECT_THROW(load_dataset(dir_ / "d.opt"), IoError);
  write_file(dir_ / "e.opt", "OPT1");
  EXPECT_THROW(decode_samples(read_file(dir_ / "e.opt"), "e"), IoError);
}

Json small_config() {
  return Json::parse(R"({
    "architecture": {"input_shape": [4],
                     "feature": [{"kind": "dense", "in": 4, "out": 6}, {"kind": "relu"}],
                     "head": [{"kind": "dropout"}, {"kind": "dense", "in": 6, "out": 2},
                              {"kind": "softmax"}]},
    "training": {"learning_rate": 0.1, "iterations": 5, "batch_size": 4,
                 "lr_drop": [{"iteration": 3, "factor": 0.5}]},
    "train_data": "train.opt"})");
}

TEST_F(IoTest, TrainConfigParsing) {
  const auto job = train_job_from_json(small_config(), dir_);
  EXPECT_EQ(job.net.split_index(), 2u);
  EXPECT_EQ(job.train.iterations, 5u);
  EXPECT_EQ(job.train.learning_rate, 0.1);
  ASSERT_EQ(job.train.lr_drops.size(), 1u);
  EXPECT_EQ(job.train.lr_drops[0], (LrDrop{3, 0.5}));
  EXPECT_EQ(job.train_data, dir_ / "train.opt");
}

TEST_F(IoTest, UnknownKeysAreNamed) {
  auto cfg = small_config();
  cfg["training"]["learning_rat"] = 0.1;
  try {
    train_job_from_json(cfg, dir_);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("learning_rat"), std::string::npos) << e.what();
  }
  cfg = small_config();
  cfg["architecture"]["head"][1]["width"] = 3;
  EXPECT_THROW(train_job_from_json(cfg, dir_), ConfigError);
  cfg = small_config();
  cfg["extra"] = true;
  EXPECT_THROW(train_job_from_json(cfg, dir_), ConfigError);
  cfg = small_config();
  cfg["training"]["dropout_rate"] = 1.5;
  EXPECT_THROW(train_job_from_json(cfg, dir_), ConfigError);
  cfg = small_config();
  cfg["architecture"]["feature"].push_back({{"kind", "dropout"}});
  EXPECT_THROW(train_job_from_json(cfg, dir_), SplitViolation);
}

TEST_F(IoTest, ArchitectureJsonRoundTrip) {
  for (auto make : {testing::dense_net, testing::conv_net, testing::fcn_net}) {
    const auto net = make(Head::Sigmoid);
    const auto back = network_from_json(network_to_json(net));
    EXPECT_EQ(network_to_json(back), network_to_json(net));
    EXPECT_EQ(back.split_index(), net.split_index());
  }
}

EvalReport sample_report(bool classification) {
  EvalReport r;
  r.scores = Tensor::matrix({{0.7, 0.2, 0.1}, {0.1, 0.3, 0.6}, {0.5, 0.4, 0.1}});
  r.labels = classification ? Tensor::matrix({{1, 0, 0}, {0, 1, 0}, {1, 0, 0}})
                            : Tensor::matrix({{1, 0, 0}, {0, 1, 1}, {1, 0, 0}});
  r.aggregates = compute_aggregates(r.scores, r.labels, classification);
  if (classification) r.correct = top_k_correct(r.scores, r.labels, 1);
  r.metadata = {"optimistic", 10, 0.5, 0.01, 99, classification ? "softmax" : "sigmoid",
                "empirical", 0.0, label_hash(r.labels)};
  return r;
}

TEST_F(IoTest, ReportRoundTrip) {
  for (bool classification : {true, false}) {
    const auto r = sample_report(classification);
    save_report(dir_ / "r.json", r);
    const auto back = load_report(dir_ / "r.json");
    EXPECT_EQ(back.metadata, r.metadata);
    EXPECT_EQ(back.scores, r.scores);
    EXPECT_EQ(back.labels, r.labels);
    EXPECT_EQ(back.correct, r.correct);
    EXPECT_EQ(back.aggregates, r.aggregates);
    save_report(dir_ / "r2.json", back);
    EXPECT_EQ(read_file(dir_ / "r.json"), read_file(dir_ / "r2.json"));
  }
}

TEST_F(IoTest, ReportTamperDetection) {
  auto j = report_to_json(sample_report(true));
  j["aggregates"]["top_k_error"]["1"] = 0.0;
  EXPECT_THROW(report_from_json(j), IoError);
  j = report_to_json(sample_report(true));
  j["per_sample_correct"][1] = 1;
  EXPECT_THROW(report_from_json(j), IoError);
  j = report_to_json(sample_report(false));
  j["labels"][0][2] = 1.0;
  EXPECT_THROW(report_from_json(j), IoError);
  j = report_to_json(sample_report(false));
  j["aggregates"]["map"] = j["aggregates"]["map"].get<double>() + 1e-9;
  EXPECT_THROW(report_from_json(j), IoError);
  j = report_to_json(sample_report(false));
  j["schema"] = "other";
  EXPECT_THROW(report_from_json(j), IoError);
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(format_double(1.0 / 3.0), "0.3333333333333333");
  EXPECT_EQ(format_double(0.0), "0");
  for (double v : {1e-300, 123.456, -2.5e10, 0.06283185307179587}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
}

}  // namespace
}  // namespace mcdrop
