#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowda/cli/config.hpp"
#include "flowda/data.hpp"
#include "flowda/training.hpp"

namespace fs = std::filesystem;
using namespace flowda;

namespace {

struct Run {
  int code = -1;
  std::string output;  // stdout and stderr together
};

Run run(const std::string& args) {
  const std::string cmd = std::string(FLOWDA_CLI) + " " + args + " 2>&1";
  Run r;
  std::FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream is(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(is, line);) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

std::vector<std::string> cells(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

const char* kTinyModel =
    " --hidden-size 8 --latent-width 8 --discriminator-hidden 8 --history 10 --stride 9 --test-stride 60"
    " --validation-stride 30";

// One synthetic dataset and one trained checkpoint shared by the whole suite.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / ("flowda_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(root_);
    fs::create_directories(root_);
    auto s = run("synth --output " + (root_ / "data").string() + " --n-source-basins 2 --n-target-basins 3");
    ASSERT_EQ(s.code, 0) << s.output;
    auto t = run("train --config " + (root_ / "data" / "config.ini").string() + " --output " +
                 (root_ / "model").string() + " --epochs 2" + kTinyModel);
    ASSERT_EQ(t.code, 0) << t.output;
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static fs::path root_;
};

fs::path CliTest::root_;

}  // namespace

TEST(ExperimentConfigFile, SectionsAndDefaults) {
  std::istringstream is(
      "[data]\nsource_dir=/d/src\ntarget_dir=/d/tgt\ntest_stride=5\n\n[model]\nhidden_size=32\nscoring=dot\n"
      "\n[training]\nmode=lstm_tl\nepochs=7\nruns=3\n\n[synth]\nmissing_rate=0.2\n\n[output]\ndir=out\n");
  const auto c = parse_experiment_config(is);
  EXPECT_EQ(c.data.source_dir, "/d/src");
  EXPECT_EQ(c.data.test_stride, 5u);
  EXPECT_EQ(c.train.hidden_size, 32u);
  EXPECT_EQ(c.train.scoring, AttentionScoring::kDot);
  EXPECT_EQ(c.train.mode, TrainMode::kLstmTl);
  EXPECT_EQ(c.train.epochs, 7u);
  EXPECT_EQ(c.runs, 3u);
  EXPECT_EQ(c.synth.missing_rate, 0.2);
  EXPECT_EQ(c.output_dir, "out");
  // untouched keys keep their defaults
  EXPECT_EQ(c.train.dropout, 0.4);
  EXPECT_EQ(c.train.lambda, 0.1);
  EXPECT_EQ(c.train.lr_first_epoch, 0.001);
  EXPECT_EQ(c.train.lr_rest, 0.0005);
  EXPECT_EQ(c.data.ranges.train.first, parse_date("1999-10-01"));
}

TEST(ExperimentConfigFile, UnknownKeysAndSectionsRejected) {
  auto parse = [](const std::string& text) {
    std::istringstream is(text);
    return parse_experiment_config(is);
  };
  EXPECT_THROW(parse("[model]\nhiden_size=3\n"), ConfigError);
  EXPECT_THROW(parse("[training]\nhidden_size=3\n"), ConfigError);  // model key in the wrong section
  EXPECT_THROW(parse("[model]\nepochs=3\n"), ConfigError);
  EXPECT_THROW(parse("[extra]\nx=1\n"), ConfigError);
  EXPECT_THROW(parse("[training]\nmode=fancy\n"), ConfigError);
  EXPECT_THROW(parse("[training]\nepochs=-1\n"), ConfigError);
  EXPECT_THROW(parse("[data]\ntrain_start=1999-13-01\n"), ConfigError);
  try {
    parse("[training]\nbatch=3\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("training.batch"), std::string::npos);
  }
}

TEST(ExperimentConfigFile, ResolvedTextRoundTrips) {
  ExperimentConfig c;
  c.data.source_dir = "/x/source";
  c.data.dynamic_columns = {"prcp", "tmax"};
  c.train.hidden_size = 17;
  c.train.dropout = 0.125;
  c.synth.seed = 9;
  c.runs = 4;
  std::istringstream is(experiment_config_text(c));
  const auto back = parse_experiment_config(is);
  EXPECT_EQ(experiment_config_text(back), experiment_config_text(c));
  EXPECT_EQ(back.data.dynamic_columns, c.data.dynamic_columns);
  EXPECT_EQ(config_text(back.train), config_text(c.train));
}

TEST(ExperimentConfigFile, RelativeDirsFollowTheFile) {
  const fs::path dir = fs::temp_directory_path() / ("flowda_cfg_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  { std::ofstream(dir / "exp.ini") << "[data]\nsource_dir=source\ntarget_dir=/abs/target\n"; }
  const auto c = load_experiment_config(dir / "exp.ini");
  EXPECT_EQ(c.data.source_dir, (dir / "source").lexically_normal());
  EXPECT_EQ(c.data.target_dir, "/abs/target");
  fs::remove_all(dir);
  EXPECT_THROW(load_experiment_config(dir / "exp.ini"), ConfigError);
}

TEST_F(CliTest, SynthWritesInventoryAndManifest) {
  const fs::path d = root_ / "data";
  EXPECT_TRUE(fs::exists(d / "manifest.json"));
  EXPECT_TRUE(fs::exists(d / "config.ini"));
  for (const char* dom : {"source", "target"}) {
    EXPECT_TRUE(fs::exists(d / dom / "static.csv")) << dom;
  }
  EXPECT_EQ(load_domain(d / "source").basins.size(), 2u);
  EXPECT_EQ(load_domain(d / "target").basins.size(), 3u);
  const auto m = nlohmann::json::parse(slurp(d / "manifest.json"));
  EXPECT_EQ(m["seed"], 0);
  EXPECT_EQ(m["config"]["missing_rate"], 0.1);
  EXPECT_EQ(m["target"]["basins"].size(), 3u);
}

TEST_F(CliTest, SynthSameSeedIsByteIdentical) {
  const fs::path a = root_ / "synth_a", b = root_ / "synth_b";
  ASSERT_EQ(run("synth --output " + a.string() + " --n-source-basins 2 --n-target-basins 2 --seed 4").code, 0);
  ASSERT_EQ(run("synth --output " + b.string() + " --n-source-basins 2 --n-target-basins 2 --seed 4").code, 0);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++files;
    const auto rel = fs::relative(e.path(), a);
    EXPECT_EQ(slurp(e.path()), slurp(b / rel)) << rel;
  }
  EXPECT_EQ(files, 2u + 2u + 2u + 2u);  // basin files, static tables, manifest, config
}

TEST_F(CliTest, SynthMissingRateEmptiesThatShareOfTargetCells) {
  std::size_t empty = 0, total = 0;
  for (const auto& e : fs::directory_iterator(root_ / "data" / "target")) {
    if (e.path().filename() == "static.csv") continue;
    auto lines = lines_of(e.path());
    for (std::size_t i = 1; i < lines.size(); ++i) {
      ++total;
      empty += cells(lines[i]).back().empty() ? 1 : 0;
    }
  }
  ASSERT_EQ(total, 3u * 4383u);
  // Binomial(13149, 0.1): one standard deviation is about 0.0026.
  EXPECT_NEAR(static_cast<double>(empty) / static_cast<double>(total), 0.1, 0.013);

  std::size_t source_empty = 0;
  for (const auto& e : fs::directory_iterator(root_ / "data" / "source")) {
    if (e.path().filename() == "static.csv") continue;
    auto lines = lines_of(e.path());
    for (std::size_t i = 1; i < lines.size(); ++i) source_empty += cells(lines[i]).back().empty() ? 1 : 0;
  }
  EXPECT_EQ(source_empty, 0u);
}

TEST_F(CliTest, TrainWritesLogCheckpointsAndConfigEcho) {
  const fs::path m = root_ / "model";
  const auto log = lines_of(m / "train_log.jsonl");
  EXPECT_EQ(log.size(), 2u);
  for (const char* f : {"checkpoint_last.bin", "checkpoint_best.bin", "config.ini", "summary.json", "manifest.json",
                        "per_basin.csv", "predictions.csv"}) {
    EXPECT_TRUE(fs::exists(m / f)) << f;
  }
  EXPECT_FALSE(fs::exists(m / ".flowda.lock"));
  const auto echoed = load_experiment_config(m / "config.ini");
  EXPECT_EQ(echoed.train.epochs, 2u);
  EXPECT_EQ(echoed.train.hidden_size, 8u);
  const auto ck = load_checkpoint(m / "checkpoint_last.bin");
  EXPECT_EQ(ck.epochs_completed, 2u);
  EXPECT_EQ(ck.log.size(), 2u);
}

TEST_F(CliTest, EpochsOverrideGivesSingleEntryLog) {
  const fs::path out = root_ / "one_epoch";
  auto r = run("train --config " + (root_ / "data" / "config.ini").string() + " --output " + out.string() +
               " --epochs 1" + kTinyModel);
  ASSERT_EQ(r.code, 0) << r.output;
  const auto log = lines_of(out / "train_log.jsonl");
  ASSERT_EQ(log.size(), 1u);
  EXPECT_EQ(nlohmann::json::parse(log[0])["epoch"], 1);
}

TEST_F(CliTest, SameSeedGivesIdenticalLogs) {
  const fs::path out = root_ / "again";
  auto r = run("train --config " + (root_ / "data" / "config.ini").string() + " --output " + out.string() +
               " --epochs 2" + kTinyModel);
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(slurp(out / "train_log.jsonl"), slurp(root_ / "model" / "train_log.jsonl"));
  EXPECT_EQ(slurp(out / "predictions.csv"), slurp(root_ / "model" / "predictions.csv"));
}

TEST_F(CliTest, TransferBaselinesRun) {
  for (const char* mode : {"seq2seq_tl", "lstm_tl"}) {
    const fs::path out = root_ / mode;
    auto r = run("train --config " + (root_ / "data" / "config.ini").string() + " --output " + out.string() +
                 " --mode " + mode + " --epochs 1 --pretrain-epochs 1" + kTinyModel);
    ASSERT_EQ(r.code, 0) << r.output;
    const auto log = lines_of(out / "train_log.jsonl");
    ASSERT_EQ(log.size(), 2u);
    EXPECT_EQ(nlohmann::json::parse(log[0])["phase"], "pretrain");
    EXPECT_EQ(nlohmann::json::parse(log[1])["phase"], "finetune");
  }
}

TEST_F(CliTest, UsageAndConfigErrorsExitTwo) {
  const std::string cfg = " --config " + (root_ / "data" / "config.ini").string();
  auto bad_mode = run("train" + cfg + " --output " + (root_ / "bad").string() + " --mode fancy");
  EXPECT_EQ(bad_mode.code, 2);
  EXPECT_NE(bad_mode.output.find("--mode"), std::string::npos) << bad_mode.output;
  EXPECT_EQ(run("train" + cfg + " --output " + (root_ / "bad").string() + " --dropout 1.5").code, 2);
  EXPECT_EQ(run("train --bogus-flag").code, 2);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("train --config /nonexistent/exp.ini").code, 2);
  EXPECT_EQ(run("train --output " + (root_ / "bad").string() + " --source-dir /nonexistent --target-dir /nonexistent")
                .code,
            2);
}

TEST_F(CliTest, NumericDivergenceExitsThreeAndKeepsLastCheckpoint) {
  const fs::path out = root_ / "diverge";
  auto r = run("train --config " + (root_ / "data" / "config.ini").string() + " --output " + out.string() +
               " --epochs 3 --lr-rest 1e300" + kTinyModel);
  EXPECT_EQ(r.code, 3) << r.output;
  const auto ck = load_checkpoint(out / "checkpoint_last.bin");
  EXPECT_EQ(ck.epochs_completed, 1u);
  EXPECT_EQ(lines_of(out / "train_log.jsonl").size(), 1u);
}

TEST_F(CliTest, LockFileRejectsConcurrentUse) {
  const fs::path out = root_ / "locked";
  fs::create_directories(out);
  { std::ofstream(out / ".flowda.lock") << ""; }
  auto r = run("synth --output " + out.string() + " --n-source-basins 1 --n-target-basins 1 --length-days 10");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("locked"), std::string::npos) << r.output;
  EXPECT_FALSE(fs::exists(out / "manifest.json"));
}

TEST_F(CliTest, EvaluateWritesOneRowPerBasinPlusSummary) {
  const fs::path ev = root_ / "eval";
  const std::string args = "evaluate --checkpoint " + (root_ / "model" / "checkpoint_best.bin").string() +
                           " --config " + (root_ / "model" / "config.ini").string() + " --output " + ev.string();
  auto r = run(args);
  ASSERT_EQ(r.code, 0) << r.output;
  const auto rows = lines_of(ev / "per_basin.csv");
  ASSERT_EQ(rows.size(), 1u + 3u + 1u);  // header, basins, median
  EXPECT_EQ(cells(rows.back()).front(), "median");
  const auto summary = nlohmann::json::parse(slurp(ev / "summary.json"));
  EXPECT_EQ(summary["basin_count"], 3);
  EXPECT_TRUE(summary.contains("nse_negative_count"));
  // Same parameters and windows as the scoring done at the end of training.
  EXPECT_EQ(slurp(ev / "predictions.csv"), slurp(root_ / "model" / "predictions.csv"));

  const std::string first = slurp(ev / "per_basin.csv") + slurp(ev / "predictions.csv") + slurp(ev / "summary.json");
  ASSERT_EQ(run(args).code, 0);
  EXPECT_EQ(slurp(ev / "per_basin.csv") + slurp(ev / "predictions.csv") + slurp(ev / "summary.json"), first);
}

TEST_F(CliTest, EvaluateRejectsIncompatibleConfig) {
  const fs::path ev = root_ / "eval_bad";
  auto r = run("evaluate --checkpoint " + (root_ / "model" / "checkpoint_best.bin").string() + " --config " +
               (root_ / "data" / "config.ini").string() + " --output " + ev.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("incompatible"), std::string::npos) << r.output;
  auto missing = run("evaluate --checkpoint " + (root_ / "nope.bin").string());
  EXPECT_EQ(missing.code, 2);
}

TEST_F(CliTest, PredictMatchesEvaluateStoredPrediction) {
  const auto preds = lines_of(root_ / "model" / "predictions.csv");
  ASSERT_GT(preds.size(), 10u);
  for (std::size_t row : {std::size_t{1}, preds.size() / 2, preds.size() - 1}) {
    const auto p = cells(preds[row]);  // basin_id,issue_date,target_date,lead,predicted,observed
    const fs::path out = root_ / ("forecast_" + std::to_string(row) + ".csv");
    auto r = run("predict --checkpoint " + (root_ / "model" / "checkpoint_best.bin").string() + " --basin-csv " +
                 (root_ / "data" / "target" / (p[0] + ".csv")).string() + " --date " + p[2] + " --output " +
                 out.string());
    ASSERT_EQ(r.code, 0) << r.output;
    const auto f = lines_of(out);
    ASSERT_EQ(f.size(), 2u);  // header plus exactly one value for tau = 1
    const auto c = cells(f[1]);
    EXPECT_EQ(c[0], p[0]);
    EXPECT_EQ(c[1], p[1]);
    EXPECT_EQ(c[2], p[2]);
    EXPECT_EQ(c[4], p[4]) << "row " << row;
    EXPECT_NE(r.output.find(c[4]), std::string::npos);  // also printed
  }
}

TEST_F(CliTest, PredictWithShortHistoryNamesN) {
  auto r = run("predict --checkpoint " + (root_ / "model" / "checkpoint_best.bin").string() + " --basin-csv " +
               (root_ / "data" / "target" / "T0001.csv").string() + " --date 1988-10-05 --output " +
               (root_ / "short.csv").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("N=10"), std::string::npos) << r.output;
  EXPECT_FALSE(fs::exists(root_ / "short.csv"));
}

TEST(CliHelp, ListsEveryFlagWithDefaults) {
  const auto train = run("train --help");
  EXPECT_EQ(train.code, 0);
  for (const char* text : {"--hidden-size UINT [128]", "--dropout FLOAT [0.4]", "--lambda FLOAT [0.1]",
                           "--lr-first-epoch FLOAT [0.001]", "--epochs UINT [100]", "--mode NAME [adversarial]",
                           "--history UINT [90]", "--horizon UINT [1]", "--batch-size UINT [64]", "--resume"}) {
    EXPECT_NE(train.output.find(text), std::string::npos) << text;
  }
  for (const char* cmd : {"synth", "evaluate", "predict"}) {
    const auto r = run(std::string(cmd) + " --help");
    EXPECT_EQ(r.code, 0) << cmd;
    EXPECT_NE(r.output.find("--output"), std::string::npos) << cmd;
  }
}
