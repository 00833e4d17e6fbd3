#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "driver/driver.hpp"
#include "lrcv/error.hpp"

using namespace lrcv;
using namespace lrcv::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("lrcv_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  static json synthetic_config() {
    return {{"schema_version", 1},
            {"model", {{"name", "synthetic_low_rank"}, {"params", {{"levels", 3}, {"delta", 1e-3}}}}},
            {"epsilons", {0.02, 0.01}},
            {"rank_policy", {{"fixed", 5}}},
            {"pilot_samples", 40},
            {"master_seed", 5}};
  }

  fs::path write_config(json cfg, const std::string& name = "config.json") {
    cfg["output_dir"] = (dir_ / "out").string();
    const fs::path p = dir_ / name;
    std::ofstream(p) << cfg.dump(2);
    return p;
  }

  int lrcv(std::vector<std::string> args) {
    args.insert(args.begin(), "lrcv");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    out_.str("");
    err_.str("");
    return run(static_cast<int>(argv.size()), argv.data(), out_, err_);
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

}  // namespace

TEST(Config, RejectsUnknownKeysWithPath) {
  json cfg = {{"schema_version", 1},
              {"model", {{"name", "synthetic_low_rank"}, {"params", {{"detla", 1e-3}}}}},
              {"epsilons", {0.1}}};
  try {
    parse_config(cfg);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("model.params.detla"), std::string::npos) << e.what();
  }
}

TEST(Config, ValidatesFields) {
  const json base = {{"schema_version", 1}, {"model", {{"name", "synthetic_low_rank"}}}, {"epsilons", {0.1}}};
  EXPECT_NO_THROW(parse_config(base));
  auto bad = base;
  bad["epsilons"] = json::array();
  EXPECT_THROW(parse_config(bad), ConfigError);
  bad = base;
  bad["epsilons"] = {-0.1};
  EXPECT_THROW(parse_config(bad), ConfigError);
  bad = base;
  bad["levels"] = {0, 2, 1};
  EXPECT_THROW(parse_config(bad), ConfigError);
  bad = base;
  bad["levels"] = {0, 7};
  EXPECT_THROW(parse_config(bad), ConfigError);
  bad = base;
  bad["rank_policy"] = {{"fixed", 0}};
  EXPECT_THROW(parse_config(bad), ConfigError);
  bad = base;
  bad["schema_version"] = 2;
  EXPECT_THROW(parse_config(bad), ConfigError);
  bad = base;
  bad["model"]["name"] = "navier_stokes";
  EXPECT_THROW(parse_config(bad), ConfigError);
}

TEST(Config, HashIgnoresOutputLocationAndThreads) {
  json a = {{"schema_version", 1}, {"model", {{"name", "synthetic_low_rank"}}}, {"epsilons", {0.1}}};
  json b = a;
  b["output_dir"] = "elsewhere";
  b["threads"] = 4;
  EXPECT_EQ(parse_config(a).hash(), parse_config(b).hash());
  b["master_seed"] = 9;
  EXPECT_NE(parse_config(a).hash(), parse_config(b).hash());
}

TEST(Config, FormatDouble) {
  EXPECT_EQ(format_double(0.01), "0.01");
  EXPECT_EQ(format_double(0.1 + 0.2), "0.30000000000000004");
}

TEST_F(CliTest, HelpAndUsageErrors) {
  EXPECT_EQ(lrcv({"--help"}), kExitOk);
  EXPECT_EQ(lrcv({}), kExitConfig);
  EXPECT_EQ(lrcv({"pilot"}), kExitConfig);
  EXPECT_EQ(lrcv({"pilot", (dir_ / "nope.json").string()}), kExitConfig);
}

TEST_F(CliTest, EmptyEpsilonListIsConfigError) {
  auto cfg = synthetic_config();
  cfg["epsilons"] = json::array();
  EXPECT_EQ(lrcv({"compare", write_config(cfg).string()}), kExitConfig);
  EXPECT_NE(err_.str().find("epsilons"), std::string::npos);
}

TEST_F(CliTest, EstimateWithoutPilotExplainsWhatToDo) {
  const auto cfg = write_config(synthetic_config());
  EXPECT_EQ(lrcv({"estimate", cfg.string(), "--method", "mlcv"}), kExitConfig);
  EXPECT_NE(err_.str().find("lrcv pilot"), std::string::npos) << err_.str();
}

TEST_F(CliTest, StalePilotIsRejected) {
  const auto cfg = write_config(synthetic_config());
  ASSERT_EQ(lrcv({"pilot", cfg.string()}), kExitOk) << err_.str();
  EXPECT_EQ(lrcv({"estimate", cfg.string(), "--seed", "6"}), kExitConfig);
}

TEST_F(CliTest, PilotEstimateCompareWriteEveryArtifact) {
  const auto cfg = write_config(synthetic_config());
  ASSERT_EQ(lrcv({"pilot", cfg.string()}), kExitOk) << err_.str();
  ASSERT_EQ(lrcv({"estimate", cfg.string()}), kExitOk) << err_.str();
  ASSERT_EQ(lrcv({"compare", cfg.string()}), kExitOk) << err_.str();
  const fs::path out = dir_ / "out";
  EXPECT_TRUE(fs::exists(out / "pilot.json"));
  EXPECT_TRUE(fs::exists(out / "bases" / "level_1.json"));
  EXPECT_TRUE(fs::exists(out / "bases" / "level_2.json"));
  for (const char* m : {"mc", "mlmc", "mlcv"}) {
    for (const char* e : {"0.02", "0.01"}) {
      EXPECT_TRUE(fs::exists(out / (std::string("report_") + m + "_" + e + ".json"))) << m << e;
      EXPECT_TRUE(fs::exists(out / (std::string("levels_") + m + "_" + e + ".csv"))) << m << e;
    }
  }
  const std::string csv = slurp(out / "compare.csv");
  EXPECT_EQ(csv.rfind("# seed=5, config_hash=", 0), 0u);
  EXPECT_NE(csv.find("\nepsilon,levels,cost_mc,cost_mlmc,cost_mlcv,ratio\n"), std::string::npos);

  const json pilot = json::parse(slurp(out / "pilot.json"));
  for (std::size_t l = 1; l < 3; ++l) EXPECT_GE(pilot["levels"][l]["rho2"].get<double>(), 0.99);
}

TEST_F(CliTest, ReportTotalsReconcileWithCsvRows) {
  const auto cfg = write_config(synthetic_config());
  ASSERT_EQ(lrcv({"pilot", cfg.string()}), kExitOk);
  ASSERT_EQ(lrcv({"estimate", cfg.string(), "--method", "mlcv"}), kExitOk);
  const json rep = json::parse(slurp(dir_ / "out" / "report_mlcv_0.01.json"));
  std::istringstream csv(slurp(dir_ / "out" / "levels_mlcv_0.01.csv"));
  std::string line;
  std::getline(csv, line);
  std::getline(csv, line);
  double cost = 0.0, partial = 0.0;
  std::size_t rows = 0;
  while (std::getline(csv, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    ASSERT_EQ(cells.size(), 18u);
    partial += std::stod(cells[15]);
    cost += std::stod(cells[16]);
    ++rows;
  }
  EXPECT_EQ(rows, 3u);
  const double total_cost = rep["totals"]["cost"];
  const double estimate = rep["totals"]["estimate"];
  EXPECT_NEAR(cost, total_cost, 1e-10 * total_cost);
  EXPECT_NEAR(partial, estimate, 1e-10 * std::abs(estimate));
}

TEST_F(CliTest, DeterministicModelDisablesControlVariates) {
  json cfg = {{"schema_version", 1},
              {"model", {{"name", "deterministic"}, {"params", {{"values", {1.0, 1.5, 1.75}}}}}},
              {"epsilons", {0.1}},
              {"rank_policy", {{"tolerance", 1e-8}}},
              {"pilot_samples", 8}};
  const auto path = write_config(cfg);
  ASSERT_EQ(lrcv({"pilot", path.string()}), kExitOk) << err_.str();
  const json pilot = json::parse(slurp(dir_ / "out" / "pilot.json"));
  for (const auto& row : pilot["levels"]) {
    EXPECT_EQ(row["var_y"].get<double>(), 0.0);
    if (row["level"].get<int>() > 0) EXPECT_FALSE(row["cv_enabled"].get<bool>());
  }
  ASSERT_EQ(lrcv({"estimate", path.string(), "--method", "mlcv"}), kExitOk) << err_.str();
  const json rep = json::parse(slurp(dir_ / "out" / "report_mlcv_0.1.json"));
  EXPECT_DOUBLE_EQ(rep["totals"]["estimate"].get<double>(), 1.75);
}

TEST_F(CliTest, CompareMcColumnFollowsEpsilonSquaredLaw) {
  auto cfg = synthetic_config();
  cfg["epsilons"] = {0.004, 0.002};
  const auto path = write_config(cfg);
  ASSERT_EQ(lrcv({"pilot", path.string()}), kExitOk);
  ASSERT_EQ(lrcv({"compare", path.string()}), kExitOk);
  std::istringstream csv(slurp(dir_ / "out" / "compare.csv"));
  std::string line;
  std::getline(csv, line);
  std::getline(csv, line);
  std::vector<double> mc;
  while (std::getline(csv, line)) {
    std::stringstream ls(line);
    std::string c;
    std::getline(ls, c, ',');
    std::getline(ls, c, ',');
    EXPECT_EQ(c, "0;1;2");
    std::getline(ls, c, ',');
    mc.push_back(std::stod(c));
  }
  ASSERT_EQ(mc.size(), 2u);
  EXPECT_NEAR(mc[1] / mc[0], 4.0, 4.0 * 64.0 / mc[0]);
}

TEST_F(CliTest, RerunIsByteIdentical) {
  const auto cfg = write_config(synthetic_config());
  ASSERT_EQ(lrcv({"pilot", cfg.string(), "--threads", "3"}), kExitOk);
  ASSERT_EQ(lrcv({"estimate", cfg.string()}), kExitOk);
  std::map<std::string, std::string> first;
  for (const auto& e : fs::recursive_directory_iterator(dir_ / "out"))
    if (e.is_regular_file()) first[e.path().string()] = slurp(e.path());
  fs::remove_all(dir_ / "out");
  ASSERT_EQ(lrcv({"pilot", cfg.string(), "--threads", "1"}), kExitOk);
  ASSERT_EQ(lrcv({"estimate", cfg.string(), "--threads", "2"}), kExitOk);
  std::size_t n = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir_ / "out")) {
    if (!e.is_regular_file()) continue;
    ++n;
    EXPECT_EQ(slurp(e.path()), first[e.path().string()]) << e.path();
  }
  EXPECT_EQ(n, first.size());
}
