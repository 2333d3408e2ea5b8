#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

namespace {

namespace fs = std::filesystem;

const std::string kCli = RAMPMERGE_CLI;
const std::string kConfigDir = RAMPMERGE_CONFIG_DIR;

struct Result {
  int status = -1;
  std::string out;
  std::string err;
};

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() /
           (std::string("rampmerge_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Result Cli(const std::string& args) {
    const fs::path out = dir_ / "stdout.txt";
    const fs::path err = dir_ / "stderr.txt";
    const std::string cmd = "'" + kCli + "' " + args + " >'" + out.string() +
                            "' 2>'" + err.string() + "'";
    Result r;
    const int raw = std::system(cmd.c_str());
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = Slurp(out);
    r.err = Slurp(err);
    return r;
  }

  // Short scenario and a 2 x 1 x 3 x 2 matrix so the tests stay quick.
  fs::path SmallConfig() {
    const fs::path p = dir_ / "small.cfg";
    std::ofstream(p) << "[scenario]\nduration = 150\nwarmup = 30\n"
                        "mainline_volume = 1800\nramp_volume = 500\n"
                        "[matrix]\nmainline_volumes = 800, 1800\n"
                        "ramp_volumes = 500\nseeds = 1, 2\n";
    return p;
  }

  fs::path dir_;
};

TEST_F(CliTest, RunTwiceIsByteIdentical) {
  const std::string cfg = SmallConfig().string();
  for (const char* sub : {"a", "b"}) {
    const Result r = Cli("run --config '" + cfg + "' --seed 42 --out-dir '" +
                         (dir_ / sub).string() + "'");
    ASSERT_EQ(r.status, 0) << r.err;
  }
  for (const char* f : {"timeline.csv", "events.jsonl", "messages.jsonl",
                        "vehicles.csv", "trajectories.csv", "report.txt",
                        "diagram.svg"}) {
    const std::string a = Slurp(dir_ / "a" / f);
    EXPECT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, Slurp(dir_ / "b" / f)) << f;
  }
  EXPECT_EQ(Slurp(dir_ / "a" / "timeline.csv").rfind(
                "time,vehicle_id,class,lane,station,speed\n", 0),
            0u);
}

TEST_F(CliTest, MissingConfigNamesThePath) {
  const std::string path = (dir_ / "no_such.cfg").string();
  const Result r = Cli("run --config '" + path + "' --out-dir '" +
                       (dir_ / "o").string() + "'");
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.err.find(path), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("config"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir_ / "o" / "timeline.csv"));
}

TEST_F(CliTest, StrategyOverrideChangesOnlyTheStrategy) {
  const std::string cfg = SmallConfig().string();
  ASSERT_EQ(Cli("run --config '" + cfg + "' --out-dir '" +
                (dir_ / "mp").string() + "'")
                .status,
            0);
  ASSERT_EQ(Cli("run --config '" + cfg + "' --strategy baseline --out-dir '" +
                (dir_ / "bl").string() + "'")
                .status,
            0);
  // The report embeds the resolved config; diff it line by line.
  auto config_lines = [](const std::string& report) {
    std::istringstream in(report);
    std::vector<std::string> lines;
    std::string line;
    bool inside = false;
    while (std::getline(in, line)) {
      if (line.rfind("[scenario]", 0) == 0) inside = true;
      if (inside) lines.push_back(line);
    }
    return lines;
  };
  const auto a = config_lines(Slurp(dir_ / "mp" / "report.txt"));
  const auto b = config_lines(Slurp(dir_ / "bl" / "report.txt"));
  ASSERT_EQ(a.size(), b.size());
  ASSERT_GT(a.size(), 40u);
  std::vector<std::string> changed;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) changed.push_back(b[i]);
  }
  ASSERT_EQ(changed.size(), 1u);
  EXPECT_EQ(changed[0], "strategy = baseline");
}

TEST_F(CliTest, ReportCarriesEveryDefault) {
  const Result r = Cli("run --config '" + SmallConfig().string() +
                       "' --out-dir '" + (dir_ / "o").string() + "'");
  ASSERT_EQ(r.status, 0) << r.err;
  const std::string report = Slurp(dir_ / "o" / "report.txt");
  for (const char* key :
       {"[geometry]", "accel_lane_length = 200", "[safety]", "clock_error",
        "[baseline]", "sigma = 0.5", "[planner]", "cascade_cap", "warmup = 30"}) {
    EXPECT_NE(report.find(key), std::string::npos) << key;
  }
}

TEST_F(CliTest, RefusesToOverwrite) {
  const std::string args = "run --config '" + SmallConfig().string() +
                           "' --out-dir '" + (dir_ / "o").string() + "'";
  ASSERT_EQ(Cli(args).status, 0);
  const std::string before = Slurp(dir_ / "o" / "timeline.csv");
  std::ofstream(dir_ / "o" / "timeline.csv") << "mine\n";
  const Result again = Cli(args);
  EXPECT_NE(again.status, 0);
  EXPECT_NE(again.err.find("--overwrite"), std::string::npos) << again.err;
  EXPECT_EQ(Slurp(dir_ / "o" / "timeline.csv"), "mine\n");
  ASSERT_EQ(Cli(args + " --overwrite").status, 0);
  EXPECT_EQ(Slurp(dir_ / "o" / "timeline.csv"), before);
}

TEST_F(CliTest, BadStrategyFailsInConfigStage) {
  const Result r = Cli("run --config '" + SmallConfig().string() +
                       "' --strategy fastest --out-dir '" +
                       (dir_ / "o").string() + "'");
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.err.find("fastest"), std::string::npos) << r.err;
}

TEST_F(CliTest, MatrixWritesEveryRunAndResumes) {
  const std::string cfg = SmallConfig().string();
  const std::string out = (dir_ / "m").string();
  const Result first =
      Cli("matrix --config '" + cfg + "' --jobs 2 --out-dir '" + out + "'");
  ASSERT_EQ(first.status, 0) << first.err;
  const std::string csv = Slurp(dir_ / "m" / "matrix.csv");
  // Header plus 2 x 1 x 3 x 2 rows.
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 13);
  for (const char* f : {"cells.csv", "mainline_delay.csv",
                        "ramp_delay.csv", "ordering.txt", "report.txt"}) {
    EXPECT_TRUE(fs::exists(dir_ / "m" / f)) << f;
  }
  EXPECT_NE(first.out.find("lowest"), std::string::npos) << first.out;

  // Without --resume an existing matrix is left alone.
  EXPECT_NE(Cli("matrix --config '" + cfg + "' --out-dir '" + out + "'")
                .status,
            0);

  // Lose the baseline cells, as an interrupted run would, then resume.
  int removed = 0;
  for (const auto& e : fs::directory_iterator(dir_ / "m" / "cells")) {
    if (e.path().filename().string().find("baseline") != std::string::npos) {
      fs::remove(e.path());
      ++removed;
    }
  }
  ASSERT_EQ(removed, 4);
  fs::remove(dir_ / "m" / "matrix.csv");
  const Result resumed =
      Cli("matrix --config '" + cfg + "' --resume --out-dir '" + out + "'");
  ASSERT_EQ(resumed.status, 0) << resumed.err;
  EXPECT_EQ(std::count(resumed.err.begin(), resumed.err.end(), '\n'), 4)
      << resumed.err;
  EXPECT_EQ(Slurp(dir_ / "m" / "matrix.csv"), csv);
}

TEST_F(CliTest, DiagramFromRunOutput) {
  const std::string o = (dir_ / "o").string();
  ASSERT_EQ(Cli("run --config '" + kConfigDir +
                "/worked_example.cfg' --free-flow --conflicts --out-dir '" +
                o + "'")
                .status,
            0);
  // One pre-adjustment conflict, none after.
  const std::string before = Slurp(dir_ / "o" / "conflicts_free_flow.csv");
  const std::string after = Slurp(dir_ / "o" / "conflicts.csv");
  EXPECT_EQ(std::count(before.begin(), before.end(), '\n'), 2) << before;
  EXPECT_EQ(std::count(after.begin(), after.end(), '\n'), 1) << after;

  const std::string svg = (dir_ / "zoom.svg").string();
  const Result r = Cli("diagram --timeline '" + o +
                       "/timeline.csv' --zoom 20:60:1000:1400 --out '" + svg +
                       "'");
  ASSERT_EQ(r.status, 0) << r.err;
  const std::string text = Slurp(svg);
  EXPECT_EQ(text.rfind("<svg", 0), 0u);
  EXPECT_NE(text.find("<polyline"), std::string::npos);
}

TEST_F(CliTest, DiagramRejectsMalformedTimeline) {
  std::ofstream(dir_ / "bad.csv") << "time,vehicle_id,class,lane,station,speed\n"
                                     "0,1,mainline,main0,zero,1\n";
  const Result r = Cli("diagram --timeline '" + (dir_ / "bad.csv").string() +
                       "' --out '" + (dir_ / "x.svg").string() + "'");
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.err.find("line 2"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir_ / "x.svg"));
}

TEST_F(CliTest, DiagramRejectsBadZoom) {
  std::ofstream(dir_ / "t.csv") << "time,vehicle_id,class,lane,station,speed\n";
  const Result r = Cli("diagram --timeline '" + (dir_ / "t.csv").string() +
                       "' --zoom 5:1:0:10 --out '" +
                       (dir_ / "x.svg").string() + "'");
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.err.find("zoom"), std::string::npos) << r.err;
}

}  // namespace
