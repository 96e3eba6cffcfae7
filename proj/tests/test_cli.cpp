#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

std::string cli_bin() {
  const char* p = std::getenv("CRANSIM_CLI_BIN");
  REQUIRE(p != nullptr);
  return p;
}

int run_cli(const std::string& args, std::string* out = nullptr) {
  const std::string out_file = (fs::temp_directory_path() / "cransim_cli_out.txt").string();
  const std::string cmd = cli_bin() + " " + args + " > " + out_file + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (out) {
    std::ifstream is(out_file);
    std::stringstream ss;
    ss << is.rdbuf();
    *out = ss.str();
  }
  return WEXITSTATUS(status);
}

fs::path make_config(const std::string& name, int users_per_cell) {
  const fs::path dir = fs::temp_directory_path() / "cransim_cli_test";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream os(p);
  os << "num_cells = 1\n"
     << "users_per_cell = " << users_per_cell << "\n"
     << "candidate_limit = 4\n"
     << "rng_seed = 3\n";
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("calibrate prints a Mbps pair and zeros out for empty networks") {
  const fs::path cfg = make_config("toy.cfg", 4);
  const fs::path out = fs::temp_directory_path() / "cransim_cli_test" / "cal";
  std::string text;
  const int rc = run_cli("calibrate --config " + cfg.string() +
                             " --scheme strongest_s --s 2 --slots 2 --seed 5 --out " +
                             out.string(),
                         &text);
  CHECK(rc == 0);
  double macro = -1.0, pico = -1.0;
  std::istringstream(text) >> macro >> pico;
  CHECK(macro > 0.0);
  CHECK(pico >= 0.0);
  CHECK(fs::exists(out / "manifest.json"));

  const fs::path empty_cfg = make_config("empty.cfg", 0);
  std::string text2;
  CHECK(run_cli("calibrate --config " + empty_cfg.string() +
                    " --slots 1 --out " + out.string(),
                &text2) == 0);
  std::istringstream(text2) >> macro >> pico;
  CHECK(macro == 0.0);
  CHECK(pico == 0.0);
}

TEST_CASE("run writes the result files and is deterministic by seed") {
  const fs::path cfg = make_config("toy.cfg", 4);
  const fs::path out1 = fs::temp_directory_path() / "cransim_cli_test" / "run1";
  const fs::path out2 = fs::temp_directory_path() / "cransim_cli_test" / "run2";
  const std::string args = " --config " + cfg.string() +
                           " --scheme dynamic --slots 2 --seed 9 --backhaul 40,10";
  CHECK(run_cli("run" + args + " --out " + out1.string() + " --trace") == 0);
  CHECK(run_cli("run" + args + " --out " + out2.string()) == 0);
  for (const char* f : {"rates.csv", "backhaul.csv", "utility.csv", "manifest.json"}) {
    CHECK(fs::exists(out1 / f));
  }
  CHECK(fs::exists(out1 / "trace_slot0.csv"));
  CHECK(slurp(out1 / "rates.csv") == slurp(out2 / "rates.csv"));
  CHECK(slurp(out1 / "backhaul.csv") == slurp(out2 / "backhaul.csv"));
}

TEST_CASE("schemes on one seed share the user population") {
  const fs::path cfg = make_config("toy.cfg", 4);
  const fs::path outd = fs::temp_directory_path() / "cransim_cli_test" / "dyn";
  const fs::path outb = fs::temp_directory_path() / "cransim_cli_test" / "base";
  CHECK(run_cli("run --config " + cfg.string() +
                " --scheme dynamic --slots 1 --seed 4 --out " + outd.string()) == 0);
  CHECK(run_cli("run --config " + cfg.string() +
                " --scheme baseline:strongest_s --s 2 --slots 1 --seed 4 --out " +
                outb.string()) == 0);
  // identical user-id columns
  auto ids = [](const std::string& text) {
    std::vector<std::string> v;
    std::istringstream is(text);
    std::string line;
    std::getline(is, line);
    while (std::getline(is, line)) v.push_back(line.substr(0, line.find(',')));
    return v;
  };
  CHECK(ids(slurp(outd / "rates.csv")) == ids(slurp(outb / "rates.csv")));
}

TEST_CASE("bad inputs exit with the usage code") {
  const fs::path cfg = make_config("toy.cfg", 4);
  const fs::path dir = fs::temp_directory_path() / "cransim_cli_test";
  // unknown scheme
  CHECK(run_cli("run --config " + cfg.string() +
                " --scheme nonsense --slots 1 --out " + (dir / "x").string()) == 1);
  // malformed config
  const fs::path bad = dir / "bad.cfg";
  std::ofstream(bad) << "users_per_cell = 4\nnot_a_key = 7\n";
  CHECK(run_cli("run --config " + bad.string() + " --slots 1 --out " +
                (dir / "y").string()) == 1);
  // missing required option
  CHECK(run_cli("run --config " + cfg.string() + " --slots 1") == 1);
}

TEST_CASE("report compares runs and fails cleanly on a missing baseline") {
  const fs::path cfg = make_config("toy.cfg", 4);
  const fs::path dir = fs::temp_directory_path() / "cransim_cli_test";
  const fs::path outd = dir / "rep_dyn";
  const fs::path outb = dir / "rep_base";
  REQUIRE(run_cli("run --config " + cfg.string() +
                  " --scheme dynamic --slots 2 --seed 8 --out " + outd.string()) == 0);
  REQUIRE(run_cli("run --config " + cfg.string() +
                  " --scheme baseline:strongest_s --s 2 --slots 2 --seed 8 --out " +
                  outb.string()) == 0);
  const fs::path rep = dir / "rep_out";
  CHECK(run_cli("report " + outd.string() + " --baseline " + outb.string() +
                " --out " + rep.string()) == 0);
  CHECK(fs::exists(rep / "report.csv"));
  CHECK(fs::exists(rep / "report.json"));
  CHECK(fs::exists(rep / ("cdf_" + outd.filename().string() + ".csv")));

  CHECK(run_cli("report " + outd.string() + " --baseline " +
                (dir / "no_such_dir").string() + " --out " + rep.string()) == 2);
}

TEST_CASE("seed fan-out writes one result directory per seed") {
  const fs::path cfg = make_config("toy.cfg", 4);
  const fs::path out = fs::temp_directory_path() / "cransim_cli_test" / "fan";
  fs::remove_all(out);
  CHECK(run_cli("run --config " + cfg.string() +
                " --scheme dynamic --slots 1 --seeds 11 12 13 --parallel 2 --out " +
                out.string()) == 0);
  for (int s : {11, 12, 13}) {
    CHECK(fs::exists(out / ("seed" + std::to_string(s)) / "rates.csv"));
    CHECK(fs::exists(out / ("seed" + std::to_string(s)) / "manifest.json"));
  }
  // fan-out results match a direct single-seed run
  const fs::path single = fs::temp_directory_path() / "cransim_cli_test" / "fan_single";
  CHECK(run_cli("run --config " + cfg.string() +
                " --scheme dynamic --slots 1 --seed 12 --out " + single.string()) == 0);
  CHECK(slurp(out / "seed12" / "rates.csv") == slurp(single / "rates.csv"));
}

TEST_CASE("layout exports the position tables") {
  const fs::path cfg = make_config("toy.cfg", 4);
  const fs::path out = fs::temp_directory_path() / "cransim_cli_test" / "layout";
  CHECK(run_cli("layout --config " + cfg.string() + " --out " + out.string()) == 0);
  const std::string bs = slurp(out / "layout_bs.csv");
  CHECK(bs.find("bs_id,tier,x_km,y_km") == 0);
  CHECK(slurp(out / "layout_users.csv").find("user_id,x_km,y_km") == 0);
}
