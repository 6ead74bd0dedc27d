#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mfgan/cli.hpp"
#include "mfgan/errors.hpp"

using namespace mfgan;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("mfgan_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

int run_cli(const std::string& args, const fs::path& cwd) {
  const std::string cmd = "cd '" + cwd.string() + "' && '" + MFGAN_CLI_PATH + "' " + args + " > cli.log 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kSmall =
    "problem = \"ergodic_explicit\"\n"
    "outer_loops = 6\n"
    "log_stride = 2\n"
    "eval_points_per_axis = 32\n"
    "quad_points = 32\n"
    "eval_batch = 32\n"
    "output_dir = \"run\"\n";

}  // namespace

TEST_CASE("bundled configuration parses") {
  for (const char* name : {"ergodic1d.cfg", "ergodic1d_long.cfg", "congestion2d.cfg", "finite_horizon.cfg"}) {
    CAPTURE(name);
    CHECK_NOTHROW(cli::load_experiment(std::string(MFGAN_SOURCE_DIR) + "/configs/" + name));
  }
  const auto c = cli::load_experiment(std::string(MFGAN_SOURCE_DIR) + "/configs/congestion2d.cfg");
  CHECK(c.train.dim == 2);
  CHECK(c.train.density_mode == nn::DensityMode::penalty);
  CHECK(c.train.weights.density == 1000.0);
}

TEST_CASE("run writes the report") {
  TempDir tmp("run");
  write(tmp.path / "small.cfg", kSmall);
  REQUIRE(run_cli("run small.cfg", tmp.path) == 0);
  const std::string csv = slurp(tmp.path / "run" / "report.csv");
  std::istringstream lines(csv);
  std::string header;
  std::getline(lines, header);
  CHECK(header == cli::kReportHeader);
  std::vector<std::string> rows;
  for (std::string l; std::getline(lines, l);) rows.push_back(l);
  CHECK(rows.size() == 4);
  CHECK(rows.front().rfind("0,", 0) == 0);
  CHECK(rows.back().rfind("6,", 0) == 0);
  CHECK(fs::exists(tmp.path / "run" / "report.json"));
  CHECK(fs::exists(tmp.path / "run" / "config.cfg"));
  CHECK(fs::exists(tmp.path / "run" / "value.ckpt"));
  CHECK(fs::exists(tmp.path / "run" / "density.ckpt"));
  // the echoed configuration reproduces the run
  const auto echoed = cli::load_experiment((tmp.path / "run" / "config.cfg").string());
  CHECK(echoed.train.outer_loops == 6);
  CHECK(echoed.train.eval_batch == 32);
}

TEST_CASE("strict runs are byte-identical and honour overrides") {
  TempDir tmp("repeat");
  write(tmp.path / "small.cfg", kSmall);
  REQUIRE(run_cli("run small.cfg --seed 7 --output_dir a", tmp.path) == 0);
  REQUIRE(run_cli("run small.cfg --seed 7 --output_dir b", tmp.path) == 0);
  REQUIRE(run_cli("run small.cfg --seed 8 --output_dir c", tmp.path) == 0);
  const auto a = slurp(tmp.path / "a" / "report.csv");
  CHECK(a == slurp(tmp.path / "b" / "report.csv"));
  CHECK(a != slurp(tmp.path / "c" / "report.csv"));
  CHECK(slurp(tmp.path / "a" / "value.ckpt") == slurp(tmp.path / "b" / "value.ckpt"));
  CHECK(cli::load_experiment((tmp.path / "a" / "config.cfg").string()).train.seed == 7);
}

TEST_CASE("configuration errors leave no files") {
  TempDir tmp("bad");
  write(tmp.path / "unknown.cfg", std::string(kSmall) + "learning_rate = 3\n");
  CHECK(run_cli("run unknown.cfg", tmp.path) == 1);
  CHECK_FALSE(fs::exists(tmp.path / "run"));

  write(tmp.path / "badvalue.cfg", std::string(kSmall) + "alpha_g = -1\n");
  CHECK(run_cli("run badvalue.cfg", tmp.path) == 1);
  CHECK_FALSE(fs::exists(tmp.path / "run"));

  write(tmp.path / "typo.cfg", std::string(kSmall) + "dim = two\n");
  CHECK(run_cli("run typo.cfg", tmp.path) == 1);
  CHECK(run_cli("run missing.cfg", tmp.path) == 1);
  CHECK_FALSE(fs::exists(tmp.path / "run"));

  CHECK_THROWS_AS(cli::load_experiment((tmp.path / "unknown.cfg").string()), ConfigError);
  cli::ExperimentConfig c;
  CHECK_THROWS_AS(cli::set_key(c, "update_order", "sideways"), ConfigError);
  CHECK_THROWS_AS(cli::set_key(c, "nope", "1"), ConfigError);
}

TEST_CASE("non-finite training exits with code 2") {
  TempDir tmp("nan");
  write(tmp.path / "small.cfg", kSmall);
  CHECK(run_cli("run small.cfg --alpha_g 1e200", tmp.path) == 2);
  const std::string csv = slurp(tmp.path / "run" / "report.csv");
  CHECK(csv.rfind(cli::kReportHeader, 0) == 0);
}

TEST_CASE("sweep") {
  TempDir tmp("sweep");
  write(tmp.path / "small.cfg", kSmall);
  CHECK(run_cli("sweep small.cfg --param alpha_g --values ''", tmp.path) == 1);
  CHECK(run_cli("sweep small.cfg --param momentum --values 0.1", tmp.path) == 1);
  REQUIRE(run_cli("sweep small.cfg --param batch --values 8,16 --seeds 1,2 --out sw", tmp.path) == 0);
  const std::string summary = slurp(tmp.path / "sw" / "summary.csv");
  std::istringstream lines(summary);
  std::string header;
  std::getline(lines, header);
  CHECK(header ==
        "param,value,seed,exit_code,final_iter,final_loss_hjb,final_loss_fp,final_rel_err_u,"
        "final_rel_err_m,oscillation");
  int rows = 0;
  for (std::string l; std::getline(lines, l);) ++rows;
  CHECK(rows == 4);

  auto base = cli::load_experiment((tmp.path / "small.cfg").string());
  base.write_checkpoints = false;
  base.write_json = false;
  const auto one = cli::run_sweep(base, "alpha_g", {1e-3}, {0}, 1, (tmp.path / "one").string());
  const auto two = cli::run_sweep(base, "alpha_g", {1e-3}, {0}, 2, (tmp.path / "two").string());
  REQUIRE(one.size() == 1);
  CHECK(one[0].final_iter == 6);
  CHECK(one[0].final_loss_hjb == two[0].final_loss_hjb);
  CHECK_THROWS_AS(cli::run_sweep(base, "alpha_g", {}, {0}, 1, (tmp.path / "none").string()), ConfigError);
}

TEST_CASE("verify exit codes") {
  TempDir tmp("verify");
  CHECK(run_cli("verify closed-form", tmp.path) == 0);
  CHECK(run_cli("verify-game", tmp.path) == 0);
  CHECK(run_cli("verify bogus", tmp.path) == 1);
  std::ostringstream out;
  CHECK(cli::run_verify("autodiff", out) == cli::kSuccess);
  CHECK(out.str().find("FAIL") == std::string::npos);
}

TEST_CASE("fd-solve and keys") {
  TempDir tmp("fd");
  CHECK(run_cli("fd-solve --points 64 --out fd.csv", tmp.path) == 0);
  CHECK(slurp(tmp.path / "fd.csv").find("x,") == 0);
  CHECK(run_cli("keys", tmp.path) == 0);
  CHECK(run_cli("", tmp.path) != 0);
}

TEST_CASE("configuration text round trip") {
  cli::ExperimentConfig c;
  cli::set_key(c, "problem", "ergodic_congestion");
  cli::set_key(c, "dim", "2");
  cli::set_key(c, "alpha_d", "0.00123");
  cli::set_key(c, "value_activation", "sigmoid");
  cli::set_key(c, "density_mode", "penalty");
  cli::set_key(c, "update_order", "value_first");
  cli::set_key(c, "strict_deterministic", "false");
  cli::set_key(c, "beta_mf", "12.5");
  TempDir tmp("roundtrip");
  write(tmp.path / "c.cfg", cli::to_config_text(c));
  const auto back = cli::load_experiment((tmp.path / "c.cfg").string());
  CHECK(cli::to_config_text(back) == cli::to_config_text(c));
  CHECK(back.train.alpha_d == 0.00123);
  CHECK(back.train.order == train::UpdateOrder::value_first);
  CHECK_FALSE(back.train.strict_deterministic);

  std::vector<std::string> names;
  for (const auto& k : cli::config_keys()) names.push_back(k.name);
  CHECK(names.size() == 38);
  CHECK(names.front() == "problem");
}

TEST_CASE("report csv and oscillation metric") {
  std::vector<train::LogRecord> recs(21);
  for (int i = 0; i < 21; ++i) {
    recs[i].iteration = i * 10;
    recs[i].loss_hjb = i % 2 == 0 ? 1.0 : 3.0;
    recs[i].elapsed_s = 0.5 * i;
  }
  // last 2 of 20 records after iteration 0: {3, 1}
  CHECK(cli::oscillation_metric(recs) == doctest::Approx(1.0));
  std::ostringstream out;
  cli::write_report_csv(out, std::span(recs).first(2), true);
  CHECK(out.str() == std::string(cli::kReportHeader) + "\n0,1,0,0,0,nan,nan,nan,0\n10,3,0,0,0,nan,nan,nan,0\n");
}
