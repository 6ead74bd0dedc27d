#include "mfgan/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include "mfgan/evaluation.hpp"
#include "mfgan/verify.hpp"

namespace mfgan::cli {

namespace fs = std::filesystem;

namespace {

enum class Kind { text, integer, real, flag };

struct Key {
  std::string name;
  std::string description;
  Kind kind;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

long long parse_integer(const std::string& key, const std::string& s) {
  long long v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError(fmt::format("{}: '{}' is not an integer", key, s));
  return v;
}

std::size_t parse_count(const std::string& key, const std::string& s) {
  const long long v = parse_integer(key, s);
  if (v < 0) throw ConfigError(fmt::format("{}: must be nonnegative", key));
  return static_cast<std::size_t>(v);
}

double parse_real(const std::string& key, const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw ConfigError(fmt::format("{}: '{}' is not a number", key, s));
  }
  return v;
}

bool parse_flag(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError(fmt::format("{}: '{}' is not true or false", key, s));
}

nn::LayerKind parse_layer(const std::string& key, const std::string& s) {
  if (s == "dgm") return nn::LayerKind::dgm;
  if (s == "dense") return nn::LayerKind::dense;
  throw ConfigError(fmt::format("{}: unknown layer kind '{}'", key, s));
}

std::string real_text(double v) { return fmt::format("{}", v); }

template <class Parse>
auto wrap(const std::string& key, Parse parse, const std::string& s) {
  try {
    return parse(s);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(fmt::format("{}: {}", key, e.what()));
  }
}

#define MFGAN_TEXT(NAME, DESC, FIELD)                                                    \
  Key {                                                                                 \
    NAME, DESC, Kind::text, [](const ExperimentConfig& c) { return std::string(c.FIELD); }, \
        [](ExperimentConfig& c, const std::string& v) { c.FIELD = v; }                  \
  }
#define MFGAN_COUNT(NAME, DESC, FIELD)                                                   \
  Key {                                                                                 \
    NAME, DESC, Kind::integer, [](const ExperimentConfig& c) { return fmt::format("{}", c.FIELD); }, \
        [](ExperimentConfig& c, const std::string& v) {                                 \
          c.FIELD = static_cast<decltype(c.FIELD)>(parse_count(NAME, v));               \
        }                                                                               \
  }
#define MFGAN_SIGNED(NAME, DESC, FIELD)                                                  \
  Key {                                                                                 \
    NAME, DESC, Kind::integer, [](const ExperimentConfig& c) { return fmt::format("{}", c.FIELD); }, \
        [](ExperimentConfig& c, const std::string& v) {                                 \
          c.FIELD = static_cast<decltype(c.FIELD)>(parse_integer(NAME, v));             \
        }                                                                               \
  }
#define MFGAN_REAL(NAME, DESC, FIELD)                                                    \
  Key {                                                                                 \
    NAME, DESC, Kind::real, [](const ExperimentConfig& c) { return real_text(c.FIELD); }, \
        [](ExperimentConfig& c, const std::string& v) { c.FIELD = parse_real(NAME, v); } \
  }
#define MFGAN_FLAG(NAME, DESC, FIELD)                                                    \
  Key {                                                                                 \
    NAME, DESC, Kind::flag, [](const ExperimentConfig& c) { return std::string(c.FIELD ? "true" : "false"); }, \
        [](ExperimentConfig& c, const std::string& v) { c.FIELD = parse_flag(NAME, v); } \
  }

Key enum_key(const std::string& name, const std::string& desc,
             std::function<std::string(const ExperimentConfig&)> get,
             std::function<void(ExperimentConfig&, const std::string&)> set) {
  return Key{name, desc, Kind::text, std::move(get), [name, set](ExperimentConfig& c, const std::string& v) {
               wrap(name, [&](const std::string& s) { set(c, s); return 0; }, v);
             }};
}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = [] {
    std::vector<Key> k{
        MFGAN_TEXT("problem", "ergodic_explicit, ergodic_congestion or finite_horizon_custom", train.problem),
        MFGAN_COUNT("dim", "spatial dimension d", train.dim),
        MFGAN_REAL("horizon", "time horizon T (finite-horizon problems)", train.horizon),
        MFGAN_REAL("sigma", "volatility (finite-horizon problems)", train.sigma),
        MFGAN_SIGNED("outer_loops", "outer iterations K", train.outer_loops),
        MFGAN_SIGNED("value_steps", "value-network updates per outer iteration", train.value_steps),
        MFGAN_SIGNED("density_steps", "density-network updates per outer iteration", train.density_steps),
        MFGAN_COUNT("value_batch", "collocation points per value update", train.value_batch),
        MFGAN_COUNT("density_batch", "collocation points per density update", train.density_batch),
        MFGAN_REAL("alpha_g", "value-network learning rate", train.alpha_g),
        MFGAN_REAL("alpha_d", "density-network learning rate", train.alpha_d),
        MFGAN_REAL("rate_decay", "inverse-time decay c in rate/(1 + c k); 0 disables", train.rate_decay),
        MFGAN_COUNT("seed", "seed for initialization, sampling and evaluation points", train.seed),
        MFGAN_SIGNED("log_stride", "iterations between report rows", train.log_stride),
    };
    auto layer_keys = [&](const std::string& prefix, train::NetSpec train::TrainConfig::*net) {
      k.push_back(enum_key(
          prefix + "_layer", "hidden layer kind: dgm or dense",
          [net](const ExperimentConfig& c) { return nn::to_string((c.train.*net).kind); },
          [net, prefix](ExperimentConfig& c, const std::string& v) {
            (c.train.*net).kind = parse_layer(prefix + "_layer", v);
          }));
      k.push_back(Key{prefix + "_width", "hidden width", Kind::integer,
                      [net](const ExperimentConfig& c) { return fmt::format("{}", (c.train.*net).width); },
                      [net, prefix](ExperimentConfig& c, const std::string& v) {
                        (c.train.*net).width = parse_count(prefix + "_width", v);
                      }});
      k.push_back(Key{prefix + "_layers", "gated layers (dgm) or dense layers", Kind::integer,
                      [net](const ExperimentConfig& c) { return fmt::format("{}", (c.train.*net).layers); },
                      [net, prefix](ExperimentConfig& c, const std::string& v) {
                        (c.train.*net).layers = parse_count(prefix + "_layers", v);
                      }});
      k.push_back(enum_key(
          prefix + "_activation", "tanh, sigmoid, exp or identity",
          [net](const ExperimentConfig& c) { return nn::to_string((c.train.*net).activation); },
          [net](ExperimentConfig& c, const std::string& v) { (c.train.*net).activation = nn::parse_activation(v); }));
    };
    layer_keys("value", &train::TrainConfig::value_net);
    layer_keys("density", &train::TrainConfig::density_net);
    k.push_back(enum_key(
        "embedding", "input embedding: identity or fourier",
        [](const ExperimentConfig& c) { return nn::to_string(c.train.embedding); },
        [](ExperimentConfig& c, const std::string& v) { c.train.embedding = nn::parse_embedding(v); }));
    k.push_back(enum_key(
        "density_mode", "normalized_grid (d <= 2, ergodic) or penalty",
        [](const ExperimentConfig& c) { return nn::to_string(c.train.density_mode); },
        [](ExperimentConfig& c, const std::string& v) { c.train.density_mode = nn::parse_density_mode(v); }));
    std::vector<Key> rest{
        MFGAN_COUNT("quad_points", "normalizer grid points per axis", train.quad_points),
        MFGAN_REAL("beta_val", "mean-zero (or terminal) penalty weight", train.weights.value),
        MFGAN_REAL("beta_mf", "normalization (or initial) penalty weight", train.weights.density),
        MFGAN_REAL("beta_per", "periodicity penalty weight", train.weights.periodicity),
    };
    k.insert(k.end(), rest.begin(), rest.end());
    k.push_back(enum_key(
        "update_order", "density_first or value_first",
        [](const ExperimentConfig& c) { return train::to_string(c.train.order); },
        [](ExperimentConfig& c, const std::string& v) { c.train.order = train::parse_update_order(v); }));
    std::vector<Key> tail{
        MFGAN_FLAG("strict_deterministic", "single-threaded, bitwise-reproducible reports", train.strict_deterministic),
        MFGAN_COUNT("threads", "evaluation threads; 0 uses MFGAN_THREADS or all cores", train.threads),
        MFGAN_COUNT("eval_points_per_axis", "error grid points per axis (d <= 2)", train.eval_points_per_axis),
        MFGAN_COUNT("eval_quasi_random", "Halton points for errors (d > 2)", train.eval_quasi_random),
        MFGAN_COUNT("eval_batch", "fixed collocation points for logged losses", train.eval_batch),
        MFGAN_SIGNED("checkpoint_every", "iterations between checkpoints; 0 disables", train.checkpoint_every),
        MFGAN_TEXT("output_dir", "directory for reports and checkpoints", output_dir),
        MFGAN_FLAG("write_json", "write report.json", write_json),
        MFGAN_FLAG("write_checkpoints", "write final parameter checkpoints", write_checkpoints),
    };
    k.insert(k.end(), tail.begin(), tail.end());
    return k;
  }();
  return table;
}

#undef MFGAN_TEXT
#undef MFGAN_COUNT
#undef MFGAN_SIGNED
#undef MFGAN_REAL
#undef MFGAN_FLAG

const Key& find_key(const std::string& name) {
  for (const auto& k : keys()) {
    if (k.name == name) return k;
  }
  throw ConfigError(fmt::format("unknown configuration key '{}'", name));
}

nlohmann::ordered_json typed(const Key& k, const std::string& text) {
  switch (k.kind) {
    case Kind::integer: return std::stoll(text);
    case Kind::real: return std::stod(text);
    case Kind::flag: return text == "true";
    case Kind::text: break;
  }
  return text;
}

nlohmann::ordered_json number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

nlohmann::ordered_json record_json(const train::LogRecord& r, bool zero_elapsed) {
  return {{"iter", r.iteration},
          {"loss_hjb", number(r.loss_hjb)},
          {"loss_fp", number(r.loss_fp)},
          {"loss_pen_val", number(r.loss_pen_val)},
          {"loss_pen_mf", number(r.loss_pen_mf)},
          {"rel_err_u", number(r.rel_err_u)},
          {"rel_err_m", number(r.rel_err_m)},
          {"hbar", number(r.hbar)},
          {"elapsed_s", zero_elapsed ? 0.0 : r.elapsed_s}};
}

std::string csv_number(double v) { return fmt::format("{:.17g}", v); }

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(fmt::format("cannot write {}", path.string()));
  f << text;
}

}  // namespace

std::vector<KeyInfo> config_keys() {
  std::vector<KeyInfo> out;
  for (const auto& k : keys()) out.push_back({k.name, k.description});
  return out;
}

void set_key(ExperimentConfig& config, const std::string& key, const std::string& value) {
  find_key(key).set(config, value);
}

std::string to_config_text(const ExperimentConfig& config) {
  std::string out;
  for (const auto& k : keys()) {
    const std::string v = k.get(config);
    out += k.kind == Kind::text ? fmt::format("{} = \"{}\"\n", k.name, v) : fmt::format("{} = {}\n", k.name, v);
  }
  return out;
}

ExperimentConfig load_experiment(const std::string& path, const std::vector<std::string>& overrides) {
  ExperimentConfig config;
  CLI::App app{"experiment configuration"};
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_config("--config", path, "configuration file", true);
  for (const auto& k : keys()) {
    app.add_option_function<std::string>(
        "--" + k.name, [&config, &k](const std::string& v) { k.set(config, v); }, k.description);
  }
  std::vector<std::string> args(overrides.rbegin(), overrides.rend());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    throw ConfigError(fmt::format("{}: {}", path, e.what()));
  }
  config.train.validate();
  return config;
}

void write_report_csv(std::ostream& out, std::span<const train::LogRecord> records, bool zero_elapsed) {
  out << kReportHeader << '\n';
  for (const auto& r : records) {
    out << fmt::format("{},{},{},{},{},{},{},{},{}\n", r.iteration, csv_number(r.loss_hjb),
                       csv_number(r.loss_fp), csv_number(r.loss_pen_val), csv_number(r.loss_pen_mf),
                       csv_number(r.rel_err_u), csv_number(r.rel_err_m), csv_number(r.hbar),
                       zero_elapsed ? std::string("0") : csv_number(r.elapsed_s));
  }
}

double oscillation_metric(std::span<const train::LogRecord> records) {
  std::vector<double> tail;
  for (const auto& r : records) {
    if (r.iteration > 0) tail.push_back(r.loss_hjb);
  }
  if (tail.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t keep = std::min(
      tail.size(), std::max<std::size_t>(2, (tail.size() + 9) / 10));
  tail.erase(tail.begin(), tail.end() - static_cast<long>(keep));
  double mean = 0.0;
  for (double v : tail) mean += v;
  mean /= static_cast<double>(tail.size());
  double var = 0.0;
  for (double v : tail) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(tail.size()));
}

RunResult run_experiment(const ExperimentConfig& config) {
  RunResult result;
  std::unique_ptr<train::Trainer> trainer;
  try {
    trainer = std::make_unique<train::Trainer>(config.train);
  } catch (const ConfigError& e) {
    result.exit_code = kConfigError;
    result.message = e.what();
    return result;
  }

  const fs::path dir(config.output_dir);
  fs::create_directories(dir);
  write_file(dir / "config.cfg", to_config_text(config));

  train::TrainCallbacks callbacks;
  if (config.write_checkpoints) {
    callbacks.on_checkpoint = [&](long k, const nn::NetworkParams& value, const nn::NetworkParams& density) {
      const fs::path cp = dir / "checkpoints";
      fs::create_directories(cp);
      nn::save_checkpoint((cp / fmt::format("value_{}.ckpt", k)).string(), value);
      nn::save_checkpoint((cp / fmt::format("density_{}.ckpt", k)).string(), density);
    };
  }

  train::TrainingReport report;
  std::string status = "ok";
  try {
    report = trainer->run(callbacks);
  } catch (const train::NonFiniteLoss& e) {
    report = e.report();
    status = "non_finite_loss";
    result.exit_code = kNonFinite;
    result.message = e.what();
  }
  result.records = report.records;

  const bool zero_elapsed = config.train.strict_deterministic;
  {
    std::ostringstream csv;
    write_report_csv(csv, report.records, zero_elapsed);
    write_file(dir / "report.csv", csv.str());
  }
  // a failed run always dumps its state
  if (config.write_checkpoints || result.exit_code == kNonFinite) {
    nn::save_checkpoint((dir / "value.ckpt").string(), report.value);
    nn::save_checkpoint((dir / "density.ckpt").string(), report.density);
  }
  if (config.write_json) {
    nlohmann::ordered_json j;
    j["status"] = status;
    j["message"] = result.message;
    nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
    for (const auto& k : keys()) cfg[k.name] = typed(k, k.get(config));
    j["config"] = cfg;
    j["density_normalizer"] = number(report.density_normalizer);
    j["records"] = nlohmann::ordered_json::array();
    for (const auto& r : report.records) j["records"].push_back(record_json(r, zero_elapsed));
    if (!report.records.empty()) j["final"] = record_json(report.records.back(), zero_elapsed);
    j["oscillation"] = number(oscillation_metric(report.records));
    write_file(dir / "report.json", j.dump(2) + "\n");
  }
  return result;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& base, const std::string& param,
                                const std::vector<double>& values,
                                const std::vector<std::uint64_t>& seeds, std::size_t jobs,
                                const std::string& out_dir) {
  if (param != "alpha_g" && param != "alpha_d" && param != "batch") {
    throw ConfigError(fmt::format("sweep parameter must be alpha_g, alpha_d or batch, not '{}'", param));
  }
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  const std::vector<std::uint64_t> seed_list = seeds.empty() ? std::vector{base.train.seed} : seeds;

  struct Job {
    ExperimentConfig config;
    SweepRow row;
  };
  std::vector<Job> plan;
  for (double v : values) {
    for (std::uint64_t s : seed_list) {
      Job job{base, {}};
      if (param == "batch") {
        if (!(v >= 1.0) || v != std::floor(v)) throw ConfigError("batch values must be positive integers");
        job.config.train.value_batch = job.config.train.density_batch = static_cast<std::size_t>(v);
      } else {
        set_key(job.config, param, real_text(v));
      }
      job.config.train.seed = s;
      fs::path dir = fs::path(out_dir) / fmt::format("{}_{}", param, real_text(v));
      if (seed_list.size() > 1) dir /= fmt::format("seed_{}", s);
      job.config.output_dir = dir.string();
      job.config.train.validate();
      job.row.param = param;
      job.row.value = v;
      job.row.seed = s;
      plan.push_back(std::move(job));
    }
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < plan.size(); i = next++) {
      try {
        const auto res = run_experiment(plan[i].config);
        auto& row = plan[i].row;
        row.exit_code = res.exit_code;
        row.oscillation = oscillation_metric(res.records);
        if (!res.records.empty()) {
          const auto& last = res.records.back();
          row.final_iter = last.iteration;
          row.final_loss_hjb = last.loss_hjb;
          row.final_loss_fp = last.loss_fp;
          row.final_rel_err_u = last.rel_err_u;
          row.final_rel_err_m = last.rel_err_m;
        }
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(jobs, plan.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  std::vector<SweepRow> rows;
  std::string csv =
      "param,value,seed,exit_code,final_iter,final_loss_hjb,final_loss_fp,final_rel_err_u,"
      "final_rel_err_m,oscillation\n";
  for (const auto& job : plan) {
    const auto& r = job.row;
    csv += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", r.param, real_text(r.value), r.seed,
                       r.exit_code, r.final_iter, csv_number(r.final_loss_hjb),
                       csv_number(r.final_loss_fp), csv_number(r.final_rel_err_u),
                       csv_number(r.final_rel_err_m), csv_number(r.oscillation));
    rows.push_back(r);
  }
  fs::create_directories(out_dir);
  write_file(fs::path(out_dir) / "summary.csv", csv);
  return rows;
}

// ---------------------------------------------------------------------------
// verify

namespace {

struct Row {
  std::string name;
  double value;
  double threshold;
  bool pass;
};

std::vector<Row> suite_closed_form() {
  std::vector<Row> rows;
  for (std::size_t d : {1, 2}) {
    const auto r = verify::closed_form_residuals(d);
    rows.push_back({fmt::format("max |r_u|, d={}", d), r.max_hjb, 1e-8, r.max_hjb < 1e-8});
    rows.push_back({fmt::format("max |r_m|, d={}", d), r.max_fp, 1e-8, r.max_fp < 1e-8});
  }
  return rows;
}

std::vector<Row> suite_autodiff() {
  double worst_value = 0.0;
  double worst_density = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto g = verify::gradient_check(s);
    worst_value = std::max(worst_value, g.value_rel);
    worst_density = std::max(worst_density, g.density_rel);
  }
  double worst_grad = 0.0;
  double worst_lap = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto c = verify::input_derivative_check(s);
    worst_grad = std::max(worst_grad, c.grad_rel);
    worst_lap = std::max(worst_lap, c.laplacian_rel);
  }
  return {{"value-loss gradient vs FD (20 nets)", worst_value, 1e-4, worst_value < 1e-4},
          {"density-loss gradient vs FD (20 nets)", worst_density, 1e-4, worst_density < 1e-4},
          {"input gradient vs FD", worst_grad, 1e-6, worst_grad < 1e-6},
          {"input Laplacian vs FD", worst_lap, 1e-5, worst_lap < 1e-5}};
}

std::vector<Row> suite_oracle() {
  const auto o = verify::oracle_check(256);
  const double order = std::min(o.order_u, o.order_m);
  return {{"rel-l2 u, n=256", o.rel_u, 1e-3, o.rel_u <= 1e-3},
          {"rel-l2 m, n=256", o.rel_m, 1e-3, o.rel_m <= 1e-3},
          {"|hbar - hbar*|, n=256", o.hbar_error, 1e-3, o.hbar_error <= 1e-3},
          {"observed order (128 -> 256)", order, 1.8, order >= 1.8}};
}

std::vector<Row> suite_game() {
  const auto g = verify::game_check();
  return {{"|cost(mu,mu) + ln 4|", g.self_cost_error, 1e-12, g.self_cost_error <= 1e-12},
          {"cost = 2 JS - ln 4", g.js_identity_error, 1e-12, g.js_identity_error <= 1e-12},
          {"brute-force discriminator", g.brute_force_error, g.brute_force_step,
           g.brute_force_error <= g.brute_force_step},
          {"Pareto minimizer deviation", g.pareto_deviation, g.pareto_resolution,
           g.pareto_deviation <= g.pareto_resolution && g.pareto_unique},
          {"convergence demo seeds passing", static_cast<double>(g.convergence_passes), 19.0,
           g.convergence_passes >= 19}};
}

}  // namespace

int run_verify(const std::string& suite, std::ostream& out) {
  std::vector<std::string> names;
  if (suite == "all") {
    names = {"autodiff", "closed-form", "game", "oracle"};
  } else if (suite == "autodiff" || suite == "closed-form" || suite == "game" || suite == "oracle") {
    names = {suite};
  } else {
    return kConfigError;
  }
  bool ok = true;
  out << fmt::format("{:<12} {:<40} {:>12} {:>12}  {}\n", "suite", "check", "value", "threshold", "result");
  for (const auto& name : names) {
    std::vector<Row> rows;
    if (name == "autodiff") rows = suite_autodiff();
    if (name == "closed-form") rows = suite_closed_form();
    if (name == "game") rows = suite_game();
    if (name == "oracle") rows = suite_oracle();
    for (const auto& r : rows) {
      out << fmt::format("{:<12} {:<40} {:>12.4g} {:>12.4g}  {}\n", name, r.name, r.value, r.threshold,
                         r.pass ? "PASS" : "FAIL");
      ok = ok && r.pass;
    }
  }
  return ok ? kSuccess : kVerifyFailed;
}

// ---------------------------------------------------------------------------

namespace {

int fd_solve(const std::string& problem_name, const eval::FdSolverOptions& opts, const std::string& out_path) {
  const auto problem = mfg::problem_by_name(problem_name, 1);
  const auto sol = eval::fd_reference_solver_1d(problem, opts);
  std::ostringstream csv;
  const bool exact = problem.closed_form.has_value();
  csv << (exact ? "x,u,m,u_exact,m_exact\n" : "x,u,m\n");
  for (std::size_t k = 0; k < sol.x.size(); ++k) {
    csv << fmt::format("{},{},{}", csv_number(sol.x[k]), csv_number(sol.u[k]), csv_number(sol.m[k]));
    if (exact) {
      const double x[1] = {sol.x[k]};
      csv << fmt::format(",{},{}", csv_number(problem.closed_form->value(x)),
                         csv_number(problem.closed_form->density(x)));
    }
    csv << '\n';
  }
  if (out_path.empty()) {
    std::cout << csv.str();
  } else {
    write_file(out_path, csv.str());
  }
  std::cerr << fmt::format("hbar = {:.12g}  iterations = {}  hjb residual = {:.3g}  fp residual = {:.3g}\n",
                           sol.hbar, sol.iterations, sol.hjb_residual, sol.fp_residual);
  return kSuccess;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) out.push_back(parse_real("--values", item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural solvers for mean-field games: training, sweeps and self-checks"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Train one configuration");
  run->add_option("config", config_path, "configuration file")->required();
  run->allow_extras();

  std::string sweep_config, sweep_param, sweep_values, sweep_seeds, sweep_out;
  std::size_t sweep_jobs = 1;
  auto* sweep = app.add_subcommand("sweep", "Run one configuration over several parameter values");
  sweep->add_option("config", sweep_config, "base configuration file")->required();
  sweep->add_option("--param", sweep_param, "alpha_g, alpha_d or batch")->required();
  sweep->add_option("--values", sweep_values, "comma-separated values")->required();
  sweep->add_option("--seeds", sweep_seeds, "comma-separated seeds (default: the config seed)");
  sweep->add_option("--jobs", sweep_jobs, "concurrent runs")->check(CLI::PositiveNumber);
  sweep->add_option("--out", sweep_out, "output directory (default: output_dir of the config)");
  sweep->allow_extras();

  std::string suite;
  auto* verify_cmd = app.add_subcommand("verify", "Run a self-check suite");
  verify_cmd->add_option("suite", suite, "autodiff, closed-form, game, oracle or all")->required();
  auto* verify_game = app.add_subcommand("verify-game", "Same as 'verify game'");

  std::string fd_problem = "ergodic_explicit", fd_out;
  eval::FdSolverOptions fd_opts;
  auto* fd = app.add_subcommand("fd-solve", "Finite-difference reference solution in one dimension");
  fd->add_option("--problem", fd_problem, "ergodic_explicit or ergodic_congestion");
  fd->add_option("--points", fd_opts.points, "grid points");
  fd->add_option("--damping", fd_opts.damping, "relaxation of the density update");
  fd->add_option("--tolerance", fd_opts.tolerance, "stopping tolerance");
  fd->add_option("--max-iterations", fd_opts.max_iterations, "iteration cap");
  fd->add_option("--out", fd_out, "output CSV (default: standard output)");

  auto* keys_cmd = app.add_subcommand("keys", "List configuration keys and defaults");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kSuccess : kConfigError;
  }

  try {
    if (*run) {
      const auto config = load_experiment(config_path, run->remaining());
      const auto res = run_experiment(config);
      if (res.exit_code != kSuccess) {
        std::cerr << "error: " << res.message << '\n';
        return res.exit_code;
      }
      const auto& last = res.records.back();
      std::cout << fmt::format(
          "iter {}  loss_hjb {:.4g}  loss_fp {:.4g}  rel_err_u {:.4g}  rel_err_m {:.4g}  -> {}\n",
          last.iteration, last.loss_hjb, last.loss_fp, last.rel_err_u, last.rel_err_m,
          config.output_dir);
      return kSuccess;
    }
    if (*sweep) {
      const auto base = load_experiment(sweep_config, sweep->remaining());
      std::vector<std::uint64_t> seeds;
      for (const auto& s : split_list(sweep_seeds)) seeds.push_back(parse_count("--seeds", s));
      const auto rows = run_sweep(base, sweep_param, parse_values(sweep_values), seeds, sweep_jobs,
                                  sweep_out.empty() ? base.output_dir : sweep_out);
      int code = kSuccess;
      for (const auto& r : rows) {
        std::cout << fmt::format("{} = {:<10} seed {:<4} oscillation {:.4g}  rel_err_u {:.4g}  rel_err_m {:.4g}\n",
                                 r.param, real_text(r.value), r.seed, r.oscillation, r.final_rel_err_u,
                                 r.final_rel_err_m);
        if (code == kSuccess && r.exit_code != kSuccess) code = r.exit_code;
      }
      return code;
    }
    if (*verify_cmd || *verify_game) {
      const std::string name = *verify_game ? "game" : suite;
      const int code = run_verify(name, std::cout);
      if (code == kConfigError) std::cerr << "error: unknown suite '" << name << "'\n";
      return code;
    }
    if (*fd) return fd_solve(fd_problem, fd_opts, fd_out);
    if (*keys_cmd) {
      const ExperimentConfig defaults;
      for (const auto& k : keys()) {
        std::cout << fmt::format("{:<22} {:<18} {}\n", k.name, k.get(defaults), k.description);
      }
      return kSuccess;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
  return kSuccess;
}

}  // namespace mfgan::cli
