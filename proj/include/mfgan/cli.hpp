#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mfgan/trainer.hpp"

namespace mfgan::cli {

enum ExitCode : int { kSuccess = 0, kConfigError = 1, kNonFinite = 2, kVerifyFailed = 3 };

inline constexpr const char* kReportHeader =
    "iter,loss_hjb,loss_fp,loss_pen_val,loss_pen_mf,rel_err_u,rel_err_m,hbar,elapsed_s";

/// Training configuration plus output options.
struct ExperimentConfig {
  train::TrainConfig train;
  std::string output_dir = "out";
  bool write_json = true;
  bool write_checkpoints = true;
};

/// Documented configuration keys in file order.
struct KeyInfo {
  std::string name;
  std::string description;
};
std::vector<KeyInfo> config_keys();

/// Reads `key = value` lines (TOML syntax). Unknown keys are rejected.
/// `overrides` are command-line style tokens such as {"--seed", "7"} and take
/// precedence over the file. Throws ConfigError.
ExperimentConfig load_experiment(const std::string& path, const std::vector<std::string>& overrides = {});

/// Sets one key from its text form. Throws ConfigError.
void set_key(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Resolved configuration in the same syntax load_experiment reads.
std::string to_config_text(const ExperimentConfig& config);

/// CSV with the frozen header. `zero_elapsed` writes 0 in the elapsed column.
void write_report_csv(std::ostream& out, std::span<const train::LogRecord> records, bool zero_elapsed);

/// Standard deviation of loss_hjb over the last 10% of the records after
/// iteration 0 (at least two records).
double oscillation_metric(std::span<const train::LogRecord> records);

struct RunResult {
  int exit_code = kSuccess;
  std::string message;
  std::vector<train::LogRecord> records;
};

/// Trains and writes report.csv, report.json, config.cfg and checkpoints
/// into config.output_dir. Configuration errors leave no files behind.
RunResult run_experiment(const ExperimentConfig& config);

struct SweepRow {
  std::string param;
  double value = 0.0;
  std::uint64_t seed = 0;
  int exit_code = 0;
  long final_iter = 0;
  double final_loss_hjb = 0.0;
  double final_loss_fp = 0.0;
  double final_rel_err_u = 0.0;
  double final_rel_err_m = 0.0;
  double oscillation = 0.0;
};

/// One run per (value, seed) under out_dir/<param>_<value>[/seed_<s>], then
/// out_dir/summary.csv. `param` is alpha_g, alpha_d or batch (both batch
/// sizes). Runs execute on up to `jobs` threads. Throws ConfigError.
std::vector<SweepRow> run_sweep(const ExperimentConfig& base, const std::string& param,
                                const std::vector<double>& values,
                                const std::vector<std::uint64_t>& seeds, std::size_t jobs,
                                const std::string& out_dir);

/// Runs a named suite (autodiff, closed-form, game, oracle, all), printing a
/// table. Returns kSuccess, kVerifyFailed, or kConfigError for an unknown suite.
int run_verify(const std::string& suite, std::ostream& out);

/// Command-line entry point.
int main(int argc, char** argv);

}  // namespace mfgan::cli
