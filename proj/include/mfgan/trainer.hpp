#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mfgan/errors.hpp"
#include "mfgan/losses.hpp"
#include "mfgan/networks.hpp"
#include "mfgan/problems.hpp"
#include "mfgan/random.hpp"

namespace mfgan::train {

enum class UpdateOrder { density_first, value_first };

std::string to_string(UpdateOrder o);
UpdateOrder parse_update_order(const std::string& s);

/// Hidden-layer description shared by both networks.
struct NetSpec {
  nn::LayerKind kind = nn::LayerKind::dgm;
  std::size_t width = 4;
  std::size_t layers = 1;  // gated layers for dgm, dense layers for mlp
  nn::Activation activation = nn::Activation::tanh;
};

struct TrainConfig {
  std::string problem = "ergodic_explicit";
  std::size_t dim = 1;
  double horizon = 1.0;  // finite-horizon problems only
  double sigma = 1.0;    // finite-horizon problems only

  long outer_loops = 1000;        // K
  int value_steps = 5;            // N_θ
  int density_steps = 2;          // N_ω
  std::size_t value_batch = 32;   // B_g
  std::size_t density_batch = 32; // B_d
  double alpha_g = 1e-3;          // value-network rate
  double alpha_d = 1e-4;          // density-network rate
  double rate_decay = 0.0;        // rate / (1 + decay·k); 0 keeps rates constant
  std::uint64_t seed = 0;
  long log_stride = 100;

  NetSpec value_net{nn::LayerKind::dgm, 4, 1, nn::Activation::tanh};
  NetSpec density_net{nn::LayerKind::dgm, 4, 1, nn::Activation::sigmoid};
  nn::Embedding embedding = nn::Embedding::fourier;
  nn::DensityMode density_mode = nn::DensityMode::normalized_grid;
  std::size_t quad_points = 64;  // normalizer grid, per axis

  loss::LossWeights weights{1.0, 0.0, 0.0};
  UpdateOrder order = UpdateOrder::density_first;

  bool strict_deterministic = true;
  std::size_t threads = 0;  // 0: MFGAN_THREADS or hardware concurrency
  std::size_t eval_points_per_axis = 256;
  std::size_t eval_quasi_random = 4096;
  std::size_t eval_batch = 256;  // fixed collocation set for logged losses
  long checkpoint_every = 0;  // 0: no periodic checkpoints

  /// Throws ConfigError.
  void validate() const;
  nn::Architecture value_architecture() const;
  nn::Architecture density_architecture() const;
};

/// One logged row. Metrics that do not apply are NaN.
struct LogRecord {
  long iteration = 0;
  double loss_hjb = 0.0;
  double loss_fp = 0.0;
  double loss_pen_val = 0.0;  // weighted value-side penalties
  double loss_pen_mf = 0.0;   // weighted density-side penalties
  double rel_err_u = std::numeric_limits<double>::quiet_NaN();
  double rel_err_m = std::numeric_limits<double>::quiet_NaN();
  double hbar = std::numeric_limits<double>::quiet_NaN();
  double elapsed_s = 0.0;
};

struct TrainingReport {
  std::vector<LogRecord> records;
  nn::NetworkParams value;
  nn::NetworkParams density;
  double density_normalizer = 1.0;
};

/// Raised when a loss or gradient becomes non-finite. Carries the report up
/// to the failing iteration (its last record is the diagnostic row) and the
/// parameters at that point.
class NonFiniteLoss : public Error {
 public:
  NonFiniteLoss(const std::string& what, TrainingReport report)
      : Error(what), report_(std::move(report)) {}
  const TrainingReport& report() const noexcept { return report_; }

 private:
  TrainingReport report_;
};

/// B points uniform on [0,1)^d (ergodic) or on [0,T]×[0,1)^d (finite horizon,
/// time first).
loss::Batch sample_batch(Rng& rng, std::size_t dim, std::size_t size, mfg::Flavor flavor,
                         double horizon = 1.0);

/// Adam with bias correction.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<double> first;
  std::vector<double> second;
};

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads, double rate);

/// Losses of one update, before the parameters moved.
struct StepLosses {
  double residual = 0.0;  // L̂_HJB or L̂_FP
  double penalty = 0.0;   // weighted penalties of the same side
  double total = 0.0;
};

struct Objective {
  StepLosses losses;
  std::vector<double> grad;  // over values then extras; empty unless requested
};

/// Value-side objective L̂_HJB + penalties as a function of the value network
/// (weights and H̄), with the density network frozen.
Objective value_objective(const mfg::MFGProblem& problem, const nn::NetworkParams& value,
                          const nn::NetworkParams& density, const TrainConfig& config,
                          const loss::Batch& batch, ad::Tape& tape, bool with_gradient = true);

/// Density-side objective L̂_FP + penalties as a function of the density
/// network, with the value network frozen. In normalized_grid mode the
/// normalizer is differentiated too.
Objective density_objective(const mfg::MFGProblem& problem, const nn::NetworkParams& value,
                            const nn::NetworkParams& density, const TrainConfig& config,
                            const loss::Batch& batch, ad::Tape& tape, bool with_gradient = true);

struct TrainCallbacks {
  std::function<void(const LogRecord&)> on_record;
  std::function<void(long, const nn::NetworkParams&, const nn::NetworkParams&)> on_checkpoint;
};

/// Alternating adversarial training of the value network u_θ (with H̄) and
/// the density network m_ω = exp(f_ω) [/ Z].
class Trainer {
 public:
  explicit Trainer(TrainConfig config);

  const TrainConfig& config() const noexcept { return config_; }
  const mfg::MFGProblem& problem() const noexcept { return problem_; }
  const nn::NetworkParams& value() const noexcept { return value_; }
  const nn::NetworkParams& density() const noexcept { return density_; }
  double normalizer() const noexcept { return normalizer_; }

  /// One density-network update on a fresh batch of B_d points.
  StepLosses density_step(long iteration);
  /// One value-network (and H̄) update on a fresh batch of B_g points.
  StepLosses value_step(long iteration);

  /// Learned u and m as plain functions.
  double value_at(std::span<const double> x) const;
  double density_at(std::span<const double> x) const;

  /// Value-side and density-side losses on the fixed evaluation set.
  std::pair<StepLosses, StepLosses> evaluate_losses() const;
  /// Relative l2 errors (u, m) against the closed form; NaN without one.
  std::pair<double, double> relative_errors() const;

  TrainingReport run(const TrainCallbacks& callbacks = {});

 private:
  void refresh_normalizer();
  double rate(double base, long iteration) const;
  LogRecord make_record(long iteration) const;
  TrainingReport snapshot() const;
  [[noreturn]] void fail(const std::string& what, LogRecord diagnostic);

  TrainConfig config_;
  mfg::MFGProblem problem_;
  nn::NetworkParams value_;
  nn::NetworkParams density_;
  double normalizer_ = 1.0;
  AdamState value_adam_;
  AdamState density_adam_;
  Rng rng_;
  ad::Tape tape_;
  std::size_t threads_ = 1;
  loss::Batch eval_batch_;
  std::vector<double> eval_points_;  // quasi-random points for d > 2
  std::vector<LogRecord> records_;
  std::chrono::steady_clock::time_point start_;
};

/// Trainer(config).run().
TrainingReport train(const TrainConfig& config, const TrainCallbacks& callbacks = {});

}  // namespace mfgan::train
