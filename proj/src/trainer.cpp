#include "mfgan/trainer.hpp"

#include <fmt/format.h>

#include <cmath>

#include "mfgan/evaluation.hpp"
#include "mfgan/parallel.hpp"

namespace mfgan::train {

namespace {

using ad::HyperDual;
using ad::Var;
using HD = HyperDual<Var>;

constexpr const char* kHbar = "hbar";

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

nn::Architecture build(const NetSpec& spec, std::size_t input_dim, std::size_t time_axes,
                       nn::Embedding embedding) {
  if (spec.kind == nn::LayerKind::dgm) {
    return nn::Architecture::dgm(input_dim, spec.width, spec.layers, spec.activation, embedding,
                                 time_axes);
  }
  return nn::Architecture::mlp(input_dim, std::vector<std::size_t>(spec.layers, spec.width),
                               spec.activation, embedding, time_axes);
}

loss::Field value_field(const nn::NetworkParams& p, std::span<const Var> theta) {
  const auto weights = theta.first(p.values.size());
  const nn::Architecture* arch = &p.architecture;
  return [arch, weights](std::span<const HD> x) { return nn::evaluate<HD, Var>(*arch, weights, x); };
}

loss::Field density_field(const nn::NetworkParams& p, std::span<const Var> omega,
                          const Var& normalizer, nn::DensityMode mode) {
  const auto weights = omega.first(p.values.size());
  const nn::Architecture* arch = &p.architecture;
  const bool normalize = mode == nn::DensityMode::normalized_grid;
  return [arch, weights, normalizer, normalize](std::span<const HD> x) {
    const HD e = nn::guarded_exp(nn::evaluate<HD, Var>(*arch, weights, x));
    return normalize ? e / normalizer : e;
  };
}

StepLosses split(const Var& residual, const Var& total) {
  return {residual.value(), total.value() - residual.value(), total.value()};
}

}  // namespace

std::string to_string(UpdateOrder o) {
  return o == UpdateOrder::density_first ? "density_first" : "value_first";
}

UpdateOrder parse_update_order(const std::string& s) {
  if (s == "density_first") return UpdateOrder::density_first;
  if (s == "value_first") return UpdateOrder::value_first;
  throw ConfigError("unknown update order '" + s + "'");
}

void TrainConfig::validate() const {
  if (dim == 0) throw ConfigError("dim must be >= 1");
  if (outer_loops < 0 || value_steps < 0 || density_steps < 0) {
    throw ConfigError("iteration counts must be >= 0");
  }
  if (value_batch < 1 || density_batch < 1 || eval_batch < 1) {
    throw ConfigError("batch sizes must be >= 1");
  }
  if (!(alpha_g > 0.0) || !(alpha_d > 0.0)) throw ConfigError("learning rates must be > 0");
  if (!(rate_decay >= 0.0)) throw ConfigError("rate_decay must be >= 0");
  if (log_stride < 1) throw ConfigError("log_stride must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (!(horizon > 0.0) || !(sigma >= 0.0)) throw ConfigError("horizon must be > 0 and sigma >= 0");
  if (quad_points < 2 || eval_points_per_axis < 2 || eval_quasi_random < 1) {
    throw ConfigError("evaluation grids are too small");
  }
  if (value_net.width == 0 || density_net.width == 0) throw ConfigError("network width must be >= 1");
  weights.validate();
  const auto probe = mfg::problem_by_name(problem, dim, horizon, sigma);
  if (density_mode == nn::DensityMode::normalized_grid &&
      (probe.flavor() != mfg::Flavor::ergodic || dim > 2)) {
    throw ConfigError("normalized_grid density mode requires an ergodic problem with dim <= 2");
  }
  if (probe.flavor() == mfg::Flavor::finite_horizon && weights.periodicity > 0.0) {
    throw ConfigError("periodicity penalty applies to ergodic problems only");
  }
  value_architecture().validate();
  density_architecture().validate();
}

nn::Architecture TrainConfig::value_architecture() const {
  const bool fh = mfg::problem_by_name(problem, dim, horizon, sigma).flavor() ==
                  mfg::Flavor::finite_horizon;
  return build(value_net, fh ? dim + 1 : dim, fh ? 1 : 0, embedding);
}

nn::Architecture TrainConfig::density_architecture() const {
  const bool fh = mfg::problem_by_name(problem, dim, horizon, sigma).flavor() ==
                  mfg::Flavor::finite_horizon;
  return build(density_net, fh ? dim + 1 : dim, fh ? 1 : 0, embedding);
}

loss::Batch sample_batch(Rng& rng, std::size_t dim, std::size_t size, mfg::Flavor flavor,
                         double horizon) {
  if (size < 1) throw ConfigError("sample_batch: batch size must be >= 1");
  const bool fh = flavor == mfg::Flavor::finite_horizon;
  loss::Batch b;
  b.dim = fh ? dim + 1 : dim;
  b.coords.reserve(b.dim * size);
  for (std::size_t k = 0; k < size; ++k) {
    if (fh) b.coords.push_back(horizon * uniform01(rng));
    for (std::size_t i = 0; i < dim; ++i) b.coords.push_back(uniform01(rng));
  }
  return b;
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads, double rate) {
  if (params.size() != grads.size()) throw DimensionError("adam_step: parameter/gradient size mismatch");
  if (state.first.empty()) {
    state.first.assign(params.size(), 0.0);
    state.second.assign(params.size(), 0.0);
  }
  if (state.first.size() != params.size()) throw DimensionError("adam_step: state size mismatch");
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.first[i] = state.beta1 * state.first[i] + (1.0 - state.beta1) * g;
    state.second[i] = state.beta2 * state.second[i] + (1.0 - state.beta2) * g * g;
    const double mhat = state.first[i] / c1;
    const double vhat = state.second[i] / c2;
    params[i] -= rate * mhat / (std::sqrt(vhat) + state.eps);
  }
}

Objective value_objective(const mfg::MFGProblem& problem, const nn::NetworkParams& value,
                          const nn::NetworkParams& density, const TrainConfig& config,
                          const loss::Batch& batch, ad::Tape& tape, bool with_gradient) {
  tape.clear();
  const auto theta = nn::bind(value, &tape, true);
  const auto omega = nn::bind(density, nullptr, false);
  const Var z(config.density_mode == nn::DensityMode::normalized_grid
                  ? nn::density_normalizer(density, config.quad_points)
                  : 1.0);
  const bool has_hbar = value.has_extra(kHbar);
  const Var hbar = has_hbar ? theta[value.values.size()] : Var(0.0);
  loss::LossOptions opts;
  opts.side = loss::Side::value;
  const auto l = loss::empirical_losses(problem, value_field(value, theta),
                                        density_field(density, omega, z, config.density_mode), hbar,
                                        batch, config.weights, opts);
  Objective out{split(l.hjb, l.value_total), {}};
  if (with_gradient) out.grad = ad::gradient(l.value_total, theta);
  return out;
}

Objective density_objective(const mfg::MFGProblem& problem, const nn::NetworkParams& value,
                            const nn::NetworkParams& density, const TrainConfig& config,
                            const loss::Batch& batch, ad::Tape& tape, bool with_gradient) {
  tape.clear();
  const auto theta = nn::bind(value, nullptr, false);
  const auto omega = nn::bind(density, &tape, true);
  Var z(1.0);
  if (config.density_mode == nn::DensityMode::normalized_grid) {
    z = nn::density_normalizer<Var>(density.architecture,
                                    std::span<const Var>(omega.data(), density.values.size()),
                                    config.quad_points);
  }
  const Var hbar(value.has_extra(kHbar) ? value.extra(kHbar) : 0.0);
  loss::LossOptions opts;
  opts.side = loss::Side::density;
  opts.normalization_penalty = config.density_mode == nn::DensityMode::penalty;
  const auto l = loss::empirical_losses(problem, value_field(value, theta),
                                        density_field(density, omega, z, config.density_mode), hbar,
                                        batch, config.weights, opts);
  Objective out{split(l.fp, l.density_total), {}};
  if (with_gradient) out.grad = ad::gradient(l.density_total, omega);
  return out;
}

// ---------------------------------------------------------------------------

Trainer::Trainer(TrainConfig config) : config_(std::move(config)) {
  config_.validate();
  problem_ = mfg::problem_by_name(config_.problem, config_.dim, config_.horizon, config_.sigma);

  Rng init_value(split_seed(config_.seed, 2));
  Rng init_density(split_seed(config_.seed, 3));
  value_ = nn::initialize(config_.value_architecture(), init_value);
  density_ = nn::initialize(config_.density_architecture(), init_density);
  if (problem_.flavor() == mfg::Flavor::ergodic) value_.set_extra(kHbar, 0.0);

  rng_ = Rng(split_seed(config_.seed, 0));
  Rng eval_rng(split_seed(config_.seed, 1));
  eval_batch_ = sample_batch(eval_rng, config_.dim, config_.eval_batch, problem_.flavor(),
                             config_.horizon);
  if (problem_.closed_form && config_.dim > 2) {
    eval_points_ = eval::halton_points(config_.eval_quasi_random, config_.dim);
  }
  threads_ = config_.strict_deterministic ? 1
             : config_.threads > 0        ? config_.threads
                                          : worker_threads();
  refresh_normalizer();
}

void Trainer::refresh_normalizer() {
  normalizer_ = config_.density_mode == nn::DensityMode::normalized_grid
                    ? nn::density_normalizer(density_, config_.quad_points)
                    : 1.0;
}

double Trainer::rate(double base, long iteration) const {
  return base / (1.0 + config_.rate_decay * static_cast<double>(iteration));
}

double Trainer::value_at(std::span<const double> x) const { return nn::evaluate(value_, x); }

double Trainer::density_at(std::span<const double> x) const {
  return nn::guarded_exp(nn::evaluate(density_, x)) / normalizer_;
}

StepLosses Trainer::density_step(long iteration) {
  const auto batch = sample_batch(rng_, config_.dim, config_.density_batch, problem_.flavor(),
                                  config_.horizon);
  const auto obj = density_objective(problem_, value_, density_, config_, batch, tape_);
  if (!std::isfinite(obj.losses.total) || !all_finite(obj.grad)) {
    LogRecord diag;
    diag.iteration = iteration;
    diag.loss_hjb = std::numeric_limits<double>::quiet_NaN();
    diag.loss_fp = obj.losses.residual;
    diag.loss_pen_mf = obj.losses.penalty;
    if (value_.has_extra(kHbar)) diag.hbar = value_.extra(kHbar);
    fail(fmt::format("non-finite density loss or gradient at iteration {}", iteration), diag);
  }
  adam_step(density_adam_, density_.values, obj.grad, rate(config_.alpha_d, iteration));
  refresh_normalizer();
  return obj.losses;
}

StepLosses Trainer::value_step(long iteration) {
  const auto batch = sample_batch(rng_, config_.dim, config_.value_batch, problem_.flavor(),
                                  config_.horizon);
  const auto obj = value_objective(problem_, value_, density_, config_, batch, tape_);
  if (!std::isfinite(obj.losses.total) || !all_finite(obj.grad)) {
    LogRecord diag;
    diag.iteration = iteration;
    diag.loss_hjb = obj.losses.residual;
    diag.loss_fp = std::numeric_limits<double>::quiet_NaN();
    diag.loss_pen_val = obj.losses.penalty;
    if (value_.has_extra(kHbar)) diag.hbar = value_.extra(kHbar);
    fail(fmt::format("non-finite value loss or gradient at iteration {}", iteration), diag);
  }
  std::vector<double> params(value_.values);
  for (const auto& e : value_.extras) params.push_back(e.second);
  adam_step(value_adam_, params, obj.grad, rate(config_.alpha_g, iteration));
  std::copy_n(params.begin(), value_.values.size(), value_.values.begin());
  for (std::size_t i = 0; i < value_.extras.size(); ++i) {
    value_.extras[i].second = params[value_.values.size() + i];
  }
  return obj.losses;
}

std::pair<StepLosses, StepLosses> Trainer::evaluate_losses() const {
  const auto theta = nn::bind(value_, nullptr, false);
  const auto omega = nn::bind(density_, nullptr, false);
  const Var hbar(value_.has_extra(kHbar) ? value_.extra(kHbar) : 0.0);
  loss::LossOptions opts;
  opts.normalization_penalty = config_.density_mode == nn::DensityMode::penalty;
  const auto l = loss::empirical_losses(problem_, value_field(value_, theta),
                                        density_field(density_, omega, Var(normalizer_),
                                                      config_.density_mode),
                                        hbar, eval_batch_, config_.weights, opts);
  StepLosses v{l.hjb.value(), l.value_total.value() - l.hjb.value(), l.value_total.value()};
  StepLosses d{l.fp.value(), l.density_total.value() - l.fp.value(), l.density_total.value()};
  return {v, d};
}

std::pair<double, double> Trainer::relative_errors() const {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (!problem_.closed_form) return {nan, nan};
  const auto& cf = *problem_.closed_form;
  const eval::PointFn u = [this](std::span<const double> x) { return value_at(x); };
  const eval::PointFn m = [this](std::span<const double> x) { return density_at(x); };
  if (config_.dim <= 2) {
    const eval::TorusGrid grid(config_.dim, config_.eval_points_per_axis);
    return {eval::rel_l2_error(u, cf.value, grid, threads_),
            eval::rel_l2_error(m, cf.density, grid, threads_)};
  }
  return {eval::rel_l2_error(u, cf.value, eval_points_, config_.dim, threads_),
          eval::rel_l2_error(m, cf.density, eval_points_, config_.dim, threads_)};
}

LogRecord Trainer::make_record(long iteration) const {
  LogRecord r;
  r.iteration = iteration;
  const auto [v, d] = evaluate_losses();
  r.loss_hjb = v.residual;
  r.loss_fp = d.residual;
  r.loss_pen_val = v.penalty;
  r.loss_pen_mf = d.penalty;
  std::tie(r.rel_err_u, r.rel_err_m) = relative_errors();
  if (value_.has_extra(kHbar)) r.hbar = value_.extra(kHbar);
  r.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  if (!records_.empty() && r.elapsed_s < records_.back().elapsed_s) r.elapsed_s = records_.back().elapsed_s;
  return r;
}

TrainingReport Trainer::snapshot() const {
  TrainingReport rep;
  rep.records = records_;
  rep.value = value_;
  rep.density = density_;
  rep.density_normalizer = normalizer_;
  return rep;
}

void Trainer::fail(const std::string& what, LogRecord diagnostic) {
  diagnostic.elapsed_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  if (!records_.empty()) {
    diagnostic.elapsed_s = std::max(diagnostic.elapsed_s, records_.back().elapsed_s);
    if (records_.back().iteration == diagnostic.iteration) records_.pop_back();
  }
  records_.push_back(diagnostic);
  throw NonFiniteLoss(what, snapshot());
}

TrainingReport Trainer::run(const TrainCallbacks& callbacks) {
  start_ = std::chrono::steady_clock::now();
  records_.clear();
  auto log = [&](long k) {
    records_.push_back(make_record(k));
    if (callbacks.on_record) callbacks.on_record(records_.back());
  };
  auto guarded = [&](long k, auto&& step) {
    try {
      step(k);
    } catch (const DomainError& e) {
      LogRecord diag;
      diag.iteration = k;
      diag.loss_hjb = diag.loss_fp = std::numeric_limits<double>::quiet_NaN();
      if (value_.has_extra(kHbar)) diag.hbar = value_.extra(kHbar);
      fail(fmt::format("iteration {}: {}", k, e.what()), diag);
    }
  };

  log(0);
  for (long k = 1; k <= config_.outer_loops; ++k) {
    auto density_phase = [&](long it) {
      for (int j = 0; j < config_.density_steps; ++j) density_step(it);
    };
    auto value_phase = [&](long it) {
      for (int j = 0; j < config_.value_steps; ++j) value_step(it);
    };
    if (config_.order == UpdateOrder::density_first) {
      guarded(k, density_phase);
      guarded(k, value_phase);
    } else {
      guarded(k, value_phase);
      guarded(k, density_phase);
    }
    if (k % config_.log_stride == 0 || k == config_.outer_loops) {
      log(k);
      const auto& r = records_.back();
      if (!std::isfinite(r.loss_hjb) || !std::isfinite(r.loss_fp)) {
        fail(fmt::format("non-finite evaluation loss at iteration {}", k), r);
      }
    }
    if (callbacks.on_checkpoint && config_.checkpoint_every > 0 && k % config_.checkpoint_every == 0) {
      callbacks.on_checkpoint(k, value_, density_);
    }
  }
  return snapshot();
}

TrainingReport train(const TrainConfig& config, const TrainCallbacks& callbacks) {
  Trainer t(config);
  return t.run(callbacks);
}

}  // namespace mfgan::train
