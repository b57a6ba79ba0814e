#include "gpdf/nls.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gpdf/numerics.hpp"

namespace gpdf {

void SolverConfig::validate() const {
  if (lambda != 1.0 && lambda != -1.0) throw std::invalid_argument("lambda must be +1 or -1");
  if (!(dt_init > 0.0)) throw std::invalid_argument("dt_init must be positive");
  if (!(dt_min > 0.0) || dt_min > dt_init)
    throw std::invalid_argument("dt_min must be positive and not above dt_init");
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
  if (!(t_max > 0.0)) throw std::invalid_argument("t_max must be positive");
  if (!(blowup_h1_threshold > 0.0)) throw std::invalid_argument("blowup_h1_threshold must be positive");
  if (!(resolution_guard > 0.0)) throw std::invalid_argument("resolution_guard must be positive");
  if (snapshot_interval < 0.0) throw std::invalid_argument("snapshot_interval must be non-negative");
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::completed: return "completed";
    case Termination::blowup_detected: return "blowup_detected";
    case Termination::resolution_lost: return "resolution_lost";
  }
  return "unknown";
}

Field free_propagate(const Field& f, double t) {
  if (t == 0.0) return f;
  return apply_radial_multiplier(f, [t](double k2) { return std::polar(1.0, -t * k2); });
}

WaveFunction free_propagate(const WaveFunction& phi, double t) {
  return WaveFunction(free_propagate(phi.field(), t));
}

namespace {

struct StepResult {
  Field state;
  double h1;
  double tail_fraction;
};

class Stepper {
 public:
  Stepper(const BoxGrid& grid, double lambda, bool dealias, bool nonlinear)
      : grid_(grid), lambda_(lambda), dealias_(dealias), nonlinear_(nonlinear) {
    keep_.resize(grid.size());
    watch_.resize(grid.size());
    const int quarter = grid.points() / 4;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      keep_[i] = dealias_keeps(grid, i);
      // With the 2/3 rule active the truncated modes are empty by
      // construction, so the guard watches the outermost retained band.
      if (dealias_) {
        const auto idx = grid.unravel(i);
        bool outer = false;
        for (int a = 0; a < grid.dimension(); ++a) outer |= std::abs(grid.mode_number(idx[a])) > quarter;
        watch_[i] = keep_[i] && outer;
      } else {
        watch_[i] = !keep_[i];
      }
    }
  }

  /// Share of (1+|xi|^2)|fhat|^2 in the watched band, plus the H1 norm.
  std::pair<double, double> monitor(const Field& hat) const {
    const auto xi2 = grid_.xi_squared();
    const auto s = hat.samples();
    CompensatedSum total, tail;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double w = (1.0 + xi2[i]) * std::norm(s[i]);
      total += w;
      if (watch_[i]) tail += w;
    }
    const double t = total.value();
    return {t > 0.0 ? tail.value() / t : 0.0, std::sqrt(t)};
  }

  // Advances a frequency-space state by one splitting step; a negative dt
  // runs the same symmetric splitting backwards.  H1 and the tail fraction
  // are unchanged by the unimodular kinetic factor, so both are read off the
  // spectrum before the last half step.
  StepResult step(Field hat, double dt) {
    prepare(dt);
    multiply(hat);
    Field x = to_position(hat);
    if (nonlinear_) {
      for (auto& v : x.samples()) v *= std::polar(1.0, -lambda_ * dt * std::norm(v));
    }
    hat = to_frequency(x);

    if (dealias_) {
      auto s = hat.samples();
      for (std::size_t i = 0; i < s.size(); ++i)
        if (!keep_[i]) s[i] = 0.0;
    }
    const auto [tail_fraction, h1] = monitor(hat);
    multiply(hat);
    return {std::move(hat), h1, tail_fraction};
  }

 private:
  void prepare(double dt) {
    if (dt == cached_dt_ && !half_.empty()) return;
    const auto xi2 = grid_.xi_squared();
    half_.resize(xi2.size());
    for (std::size_t i = 0; i < xi2.size(); ++i) half_[i] = std::polar(1.0, -0.5 * dt * xi2[i]);
    cached_dt_ = dt;
  }

  void multiply(Field& hat) const {
    auto s = hat.samples();
    for (std::size_t i = 0; i < s.size(); ++i) s[i] *= half_[i];
  }

  BoxGrid grid_;
  double lambda_;
  bool dealias_;
  bool nonlinear_;
  std::vector<char> keep_;
  std::vector<char> watch_;
  std::vector<Complex> half_;
  double cached_dt_ = 0.0;
};

}  // namespace

WaveFunction strang_step(const WaveFunction& phi, double dt, double lambda, bool dealias) {
  if (!(dt > 0.0)) throw std::invalid_argument("strang_step needs dt > 0");
  Stepper s(phi.grid(), lambda, dealias, true);
  return WaveFunction(s.step(to_frequency(phi.field()), dt).state);
}

WaveFunction strang_step_backward(const WaveFunction& phi, double dt, double lambda, bool dealias) {
  if (!(dt > 0.0)) throw std::invalid_argument("strang_step_backward needs dt > 0");
  Stepper s(phi.grid(), lambda, dealias, true);
  return WaveFunction(s.step(to_frequency(phi.field()), -dt).state);
}

Trajectory evolve(const WaveFunction& phi0, const SolverConfig& cfg,
                  const std::vector<Observer>& observers) {
  cfg.validate();
  if (!std::isfinite(phi0.l2_norm())) throw std::invalid_argument("initial state is not finite");

  Trajectory traj;
  Stepper stepper(phi0.grid(), cfg.lambda, cfg.dealias, cfg.nonlinear);
  Field hat = to_frequency(phi0.field());
  const auto [tail_0, h1_0] = stepper.monitor(hat);
  traj.snapshots.push_back({0.0, phi0, h1_0, tail_0});
  for (const auto& obs : observers) obs(0.0, phi0);

  double h1 = h1_0;
  double t = 0.0;
  long snap_index = 1;
  const bool every_step = cfg.snapshot_interval == 0.0;

  while (t < cfg.t_max) {
    double dt = cfg.dt_init;
    if (cfg.policy == StepPolicy::adaptive && h1 > 0.0 && h1_0 > 0.0)
      dt = std::clamp(cfg.dt_init * std::pow(h1_0 / h1, cfg.beta), cfg.dt_min, cfg.dt_init);

    double target = cfg.t_max;
    if (!every_step) target = std::min(target, snap_index * cfg.snapshot_interval);
    const bool hits = target - t <= dt * (1.0 + 1e-9);
    const double step = hits ? target - t : dt;

    StepResult r = stepper.step(std::move(hat), step);
    t = hits ? target : t + step;
    ++traj.steps;

    Termination status = Termination::completed;
    if (!r.state.all_finite() || !std::isfinite(r.h1) || r.tail_fraction > cfg.resolution_guard)
      status = Termination::resolution_lost;
    else if (r.h1 > cfg.blowup_h1_threshold)
      status = Termination::blowup_detected;

    hat = std::move(r.state);
    h1 = r.h1;
    const bool at_snapshot = every_step || (hits && target == snap_index * cfg.snapshot_interval);
    if (at_snapshot && !every_step) ++snap_index;
    const bool record = status != Termination::completed || at_snapshot || t >= cfg.t_max;
    if (record || !observers.empty()) {
      WaveFunction current(to_position(hat));
      for (const auto& obs : observers) obs(t, current);
      if (record) traj.snapshots.push_back({t, std::move(current), h1, r.tail_fraction});
    }
    if (status != Termination::completed) {
      traj.termination = status;
      break;
    }
  }
  return traj;
}

std::optional<BlowupEvent> detect_blowup(const Trajectory& trajectory) {
  if (trajectory.termination == Termination::completed || trajectory.snapshots.empty())
    return std::nullopt;
  return BlowupEvent{trajectory.snapshots.back().t, trajectory.termination};
}

}  // namespace gpdf
