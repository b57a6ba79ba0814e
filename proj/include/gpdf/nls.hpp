#pragma once

// Split-step integration of  i d/dt phi = -Laplacian phi + lambda |phi|^2 phi
// on the periodic box.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gpdf/spectral.hpp"

namespace gpdf {

enum class StepPolicy { fixed, adaptive };

struct SolverConfig {
  double lambda = 1.0;  // +1 defocusing, -1 focusing
  double dt_init = 1e-3;
  StepPolicy policy = StepPolicy::fixed;
  /// Adaptive law dt = dt_init * (H1(0) / H1(t))^beta, clamped to [dt_min, dt_init].
  double beta = 2.0;
  double dt_min = 1e-8;
  bool dealias = false;
  double t_max = 1.0;
  double blowup_h1_threshold = 1e3;
  double resolution_guard = 0.1;
  /// Snapshot cadence in time units; 0 keeps every accepted step.
  double snapshot_interval = 0.1;
  /// false switches the cubic term off (free flow through the same stepper).
  bool nonlinear = true;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

enum class Termination { completed, blowup_detected, resolution_lost };
std::string to_string(Termination t);

struct Snapshot {
  double t;
  WaveFunction state;
  double h1;
  double tail_fraction;
};

struct Trajectory {
  std::vector<Snapshot> snapshots;
  Termination termination = Termination::completed;
  std::size_t steps = 0;
};

/// Called at t = 0 and after every accepted step; must not retain references.
using Observer = std::function<void(double t, const WaveFunction& state)>;

/// Multiplies by exp(-i t |xi|^2), i.e. applies exp(i t Laplacian).
Field free_propagate(const Field& f, double t);
WaveFunction free_propagate(const WaveFunction& phi, double t);

/// One symmetric step: half kinetic, exact phase exp(-i dt lambda |phi|^2), half kinetic.
/// dt must be positive; the optional 2/3-rule mask is applied after the phase.
WaveFunction strang_step(const WaveFunction& phi, double dt, double lambda, bool dealias = false);
/// The same splitting run backwards in time; inverts strang_step up to round-off.
WaveFunction strang_step_backward(const WaveFunction& phi, double dt, double lambda, bool dealias = false);

Trajectory evolve(const WaveFunction& phi0, const SolverConfig& cfg,
                  const std::vector<Observer>& observers = {});

struct BlowupEvent {
  double t;
  Termination reason;
};

/// Time of the snapshot at which the run halted, or nothing for completed runs.
std::optional<BlowupEvent> detect_blowup(const Trajectory& trajectory);

}  // namespace gpdf
