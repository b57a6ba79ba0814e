#pragma once

// Free pull-backs u(t) = exp(-it Laplacian) S_t(phi), their Cauchy behaviour
// at dyadic times, and the k-body distance to the extracted asymptotic state.

#include <ostream>
#include <span>
#include <vector>

#include "gpdf/ensemble.hpp"
#include "gpdf/nls.hpp"

namespace gpdf {

/// exp(-it Laplacian) phi_t; t = 0 is the identity.
WaveFunction pullback(const WaveFunction& phi_t, double t);

struct ScatteringConfig {
  double lambda = 1.0;
  double t_max = 8.0;
  /// check times t_max / 2^levels, ..., t_max / 2, t_max
  int levels = 5;
  double dt = 1e-2;
  bool dealias = false;
  bool nonlinear = true;
  /// Refuse t_max beyond L / (4 xi_sig), xi_sig carrying 99.9% of the H1 mass.
  bool enforce_window = true;

  void validate() const;
};

struct CauchyRow {
  double t = 0.0;
  /// ||u(t_i) - u(t_{i-1})||_H1, the first row measured from u(0) = phi
  double increment = 0.0;
};

struct ScatteringRun {
  explicit ScatteringRun(WaveFunction plus) : phi_plus(std::move(plus)) {}

  double lambda = 1.0;
  std::vector<double> check_times;
  std::vector<WaveFunction> pullbacks;  // u at check_times
  WaveFunction phi_plus;                // u(t_max)
  std::vector<CauchyRow> cauchy;
  /// last Cauchy increment, reported as the error bar of phi_plus
  double residual_estimate = 0.0;
  double window_limit = 0.0;      // L / (4 xi_sig)
  double wrapped_fraction = 0.0;  // H1 share of phi with 2 |xi| t_max > L / 2
  Termination termination = Termination::completed;
  std::size_t steps = 0;

  /// Index of a check time (relative tolerance 1e-12); throws std::out_of_range.
  std::size_t index_of(double t) const;
  /// Number of consecutive strict decreases at the end of the Cauchy table,
  /// counting only the dyadic rows (the first row spans [0, t_0]).
  int decreasing_levels() const;
};

/// Smallest |xi| such that modes inside carry the given share of the H1 mass.
double significant_frequency(const Field& f, double share = 0.999);
/// L / (4 xi_sig); infinite for the zero field.
double wraparound_limit(const WaveFunction& phi);

/// Throws std::invalid_argument for lambda != +1, a t_max past the window
/// (when enforced) or a bad config; std::runtime_error when the solver flags.
ScatteringRun extract_scattering_state(const WaveFunction& phi, const ScatteringConfig& cfg);

/// One run per atom, run on up to `threads` worker threads; results are in
/// atom order and independent of the thread count.
std::vector<ScatteringRun> scatter_atoms(const AtomicMeasure& mu, const ScatteringConfig& cfg, int threads = 1);

enum class DiagMode { exact, bound };

/// exact: sum_i w_i Tr|S^(k,1)[(|u_i(t)><u_i(t)|)^k - (|phi+_i><phi+_i|)^k]|
/// (an upper bound on the mixture's trace norm, exact for one atom);
/// bound: sum_i w_i k ||u~_i - phi+~_i|| (||u~_i|| + ||phi+~_i||)^{2k-1}.
double hierarchy_scatter_diag(const AtomicMeasure& mu, std::span<const ScatteringRun> runs, int k, double t,
                              DiagMode mode = DiagMode::exact);

/// Atoms replaced by their asymptotic states, weights kept.
AtomicMeasure asymptotic_measure(const AtomicMeasure& mu, std::span<const ScatteringRun> runs);

struct ScatteringRow {
  double t = 0.0;
  double increment = 0.0;  // weighted H1 pull-back increment
  double D1 = 0.0, D2 = 0.0, D3 = 0.0;
  double bound_D3 = 0.0;
};

std::vector<ScatteringRow> scattering_table(const AtomicMeasure& mu, std::span<const ScatteringRun> runs);
void write_scattering_csv(std::ostream& out, std::span<const ScatteringRow> rows);

}  // namespace gpdf
