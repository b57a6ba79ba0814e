#pragma once

// Conserved quantities, variance and virial rates of a one-body state.
//
// Momentum and angular momentum use P = i int conj(phi) grad(phi) and
// L = i int conj(phi) (x ^ grad(phi)); a plane wave exp(i xi.x) has P = -xi.
// The variance rates are those of the flow  i phi_t = -Laplacian phi + lambda |phi|^2 phi:
//   dV/dt   = 4 Im int x . conj(phi) grad(phi)
//   d2V/dt2 = 16 E + 2 lambda ||phi||_4^4

#include <array>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "gpdf/nls.hpp"
#include "gpdf/spectral.hpp"

namespace gpdf {

struct ObservableRecord {
  double t = 0.0;
  double M = 0.0;
  Vec3 P{0, 0, 0};
  Vec3 L_ang{0, 0, 0};
  double E = 0.0;
  double V = 0.0;
  double H1 = 0.0;
  double Hdot1 = 0.0;
  double L4 = 0.0;
  double virial_rate = 0.0;
  double virial_accel = 0.0;
};

/// lambda in {-1, 0, +1}; 0 describes the free flow (no potential energy).
ObservableRecord measure(const WaveFunction& phi, double lambda, double t = 0.0);

double energy(const WaveFunction& phi, double lambda);

struct VirialReport {
  /// max |FD dV/dt - rate| / max(1, |rate|) over interior snapshots
  double rate_mismatch = 0.0;
  /// max |FD d(rate)/dt - accel| / max(1, |accel|)
  double accel_mismatch = 0.0;
  /// Same comparisons against the alternative closed forms 2 Im int x.conj(phi)grad(phi)
  /// and 16 E - 2 ||phi||_4^4, kept for reference.
  double rate_mismatch_half_coefficient = 0.0;
  double accel_mismatch_fixed_sign = 0.0;
  std::size_t samples = 0;
};

/// Needs at least five snapshots; centred differences on (possibly non-uniform) times.
VirialReport virial_consistency(const Trajectory& trajectory, double lambda);
VirialReport virial_consistency(std::span<const ObservableRecord> records, double lambda);

struct InequalityRatios {
  double gn_ratio;           // ||phi||_4 / (||phi||_Hdot1^{3/4} ||phi||_2^{1/4})
  double uncertainty_ratio;  // ||phi||_2^2 / (||x phi|| ||phi||_Hdot1)
};

/// Throws std::invalid_argument for the zero field.
InequalityRatios inequality_ratios(const WaveFunction& phi);

const std::vector<std::string>& observable_csv_header();
void write_observables_csv(std::ostream& out, std::span<const ObservableRecord> records);

}  // namespace gpdf
