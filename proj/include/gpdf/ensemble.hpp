#pragma once

// Finitely atomic de Finetti measures on one-body states.

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gpdf/spectral.hpp"

namespace gpdf {

/// Normalized 3-d Gaussian (pi sigma^2)^{-3/4} exp(-|x|^2 / (2 sigma^2)) with
/// closed-form norms.  rescaled(j) is x -> 2^{3j/2} g(2^j x), i.e. sigma 2^{-j}.
struct GaussianProfile {
  double sigma = 2.0;

  double amplitude() const;
  double hdot1() const;
  double l4() const;
  double x_moment() const;
  double h1() const;
  /// ||g||_{H^alpha} by adaptive radial quadrature of (1+|xi|^2)^alpha |ghat|^2.
  double h_alpha(double alpha) const;
  GaussianProfile rescaled(int j) const;
  /// Samples the normalized profile on a 3-d grid.
  Field sample(const BoxGrid& grid) const;
  /// At least eight samples across four widths: sigma >= 2 h.
  bool resolved_on(const BoxGrid& grid) const;
};

struct AtomNorms {
  double l2 = 0.0;
  double h1 = 0.0;
  double hdot1 = 0.0;
  double l4 = 0.0;
  double x_moment = 0.0;
};

AtomNorms norms_of(const Field& f);
AtomNorms norms_of(const GaussianProfile& g);

/// One atom of a de Finetti measure.  Atoms built from a grid state carry
/// it in `state`; analytic Gaussian atoms may carry only `profile`.
struct Atom {
  double weight = 0.0;
  /// log of the weight; authoritative when weight underflows.  Left as NaN
  /// it is filled in from weight.
  double log_weight = std::numeric_limits<double>::quiet_NaN();
  std::shared_ptr<const WaveFunction> state;
  std::optional<GaussianProfile> profile;
  /// Stands for the uniform measure on {exp(i theta) phi}; every quantity
  /// computed here is phase invariant, so the representative suffices.
  bool phase_orbit = true;
  int shell = -1;
  AtomNorms norms;
};

class AtomicMeasure {
 public:
  AtomicMeasure() = default;
  explicit AtomicMeasure(std::vector<Atom> atoms);

  static AtomicMeasure from_states(const std::vector<std::pair<double, WaveFunction>>& atoms,
                                   bool phase_orbit = true);

  const std::vector<Atom>& atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }
  double total_mass() const;
  bool is_probability(double tol = 1e-12) const;
  /// Every atom with unit L2 norm to tol.
  bool sphere_supported(double tol = 1e-10) const;

  /// Same atoms with new weights (used by pushforwards and truncations).
  AtomicMeasure with_atoms(std::vector<Atom> atoms) const { return AtomicMeasure(std::move(atoms)); }

 private:
  std::vector<Atom> atoms_;
};

struct ShellSpec {
  int j = 0;
  double b = 0.0;      // variance cap on ||x phi||
  double c_l4 = 1.0;   // L4 lower-bound constant
  double lower() const;  // 2^{j-1}, or 0 for j = 0
  double upper() const;  // 2^j
};

/// Default ShellSpec for shell j: b = 2 ||x g||, C = 1.
ShellSpec default_shell_spec(const GaussianProfile& base, int j);

/// f_j sampled on grid and renormalized.  Throws std::invalid_argument when
/// the base Hdot1 norm is outside (1/2, 1] or the scale is unresolved.
WaveFunction make_shell_atom(const GaussianProfile& base, int j, const BoxGrid& grid);

/// Index j with ||phi||_Hdot1 in (2^{j-1}, 2^j], 0 when <= 1.
int classify_shell(double hdot1);
int classify_shell(const WaveFunction& phi);

struct MembershipReport {
  bool member = false;
  bool variance_ok = false;
  bool shell_ok = false;
  bool l4_ok = false;
  std::vector<std::string> reasons;
};

MembershipReport check_Mj_membership(const AtomNorms& norms, const ShellSpec& spec);
MembershipReport check_Mj_membership(const WaveFunction& phi, const ShellSpec& spec);

/// Smallest j with 2^{3j/4} ||g||_4 > C 2^{5j/8}, i.e. from which f_j is in M_j.
int first_member_shell(const GaussianProfile& base, double c_l4 = 1.0);

/// log of the unnormalized weight (j^{j^{1/delta}})^{-j}; 0 for j = 0 and 1.
double log_raw_shell_weight(int j, double delta);

/// Atoms f_0..f_J on phase orbits, weights proportional to the raw shell
/// weights and normalized to one.  Without a grid every atom is analytic;
/// with a grid every atom is sampled (throws when f_J is unresolved).
AtomicMeasure build_blowup_measure(double r, int J, const GaussianProfile& base,
                                   const std::optional<BoxGrid>& grid = std::nullopt);

/// 1 / sum_{j<=J} raw weight: the normalizing constant of the shell weights.
double kappa_r(double r, int J);

struct Functional {
  enum class Kind { h1_norm, h1_norm_squared, energy, custom };
  Kind kind = Kind::h1_norm;
  double lambda = 1.0;  // for energy
  std::function<double(const Atom&)> custom;

  static Functional h1_norm() { return {Kind::h1_norm, 1.0, {}}; }
  static Functional h1_norm_squared() { return {Kind::h1_norm_squared, 1.0, {}}; }
  static Functional energy(double lambda) { return {Kind::energy, lambda, {}}; }
  static Functional of(std::function<double(const Atom&)> f) { return {Kind::custom, 0.0, std::move(f)}; }

  double operator()(const Atom& a) const;
};

/// sum_i w_i F[phi_i]^k
double moment(const AtomicMeasure& mu, const Functional& f, int k);
/// log of the same sum, for positive F; -inf for the empty measure.
double log_moment(const AtomicMeasure& mu, const Functional& f, int k);

struct RadiusEstimate {
  std::vector<double> a;  // a[k-1] = (int ||phi||_H1^{2k} dmu)^{1/(2k)}
  double limit = 0.0;     // a at k_max
  double growth_exponent = 0.0;  // slope of log log a_k against log k
  int fit_k_min = 0;
  int fit_k_max = 0;
};

/// The fit uses k in [max(4, k_max/4), k_max] with log a_k > 0.
RadiusEstimate estimate_RH1(const AtomicMeasure& mu, int k_max);

struct ChebyshevBound {
  double bound = 0.0;       // min(1, moment(F, 2k) / tau^{2k})
  double exact_mass = 0.0;  // mu({F > tau})
};

ChebyshevBound chebyshev_support_bound(const AtomicMeasure& mu, const Functional& f, double tau, int k);

/// Atoms with ||phi||_H1 <= R, weights unchanged.
AtomicMeasure truncate_measure(const AtomicMeasure& mu, double R);

/// Structured text (JSON) describing each atom.
std::string measure_manifest(const AtomicMeasure& mu);

}  // namespace gpdf
