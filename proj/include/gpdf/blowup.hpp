#pragma once

// Focusing blowup: the virial certificate, shell bounds for the Gaussian
// shells, the super-exponential weight sum and the truncation sweep.

#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "gpdf/ensemble.hpp"
#include "gpdf/nls.hpp"

namespace gpdf {

/// Positive root T of b^2 + 2 c t + 8 E t^2 = 0 with c = b ||phi||_Hdot1.
struct BlowupCertificate {
  double E = 0.0;
  double b = 0.0;
  double hdot1 = 0.0;
  double c = 0.0;
  double T = std::numeric_limits<double>::infinity();
  bool valid = false;
  /// |b^2 + 2cT + 8ET^2| / max(b^2, |8E| T^2); 0 when invalid
  double residual = 0.0;
  /// Same root with linear coefficient 4c, the envelope that holds for any
  /// initial variance rate under i phi_t = -Laplacian phi - |phi|^2 phi.
  double T_full_rate = std::numeric_limits<double>::infinity();

  double envelope(double t) const { return b * b + 2.0 * c * t + 8.0 * E * t * t; }
};

BlowupCertificate certify_blowup(double E, double b, double hdot1);
/// Focusing energy, ||x phi|| and ||phi||_Hdot1 by grid quadrature.
BlowupCertificate certify_blowup(const WaveFunction& phi);

/// max over snapshots of (V(t) - envelope(t)) / b^2; negative when V stays below.
double virial_envelope_excess(const Trajectory& trajectory, const BlowupCertificate& cert);

enum class ShellVariant {
  gaussian_family,  // f_j itself: b_j = 2^-j ||x g||, c = 3/2
  fixed_b,          // worst case allowed in M_j: b fixed, Hdot1 = 2^j, ||.||_4 = C 2^{5j/8}
};

struct ShellBound {
  int j = 0;
  ShellVariant variant = ShellVariant::gaussian_family;
  bool member = false;
  BlowupCertificate certificate;
};

/// Analytic shell certificate.  With require_membership, throws
/// std::invalid_argument naming the first member shell when f_j is not in M_j.
ShellBound shell_blowup_bound(int j, const GaussianProfile& base, const ShellSpec& spec, ShellVariant variant,
                              bool require_membership = true);

/// First shell whose f_j has negative focusing energy.
int first_negative_energy_shell(const GaussianProfile& base);

struct ShellScaling {
  ShellVariant variant = ShellVariant::gaussian_family;
  std::vector<ShellBound> rows;
  double slope = 0.0;      // fitted d log2 T_j / dj
  double intercept = 0.0;  // log2 T_j = intercept + slope j
};

/// T_j over j_first .. j_first + count - 1 (all must carry valid certificates).
ShellScaling shell_scaling(const GaussianProfile& base, double c_l4, int j_first, int count, ShellVariant variant,
                           bool require_membership = false);

struct LemmaRow {
  int k = 0;
  int split = 0;            // J = floor(k^delta)
  double log_sum = 0.0;     // log sum_j raw_j 4^{jk}
  double log_tail = 0.0;    // log sum_{j > J} raw_j 4^{jk}
  bool tail_below_one = false;
  double c_k = 0.0;         // log_sum / k^r
  double margin = 0.0;      // c_fit k^r - log_sum (>= 0)
};

struct LemmaCheck {
  double r = 0.0;
  double delta = 0.0;  // r - 1
  std::vector<LemmaRow> rows;
  double c_fit = 0.0;  // smallest c with sum <= exp(c k^r) on the list
};

/// log of sum_j raw_j 4^{jk} over j > split (terms summed until negligible).
double lemma_log_tail(double r, int k, int split);
/// log of the full sum.
double lemma_log_sum(double r, int k);

LemmaCheck lemma_sum_check(double r, std::span<const int> k_list);

struct SweepShell {
  int j = 0;
  double log_weight = 0.0;
  double h1 = 0.0;
  double T = 0.0;  // gaussian-family certificate, infinite when E >= 0
};

struct SweepRow {
  double R = 0.0;
  int J_retained = -1;  // largest retained shell
  double log_trace = 0.0;
  /// log of the trace carried by shells new to this row (all shells for the
  /// first); the rows differ by amounts far below the totals' resolution
  double log_increment = 0.0;
  double min_window = 0.0;
};

struct SweepReport {
  double r = 0.0;
  int k = 0;
  std::vector<SweepShell> shells;
  std::vector<SweepRow> rows;
  /// every row adds positive trace and log_trace never decreases
  bool trace_increasing = false;
  bool window_decreasing = false;
};

/// Truncates the blowup measure to ||phi||_H1 <= R for each R (increasing) and
/// records log Tr(S^(k,1) gamma_R^(k)) and the smallest certified window.
SweepReport instantaneous_blowup_sweep(double r, int J, int k, std::span<const double> R_list,
                                       const GaussianProfile& base, int threads = 1);

/// Truncation radii that retain exactly shells 0..j for j in [j_from, j_to].
std::vector<double> shell_radii(const GaussianProfile& base, int j_from, int j_to);

void write_sweep_csv(std::ostream& out, const SweepReport& report);
void write_lemma_csv(std::ostream& out, const LemmaCheck& check);

}  // namespace gpdf
