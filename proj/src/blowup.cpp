#include "gpdf/blowup.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>

#include "gpdf/csv.hpp"
#include "gpdf/hierarchy.hpp"
#include "gpdf/numerics.hpp"
#include "gpdf/observables.hpp"

namespace gpdf {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

BlowupCertificate certify_blowup(double E, double b, double hdot1) {
  BlowupCertificate cert;
  cert.E = E;
  cert.b = b;
  cert.hdot1 = hdot1;
  cert.c = b * hdot1;
  if (!(E < 0.0) || !std::isfinite(b) || !(b >= 0.0) || !std::isfinite(hdot1)) return cert;
  const double a = -E;
  cert.T = (2.0 * cert.c + std::sqrt(4.0 * cert.c * cert.c + 32.0 * a * b * b)) / (16.0 * a);
  cert.T_full_rate = (4.0 * cert.c + std::sqrt(16.0 * cert.c * cert.c + 32.0 * a * b * b)) / (16.0 * a);
  cert.valid = true;
  const double scale = std::max(b * b, 8.0 * a * cert.T * cert.T);
  cert.residual = scale > 0.0 ? std::abs(cert.envelope(cert.T)) / scale : 0.0;
  return cert;
}

BlowupCertificate certify_blowup(const WaveFunction& phi) {
  return certify_blowup(energy(phi, -1.0), x_moment_norm(phi.field()), hdot1_norm(phi.field()));
}

double virial_envelope_excess(const Trajectory& trajectory, const BlowupCertificate& cert) {
  if (!cert.valid) throw std::invalid_argument("virial envelope of an invalid certificate");
  double worst = -kInf;
  const double b2 = cert.b * cert.b;
  for (const auto& s : trajectory.snapshots) {
    const double v = std::pow(x_moment_norm(s.state.field()), 2);
    worst = std::max(worst, (v - cert.envelope(s.t)) / b2);
  }
  return worst;
}

ShellBound shell_blowup_bound(int j, const GaussianProfile& base, const ShellSpec& spec, ShellVariant variant,
                              bool require_membership) {
  if (j < 0) throw std::invalid_argument("shell index must be non-negative");
  if (spec.j != j) throw std::invalid_argument("shell spec is for a different shell");
  const GaussianProfile fj = base.rescaled(j);
  const AtomNorms n = norms_of(fj);
  ShellBound out;
  out.j = j;
  out.variant = variant;
  out.member = check_Mj_membership(n, spec).member;
  if (require_membership && !out.member)
    throw std::invalid_argument("f_" + std::to_string(j) + " is not in M_" + std::to_string(j) +
                                "; membership starts at shell " + std::to_string(first_member_shell(base, spec.c_l4)));
  if (variant == ShellVariant::gaussian_family) {
    const double E = 0.5 * n.hdot1 * n.hdot1 - 0.25 * std::pow(n.l4, 4);
    out.certificate = certify_blowup(E, n.x_moment, n.hdot1);
  } else {
    const double h = spec.upper();
    const double E = 0.5 * h * h - 0.25 * std::pow(spec.c_l4, 4) * std::pow(2.0, 2.5 * j);
    out.certificate = certify_blowup(E, spec.b, h);
  }
  return out;
}

int first_negative_energy_shell(const GaussianProfile& base) {
  for (int j = 0; j < 64; ++j) {
    const auto n = norms_of(base.rescaled(j));
    if (0.5 * n.hdot1 * n.hdot1 - 0.25 * std::pow(n.l4, 4) < 0.0) return j;
  }
  throw std::runtime_error("no negative-energy shell below j = 64");
}

ShellScaling shell_scaling(const GaussianProfile& base, double c_l4, int j_first, int count, ShellVariant variant,
                           bool require_membership) {
  if (count < 2) throw std::invalid_argument("shell scaling needs at least two shells");
  ShellScaling out;
  out.variant = variant;
  std::vector<double> x, y;
  for (int j = j_first; j < j_first + count; ++j) {
    ShellSpec spec = default_shell_spec(base, j);
    spec.c_l4 = c_l4;
    auto row = shell_blowup_bound(j, base, spec, variant, require_membership);
    if (!row.certificate.valid)
      throw std::invalid_argument("shell " + std::to_string(j) + " has no blowup certificate (E >= 0)");
    x.push_back(j);
    y.push_back(std::log2(row.certificate.T));
    out.rows.push_back(row);
  }
  const auto fit = fit_line(x, y);
  out.slope = fit.slope;
  out.intercept = fit.intercept;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

double lemma_log_term(int j, int k, double delta) {
  return log_raw_shell_weight(j, delta) + 2.0 * j * k * std::numbers::ln2;
}

// log sum over j >= from; the exponent is concave in j, so once the terms fall
// 60 below the running peak past the maximum the rest is negligible.
double lemma_log_range(double r, int k, int from) {
  const double delta = r - 1.0;
  std::vector<double> terms;
  double peak = -kInf, prev = -kInf;
  for (int j = from;; ++j) {
    const double t = lemma_log_term(j, k, delta);
    terms.push_back(t);
    peak = std::max(peak, t);
    if (j > from && t < prev && t < peak - 60.0) break;
    prev = t;
    if (j > 1000000) throw std::runtime_error("lemma sum did not settle");
  }
  return log_sum_exp(terms);
}

void check_lemma_args(double r, int k) {
  if (!(r > 1.0)) throw std::invalid_argument("lemma sum needs r > 1");
  if (k < 4) throw std::invalid_argument("lemma sum needs k >= 4");
}

}  // namespace

double lemma_log_tail(double r, int k, int split) {
  check_lemma_args(r, k);
  if (split < 0) throw std::invalid_argument("split must be non-negative");
  return lemma_log_range(r, k, split + 1);
}

double lemma_log_sum(double r, int k) {
  check_lemma_args(r, k);
  return lemma_log_range(r, k, 0);
}

LemmaCheck lemma_sum_check(double r, std::span<const int> k_list) {
  if (k_list.empty()) throw std::invalid_argument("empty k list");
  LemmaCheck out;
  out.r = r;
  out.delta = r - 1.0;
  double c_fit = -kInf;
  for (int k : k_list) {
    LemmaRow row;
    row.k = k;
    row.log_sum = lemma_log_sum(r, k);
    row.split = static_cast<int>(std::floor(std::pow(static_cast<double>(k), out.delta) + 1e-12));
    row.log_tail = lemma_log_tail(r, k, row.split);
    row.tail_below_one = row.log_tail < 0.0;
    row.c_k = row.log_sum / std::pow(static_cast<double>(k), r);
    c_fit = std::max(c_fit, row.c_k);
    out.rows.push_back(row);
  }
  out.c_fit = c_fit;
  for (auto& row : out.rows) row.margin = c_fit * std::pow(static_cast<double>(row.k), r) - row.log_sum;
  return out;
}

// ---------------------------------------------------------------------------

std::vector<double> shell_radii(const GaussianProfile& base, int j_from, int j_to) {
  if (j_from < 0 || j_to < j_from) throw std::invalid_argument("bad shell range");
  std::vector<double> out;
  for (int j = j_from; j <= j_to; ++j)
    out.push_back(std::sqrt(base.rescaled(j).h1() * base.rescaled(j + 1).h1()));
  return out;
}

SweepReport instantaneous_blowup_sweep(double r, int J, int k, std::span<const double> R_list,
                                       const GaussianProfile& base, int threads) {
  if (k < 1) throw std::invalid_argument("sweep needs k >= 1");
  for (std::size_t i = 1; i < R_list.size(); ++i)
    if (!(R_list[i] > R_list[i - 1])) throw std::invalid_argument("R list must be strictly increasing");
  const AtomicMeasure mu = build_blowup_measure(r, J, base);

  SweepReport rep;
  rep.r = r;
  rep.k = k;
  for (const auto& a : mu.atoms()) {
    const auto n = a.norms;
    const auto cert = certify_blowup(0.5 * n.hdot1 * n.hdot1 - 0.25 * std::pow(n.l4, 4), n.x_moment, n.hdot1);
    rep.shells.push_back({a.shell, a.log_weight, n.h1, cert.valid ? cert.T : kInf});
  }

  rep.rows.resize(R_list.size());
  auto compute = [&](std::size_t i) {
    SweepRow row;
    row.R = R_list[i];
    const AtomicMeasure kept = truncate_measure(mu, row.R);
    row.min_window = kInf;
    if (kept.empty()) {
      row.log_trace = -kInf;
    } else {
      row.log_trace = trace_S_alpha(marginal(kept, k), 1.0).value_log;
      for (const auto& a : kept.atoms()) {
        row.J_retained = std::max(row.J_retained, a.shell);
        row.min_window = std::min(row.min_window, rep.shells[a.shell].T);
      }
    }
    rep.rows[i] = row;
  };
  const int count = std::clamp<int>(threads, 1, static_cast<int>(std::max<std::size_t>(R_list.size(), 1)));
  std::vector<std::thread> pool;
  for (int t = 0; t < count; ++t)
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < R_list.size(); i += count) compute(i);
    });
  for (auto& th : pool) th.join();

  // trace carried by the shells each row adds over the previous one
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    const int from = i == 0 ? -1 : rep.rows[i - 1].J_retained;
    std::vector<double> terms;
    for (const auto& a : mu.atoms())
      if (a.shell > from && a.shell <= rep.rows[i].J_retained) terms.push_back(a.log_weight + 2.0 * k * std::log(a.norms.h1));
    rep.rows[i].log_increment = log_sum_exp(terms);
  }

  rep.trace_increasing = rep.window_decreasing = !rep.rows.empty();
  for (std::size_t i = 1; i < rep.rows.size(); ++i) {
    if (!(rep.rows[i].log_trace >= rep.rows[i - 1].log_trace) || !std::isfinite(rep.rows[i].log_increment))
      rep.trace_increasing = false;
    if (!(rep.rows[i].min_window < rep.rows[i - 1].min_window)) rep.window_decreasing = false;
  }
  return rep;
}

void write_sweep_csv(std::ostream& out, const SweepReport& report) {
  CsvWriter w(out, {"R", "J_retained", "log_trace_k", "min_window"});
  for (const auto& r : report.rows)
    w.row({format_double(r.R), std::to_string(r.J_retained), format_double(r.log_trace), format_double(r.min_window)});
}

void write_lemma_csv(std::ostream& out, const LemmaCheck& check) {
  CsvWriter w(out, {"k", "log_sum", "c_fit"});
  for (const auto& r : check.rows) w.row({std::to_string(r.k), format_double(r.log_sum), format_double(check.c_fit)});
}

}  // namespace gpdf
