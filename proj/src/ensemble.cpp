#include "gpdf/ensemble.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "gpdf/numerics.hpp"
#include "json.hpp"

namespace gpdf {

using std::numbers::pi;

double GaussianProfile::amplitude() const { return std::pow(pi * sigma * sigma, -0.75); }
double GaussianProfile::hdot1() const { return std::sqrt(1.5) / sigma; }
double GaussianProfile::l4() const { return std::pow(2.0 * pi * sigma * sigma, -0.375); }
double GaussianProfile::x_moment() const { return std::sqrt(1.5) * sigma; }
double GaussianProfile::h1() const { return std::sqrt(1.0 + 1.5 / (sigma * sigma)); }

double GaussianProfile::h_alpha(double alpha) const {
  // |ghat(xi)|^2 = (sigma^2/pi)^{3/2} exp(-sigma^2 |xi|^2); substitute s = sigma |xi|.
  const double inv_s2 = 1.0 / (sigma * sigma);
  auto integrand = [&](double s) { return s * s * std::pow(1.0 + s * s * inv_s2, alpha) * std::exp(-s * s); };
  using boost::math::quadrature::gauss_kronrod;
  // exp(-s^2) is below 1e-60 past s = 12
  const double integral = gauss_kronrod<double, 61>::integrate(integrand, 0.0, 12.0, 10, 1e-14);
  return std::sqrt(4.0 / std::sqrt(pi) * integral);
}

GaussianProfile GaussianProfile::rescaled(int j) const { return {sigma * std::ldexp(1.0, -j)}; }

Field GaussianProfile::sample(const BoxGrid& grid) const {
  if (grid.dimension() != 3) throw std::invalid_argument("Gaussian profiles live on 3-d grids");
  const double a = amplitude();
  const double inv = 1.0 / (2.0 * sigma * sigma);
  return Field::sample(grid, [&](const Vec3& x) {
    return Complex(a * std::exp(-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) * inv));
  });
}

bool GaussianProfile::resolved_on(const BoxGrid& grid) const { return sigma >= 2.0 * grid.spacing(); }

AtomNorms norms_of(const Field& f) {
  AtomNorms n;
  n.l2 = l2_norm(f);
  n.hdot1 = hdot1_norm(f);
  n.h1 = std::sqrt(n.l2 * n.l2 + n.hdot1 * n.hdot1);
  n.l4 = l4_norm(f);
  n.x_moment = x_moment_norm(f);
  return n;
}

AtomNorms norms_of(const GaussianProfile& g) {
  return {1.0, g.h1(), g.hdot1(), g.l4(), g.x_moment()};
}

// ---------------------------------------------------------------------------

AtomicMeasure::AtomicMeasure(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
  for (auto& a : atoms_) {
    if (std::isnan(a.log_weight)) {
      if (!(a.weight > 0.0) || !std::isfinite(a.weight)) throw std::invalid_argument("atom weights must be positive");
      a.log_weight = std::log(a.weight);
    } else {
      if (!std::isfinite(a.log_weight)) throw std::invalid_argument("atom log-weights must be finite");
      a.weight = std::exp(a.log_weight);
    }
    if (!a.state && !a.profile) throw std::invalid_argument("atom has neither a state nor a profile");
  }
  if (total_mass() > 1.0 + 1e-12) throw std::invalid_argument("total mass exceeds one");
}

AtomicMeasure AtomicMeasure::from_states(const std::vector<std::pair<double, WaveFunction>>& atoms,
                                         bool phase_orbit) {
  std::vector<Atom> out;
  for (const auto& [w, phi] : atoms) {
    Atom a;
    a.weight = w;
    a.state = std::make_shared<const WaveFunction>(phi);
    a.phase_orbit = phase_orbit;
    a.norms = norms_of(phi.field());
    a.shell = std::abs(a.norms.l2 - 1.0) <= 1e-10 ? classify_shell(a.norms.hdot1) : -1;
    out.push_back(std::move(a));
  }
  return AtomicMeasure(std::move(out));
}

double AtomicMeasure::total_mass() const {
  CompensatedSum s;
  for (const auto& a : atoms_) s += a.weight;
  return s.value();
}

bool AtomicMeasure::is_probability(double tol) const { return std::abs(total_mass() - 1.0) <= tol; }

bool AtomicMeasure::sphere_supported(double tol) const {
  for (const auto& a : atoms_)
    if (std::abs(a.norms.l2 - 1.0) > tol) return false;
  return true;
}

// ---------------------------------------------------------------------------

double ShellSpec::lower() const { return j == 0 ? 0.0 : std::ldexp(1.0, j - 1); }
double ShellSpec::upper() const { return std::ldexp(1.0, j); }

ShellSpec default_shell_spec(const GaussianProfile& base, int j) { return {j, 2.0 * base.x_moment(), 1.0}; }

WaveFunction make_shell_atom(const GaussianProfile& base, int j, const BoxGrid& grid) {
  if (j < 0) throw std::invalid_argument("shell index must be non-negative");
  const double h = base.hdot1();
  if (!(h > 0.5 && h <= 1.0))
    throw std::invalid_argument("base profile Hdot1 norm must lie in (1/2, 1]");
  const GaussianProfile fj = base.rescaled(j);
  if (!fj.resolved_on(grid))
    throw std::invalid_argument("shell " + std::to_string(j) + " is not resolved: width " +
                                std::to_string(fj.sigma) + " below two grid spacings");
  return WaveFunction::normalized(fj.sample(grid));
}

int classify_shell(double hdot1) {
  if (!(hdot1 > 1.0)) return 0;
  int j = static_cast<int>(std::ceil(std::log2(hdot1)));
  while (std::ldexp(1.0, j) < hdot1) ++j;
  while (j > 0 && std::ldexp(1.0, j - 1) >= hdot1) --j;
  return j;
}

int classify_shell(const WaveFunction& phi) {
  if (!phi.is_normalized()) throw std::invalid_argument("classify_shell needs a normalized state");
  return classify_shell(hdot1_norm(phi.field()));
}

MembershipReport check_Mj_membership(const AtomNorms& n, const ShellSpec& spec) {
  MembershipReport r;
  r.variance_ok = n.x_moment < spec.b;
  r.shell_ok = n.hdot1 > spec.lower() && n.hdot1 <= spec.upper();
  r.l4_ok = n.l4 > spec.c_l4 * std::pow(2.0, 5.0 * spec.j / 8.0);
  if (!r.variance_ok) r.reasons.push_back("variance: ||x phi|| is not below b");
  if (!r.shell_ok) r.reasons.push_back("shell bound: ||phi||_Hdot1 outside (2^(j-1), 2^j]");
  if (!r.l4_ok) r.reasons.push_back("L4 bound: ||phi||_4 not above C 2^(5j/8)");
  r.member = r.variance_ok && r.shell_ok && r.l4_ok;
  return r;
}

MembershipReport check_Mj_membership(const WaveFunction& phi, const ShellSpec& spec) {
  return check_Mj_membership(norms_of(phi.field()), spec);
}

int first_member_shell(const GaussianProfile& base, double c_l4) {
  // 2^{j/8} > C / ||g||_4
  const double ratio = c_l4 / base.l4();
  if (ratio < 1.0) return 0;
  int j = static_cast<int>(std::floor(8.0 * std::log2(ratio)));
  while (std::pow(2.0, 0.75 * j) * base.l4() <= c_l4 * std::pow(2.0, 5.0 * j / 8.0)) ++j;
  while (j > 0 && std::pow(2.0, 0.75 * (j - 1)) * base.l4() > c_l4 * std::pow(2.0, 5.0 * (j - 1) / 8.0)) --j;
  return j;
}

double log_raw_shell_weight(int j, double delta) {
  if (j < 0) throw std::invalid_argument("shell index must be non-negative");
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  if (j <= 1) return 0.0;
  const double jd = static_cast<double>(j);
  return -jd * std::pow(jd, 1.0 / delta) * std::log(jd);
}

double kappa_r(double r, int J) {
  std::vector<double> logs;
  for (int j = 0; j <= J; ++j) logs.push_back(log_raw_shell_weight(j, r - 1.0));
  return std::exp(-log_sum_exp(logs));
}

AtomicMeasure build_blowup_measure(double r, int J, const GaussianProfile& base, const std::optional<BoxGrid>& grid) {
  if (!(r > 1.0)) throw std::invalid_argument("build_blowup_measure needs r > 1");
  if (J < 0) throw std::invalid_argument("J must be non-negative");
  const double delta = r - 1.0;
  std::vector<double> logs;
  for (int j = 0; j <= J; ++j) logs.push_back(log_raw_shell_weight(j, delta));
  const double log_norm = log_sum_exp(logs);

  std::vector<Atom> atoms;
  for (int j = 0; j <= J; ++j) {
    Atom a;
    a.log_weight = logs[j] - log_norm;
    a.profile = base.rescaled(j);
    a.phase_orbit = true;
    if (grid) {
      auto phi = make_shell_atom(base, j, *grid);
      a.norms = norms_of(phi.field());
      a.state = std::make_shared<const WaveFunction>(std::move(phi));
    } else {
      a.norms = norms_of(*a.profile);
    }
    a.shell = classify_shell(a.norms.hdot1);
    atoms.push_back(std::move(a));
  }
  return AtomicMeasure(std::move(atoms));
}

// ---------------------------------------------------------------------------

double Functional::operator()(const Atom& a) const {
  switch (kind) {
    case Kind::h1_norm: return a.norms.h1;
    case Kind::h1_norm_squared: return a.norms.h1 * a.norms.h1;
    case Kind::energy: return 0.5 * a.norms.hdot1 * a.norms.hdot1 + 0.25 * lambda * std::pow(a.norms.l4, 4);
    case Kind::custom:
      if (!custom) throw std::invalid_argument("custom functional without a callable");
      return custom(a);
  }
  throw std::invalid_argument("unknown functional");
}

double moment(const AtomicMeasure& mu, const Functional& f, int k) {
  if (k < 1) throw std::invalid_argument("moment power must be >= 1");
  CompensatedSum s;
  for (const auto& a : mu.atoms()) s += a.weight * std::pow(f(a), k);
  return s.value();
}

double log_moment(const AtomicMeasure& mu, const Functional& f, int k) {
  if (k < 1) throw std::invalid_argument("moment power must be >= 1");
  std::vector<double> terms;
  for (const auto& a : mu.atoms()) {
    const double v = f(a);
    if (v < 0.0) throw std::domain_error("log_moment needs a non-negative functional");
    terms.push_back(a.log_weight + k * std::log(v));
  }
  return log_sum_exp(terms);
}

RadiusEstimate estimate_RH1(const AtomicMeasure& mu, int k_max) {
  if (k_max < 4) throw std::invalid_argument("estimate_RH1 needs k_max >= 4");
  RadiusEstimate est;
  std::vector<double> log_a;
  for (int k = 1; k <= k_max; ++k) {
    const double la = log_moment(mu, Functional::h1_norm(), 2 * k) / (2.0 * k);
    log_a.push_back(la);
    est.a.push_back(std::exp(la));
  }
  est.limit = est.a.back();
  est.fit_k_min = std::max(4, k_max / 4);
  est.fit_k_max = k_max;
  std::vector<double> x, y;
  for (int k = est.fit_k_min; k <= k_max; ++k) {
    if (!(log_a[k - 1] > 0.0)) continue;
    x.push_back(std::log(static_cast<double>(k)));
    y.push_back(std::log(log_a[k - 1]));
  }
  est.growth_exponent = x.size() >= 2 ? fit_line(x, y).slope : 0.0;
  return est;
}

ChebyshevBound chebyshev_support_bound(const AtomicMeasure& mu, const Functional& f, double tau, int k) {
  if (!(tau > 0.0)) throw std::invalid_argument("chebyshev level must be positive");
  if (k < 1) throw std::invalid_argument("chebyshev power must be >= 1");
  ChebyshevBound out;
  CompensatedSum tail;
  for (const auto& a : mu.atoms())
    if (f(a) > tau) tail += a.weight;
  out.exact_mass = tail.value();
  if (mu.empty()) return out;
  const double log_ratio = log_moment(mu, f, 2 * k) - 2.0 * k * std::log(tau);
  out.bound = log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
  return out;
}

AtomicMeasure truncate_measure(const AtomicMeasure& mu, double R) {
  if (!(R > 0.0)) throw std::invalid_argument("truncation radius must be positive");
  std::vector<Atom> kept;
  for (const auto& a : mu.atoms())
    if (a.norms.h1 <= R) kept.push_back(a);
  return AtomicMeasure(std::move(kept));
}

std::string measure_manifest(const AtomicMeasure& mu) {
  nlohmann::json doc;
  doc["total_mass"] = mu.total_mass();
  doc["atoms"] = nlohmann::json::array();
  for (const auto& a : mu.atoms()) {
    nlohmann::json j;
    j["weight"] = a.weight;
    j["log_weight"] = a.log_weight;
    j["shell"] = a.shell;
    j["phase_orbit"] = a.phase_orbit;
    j["source"] = a.state ? "grid" : "analytic";
    j["h1"] = a.norms.h1;
    j["hdot1"] = a.norms.hdot1;
    j["l4"] = a.norms.l4;
    j["x_moment"] = a.norms.x_moment;
    j["l2"] = a.norms.l2;
    if (a.profile) j["profile"] = {{"kind", "gaussian"}, {"sigma", a.profile->sigma}};
    doc["atoms"].push_back(std::move(j));
  }
  return doc.dump(2);
}

}  // namespace gpdf
