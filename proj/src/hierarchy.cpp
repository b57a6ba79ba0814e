#include "gpdf/hierarchy.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <stdexcept>

#include "gpdf/csv.hpp"
#include "gpdf/numerics.hpp"

namespace gpdf {

// ---------------------------------------------------------------------------
// Orbitals and mixtures

Orbital Orbital::of(Field f) { return of(std::make_shared<const Field>(to_position(f))); }

Orbital Orbital::of(std::shared_ptr<const Field> f) {
  if (!f) throw std::invalid_argument("null orbital field");
  if (f->space() != Space::position) f = std::make_shared<const Field>(to_position(*f));
  return Orbital{std::move(f), std::nullopt};
}

Orbital Orbital::of(const GaussianProfile& g) { return Orbital{nullptr, g}; }

bool Orbital::same_as(const Orbital& other) const {
  if (field || other.field) return field == other.field;
  return profile && other.profile && profile->sigma == other.profile->sigma;
}

double Orbital::h_alpha_norm(double alpha) const {
  if (field) return gpdf::h_alpha_norm(*field, alpha);
  if (profile) return profile->h_alpha(alpha);
  throw std::invalid_argument("empty orbital");
}

const Field& Orbital::require_field() const {
  if (!field) throw std::invalid_argument("operation needs grid orbitals; got an analytic factor");
  return *field;
}

void TensorMixture::add(double weight, ElementaryTensorOp op) {
  if (!(weight > 0.0)) throw std::invalid_argument("mixture weights must be positive");
  add_log_weighted(std::log(weight), std::move(op));
}

void TensorMixture::add_log_weighted(double log_weight, ElementaryTensorOp op) {
  if (op.k() != k_ || static_cast<int>(op.right.size()) != k_)
    throw std::invalid_argument("elementary tensor has " + std::to_string(op.k()) + "/" +
                                std::to_string(op.right.size()) + " factors, mixture needs " + std::to_string(k_));
  terms_.push_back({std::exp(log_weight), log_weight, std::move(op)});
}

namespace {

Orbital atom_orbital(const Atom& a) {
  if (a.state) return Orbital::of(std::shared_ptr<const Field>(a.state, &a.state->field()));
  return Orbital::of(*a.profile);
}

}  // namespace

TensorMixture marginal(const AtomicMeasure& mu, int k) {
  if (k < 1) throw std::invalid_argument("marginal needs k >= 1");
  TensorMixture out(k);
  for (const auto& a : mu.atoms()) {
    const Orbital o = atom_orbital(a);
    ElementaryTensorOp op;
    op.left.assign(k, o);
    op.right.assign(k, o);
    out.add_log_weighted(a.log_weight, std::move(op));
  }
  return out;
}

namespace {

Complex pairing(const Orbital& chi, const Orbital& psi) {
  if (chi.field && psi.field) return inner_product(*chi.field, *psi.field);
  if (chi.same_as(psi) && chi.profile) return 1.0;  // analytic profiles are normalized
  throw std::invalid_argument("cannot pair these orbitals");
}

}  // namespace

TensorMixture partial_trace_last(const TensorMixture& gamma) {
  if (gamma.k() < 2) throw std::invalid_argument("partial trace needs k >= 2");
  TensorMixture out(gamma.k() - 1);
  for (const auto& t : gamma.terms()) {
    ElementaryTensorOp op;
    op.coefficient = t.op.coefficient * pairing(t.op.right.back(), t.op.left.back());
    op.left.assign(t.op.left.begin(), t.op.left.end() - 1);
    op.right.assign(t.op.right.begin(), t.op.right.end() - 1);
    out.add_log_weighted(t.log_weight, std::move(op));
  }
  return out;
}

Complex trace(const TensorMixture& gamma) {
  Complex total = 0.0;
  for (const auto& t : gamma.terms()) {
    Complex c = t.weight * t.op.coefficient;
    for (int j = 0; j < gamma.k(); ++j) c *= pairing(t.op.right[j], t.op.left[j]);
    total += c;
  }
  return total;
}

std::string to_string(GrowthClass g) {
  return g == GrowthClass::bounded_power ? "bounded_power" : "super_exponential";
}

TraceDiagnostics trace_S_alpha(const TensorMixture& gamma, double alpha, double t,
                               std::optional<double> reference_radius) {
  TraceDiagnostics d;
  d.k = gamma.k();
  d.alpha = alpha;
  d.t = t;
  std::map<const void*, double> field_norms;
  std::map<double, double> profile_norms;
  auto log_norm = [&](const Orbital& o) {
    if (o.field) {
      auto [it, fresh] = field_norms.try_emplace(o.field.get(), 0.0);
      if (fresh) it->second = std::log(o.h_alpha_norm(alpha));
      return it->second;
    }
    auto [it, fresh] = profile_norms.try_emplace(o.profile->sigma, 0.0);
    if (fresh) it->second = std::log(o.h_alpha_norm(alpha));
    return it->second;
  };

  std::vector<double> terms, log_weights;
  double log_r_max = -std::numeric_limits<double>::infinity();
  for (const auto& term : gamma.terms()) {
    const Complex c = term.op.coefficient;
    if (!(c.real() > 0.0) || std::abs(c.imag()) > 1e-14 * c.real())
      throw std::invalid_argument("trace_S_alpha needs positive real coefficients; use the Gram route");
    double s = term.log_weight + std::log(c.real());
    for (int j = 0; j < gamma.k(); ++j) {
      if (!term.op.left[j].same_as(term.op.right[j]))
        throw std::invalid_argument("trace_S_alpha needs equal left and right factors; use the Gram route");
      const double ln = log_norm(term.op.left[j]);
      s += 2.0 * ln;
      log_r_max = std::max(log_r_max, ln);
    }
    terms.push_back(s);
    log_weights.push_back(term.log_weight);
  }
  d.value_log = log_sum_exp(terms);
  const double log_r = reference_radius ? std::log(*reference_radius) : log_r_max;
  const double limit = log_sum_exp(log_weights) + 2.0 * d.k * log_r;
  d.classification = d.value_log <= limit + 1e-12 * std::max(1.0, std::abs(limit)) ? GrowthClass::bounded_power
                                                                                     : GrowthClass::super_exponential;
  return d;
}

// ---------------------------------------------------------------------------
// Contractions

namespace {

Orbital pointwise(const Field& a, const Field& b, const Field& c, bool conj_b, bool conj_c) {
  Field out(a.grid());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Complex vb = conj_b ? std::conj(b[i]) : b[i];
    const Complex vc = conj_c ? std::conj(c[i]) : c[i];
    out[i] = a[i] * vb * vc;
  }
  return Orbital::of(std::make_shared<const Field>(std::move(out)));
}

}  // namespace

TensorMixture apply_B(const TensorMixture& gamma, int j, ContractionSign sign) {
  const int k = gamma.k() - 1;
  if (k < 1) throw std::invalid_argument("apply_B needs a mixture with at least two slots");
  if (j < 1 || j > k) throw std::invalid_argument("contraction slot out of range");
  TensorMixture out(k);
  for (const auto& t : gamma.terms()) {
    ElementaryTensorOp op;
    op.coefficient = t.op.coefficient;
    op.left.assign(t.op.left.begin(), t.op.left.end() - 1);
    op.right.assign(t.op.right.begin(), t.op.right.end() - 1);
    const Field& psi_last = t.op.left.back().require_field();
    const Field& chi_last = t.op.right.back().require_field();
    if (sign == ContractionSign::plus)
      op.left[j - 1] = pointwise(op.left[j - 1].require_field(), psi_last, chi_last, false, true);
    else
      op.right[j - 1] = pointwise(op.right[j - 1].require_field(), psi_last, chi_last, true, false);
    out.add_log_weighted(t.log_weight, std::move(op));
  }
  return out;
}

TensorMixture apply_B_full(const TensorMixture& gamma) {
  const int k = gamma.k() - 1;
  TensorMixture out(k);
  for (int j = 1; j <= k; ++j) {
    for (auto sign : {ContractionSign::plus, ContractionSign::minus}) {
      TensorMixture part = apply_B(gamma, j, sign);
      for (auto term : part.terms()) {
        if (sign == ContractionSign::minus) term.op.coefficient = -term.op.coefficient;
        out.add_log_weighted(term.log_weight, std::move(term.op));
      }
    }
  }
  return out;
}

Complex kernel_at(const TensorMixture& gamma, std::span<const std::size_t> x, std::span<const std::size_t> x_prime) {
  if (static_cast<int>(x.size()) != gamma.k() || static_cast<int>(x_prime.size()) != gamma.k())
    throw std::invalid_argument("kernel_at needs k points on each side");
  Complex total = 0.0;
  for (const auto& t : gamma.terms()) {
    Complex v = t.weight * t.op.coefficient;
    for (int j = 0; j < gamma.k(); ++j)
      v *= t.op.left[j].require_field()[x[j]] * std::conj(t.op.right[j].require_field()[x_prime[j]]);
    total += v;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Higher-order energies

namespace {

// 1/2 <chi_a,(1-Laplacian)psi_a><chi_b,psi_b> + 1/4 int psi_a conj(chi_a) psi_b conj(chi_b)
Complex slot_pair_factor(const Orbital& psi_a, const Orbital& chi_a, const Orbital& psi_b, const Orbital& chi_b,
                         bool include_potential) {
  if (psi_a.field) {
    const Field& pa = psi_a.require_field();
    const Field& ca = chi_a.require_field();
    const Field& pb = psi_b.require_field();
    const Field& cb = chi_b.require_field();
    const Complex kinetic = inner_product(to_frequency(ca), bessel_potential(to_frequency(pa), 2.0));
    Complex quartic = 0.0;
    if (include_potential) {
      CompensatedSum re, im;
      for (std::size_t i = 0; i < pa.size(); ++i) {
        const Complex q = pa[i] * std::conj(ca[i]) * pb[i] * std::conj(cb[i]);
        re += q.real();
        im += q.imag();
      }
      quartic = Complex(re.value(), im.value()) * pa.grid().cell_volume();
    }
    return 0.5 * kinetic * inner_product(cb, pb) + 0.25 * quartic;
  }
  if (!(psi_a.same_as(chi_a) && psi_a.same_as(psi_b) && psi_b.same_as(chi_b)))
    throw std::invalid_argument("analytic slot pairs need equal Gaussian factors");
  const double h1 = psi_a.h_alpha_norm(1.0);
  const double l4 = psi_a.profile->l4();
  return 0.5 * h1 * h1 + (include_potential ? 0.25 * std::pow(l4, 4) : 0.0);
}

}  // namespace

KFunctionalValue K_functional(const AtomicMeasure& mu, int m, bool include_potential) {
  if (m < 1) throw std::invalid_argument("K_functional needs m >= 1");
  if (!mu.sphere_supported()) throw std::invalid_argument("K_functional needs normalized atoms");
  const TensorMixture gamma = marginal(mu, 2 * m);
  KFunctionalValue out;
  CompensatedSum slot, energy;
  for (std::size_t i = 0; i < gamma.terms().size(); ++i) {
    const auto& t = gamma.terms()[i];
    Complex value = t.op.coefficient;
    std::map<std::tuple<const void*, const void*, const void*, const void*>, Complex> cache;
    for (int l = 0; l < 2 * m; l += 2) {
      const auto& L = t.op.left;
      const auto& R = t.op.right;
      auto key = std::make_tuple(L[l].field.get(), R[l].field.get(), L[l + 1].field.get(), R[l + 1].field.get());
      auto it = cache.find(key);
      if (it == cache.end() || !L[l].field)
        it = cache.insert_or_assign(key, slot_pair_factor(L[l], R[l], L[l + 1], R[l + 1], include_potential)).first;
      value *= it->second;
    }
    slot += t.weight * value.real();
    const Atom& a = mu.atoms()[i];
    const double e = 0.5 * a.norms.hdot1 * a.norms.hdot1 + (include_potential ? 0.25 * std::pow(a.norms.l4, 4) : 0.0);
    energy += a.weight * std::pow(e, m);
  }
  out.slot_product = slot.value();
  out.energy_form = energy.value();
  return out;
}

// ---------------------------------------------------------------------------
// Hierarchy residual

std::vector<ResidualRow> hierarchy_residual(const Trajectory& trajectory, double lambda, int k) {
  if (k != 1 && k != 2) throw std::invalid_argument("hierarchy_residual supports k = 1 and k = 2");
  const auto& s = trajectory.snapshots;
  if (s.size() < 3) throw std::invalid_argument("hierarchy_residual needs at least three snapshots");
  const double dt = s[1].t - s[0].t;
  for (std::size_t i = 1; i < s.size(); ++i)
    if (std::abs((s[i].t - s[i - 1].t) - dt) > 1e-9 * dt)
      throw std::invalid_argument("hierarchy_residual needs uniformly spaced snapshots");

  std::vector<ResidualRow> rows;
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    const Field& prev = s[i - 1].state.field();
    const Field& cur = s[i].state.field();
    const Field& next = s[i + 1].state.field();
    const Field lap = apply_radial_multiplier(cur, [](double k2) { return Complex(-k2); });
    Field r(cur.grid());
    for (std::size_t p = 0; p < r.size(); ++p) {
      const Complex dphi = (next[p] - prev[p]) / (2.0 * dt);
      r[p] = Complex(0, 1) * dphi + lap[p] - lambda * std::norm(cur[p]) * cur[p];
    }
    ResidualRow row;
    row.t = s[i].t;
    row.one_body = l2_norm(r);
    row.k_body_bound = 2.0 * k * row.one_body * std::pow(s[i].state.l2_norm(), 2 * k - 1);
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Trace norms of rank-one power differences

namespace {

constexpr double kConditionLimit = 1e6;

// Sum of |eigenvalues| of C G over the 2^k words, C = e_0 e_0^T - e_last e_last^T.
double dense_word_trace_norm(double uu, Complex uv, double vv, int k) {
  Eigen::Matrix2cd g1;
  g1 << uu, uv, std::conj(uv), vv;
  Eigen::MatrixXcd g = Eigen::MatrixXcd::Ones(1, 1);
  for (int i = 0; i < k; ++i) {
    Eigen::MatrixXcd next(g.rows() * 2, g.cols() * 2);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) next.block(a * g.rows(), b * g.cols(), g.rows(), g.cols()) = g1(a, b) * g;
    g = std::move(next);
  }
  const Eigen::Index n = g.rows();
  Eigen::MatrixXcd cg = Eigen::MatrixXcd::Zero(n, n);
  cg.row(0) = g.row(0);
  cg.row(n - 1) = -g.row(n - 1);
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(cg, false);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigen solver failed");
  CompensatedSum s;
  for (Eigen::Index i = 0; i < n; ++i) s += std::abs(solver.eigenvalues()[i]);
  return s.value();
}

// Closed form on span{U, V}: |l+| + |l-| = sqrt((a-b)^2 + 4 (ab - |c|^2)) with
// a = uu^k, b = vv^k, c = uv^k; ab - |c|^2 = x^k - y^k factored through the
// one-body Gram determinant x - y = det to avoid cancellation.
double reduced_trace_norm(double uu, Complex uv, double vv, double det, double uu_minus_vv, int k) {
  const double x = uu * vv, y = std::norm(uv);
  CompensatedSum geo;
  for (int i = 0; i < k; ++i) geo += std::pow(x, i) * std::pow(y, k - 1 - i);
  const double cross = std::max(det, 0.0) * geo.value();
  CompensatedSum diff;
  for (int i = 0; i < k; ++i) diff += std::pow(uu, i) * std::pow(vv, k - 1 - i);
  const double a_minus_b = uu_minus_vv * diff.value();
  return std::sqrt(a_minus_b * a_minus_b + 4.0 * cross);
}

double gram_condition(double uu, Complex uv, double vv, double det) {
  const double tr = uu + vv;
  if (!(tr > 0.0)) return 1.0;
  const double disc = std::sqrt(std::max((uu - vv) * (uu - vv) + 4.0 * std::norm(uv), 0.0));
  const double lmax = 0.5 * (tr + disc);
  const double lmin = std::max(det, 0.0) / lmax;
  return lmin > 0.0 ? lmax / lmin : std::numeric_limits<double>::infinity();
}

}  // namespace

TraceNormResult rank_one_diff_trace_norm(double uu, Complex uv, double vv, int k, bool dense) {
  if (k < 1 || k > 12) throw std::invalid_argument("rank_one_diff_trace_norm supports 1 <= k <= 12");
  const double det = uu * vv - std::norm(uv);
  TraceNormResult r;
  r.gram_condition = gram_condition(uu, uv, vv, det);
  r.ill_conditioned = r.gram_condition > kConditionLimit;
  if (dense && k <= 8 && !r.ill_conditioned) {
    r.value = dense_word_trace_norm(uu, uv, vv, k);
    r.route = "dense";
  } else {
    r.value = reduced_trace_norm(uu, uv, vv, det, uu - vv, k);
    r.route = "reduced";
  }
  return r;
}

TraceNormResult rank_one_diff_trace_norm(const Field& u, const Field& v, int k, double alpha) {
  if (!(u.grid() == v.grid())) throw std::invalid_argument("fields live on different grids");
  const Field ut = to_frequency(bessel_potential(u, alpha));
  const Field vt = to_frequency(bessel_potential(v, alpha));
  const double uu = std::norm(l2_norm(ut));
  const double vv = std::norm(l2_norm(vt));
  const Complex uv = inner_product(ut, vt);
  if (uu == 0.0 || vv == 0.0) {
    TraceNormResult r;
    r.value = std::pow(uu, k) + std::pow(vv, k);
    r.route = "reduced";
    return r;
  }
  // Everything near-degenerate is taken from d = v~ - u~: the Gram determinant
  // uu ||d - P_u d||^2 and uu - vv = -Re <d, u~ + v~>.
  const Field d = vt - ut;
  Field perp = d;
  perp -= (inner_product(ut, d) / uu) * ut;
  const double det = uu * std::norm(l2_norm(perp));
  const double uu_minus_vv = -inner_product(d, ut + vt).real();
  const double cond = gram_condition(uu, uv, vv, det);
  TraceNormResult r;
  r.gram_condition = cond;
  r.ill_conditioned = cond > kConditionLimit;
  if (k <= 8 && !r.ill_conditioned) {
    r.value = dense_word_trace_norm(uu, uv, vv, k);
    r.route = "dense";
  } else {
    if (k < 1 || k > 12) throw std::invalid_argument("rank_one_diff_trace_norm supports 1 <= k <= 12");
    r.value = reduced_trace_norm(uu, uv, vv, det, uu_minus_vv, k);
    r.route = "reduced";
  }
  return r;
}

double telescoping_bound(const Field& u, const Field& v, int k, double alpha) {
  const Field ut = bessel_potential(u, alpha);
  const Field vt = bessel_potential(v, alpha);
  const double nu = l2_norm(ut), nv = l2_norm(vt);
  return k * l2_norm(ut - vt) * std::pow(nu + nv, 2 * k - 1);
}

void write_trace_csv(std::ostream& out, std::span<const TraceDiagnostics> rows) {
  CsvWriter w(out, {"k", "alpha", "t", "value_log", "classification"});
  for (const auto& r : rows)
    w.row({std::to_string(r.k), format_double(r.alpha), format_double(r.t), format_double(r.value_log),
           to_string(r.classification)});
}

}  // namespace gpdf
