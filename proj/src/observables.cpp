#include "gpdf/observables.hpp"

#include <cmath>
#include <stdexcept>

#include "gpdf/csv.hpp"
#include "gpdf/numerics.hpp"

namespace gpdf {
namespace {

void check_lambda(double lambda) {
  if (lambda != 1.0 && lambda != -1.0 && lambda != 0.0)
    throw std::invalid_argument("lambda must be -1, 0 or +1");
}

double virial_accel_of(double E, double L4, double lambda) {
  return 16.0 * E + 2.0 * lambda * std::pow(L4, 4);
}

}  // namespace

double energy(const WaveFunction& phi, double lambda) {
  check_lambda(lambda);
  const double k = hdot1_norm(phi.field());
  const double l4 = l4_norm(phi.field());
  return 0.5 * k * k + 0.25 * lambda * std::pow(l4, 4);
}

ObservableRecord measure(const WaveFunction& phi, double lambda, double t) {
  check_lambda(lambda);
  const Field& f = phi.field();
  const BoxGrid& grid = f.grid();
  const int d = grid.dimension();
  const double w = grid.cell_volume();

  ObservableRecord rec;
  rec.t = t;
  rec.M = phi.l2_norm() * phi.l2_norm();
  rec.Hdot1 = hdot1_norm(f);
  rec.H1 = std::sqrt(rec.M + rec.Hdot1 * rec.Hdot1);
  rec.L4 = l4_norm(f);
  rec.E = 0.5 * rec.Hdot1 * rec.Hdot1 + 0.25 * lambda * std::pow(rec.L4, 4);

  std::array<Field, 3> grad{Field(grid), Field(grid), Field(grid)};
  for (int a = 0; a < d; ++a) grad[a] = gradient_component(f, a);

  // conj(phi) d_a phi and conj(phi) x_b d_a phi accumulated per axis pair
  std::array<CompensatedSum, 3> p_im, p_re;
  std::array<std::array<CompensatedSum, 3>, 3> xg_re, xg_im;  // [b][a]: x_b conj(phi) d_a phi
  CompensatedSum variance;
  const auto s = f.samples();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Vec3 x = grid.position(i);
    const Complex c = std::conj(s[i]);
    variance += (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) * std::norm(s[i]);
    for (int a = 0; a < d; ++a) {
      const Complex q = c * grad[a][i];
      p_re[a] += q.real();
      p_im[a] += q.imag();
      for (int b = 0; b < d; ++b) {
        xg_re[b][a] += x[b] * q.real();
        xg_im[b][a] += x[b] * q.imag();
      }
    }
  }
  rec.V = variance.value() * w;
  auto xg = [&](int b, int a) { return Complex(xg_re[b][a].value(), xg_im[b][a].value()) * w; };
  for (int a = 0; a < d; ++a) {
    const Complex integral = Complex(p_re[a].value(), p_im[a].value()) * w;
    rec.P[a] = (Complex(0, 1) * integral).real();
  }
  if (d == 3) {
    for (int a = 0; a < 3; ++a) {
      const int b = (a + 1) % 3, c = (a + 2) % 3;
      // (x ^ grad)_a = x_b d_c - x_c d_b
      rec.L_ang[a] = (Complex(0, 1) * (xg(b, c) - xg(c, b))).real();
    }
  } else if (d == 2) {
    rec.L_ang[2] = (Complex(0, 1) * (xg(0, 1) - xg(1, 0))).real();
  }
  double rate = 0.0;
  for (int a = 0; a < d; ++a) rate += xg(a, a).imag();
  rec.virial_rate = 4.0 * rate;
  rec.virial_accel = virial_accel_of(rec.E, rec.L4, lambda);
  return rec;
}

VirialReport virial_consistency(std::span<const ObservableRecord> r, double lambda) {
  check_lambda(lambda);
  if (r.size() < 5) throw std::invalid_argument("virial_consistency needs at least five snapshots");
  VirialReport rep;
  auto derivative = [&](std::size_t i, auto value) {
    // three-point formula on non-uniform nodes
    const double h0 = r[i].t - r[i - 1].t, h1 = r[i + 1].t - r[i].t;
    return (-h1 / (h0 * (h0 + h1))) * value(r[i - 1]) + ((h1 - h0) / (h0 * h1)) * value(r[i]) +
           (h0 / (h1 * (h0 + h1))) * value(r[i + 1]);
  };
  for (std::size_t i = 1; i + 1 < r.size(); ++i) {
    if (!(r[i].t > r[i - 1].t && r[i + 1].t > r[i].t))
      throw std::invalid_argument("snapshot times must be strictly increasing");
    const double dV = derivative(i, [](const ObservableRecord& x) { return x.V; });
    const double dR = derivative(i, [](const ObservableRecord& x) { return x.virial_rate; });
    const double rate = r[i].virial_rate;
    const double accel = r[i].virial_accel;
    rep.rate_mismatch = std::max(rep.rate_mismatch, std::abs(dV - rate) / std::max(1.0, std::abs(rate)));
    rep.accel_mismatch = std::max(rep.accel_mismatch, std::abs(dR - accel) / std::max(1.0, std::abs(accel)));

    const double half = 0.5 * rate;
    const double fixed_sign = 16.0 * r[i].E - 2.0 * std::pow(r[i].L4, 4);
    rep.rate_mismatch_half_coefficient =
        std::max(rep.rate_mismatch_half_coefficient, std::abs(dV - half) / std::max(1.0, std::abs(half)));
    rep.accel_mismatch_fixed_sign = std::max(rep.accel_mismatch_fixed_sign,
                                             std::abs(dR - fixed_sign) / std::max(1.0, std::abs(fixed_sign)));
    ++rep.samples;
  }
  return rep;
}

VirialReport virial_consistency(const Trajectory& trajectory, double lambda) {
  if (trajectory.snapshots.size() < 5)
    throw std::invalid_argument("virial_consistency needs at least five snapshots");
  std::vector<ObservableRecord> records;
  records.reserve(trajectory.snapshots.size());
  for (const auto& s : trajectory.snapshots) records.push_back(measure(s.state, lambda, s.t));
  return virial_consistency(records, lambda);
}

InequalityRatios inequality_ratios(const WaveFunction& phi) {
  const double l2 = phi.l2_norm();
  if (!(l2 > 0.0)) throw std::invalid_argument("inequality_ratios of the zero field");
  const double k = hdot1_norm(phi.field());
  const double l4 = l4_norm(phi.field());
  const double xm = x_moment_norm(phi.field());
  return {l4 / (std::pow(k, 0.75) * std::pow(l2, 0.25)), l2 * l2 / (xm * k)};
}

const std::vector<std::string>& observable_csv_header() {
  static const std::vector<std::string> h{"t",  "M",  "Px", "Py", "Pz",    "Lx", "Ly",          "Lz",
                                          "E",  "V",  "H1", "Hdot1", "L4", "virial_rate", "virial_accel"};
  return h;
}

void write_observables_csv(std::ostream& out, std::span<const ObservableRecord> records) {
  CsvWriter w(out, observable_csv_header());
  for (const auto& r : records)
    w.row({r.t, r.M, r.P[0], r.P[1], r.P[2], r.L_ang[0], r.L_ang[1], r.L_ang[2], r.E, r.V, r.H1, r.Hdot1,
           r.L4, r.virial_rate, r.virial_accel});
}

}  // namespace gpdf
