#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "gpdf/ensemble.hpp"
#include "gpdf/observables.hpp"

using namespace gpdf;
using std::numbers::pi;

TEST_CASE("lambda must be a sign") {
  BoxGrid g(3, 16.0, 16);
  const WaveFunction phi(GaussianProfile{2.0}.sample(g));
  CHECK_THROWS_AS(measure(phi, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(energy(phi, -0.5), std::invalid_argument);
}

TEST_CASE("plane wave momentum is minus its wavevector") {
  BoxGrid g(3, 2 * pi, 16);
  const WaveFunction e(plane_wave(g, {2, -1, 3}));
  const auto r = measure(e, 0.0);
  CHECK(r.M == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(r.P[0] == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(r.P[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.P[2] == doctest::Approx(-3.0).epsilon(1e-12));
  CHECK(r.Hdot1 == doctest::Approx(std::sqrt(14.0)).epsilon(1e-12));
}

TEST_CASE("Gaussian energies, variance and inequality ratios") {
  // |phi|^4 is narrower than phi, so the quartic terms carry a ~1e-9 sampling error at sigma = 1
  BoxGrid g(3, 32.0, 64);
  for (double sigma : {1.0, 2.0}) {
    const WaveFunction phi(GaussianProfile{sigma}.sample(g));
    for (double lambda : {-1.0, 0.0, 1.0}) {
      const auto r = measure(phi, lambda);
      const double expected = 0.75 / (sigma * sigma) + 0.25 * lambda * std::pow(2 * pi * sigma * sigma, -1.5);
      CHECK(r.E == doctest::Approx(expected).epsilon(1e-8));
      CHECK(energy(phi, lambda) == doctest::Approx(expected).epsilon(1e-8));
      CHECK(r.V == doctest::Approx(1.5 * sigma * sigma).epsilon(1e-10));
      CHECK(std::abs(r.virial_rate) < 1e-12);
      CHECK(std::abs(r.P[0]) + std::abs(r.P[1]) + std::abs(r.P[2]) < 1e-12);
      CHECK(r.virial_accel == doctest::Approx(16 * r.E + 2 * lambda * std::pow(r.L4, 4)));
    }
    const auto q = inequality_ratios(phi);
    CHECK(q.uncertainty_ratio == doctest::Approx(2.0 / 3.0).epsilon(1e-10));
    CHECK(q.gn_ratio == doctest::Approx(std::pow(3 * pi, -0.375)).epsilon(1e-8));
  }
  CHECK_THROWS_AS(inequality_ratios(WaveFunction(Field(g))), std::invalid_argument);
}

TEST_CASE("free Gaussian variance and its rate") {
  BoxGrid g(3, 32.0, 64);
  const double sigma = 2.0;
  const WaveFunction phi(GaussianProfile{sigma}.sample(g));
  for (double t : {0.5, 1.0, 1.5}) {
    const auto r = measure(free_propagate(phi, t), 0.0, t);
    CHECK(r.V == doctest::Approx(1.5 * (sigma * sigma + 4 * t * t / (sigma * sigma))).epsilon(1e-9));
    CHECK(r.virial_rate == doctest::Approx(12.0 * t / (sigma * sigma)).epsilon(1e-9));
    CHECK(r.virial_accel == doctest::Approx(12.0 / (sigma * sigma)).epsilon(1e-9));
  }
}

TEST_CASE("angular momentum of a vortex") {
  BoxGrid g(3, 16.0, 32);
  const GaussianProfile p{1.5};
  const WaveFunction phi = WaveFunction::normalized(Field::sample(g, [&](const Vec3& x) {
    return Complex(x[0], x[1]) * std::exp(-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (2 * p.sigma * p.sigma));
  }));
  const auto r = measure(phi, 1.0);
  CHECK(r.L_ang[2] == doctest::Approx(-1.0).epsilon(1e-10));
  CHECK(std::abs(r.L_ang[0]) < 1e-12);
  CHECK(std::abs(r.L_ang[1]) < 1e-12);
}

TEST_CASE("virial identities hold along a defocusing trajectory") {
  BoxGrid g(3, 16.0, 32);
  const WaveFunction phi(Complex(2.0) * GaussianProfile{1.5}.sample(g));
  SolverConfig cfg;
  cfg.lambda = 1.0;
  cfg.dt_init = 1e-3;
  cfg.t_max = 0.4;
  cfg.snapshot_interval = 0.02;
  const auto traj = evolve(phi, cfg);
  const auto rep = virial_consistency(traj, 1.0);
  CHECK(rep.samples == traj.snapshots.size() - 2);
  CHECK(rep.rate_mismatch < 1e-3);
  CHECK(rep.accel_mismatch < 1e-3);
  CHECK(rep.rate_mismatch_half_coefficient > 0.1);
  CHECK(rep.accel_mismatch_fixed_sign > 1e-2);

  Trajectory shorty;
  shorty.snapshots.assign(traj.snapshots.begin(), traj.snapshots.begin() + 4);
  CHECK_THROWS_AS(virial_consistency(shorty, 1.0), std::invalid_argument);
}

TEST_CASE("observable CSV header and row") {
  ObservableRecord r;
  r.t = 0.5;
  r.M = 1;
  std::ostringstream out;
  write_observables_csv(out, std::span<const ObservableRecord>(&r, 1));
  std::string header;
  std::istringstream in(out.str());
  std::getline(in, header);
  CHECK(header == "t,M,Px,Py,Pz,Lx,Ly,Lz,E,V,H1,Hdot1,L4,virial_rate,virial_accel");
  std::string row;
  std::getline(in, row);
  CHECK(row == "0.5,1,0,0,0,0,0,0,0,0,0,0,0,0,0");
}
