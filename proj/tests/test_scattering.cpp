#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "gpdf/hierarchy.hpp"
#include "gpdf/observables.hpp"
#include "gpdf/scattering.hpp"

using namespace gpdf;

namespace {

double max_abs_diff(const Field& a, const Field& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

WaveFunction small_gaussian(const BoxGrid& g, double amp, double sigma = 1.0) {
  return WaveFunction(Complex(amp) * GaussianProfile{sigma}.sample(g));
}

ScatteringConfig small_config() {
  ScatteringConfig c;
  c.t_max = 2.0;
  c.levels = 4;
  c.dt = 0.02;
  c.enforce_window = false;
  return c;
}

}  // namespace

TEST_CASE("pullback undoes free flow") {
  BoxGrid g(3, 16.0, 32);
  const WaveFunction phi = small_gaussian(g, 1.0, 1.5);
  CHECK(max_abs_diff(pullback(phi, 0.0).field(), phi.field()) == 0.0);
  CHECK(max_abs_diff(pullback(free_propagate(phi, 0.7), 0.7).field(), phi.field()) < 1e-12);
}

TEST_CASE("linear runs scatter to the initial state") {
  BoxGrid g(3, 16.0, 32);
  const WaveFunction phi = small_gaussian(g, 1.0, 1.5);
  auto cfg = small_config();
  cfg.nonlinear = false;
  const auto run = extract_scattering_state(phi, cfg);
  CHECK(max_abs_diff(run.phi_plus.field(), phi.field()) < 1e-12);
  for (const auto& row : run.cauchy) CHECK(row.increment <= 1e-12);
  REQUIRE(run.check_times.size() == 5);
  CHECK(run.check_times.front() == doctest::Approx(0.125));
  CHECK(run.check_times.back() == 2.0);

  const auto mu = AtomicMeasure::from_states({{1.0, phi}});
  std::vector<ScatteringRun> runs{run};
  const auto plus = asymptotic_measure(mu, runs);
  CHECK(plus.size() == 1);
  CHECK(plus.atoms()[0].weight == 1.0);
  CHECK(max_abs_diff(plus.atoms()[0].state->field(), phi.field()) < 1e-12);
}

TEST_CASE("the zero field stays at zero") {
  BoxGrid g(3, 16.0, 16);
  auto cfg = small_config();
  cfg.enforce_window = true;
  const auto run = extract_scattering_state(WaveFunction(Field(g)), cfg);
  CHECK(std::isinf(run.window_limit));
  CHECK(run.phi_plus.l2_norm() == 0.0);
  for (const auto& row : run.cauchy) CHECK(row.increment == 0.0);
}

TEST_CASE("scattering configuration checks") {
  BoxGrid g(3, 16.0, 16);
  const WaveFunction phi = small_gaussian(g, 0.1);
  auto cfg = small_config();
  cfg.lambda = -1.0;
  CHECK_THROWS_AS(extract_scattering_state(phi, cfg), std::invalid_argument);
  cfg = small_config();
  cfg.dt = 0.5;
  CHECK_THROWS_AS(extract_scattering_state(phi, cfg), std::invalid_argument);
  cfg = small_config();
  cfg.enforce_window = true;
  cfg.t_max = 8.0;
  cfg.dt = 0.1;
  REQUIRE(wraparound_limit(phi) < 8.0);
  CHECK_THROWS_AS(extract_scattering_state(phi, cfg), std::invalid_argument);
}

TEST_CASE("wraparound window of a Gaussian") {
  BoxGrid g(3, 32.0, 64);
  const WaveFunction phi = small_gaussian(g, 0.1);
  const double xi = significant_frequency(phi.field());
  // the cutoff holds at least 99.9% of the H1 mass, the previous shell less
  const auto xi2 = g.xi_squared();
  const Field hat = to_frequency(phi.field());
  double inside = 0, total = 0;
  for (std::size_t i = 0; i < hat.size(); ++i) {
    const double w = (1 + xi2[i]) * std::norm(hat[i]);
    total += w;
    if (xi2[i] <= xi * xi * (1 + 1e-12)) inside += w;
  }
  CHECK(inside / total >= 0.999);
  CHECK(wraparound_limit(phi) == doctest::Approx(32.0 / (4 * xi)));
  CHECK_THROWS_AS(significant_frequency(phi.field(), 0.0), std::invalid_argument);
}

TEST_CASE("small defocusing data: Cauchy decay and hierarchy distances") {
  BoxGrid g(3, 16.0, 32);
  const WaveFunction phi = small_gaussian(g, 0.3);
  auto cfg = small_config();
  cfg.t_max = 4.0;
  const auto run = extract_scattering_state(phi, cfg);
  CHECK(run.decreasing_levels() >= 3);
  CHECK(run.residual_estimate == run.cauchy.back().increment);
  CHECK(run.wrapped_fraction >= 0.0);
  CHECK(run.wrapped_fraction <= 1.0);
  CHECK_THROWS_AS(run.index_of(0.3), std::out_of_range);

  const auto mu = AtomicMeasure::from_states({{1.0, phi}});
  std::vector<ScatteringRun> runs{run};
  const double M = phi.l2_norm() * phi.l2_norm();
  const double bound = M + 2 * energy(phi, 1.0);
  for (const auto& u : run.pullbacks) CHECK(std::pow(h1_norm(u.field()), 2) <= bound + 1e-6);

  for (int k = 1; k <= 6; ++k) {
    double prev = std::numeric_limits<double>::infinity();
    for (double t : run.check_times) {
      const double exact = hierarchy_scatter_diag(mu, runs, k, t);
      const double tele = hierarchy_scatter_diag(mu, runs, k, t, DiagMode::bound);
      CHECK(exact <= tele * (1 + 1e-12));
      CHECK(exact < prev);
      prev = exact;
    }
    CHECK(hierarchy_scatter_diag(mu, runs, k, cfg.t_max) == 0.0);
  }
  // one atom: the mixture value is the pairwise trace norm
  const double t0 = run.check_times[1];
  CHECK(hierarchy_scatter_diag(mu, runs, 2, t0) ==
        rank_one_diff_trace_norm(run.pullbacks[1].field(), run.phi_plus.field(), 2, 1.0).value);

  const auto plus = asymptotic_measure(mu, runs);
  CHECK(moment(plus, Functional::h1_norm_squared(), 1) <= bound + 1e-6);

  const auto rows = scattering_table(mu, runs);
  REQUIRE(rows.size() == run.check_times.size());
  CHECK(rows.back().D3 == 0.0);
  for (const auto& r : rows) CHECK(r.D3 <= r.bound_D3 * (1 + 1e-12));
  std::ostringstream out;
  write_scattering_csv(out, rows);
  CHECK(out.str().rfind("t,H1_pullback_increment,D_1,D_2,D_3,bound_D_3\n", 0) == 0);
}

TEST_CASE("per-atom runs do not depend on the thread count") {
  BoxGrid g(3, 16.0, 16);
  std::vector<std::pair<double, WaveFunction>> atoms;
  atoms.emplace_back(0.25, small_gaussian(g, 0.2, 1.5));
  atoms.emplace_back(0.25, small_gaussian(g, 0.3, 2.0));
  atoms.emplace_back(0.5, small_gaussian(g, 0.1, 1.8));
  const auto mu = AtomicMeasure::from_states(atoms);
  const auto cfg = small_config();
  const auto one = scatter_atoms(mu, cfg, 1);
  const auto three = scatter_atoms(mu, cfg, 3);
  REQUIRE(one.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(max_abs_diff(one[i].phi_plus.field(), three[i].phi_plus.field()) == 0.0);
  const auto plus = asymptotic_measure(mu, one);
  for (std::size_t i = 0; i < 3; ++i) CHECK(plus.atoms()[i].weight == mu.atoms()[i].weight);
  CHECK_THROWS_AS(asymptotic_measure(mu, std::span(one).first(2)), std::invalid_argument);
  const double d = hierarchy_scatter_diag(mu, one, 2, cfg.t_max / 4);
  double sum = 0;
  for (std::size_t i = 0; i < 3; ++i)
    sum += mu.atoms()[i].weight *
           rank_one_diff_trace_norm(one[i].pullbacks[one[i].index_of(cfg.t_max / 4)].field(),
                                    one[i].phi_plus.field(), 2, 1.0)
               .value;
  CHECK(d == doctest::Approx(sum).epsilon(1e-14));
}
