#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "gpdf/spectral.hpp"

using namespace gpdf;
using std::numbers::pi;

namespace {

Field random_field(const BoxGrid& grid, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Field f(grid);
  for (auto& v : f.samples()) v = Complex(n(rng), n(rng));
  return f;
}

Field gaussian(const BoxGrid& grid, double sigma) {
  const int d = grid.dimension();
  const double c = std::pow(pi * sigma * sigma, -0.25 * d);
  return Field::sample(grid, [&](const Vec3& x) {
    const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    return Complex(c * std::exp(-r2 / (2 * sigma * sigma)));
  });
}

double max_abs_diff(const Field& a, const Field& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("grid validation") {
  CHECK_THROWS_AS(BoxGrid(4, 16.0, 32), std::invalid_argument);
  CHECK_THROWS_AS(BoxGrid(3, -1.0, 32), std::invalid_argument);
  CHECK_THROWS_AS(BoxGrid(3, 16.0, 48), std::invalid_argument);
  CHECK_THROWS_AS(BoxGrid(3, 16.0, 4), std::invalid_argument);
  BoxGrid g(3, 16.0, 16);
  CHECK(g.size() == 4096);
  CHECK(g.coordinate(0) == doctest::Approx(-8.0));
  CHECK(g.mode_number(8) == -8);
  CHECK(g.ravel(g.unravel(1234)) == 1234);
}

TEST_CASE("quadrature of one over the box is the box volume") {
  BoxGrid g(3, 16.0, 16);
  Field one = Field::sample(g, [](const Vec3&) { return Complex(1.0); });
  CHECK(std::abs(inner_product(one, one).real() - 4096.0) < 1e-9);
}

TEST_CASE("constant field has a single DC mode of value c L^{d/2}") {
  for (int d = 1; d <= 3; ++d) {
    BoxGrid g(d, 10.0, 16);
    const Complex c(0.7, -0.2);
    Field f = Field::sample(g, [&](const Vec3&) { return c; });
    Field hat = to_frequency(f);
    const Complex expected = c * std::pow(10.0, 0.5 * d);
    CHECK(std::abs(hat[0] - expected) < 1e-12 * std::abs(expected));
    for (std::size_t i = 1; i < hat.size(); ++i) CHECK(std::abs(hat[i]) < 1e-12);
  }
}

TEST_CASE("round trip and Parseval on random fields") {
  for (int d = 1; d <= 3; ++d) {
    BoxGrid g(d, 7.5, 16);
    Field f = random_field(g, 11 + d);
    Field back = to_position(to_frequency(f));
    CHECK(max_abs_diff(f, back) < 1e-12 * l2_norm(f));
    const double p = l2_norm(f), q = l2_norm(to_frequency(f));
    CHECK(std::abs(p - q) <= 1e-12 * p);
  }
}

TEST_CASE("transform rejects mismatched space tags") {
  BoxGrid g(2, 4.0, 8);
  Field f(g);
  CHECK_THROWS_AS(transform(f, Direction::inverse), std::invalid_argument);
  CHECK_THROWS_AS(transform(to_frequency(f), Direction::forward), std::invalid_argument);
}

TEST_CASE("plane wave maps to a single unit mode") {
  BoxGrid g(3, 16.0, 16);
  const std::array<int, 3> n{2, -3, 1};
  Field hat = to_frequency(plane_wave(g, n));
  const std::size_t target = g.ravel({2, 16 - 3, 1});
  for (std::size_t i = 0; i < hat.size(); ++i) {
    const Complex expected = i == target ? Complex(1.0) : Complex(0.0);
    CHECK(std::abs(hat[i] - expected) < 1e-12);
  }
}

TEST_CASE("multipliers") {
  BoxGrid g(3, 16.0, 16);
  Field f = random_field(g, 5);

  SUBCASE("unit symbol is the identity") {
    Field h = apply_multiplier(f, [](const Vec3&) { return Complex(1.0); });
    CHECK(h.space() == Space::position);
    CHECK(max_abs_diff(h, f) < 1e-12 * l2_norm(f));
  }
  SUBCASE("plane wave is a Laplacian eigenfunction") {
    const std::array<int, 3> n{1, 2, -1};
    Field w = plane_wave(g, n);
    const double k2 = std::pow(2 * pi / 16.0, 2) * 6.0;
    Field lap = apply_multiplier(w, [](const Vec3& k) { return Complex(-(k[0] * k[0] + k[1] * k[1] + k[2] * k[2])); });
    CHECK(max_abs_diff(lap, -k2 * w) < 1e-12);
  }
  SUBCASE("Bessel potential semigroup") {
    Field twice = bessel_potential(bessel_potential(f, 1.0), 1.0);
    Field once = bessel_potential(f, 2.0);
    CHECK(max_abs_diff(twice, once) < 1e-12 * l2_norm(once));
  }
  SUBCASE("frequency-space input stays in frequency space") {
    Field hat = to_frequency(f);
    CHECK(apply_radial_multiplier(hat, [](double) { return Complex(2.0); }).space() == Space::frequency);
  }
  SUBCASE("non-finite symbol is rejected") {
    CHECK_THROWS_AS(apply_multiplier(f, [](const Vec3&) { return Complex(NAN); }), std::domain_error);
  }
}

TEST_CASE("norms of the zero field vanish") {
  BoxGrid g(3, 8.0, 8);
  Field z(g);
  for (auto kind : {NormKind::L2, NormKind::L4, NormKind::Hdot1, NormKind::H_alpha, NormKind::weighted_x})
    CHECK(norm(z, kind, 1.5) == 0.0);
}

TEST_CASE("normalized Gaussian norms against closed forms") {
  for (double sigma : {1.0, 1.5, 2.0}) {
    // sigma = 2 needs the wider box for boundary tails below 1e-12.
    BoxGrid g(3, sigma < 2.0 ? 16.0 : 32.0, 64);
    Field f = gaussian(g, sigma);
    CHECK(l2_norm(f) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(hdot1_norm(f) == doctest::Approx(std::sqrt(1.5) / sigma).epsilon(1e-10));
    CHECK(l4_norm(f) == doctest::Approx(std::pow(2 * pi * sigma * sigma, -0.375)).epsilon(1e-10));
    CHECK(x_moment_norm(f) == doctest::Approx(std::sqrt(1.5) * sigma).epsilon(1e-10));
    CHECK(h1_norm(f) == doctest::Approx(std::sqrt(1.0 + 1.5 / (sigma * sigma))).epsilon(1e-10));
    CHECK(h_alpha_norm(f, 0.0) == l2_norm(f));
  }
}

TEST_CASE("plane wave L2 and Hdot1") {
  BoxGrid g(3, 16.0, 16);
  Field w = plane_wave(g, {3, 0, -4});
  CHECK(l2_norm(w) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(hdot1_norm(w) == doctest::Approx(5.0 * 2 * pi / 16.0).epsilon(1e-12));
}

TEST_CASE("scaling laws on refined grids") {
  const BoxGrid base(3, 16.0, 64);
  const double sigma = 2.0;
  Field g0 = gaussian(base, sigma);
  for (int j = 1; j <= 3; ++j) {
    const double s = std::pow(2.0, j);
    BoxGrid fine(3, 16.0 / s, 64);
    const double amp = std::pow(s, 1.5);
    Field fj = Field::sample(fine, [&](const Vec3& x) {
      const double r2 = s * s * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
      return Complex(amp * std::pow(pi * sigma * sigma, -0.75) * std::exp(-r2 / (2 * sigma * sigma)));
    });
    CHECK(hdot1_norm(fj) / hdot1_norm(g0) == doctest::Approx(s).epsilon(1e-6));
    CHECK(l4_norm(fj) / l4_norm(g0) == doctest::Approx(std::pow(s, 0.75)).epsilon(1e-6));
    CHECK(x_moment_norm(fj) / x_moment_norm(g0) == doctest::Approx(1.0 / s).epsilon(1e-6));
  }
}

TEST_CASE("inner product") {
  BoxGrid g(3, 16.0, 16);
  Field f = random_field(g, 1), h = random_field(g, 2);
  CHECK(std::abs(inner_product(f, f).real() - std::pow(l2_norm(f), 2)) < 1e-10 * std::pow(l2_norm(f), 2));
  CHECK(std::abs(inner_product(f, h) - std::conj(inner_product(h, f))) < 1e-12 * l2_norm(f) * l2_norm(h));
  CHECK(std::abs(inner_product(plane_wave(g, {1, 0, 0}), plane_wave(g, {0, 2, 1}))) < 1e-12);
  CHECK(std::abs(inner_product(f, to_frequency(h)) - inner_product(f, h)) < 1e-10 * l2_norm(f) * l2_norm(h));
  CHECK_THROWS_AS(inner_product(f, Field(BoxGrid(3, 8.0, 16))), std::invalid_argument);
}

TEST_CASE("dealiasing keeps the inner two thirds") {
  BoxGrid g(1, 2 * pi, 32);
  CHECK(dealias_tail_fraction(plane_wave(g, {10, 0, 0})) < 1e-25);
  CHECK(dealias_tail_fraction(plane_wave(g, {11, 0, 0})) == doctest::Approx(1.0));
  Field mix = plane_wave(g, {2, 0, 0}) + plane_wave(g, {12, 0, 0});
  Field kept = dealias(mix);
  CHECK(max_abs_diff(kept, plane_wave(g, {2, 0, 0})) < 1e-12);
}

TEST_CASE("gradient of a plane wave") {
  BoxGrid g(2, 8.0, 16);
  Field w = plane_wave(g, {2, -1, 0});
  Field dy = gradient_component(w, 1);
  CHECK(max_abs_diff(dy, Complex(0.0, -2 * pi / 8.0) * w) < 1e-12);
  CHECK_THROWS_AS(gradient_component(w, 2), std::invalid_argument);
}

TEST_CASE("wave function normalization") {
  BoxGrid g(3, 16.0, 16);
  auto wf = WaveFunction::normalized(random_field(g, 3));
  CHECK(wf.is_normalized());
  CHECK_THROWS_AS(WaveFunction::normalized(Field(g)), std::invalid_argument);
}
