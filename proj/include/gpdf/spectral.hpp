#pragma once

// Periodic-box spectral representation of one-body states.
//
// Grid points sit at x_i = -L/2 + i*h on every axis, so the box is centred on
// the origin.  The frequency representation uses the unitary Fourier-series
// convention
//
//     fhat(xi_n) = h^d L^{-d/2} sum_i f(x_i) exp(-i xi_n . x_i),
//
// i.e. the coefficients of f in the orthonormal basis exp(i xi.x) / L^{d/2}.
// With this convention the position-space L2 norm (quadrature weight h^d) and
// the plain l2 sum over frequency coefficients coincide exactly.

#include <array>
#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace gpdf {

using Complex = std::complex<double>;
using Vec3 = std::array<double, 3>;

enum class Space { position, frequency };
enum class Direction { forward, inverse };

class BoxGrid {
 public:
  /// Throws std::invalid_argument unless d in {1,2,3}, L > 0 and N is a
  /// power of two with N >= 8.
  BoxGrid(int dimension, double extent, int points);

  int dimension() const { return dimension_; }
  double extent() const { return extent_; }
  int points() const { return points_; }
  double spacing() const { return extent_ / points_; }
  std::size_t size() const { return size_; }
  double cell_volume() const;

  /// Coordinate of grid index i (0 <= i < N) along any axis.
  double coordinate(int i) const { return -0.5 * extent_ + i * spacing(); }
  /// Signed mode number of FFT-ordered index i: 0..N/2-1, then -N/2..-1.
  int mode_number(int i) const { return i < points_ / 2 ? i : i - points_; }
  double wavenumber(int i) const;

  /// Axis indices of a flat sample index (unused axes are 0).
  std::array<int, 3> unravel(std::size_t flat) const;
  std::size_t ravel(const std::array<int, 3>& idx) const;

  Vec3 position(std::size_t flat) const;
  Vec3 wavevector(std::size_t flat) const;

  /// |xi|^2 for every frequency sample, FFT ordered; cached per grid.
  std::span<const double> xi_squared() const;
  /// Largest resolved |xi| along one axis, pi / h.
  double nyquist() const;

  friend bool operator==(const BoxGrid& a, const BoxGrid& b) {
    return a.dimension_ == b.dimension_ && a.extent_ == b.extent_ && a.points_ == b.points_;
  }

 private:
  int dimension_;
  double extent_;
  int points_;
  std::size_t size_;
  std::shared_ptr<const std::vector<double>> xi2_;
};

class Field {
 public:
  explicit Field(BoxGrid grid, Space space = Space::position);
  Field(BoxGrid grid, std::vector<Complex> samples, Space space);

  /// Samples f(x) on the grid in position space.
  static Field sample(const BoxGrid& grid, const std::function<Complex(const Vec3&)>& f);

  const BoxGrid& grid() const { return grid_; }
  Space space() const { return space_; }
  std::size_t size() const { return samples_.size(); }

  std::span<Complex> samples() { return samples_; }
  std::span<const Complex> samples() const { return samples_; }
  Complex& operator[](std::size_t i) { return samples_[i]; }
  const Complex& operator[](std::size_t i) const { return samples_[i]; }

  Field& operator+=(const Field& other);
  Field& operator-=(const Field& other);
  Field& operator*=(Complex s);

  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator*(Complex s, Field a) { return a *= s; }
  friend Field operator*(Field a, Complex s) { return a *= s; }

  bool all_finite() const;

 private:
  BoxGrid grid_;
  std::vector<Complex> samples_;
  Space space_;
};

/// A one-body state: a position-space field together with its L2 norm.
class WaveFunction {
 public:
  /// Frequency-space fields are transformed to position space.
  explicit WaveFunction(Field field);

  /// Rescales to unit L2 norm; throws std::invalid_argument for the zero field.
  static WaveFunction normalized(Field field);

  const Field& field() const { return field_; }
  const BoxGrid& grid() const { return field_.grid(); }
  double l2_norm() const { return l2_norm_; }
  bool is_normalized(double tol = 1e-10) const;

 private:
  Field field_;
  double l2_norm_;
};

Field transform(const Field& f, Direction direction);
Field to_position(const Field& f);
Field to_frequency(const Field& f);

using Symbol = std::function<Complex(const Vec3& xi)>;

/// Multiplies by symbol(xi) in frequency space; the result is returned in the
/// caller's space.  Throws std::domain_error on non-finite symbol values.
Field apply_multiplier(const Field& f, const Symbol& symbol);
/// Same with a precomputed FFT-ordered multiplier table of length N^d.
Field apply_multiplier(const Field& f, std::span<const Complex> table);
/// Radial symbols m(|xi|^2), evaluated via the cached |xi|^2 table.
Field apply_radial_multiplier(const Field& f, const std::function<Complex(double)>& m);

/// (1 - Laplacian)^{alpha/2} f.
Field bessel_potential(const Field& f, double alpha);
/// Partial derivative along axis (0, 1, 2), returned in position space.
Field gradient_component(const Field& f, int axis);

enum class NormKind { L2, L4, Hdot1, H_alpha, weighted_x };

double norm(const Field& f, NormKind kind, double alpha = 1.0);
double l2_norm(const Field& f);
double l4_norm(const Field& f);
double hdot1_norm(const Field& f);
double h_alpha_norm(const Field& f, double alpha);
double h1_norm(const Field& f);
/// ||x f||_{L2} with coordinates centred at the box centre.
double x_moment_norm(const Field& f);

/// <f, g> = int conj(f) g; fields in different spaces are compared in f's space.
Complex inner_product(const Field& f, const Field& g);

/// Fraction of (1+|xi|^2)|fhat|^2 carried by modes removed by the 2/3 rule.
double dealias_tail_fraction(const Field& f);
/// Zeroes every mode with |n| > N/3 on some axis (2/3 rule).
Field dealias(const Field& f);
/// True for modes retained by the 2/3 rule.
bool dealias_keeps(const BoxGrid& grid, std::size_t flat);

/// Plane wave exp(i xi_n . x) / L^{d/2} for integer mode numbers n.
Field plane_wave(const BoxGrid& grid, const std::array<int, 3>& modes);

}  // namespace gpdf
