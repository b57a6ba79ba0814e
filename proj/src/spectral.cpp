#include "gpdf/spectral.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "fft.hpp"
#include "gpdf/numerics.hpp"

namespace gpdf {
namespace {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

void require_same_grid(const BoxGrid& a, const BoxGrid& b) {
  if (!(a == b)) throw std::invalid_argument("fields live on different grids");
}

// Multiplies by (-1)^(i0+i1+i2) and a scale: the phase exp(i xi_n L/2) from
// the -L/2 grid offset.  Mode parity equals index parity because N is even,
// and with N = 2^p the axis parities are bits 0, p and 2p of the flat index.
void offset_phase_and_scale(std::vector<Complex>& data, const BoxGrid& grid, double scale) {
  int p = 0;
  while ((1 << p) < grid.points()) ++p;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t bits = i ^ (i >> p) ^ (i >> (2 * p));
    data[i] *= (bits & 1) ? -scale : scale;
  }
}

}  // namespace

BoxGrid::BoxGrid(int dimension, double extent, int points)
    : dimension_(dimension), extent_(extent), points_(points) {
  if (dimension < 1 || dimension > 3)
    throw std::invalid_argument("grid dimension must be 1, 2 or 3");
  if (!(extent > 0.0) || !std::isfinite(extent))
    throw std::invalid_argument("grid extent must be positive");
  if (!is_power_of_two(points) || points < 8)
    throw std::invalid_argument("points per axis must be a power of two >= 8");
  size_ = 1;
  for (int a = 0; a < dimension; ++a) size_ *= static_cast<std::size_t>(points);

  auto xi2 = std::make_shared<std::vector<double>>(size_);
  for (std::size_t f = 0; f < size_; ++f) {
    const Vec3 k = wavevector(f);
    (*xi2)[f] = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
  }
  xi2_ = std::move(xi2);
}

double BoxGrid::cell_volume() const { return std::pow(spacing(), dimension_); }

double BoxGrid::wavenumber(int i) const {
  return 2.0 * std::numbers::pi * mode_number(i) / extent_;
}

std::array<int, 3> BoxGrid::unravel(std::size_t flat) const {
  std::array<int, 3> idx{0, 0, 0};
  const auto n = static_cast<std::size_t>(points_);
  for (int a = dimension_ - 1; a >= 0; --a) {
    idx[a] = static_cast<int>(flat % n);
    flat /= n;
  }
  return idx;
}

std::size_t BoxGrid::ravel(const std::array<int, 3>& idx) const {
  std::size_t flat = 0;
  for (int a = 0; a < dimension_; ++a) flat = flat * points_ + static_cast<std::size_t>(idx[a]);
  return flat;
}

Vec3 BoxGrid::position(std::size_t flat) const {
  const auto idx = unravel(flat);
  Vec3 x{0, 0, 0};
  for (int a = 0; a < dimension_; ++a) x[a] = coordinate(idx[a]);
  return x;
}

Vec3 BoxGrid::wavevector(std::size_t flat) const {
  const auto idx = unravel(flat);
  Vec3 k{0, 0, 0};
  for (int a = 0; a < dimension_; ++a) k[a] = wavenumber(idx[a]);
  return k;
}

std::span<const double> BoxGrid::xi_squared() const { return *xi2_; }

double BoxGrid::nyquist() const { return std::numbers::pi / spacing(); }

// ---------------------------------------------------------------------------

Field::Field(BoxGrid grid, Space space)
    : grid_(std::move(grid)), samples_(grid_.size()), space_(space) {}

Field::Field(BoxGrid grid, std::vector<Complex> samples, Space space)
    : grid_(std::move(grid)), samples_(std::move(samples)), space_(space) {
  if (samples_.size() != grid_.size())
    throw std::invalid_argument("sample count " + std::to_string(samples_.size()) +
                                " does not match grid size " + std::to_string(grid_.size()));
}

Field Field::sample(const BoxGrid& grid, const std::function<Complex(const Vec3&)>& f) {
  Field out(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) out.samples_[i] = f(grid.position(i));
  return out;
}

Field& Field::operator+=(const Field& other) {
  require_same_grid(grid_, other.grid_);
  if (space_ != other.space_) throw std::invalid_argument("cannot add fields in different spaces");
  for (std::size_t i = 0; i < samples_.size(); ++i) samples_[i] += other.samples_[i];
  return *this;
}

Field& Field::operator-=(const Field& other) {
  require_same_grid(grid_, other.grid_);
  if (space_ != other.space_)
    throw std::invalid_argument("cannot subtract fields in different spaces");
  for (std::size_t i = 0; i < samples_.size(); ++i) samples_[i] -= other.samples_[i];
  return *this;
}

Field& Field::operator*=(Complex s) {
  for (auto& v : samples_) v *= s;
  return *this;
}

bool Field::all_finite() const {
  for (const auto& v : samples_)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  return true;
}

// ---------------------------------------------------------------------------

WaveFunction::WaveFunction(Field field)
    : field_(field.space() == Space::position ? std::move(field) : to_position(field)),
      l2_norm_(gpdf::l2_norm(field_)) {}

WaveFunction WaveFunction::normalized(Field field) {
  const double n = gpdf::l2_norm(field);
  if (!(n > 0.0)) throw std::invalid_argument("cannot normalize the zero field");
  field *= Complex(1.0 / n);
  return WaveFunction(std::move(field));
}

bool WaveFunction::is_normalized(double tol) const { return std::abs(l2_norm_ - 1.0) <= tol; }

// ---------------------------------------------------------------------------

Field transform(const Field& f, Direction direction) {
  const Space expected = direction == Direction::forward ? Space::position : Space::frequency;
  if (f.space() != expected)
    throw std::invalid_argument(direction == Direction::forward
                                    ? "forward transform needs a position-space field"
                                    : "inverse transform needs a frequency-space field");
  const BoxGrid& grid = f.grid();
  const int d = grid.dimension();
  std::vector<Complex> data(f.samples().begin(), f.samples().end());
  const double half_volume = std::pow(grid.extent(), 0.5 * d);

  if (direction == Direction::forward) {
    detail::fft_inplace(data, d, grid.points(), -1);
    offset_phase_and_scale(data, grid, grid.cell_volume() / half_volume);
    return Field(grid, std::move(data), Space::frequency);
  }
  offset_phase_and_scale(data, grid, 1.0 / half_volume);
  detail::fft_inplace(data, d, grid.points(), +1);
  return Field(grid, std::move(data), Space::position);
}

Field to_position(const Field& f) {
  return f.space() == Space::position ? f : transform(f, Direction::inverse);
}

Field to_frequency(const Field& f) {
  return f.space() == Space::frequency ? f : transform(f, Direction::forward);
}

Field apply_multiplier(const Field& f, std::span<const Complex> table) {
  if (table.size() != f.size())
    throw std::invalid_argument("multiplier table size does not match the grid");
  Field hat = to_frequency(f);
  auto s = hat.samples();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Complex m = table[i];
    if (!std::isfinite(m.real()) || !std::isfinite(m.imag()))
      throw std::domain_error("non-finite multiplier value");
    s[i] *= m;
  }
  return f.space() == Space::position ? to_position(hat) : hat;
}

Field apply_multiplier(const Field& f, const Symbol& symbol) {
  const BoxGrid& grid = f.grid();
  std::vector<Complex> table(grid.size());
  for (std::size_t i = 0; i < table.size(); ++i) table[i] = symbol(grid.wavevector(i));
  return apply_multiplier(f, table);
}

Field apply_radial_multiplier(const Field& f, const std::function<Complex(double)>& m) {
  const auto xi2 = f.grid().xi_squared();
  std::vector<Complex> table(xi2.size());
  for (std::size_t i = 0; i < table.size(); ++i) table[i] = m(xi2[i]);
  return apply_multiplier(f, table);
}

Field bessel_potential(const Field& f, double alpha) {
  if (alpha == 0.0) return f;
  return apply_radial_multiplier(f, [alpha](double k2) { return Complex(std::pow(1.0 + k2, 0.5 * alpha)); });
}

Field gradient_component(const Field& f, int axis) {
  const BoxGrid& grid = f.grid();
  if (axis < 0 || axis >= grid.dimension()) throw std::invalid_argument("gradient axis out of range");
  Field hat = to_frequency(f);
  auto s = hat.samples();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const int n = grid.unravel(i)[axis];
    // The Nyquist mode has no odd-symmetric partner; drop it for a real derivative.
    const double k = (grid.mode_number(n) == -grid.points() / 2) ? 0.0 : grid.wavenumber(n);
    s[i] *= Complex(0.0, k);
  }
  return to_position(hat);
}

// ---------------------------------------------------------------------------

double l2_norm(const Field& f) {
  CompensatedSum acc;
  for (const auto& v : f.samples()) acc += std::norm(v);
  const double weight = f.space() == Space::position ? f.grid().cell_volume() : 1.0;
  return std::sqrt(acc.value() * weight);
}

double l4_norm(const Field& f) {
  const Field x = to_position(f);
  CompensatedSum acc;
  for (const auto& v : x.samples()) {
    const double r = std::norm(v);
    acc += r * r;
  }
  return std::pow(acc.value() * x.grid().cell_volume(), 0.25);
}

double h_alpha_norm(const Field& f, double alpha) {
  if (alpha == 0.0) return l2_norm(f);
  const Field hat = to_frequency(f);
  const auto xi2 = hat.grid().xi_squared();
  CompensatedSum acc;
  const auto s = hat.samples();
  for (std::size_t i = 0; i < s.size(); ++i) acc += std::pow(1.0 + xi2[i], alpha) * std::norm(s[i]);
  return std::sqrt(acc.value());
}

double h1_norm(const Field& f) {
  const Field hat = to_frequency(f);
  const auto xi2 = hat.grid().xi_squared();
  CompensatedSum acc;
  const auto s = hat.samples();
  for (std::size_t i = 0; i < s.size(); ++i) acc += (1.0 + xi2[i]) * std::norm(s[i]);
  return std::sqrt(acc.value());
}

double hdot1_norm(const Field& f) {
  const Field hat = to_frequency(f);
  const auto xi2 = hat.grid().xi_squared();
  CompensatedSum acc;
  const auto s = hat.samples();
  for (std::size_t i = 0; i < s.size(); ++i) acc += xi2[i] * std::norm(s[i]);
  return std::sqrt(acc.value());
}

double x_moment_norm(const Field& f) {
  const Field x = to_position(f);
  const BoxGrid& grid = x.grid();
  CompensatedSum acc;
  const auto s = x.samples();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Vec3 p = grid.position(i);
    acc += (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) * std::norm(s[i]);
  }
  return std::sqrt(acc.value() * grid.cell_volume());
}

double norm(const Field& f, NormKind kind, double alpha) {
  switch (kind) {
    case NormKind::L2: return l2_norm(f);
    case NormKind::L4: return l4_norm(f);
    case NormKind::Hdot1: return hdot1_norm(f);
    case NormKind::H_alpha: return h_alpha_norm(f, alpha);
    case NormKind::weighted_x: return x_moment_norm(f);
  }
  throw std::invalid_argument("unknown norm kind");
}

Complex inner_product(const Field& f, const Field& g) {
  require_same_grid(f.grid(), g.grid());
  const Field other = f.space() == Space::position ? to_position(g) : to_frequency(g);
  const auto a = f.samples();
  const auto b = other.samples();
  CompensatedSum re, im;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Complex p = std::conj(a[i]) * b[i];
    re += p.real();
    im += p.imag();
  }
  const double weight = f.space() == Space::position ? f.grid().cell_volume() : 1.0;
  return Complex(re.value(), im.value()) * weight;
}

bool dealias_keeps(const BoxGrid& grid, std::size_t flat) {
  const auto idx = grid.unravel(flat);
  const int cutoff = grid.points() / 3;
  for (int a = 0; a < grid.dimension(); ++a)
    if (std::abs(grid.mode_number(idx[a])) > cutoff) return false;
  return true;
}

double dealias_tail_fraction(const Field& f) {
  const Field hat = to_frequency(f);
  const auto xi2 = hat.grid().xi_squared();
  CompensatedSum total, tail;
  const auto s = hat.samples();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double w = (1.0 + xi2[i]) * std::norm(s[i]);
    total += w;
    if (!dealias_keeps(hat.grid(), i)) tail += w;
  }
  return total.value() > 0.0 ? tail.value() / total.value() : 0.0;
}

Field dealias(const Field& f) {
  Field hat = to_frequency(f);
  auto s = hat.samples();
  for (std::size_t i = 0; i < s.size(); ++i)
    if (!dealias_keeps(hat.grid(), i)) s[i] = 0.0;
  return f.space() == Space::position ? to_position(hat) : hat;
}

Field plane_wave(const BoxGrid& grid, const std::array<int, 3>& modes) {
  Vec3 k{0, 0, 0};
  for (int a = 0; a < grid.dimension(); ++a)
    k[a] = 2.0 * std::numbers::pi * modes[a] / grid.extent();
  const double amp = 1.0 / std::pow(grid.extent(), 0.5 * grid.dimension());
  return Field::sample(grid, [&](const Vec3& x) {
    return amp * std::exp(Complex(0.0, k[0] * x[0] + k[1] * x[1] + k[2] * x[2]));
  });
}

}  // namespace gpdf
