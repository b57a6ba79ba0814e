#include "gpdf/scattering.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "gpdf/csv.hpp"
#include "gpdf/hierarchy.hpp"
#include "gpdf/numerics.hpp"

namespace gpdf {

WaveFunction pullback(const WaveFunction& phi_t, double t) {
  if (t == 0.0) return phi_t;
  return free_propagate(phi_t, -t);
}

void ScatteringConfig::validate() const {
  if (lambda != 1.0) throw std::invalid_argument("scattering runs need lambda = +1");
  if (!(t_max > 0.0) || !std::isfinite(t_max)) throw std::invalid_argument("t_max must be positive");
  if (levels < 1 || levels > 20) throw std::invalid_argument("levels must lie in [1, 20]");
  if (!(dt > 0.0) || dt > t_max / std::ldexp(1.0, levels))
    throw std::invalid_argument("dt must be positive and no larger than the first check time");
}

std::size_t ScatteringRun::index_of(double t) const {
  for (std::size_t i = 0; i < check_times.size(); ++i)
    if (std::abs(check_times[i] - t) <= 1e-12 * std::max(1.0, std::abs(t))) return i;
  throw std::out_of_range("time " + format_double(t) + " is not a check time");
}

int ScatteringRun::decreasing_levels() const {
  int n = 0;
  for (std::size_t i = cauchy.size(); i-- > 2;) {
    if (cauchy[i].increment < cauchy[i - 1].increment)
      ++n;
    else
      break;
  }
  return n;
}

namespace {

// H1 mass per mode, FFT ordered
std::vector<double> h1_density(const Field& f) {
  const Field hat = to_frequency(f);
  const auto xi2 = f.grid().xi_squared();
  std::vector<double> w(hat.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = (1.0 + xi2[i]) * std::norm(hat[i]);
  return w;
}

}  // namespace

double significant_frequency(const Field& f, double share) {
  if (!(share > 0.0 && share <= 1.0)) throw std::invalid_argument("share must lie in (0, 1]");
  const auto w = h1_density(f);
  const auto xi2 = f.grid().xi_squared();
  std::vector<std::size_t> order(w.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xi2[a] < xi2[b]; });
  CompensatedSum total;
  for (double v : w) total += v;
  if (!(total.value() > 0.0)) return 0.0;
  const double target = share * total.value();
  CompensatedSum acc;
  for (std::size_t i = 0; i < order.size(); ++i) {
    acc += w[order[i]];
    // close a shell of equal |xi| before testing
    if (i + 1 < order.size() && xi2[order[i + 1]] == xi2[order[i]]) continue;
    if (acc.value() >= target) return std::sqrt(xi2[order[i]]);
  }
  return std::sqrt(xi2[order.back()]);
}

double wraparound_limit(const WaveFunction& phi) {
  const double xi = significant_frequency(phi.field());
  if (xi == 0.0) return std::numeric_limits<double>::infinity();
  return phi.grid().extent() / (4.0 * xi);
}

ScatteringRun extract_scattering_state(const WaveFunction& phi, const ScatteringConfig& cfg) {
  cfg.validate();
  const double limit = wraparound_limit(phi);
  if (cfg.enforce_window && cfg.t_max > limit)
    throw std::invalid_argument("t_max " + format_double(cfg.t_max) + " exceeds the wraparound window " +
                                format_double(limit));

  SolverConfig sc;
  sc.lambda = cfg.lambda;
  sc.dt_init = cfg.dt;
  sc.policy = StepPolicy::fixed;
  sc.t_max = cfg.t_max;
  sc.dealias = cfg.dealias;
  sc.nonlinear = cfg.nonlinear;
  // steps land on multiples of the snapshot interval, hence on every check time
  const double first = cfg.t_max / std::ldexp(1.0, cfg.levels);
  sc.snapshot_interval = first;

  std::vector<double> check;
  for (int i = cfg.levels; i >= 0; --i) check.push_back(cfg.t_max / std::ldexp(1.0, i));

  std::vector<WaveFunction> pulled;
  std::size_t next = 0;
  auto observer = [&](double t, const WaveFunction& s) {
    if (next < check.size() && std::abs(t - check[next]) <= 1e-9 * first) {
      pulled.push_back(pullback(s, t));
      ++next;
    }
  };
  const Trajectory traj = evolve(phi, sc, {observer});
  if (traj.termination != Termination::completed)
    throw std::runtime_error("scattering run stopped early: " + to_string(traj.termination));
  if (pulled.size() != check.size()) throw std::logic_error("solver missed a check time");

  ScatteringRun run(pulled.back());
  run.lambda = cfg.lambda;
  run.check_times = check;
  run.pullbacks = std::move(pulled);
  run.termination = traj.termination;
  run.steps = traj.steps;
  run.window_limit = limit;

  const Field* prev = &phi.field();
  for (std::size_t i = 0; i < run.check_times.size(); ++i) {
    const Field& cur = run.pullbacks[i].field();
    run.cauchy.push_back({run.check_times[i], h1_norm(cur - *prev)});
    prev = &cur;
  }
  run.residual_estimate = run.cauchy.back().increment;

  const auto w = h1_density(phi.field());
  const auto xi2 = phi.grid().xi_squared();
  const double cut = phi.grid().extent() / (4.0 * cfg.t_max);
  CompensatedSum all, out;
  for (std::size_t i = 0; i < w.size(); ++i) {
    all += w[i];
    if (xi2[i] > cut * cut) out += w[i];
  }
  run.wrapped_fraction = all.value() > 0.0 ? out.value() / all.value() : 0.0;
  return run;
}

std::vector<ScatteringRun> scatter_atoms(const AtomicMeasure& mu, const ScatteringConfig& cfg, int threads) {
  for (const auto& a : mu.atoms())
    if (!a.state) throw std::invalid_argument("scattering needs grid atoms");
  const std::size_t n = mu.size();
  std::vector<std::optional<ScatteringRun>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> cursor{0};
  auto worker = [&] {
    for (std::size_t i; (i = cursor.fetch_add(1)) < n;) {
      try {
        slots[i].emplace(extract_scattering_state(*mu.atoms()[i].state, cfg));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int count = std::clamp<int>(threads, 1, static_cast<int>(std::max<std::size_t>(n, 1)));
  std::vector<std::thread> pool;
  for (int t = 1; t < count; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<ScatteringRun> runs;
  for (auto& s : slots) runs.push_back(std::move(*s));
  return runs;
}

namespace {

void check_runs(const AtomicMeasure& mu, std::span<const ScatteringRun> runs) {
  if (runs.size() != mu.size()) throw std::invalid_argument("one scattering run per atom is required");
  for (const auto& r : runs)
    if (r.check_times != runs.front().check_times)
      throw std::invalid_argument("scattering runs do not share a time grid");
}

}  // namespace

double hierarchy_scatter_diag(const AtomicMeasure& mu, std::span<const ScatteringRun> runs, int k, double t,
                              DiagMode mode) {
  check_runs(mu, runs);
  if (k < 1 || k > 12) throw std::invalid_argument("k must lie in [1, 12]");
  CompensatedSum total;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& run = runs[i];
    const Field& u = run.pullbacks[run.index_of(t)].field();
    const Field& plus = run.phi_plus.field();
    const double d = mode == DiagMode::exact ? rank_one_diff_trace_norm(u, plus, k, 1.0).value
                                             : telescoping_bound(u, plus, k, 1.0);
    total += mu.atoms()[i].weight * d;
  }
  return total.value();
}

AtomicMeasure asymptotic_measure(const AtomicMeasure& mu, std::span<const ScatteringRun> runs) {
  check_runs(mu, runs);
  std::vector<Atom> atoms;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    Atom a = mu.atoms()[i];
    a.state = std::make_shared<const WaveFunction>(runs[i].phi_plus);
    a.profile.reset();
    a.norms = norms_of(a.state->field());
    a.shell = std::abs(a.norms.l2 - 1.0) <= 1e-10 ? classify_shell(a.norms.hdot1) : -1;
    atoms.push_back(std::move(a));
  }
  return mu.with_atoms(std::move(atoms));
}

std::vector<ScatteringRow> scattering_table(const AtomicMeasure& mu, std::span<const ScatteringRun> runs) {
  check_runs(mu, runs);
  std::vector<ScatteringRow> rows;
  if (runs.empty()) return rows;
  for (std::size_t c = 0; c < runs.front().check_times.size(); ++c) {
    ScatteringRow row;
    row.t = runs.front().check_times[c];
    CompensatedSum inc;
    for (std::size_t i = 0; i < runs.size(); ++i) inc += mu.atoms()[i].weight * runs[i].cauchy[c].increment;
    row.increment = inc.value();
    row.D1 = hierarchy_scatter_diag(mu, runs, 1, row.t);
    row.D2 = hierarchy_scatter_diag(mu, runs, 2, row.t);
    row.D3 = hierarchy_scatter_diag(mu, runs, 3, row.t);
    row.bound_D3 = hierarchy_scatter_diag(mu, runs, 3, row.t, DiagMode::bound);
    rows.push_back(row);
  }
  return rows;
}

void write_scattering_csv(std::ostream& out, std::span<const ScatteringRow> rows) {
  CsvWriter w(out, {"t", "H1_pullback_increment", "D_1", "D_2", "D_3", "bound_D_3"});
  for (const auto& r : rows) w.row({r.t, r.increment, r.D1, r.D2, r.D3, r.bound_D3});
}

}  // namespace gpdf
