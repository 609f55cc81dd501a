#include "memstab/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace memstab {

namespace {

// Relative slack on grid coordinates before a lookup counts as out of range.
constexpr double kGridEps = 1e-9;

bool is_integer(double x) { return std::abs(x - std::round(x)) <= 1e-9 * std::max(1.0, x); }

long steps_of(double length, double dt) { return std::lround(length / dt); }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform in (0, 1) from the top 53 bits.
double to_open_unit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

void blend(std::span<const double> a, std::span<const double> b, double frac,
           std::span<double> out) {
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = a[n] + frac * (b[n] - a[n]);
}

double squared_norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

}  // namespace

void validate_sim_config(const SimConfig& cfg, const HeatModelSpec& m) {
  auto fail = [](const std::string& what) { throw std::invalid_argument(what); };
  if (!(cfg.dt > 0.0)) fail("sim.dt must be positive");
  if (!is_integer(1.0 / cfg.dt)) fail("sim.dt must divide the unit interval");
  if (!(cfg.T > 0.0)) fail("sim.T must be positive");
  if (!is_integer(cfg.T / cfg.dt)) fail("sim.T must be a multiple of sim.dt");
  if (cfg.n_paths < 1) fail("sim.n_paths must be at least 1");
  if (cfg.output_stride < 1) fail("sim.output_stride must be at least 1");
  if (m.n_modes < 1) fail("model.n_modes must be at least 1");
  const double n = static_cast<double>(m.n_modes);
  const double stiffness = cfg.dt * m.nu * n * n;
  if (stiffness > kMaxStiffness) {
    std::ostringstream msg;
    msg << "sim.dt too large for explicit stepping: dt * nu * n_modes^2 = " << stiffness
        << " exceeds " << kMaxStiffness;
    fail(msg.str());
  }
}

// ---------------------------------------------------------------------------
// HistoryBuffer

HistoryBuffer::HistoryBuffer(std::size_t n_modes, double dt, double r)
    : n_modes_(n_modes),
      dt_(dt),
      capacity_(static_cast<std::size_t>(std::ceil(r / dt - kGridEps)) + 2),
      data_(capacity_ * n_modes, 0.0) {
  if (!(dt > 0.0)) throw std::invalid_argument("history: dt must be positive");
  if (!(r >= 0.0)) throw std::invalid_argument("history: r must be nonnegative");
}

std::size_t HistoryBuffer::slot(long j) const {
  const long cap = static_cast<long>(capacity_);
  return static_cast<std::size_t>(((j % cap) + cap) % cap);
}

std::span<const double> HistoryBuffer::node(long j) const {
  if (j > now_ || j < oldest_index()) throw std::out_of_range("history: node outside window");
  return {data_.data() + slot(j) * n_modes_, n_modes_};
}

void HistoryBuffer::push(std::span<const double> state) {
  ++now_;
  std::copy(state.begin(), state.end(), data_.begin() + slot(now_) * n_modes_);
}

void HistoryBuffer::set_node(long j, std::span<const double> state) {
  if (j > now_ || j < oldest_index()) throw std::out_of_range("history: node outside window");
  std::copy(state.begin(), state.end(), data_.begin() + slot(j) * n_modes_);
}

void HistoryBuffer::lookup(double s, std::span<double> out) const { lookup_grid(s / dt_, out); }

void HistoryBuffer::lookup_lag(double lag, std::span<double> out) const {
  lookup_grid(static_cast<double>(now_) - lag / dt_, out);
}

void HistoryBuffer::lookup_grid(double u, std::span<double> out) const {
  const double lo_limit = static_cast<double>(oldest_index());
  const double hi_limit = static_cast<double>(now_);
  if (u < lo_limit - kGridEps || u > hi_limit + kGridEps) {
    std::ostringstream msg;
    msg << "history: lookup at grid position " << u << " outside [" << lo_limit << ", "
        << hi_limit << "]";
    throw std::out_of_range(msg.str());
  }
  u = std::clamp(u, lo_limit, hi_limit);
  const long j = static_cast<long>(std::floor(u));
  const double frac = u - static_cast<double>(j);
  if (j >= now_ || frac == 0.0) {
    const auto src = node(j);
    std::copy(src.begin(), src.end(), out.begin());
    return;
  }
  blend(node(j), node(j + 1), frac, out);
}

HistoryBuffer init_history(const HeatModelSpec& m, double dt) {
  HistoryBuffer hist(m.n_modes, dt, m.memory_horizon());
  std::vector<double> state(m.n_modes);
  for (long j = hist.oldest_index(); j <= 0; ++j) {
    m.phi.eval(static_cast<double>(j) * dt, state);
    hist.set_node(j, state);
  }
  return hist;
}

// ---------------------------------------------------------------------------
// Stepping

void em_step(std::span<const double> state, const HistoryBuffer& hist, double t, double dt,
             double dW, const HeatModelSpec& m, std::span<double> next) {
  const std::size_t n_modes = state.size();
  thread_local std::vector<double> delayed_drift;
  thread_local std::vector<double> delayed_noise;
  delayed_drift.resize(n_modes);
  delayed_noise.resize(n_modes);
  hist.lookup_lag(m.rho(t), delayed_drift);
  hist.lookup_lag(m.tau(t), delayed_noise);

  const double drift_gain = m.b1 + m.k1(t);
  const double noise_gain = m.b2 + m.k2(t);
  const double forcing = std::exp(-m.k * t);
  for (std::size_t i = 0; i < n_modes; ++i) {
    const double n = static_cast<double>(i + 1);
    const double drift =
        -m.nu * n * n * state[i] + drift_gain * delayed_drift[i] + forcing * m.p(i + 1);
    next[i] = state[i] + dt * drift + dW * noise_gain * delayed_noise[i];
  }
}

NormalStream::NormalStream(std::uint64_t master_seed, std::uint64_t path_index)
    : key_(splitmix64(splitmix64(master_seed) ^ path_index)) {}

double NormalStream::operator()(std::uint64_t k) const {
  // Box-Muller on the pair (2 floor(k/2), 2 floor(k/2) + 1); even draws take
  // the cosine branch, odd draws the sine branch.
  const std::uint64_t pair = k >> 1;
  const double u1 = to_open_unit(splitmix64(key_ ^ splitmix64(2 * pair)));
  const double u2 = to_open_unit(splitmix64(key_ ^ splitmix64(2 * pair + 1)));
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return radius * ((k & 1) ? std::sin(angle) : std::cos(angle));
}

std::span<const double> Trajectory::node(long j) const {
  if (j < first_index || j > last_index()) throw std::out_of_range("trajectory: node outside range");
  return {states.data() + static_cast<std::size_t>(j - first_index) * n_modes, n_modes};
}

void Trajectory::lookup_lag(long k, double lag, std::span<double> out) const {
  const double u = static_cast<double>(k) - lag / dt;
  const long j = static_cast<long>(std::floor(u));
  const double frac = u - static_cast<double>(j);
  if (j >= k || frac == 0.0) {
    const auto src = node(j);
    std::copy(src.begin(), src.end(), out.begin());
    return;
  }
  blend(node(j), node(j + 1), frac, out);
}

std::vector<double> brownian_increments(const SimConfig& cfg, std::uint64_t path_index) {
  const long n_steps = steps_of(cfg.T, cfg.dt);
  const NormalStream stream(cfg.master_seed, path_index);
  const double scale = std::sqrt(cfg.dt);
  std::vector<double> dW(static_cast<std::size_t>(n_steps));
  for (std::size_t k = 0; k < dW.size(); ++k) dW[k] = scale * stream(k);
  return dW;
}

PathRecord simulate_path_with_increments(const HeatModelSpec& m, const SimConfig& cfg,
                                         std::span<const double> increments) {
  validate_sim_config(cfg, m);
  const long n_steps = steps_of(cfg.T, cfg.dt);
  if (increments.size() < static_cast<std::size_t>(n_steps))
    throw std::invalid_argument("simulate: fewer Brownian increments than steps");
  const long steps_per_unit = steps_of(1.0, cfg.dt);
  const auto n_intervals = static_cast<std::size_t>(std::floor(cfg.T + 1e-9));

  HistoryBuffer hist = init_history(m, cfg.dt);
  PathRecord rec;
  rec.interval_sup.assign(n_intervals, 0.0);

  Trajectory traj;
  if (cfg.retain_states) {
    traj.dt = cfg.dt;
    traj.n_modes = m.n_modes;
    traj.first_index = hist.oldest_index();
    traj.states.reserve(static_cast<std::size_t>(n_steps - traj.first_index + 1) * m.n_modes);
    for (long j = traj.first_index; j <= 0; ++j) {
      const auto s = hist.node(j);
      traj.states.insert(traj.states.end(), s.begin(), s.end());
    }
    traj.increments.assign(increments.begin(), increments.begin() + n_steps);
  }

  auto observe = [&](long j, std::span<const double> state) {
    const double e = squared_norm(state);
    if (j % static_cast<long>(cfg.output_stride) == 0) {
      rec.times.push_back(static_cast<double>(j) * cfg.dt);
      rec.energy.push_back(e);
    }
    const long N = j / steps_per_unit;
    if (static_cast<std::size_t>(N) < n_intervals)
      rec.interval_sup[N] = std::max(rec.interval_sup[N], e);
    if (j % steps_per_unit == 0 && N >= 1 && static_cast<std::size_t>(N - 1) < n_intervals)
      rec.interval_sup[N - 1] = std::max(rec.interval_sup[N - 1], e);
  };

  std::vector<double> state(hist.current().begin(), hist.current().end());
  std::vector<double> next(m.n_modes);
  observe(0, state);
  for (long j = 0; j < n_steps; ++j) {
    const double t = static_cast<double>(j) * cfg.dt;
    em_step(state, hist, t, cfg.dt, increments[static_cast<std::size_t>(j)], m, next);
    hist.push(next);
    state.swap(next);
    observe(j + 1, state);
    if (cfg.retain_states) traj.states.insert(traj.states.end(), state.begin(), state.end());
  }
  if (cfg.retain_states) rec.trajectory = std::move(traj);
  return rec;
}

PathRecord simulate_path(const HeatModelSpec& m, const SimConfig& cfg, std::uint64_t path_index) {
  validate_sim_config(cfg, m);
  const auto dW = brownian_increments(cfg, path_index);
  return simulate_path_with_increments(m, cfg, dW);
}

MSCurve summarize(std::span<const PathRecord> records) {
  MSCurve curve;
  curve.n_paths = records.size();
  if (records.empty()) return curve;
  curve.times = records.front().times;
  const std::size_t n_times = curve.times.size();
  curve.mean.assign(n_times, 0.0);
  curve.half_width.assign(n_times, 0.0);
  const double n = static_cast<double>(records.size());
  for (const auto& rec : records) {
    for (std::size_t i = 0; i < n_times; ++i) curve.mean[i] += rec.energy[i];
  }
  for (auto& m : curve.mean) m /= n;
  if (records.size() < 2) return curve;
  for (std::size_t i = 0; i < n_times; ++i) {
    double ss = 0.0;
    for (const auto& rec : records) {
      const double d = rec.energy[i] - curve.mean[i];
      ss += d * d;
    }
    curve.half_width[i] = 1.96 * std::sqrt(ss / (n - 1.0) / n);
  }
  return curve;
}

MonteCarloResult run_monte_carlo(const HeatModelSpec& m, const SimConfig& cfg) {
  validate_sim_config(cfg, m);
  SimConfig path_cfg = cfg;
  path_cfg.retain_states = false;

  std::vector<PathRecord> records(cfg.n_paths);
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    try {
      for (std::size_t i = next++; i < records.size(); i = next++) {
        records[i] = simulate_path(m, path_cfg, i);
      }
    } catch (...) {
      next = records.size();
      const std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  };
  unsigned n_workers = cfg.workers != 0 ? cfg.workers : std::thread::hardware_concurrency();
  n_workers = std::max(1u, std::min<unsigned>(n_workers, static_cast<unsigned>(cfg.n_paths)));
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
  }
  if (error) std::rethrow_exception(error);

  MonteCarloResult out;
  out.curve = summarize(records);
  out.interval_sups.reserve(records.size());
  for (auto& rec : records) out.interval_sups.push_back(std::move(rec.interval_sup));
  return out;
}

}  // namespace memstab
