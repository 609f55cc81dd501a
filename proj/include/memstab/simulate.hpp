#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "memstab/model.hpp"

namespace memstab {

struct SimConfig {
  double dt = 1.0 / 1024.0;
  double T = 10.0;
  std::size_t n_paths = 200;
  std::uint64_t master_seed = 1;
  std::size_t output_stride = 16;  // record |X|^2 every k-th step
  unsigned workers = 0;            // 0: hardware concurrency
  bool retain_states = false;
};

/// Largest admissible dt * nu * n_modes^2. Explicit Euler on the stiffest
/// mode amplifies by |1 - dt nu n^2|, which this keeps at or below 1/2.
inline constexpr double kMaxStiffness = 1.5;

/// Throws std::invalid_argument when the step does not tile unit intervals
/// and the horizon, or when the stiffest retained mode is unstable.
void validate_sim_config(const SimConfig& cfg, const HeatModelSpec& m);

/// Trailing window of spectral states on the grid t_j = j * dt, covering at
/// least [t_now - r - dt, t_now]. Delayed states between nodes are linearly
/// interpolated.
class HistoryBuffer {
public:
  HistoryBuffer(std::size_t n_modes, double dt, double r);

  std::size_t n_modes() const { return n_modes_; }
  double dt() const { return dt_; }
  long now_index() const { return now_; }
  double t_now() const { return static_cast<double>(now_) * dt_; }
  long oldest_index() const { return now_ - static_cast<long>(capacity_) + 1; }
  /// Length of the window actually stored, r_buf >= r + dt.
  double span_covered() const { return static_cast<double>(capacity_ - 1) * dt_; }

  std::span<const double> node(long j) const;
  std::span<const double> current() const { return node(now_); }

  /// Appends the state at t_now + dt.
  void push(std::span<const double> state);
  /// Overwrites node j of the initial window; used while seeding.
  void set_node(long j, std::span<const double> state);

  /// State at absolute time s; throws std::out_of_range outside the window.
  void lookup(double s, std::span<double> out) const;
  /// State at t_now - lag, computed in grid units to avoid rounding drift.
  void lookup_lag(double lag, std::span<double> out) const;

private:
  void lookup_grid(double u, std::span<double> out) const;
  std::size_t slot(long j) const;

  std::size_t n_modes_;
  double dt_;
  std::size_t capacity_;
  long now_ = 0;
  std::vector<double> data_;
};

/// Buffer seeded with phi at every grid node of the initial window, t_now = 0.
HistoryBuffer init_history(const HeatModelSpec& m, double dt);

/// One Euler-Maruyama step of the Galerkin system from t to t + dt:
///   X_n+ = X_n + dt (-nu n^2 X_n + (b1 + k1(t)) X_n(t - rho(t)) + e^{-k t} p_n)
///          + dW (b2 + k2(t)) X_n(t - tau(t)).
/// A single Brownian increment drives every mode.
void em_step(std::span<const double> state, const HistoryBuffer& hist, double t, double dt,
             double dW, const HeatModelSpec& m, std::span<double> next);

/// Counter-based normal stream: the k-th draw depends only on
/// (master_seed, path_index, k).
class NormalStream {
public:
  NormalStream(std::uint64_t master_seed, std::uint64_t path_index);
  double operator()(std::uint64_t k) const;

private:
  std::uint64_t key_;
};

/// Full grid trajectory, kept when SimConfig::retain_states is set.
struct Trajectory {
  double dt = 0.0;
  std::size_t n_modes = 0;
  long first_index = 0;  // grid index of the oldest stored node (<= 0)
  std::vector<double> states;
  std::vector<double> increments;  // dW for the step starting at index k

  long last_index() const {
    return first_index + static_cast<long>(states.size() / n_modes) - 1;
  }
  std::span<const double> node(long j) const;
  /// Same interpolation as HistoryBuffer::lookup_lag, evaluated from node k.
  void lookup_lag(long k, double lag, std::span<double> out) const;
};

struct PathRecord {
  std::vector<double> times;
  std::vector<double> energy;         // |X(t)|^2 = sum_n X_n(t)^2
  std::vector<double> interval_sup;   // max over grid points of [N, N + 1]
  std::optional<Trajectory> trajectory;
};

/// Simulates one path driven by the stream for (cfg.master_seed, path_index).
PathRecord simulate_path(const HeatModelSpec& m, const SimConfig& cfg, std::uint64_t path_index);

/// Same scheme driven by caller-supplied Brownian increments, one per step.
PathRecord simulate_path_with_increments(const HeatModelSpec& m, const SimConfig& cfg,
                                         std::span<const double> increments);

/// Standard-normal draws scaled to Brownian increments for the given path.
std::vector<double> brownian_increments(const SimConfig& cfg, std::uint64_t path_index);

struct MSCurve {
  std::vector<double> times;
  std::vector<double> mean;
  std::vector<double> half_width;  // 95% normal-approximation half-width
  std::size_t n_paths = 0;
};

struct MonteCarloResult {
  MSCurve curve;
  std::vector<std::vector<double>> interval_sups;  // [path][N]
};

/// Independent paths evaluated on cfg.workers threads; reduction runs in path
/// order so the output does not depend on the worker count.
MonteCarloResult run_monte_carlo(const HeatModelSpec& m, const SimConfig& cfg);

/// Mean and confidence half-width of |X|^2 across already simulated paths.
MSCurve summarize(std::span<const PathRecord> records);

}  // namespace memstab
