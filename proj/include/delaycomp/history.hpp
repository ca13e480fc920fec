#pragma once

#include <cstddef>
#include <functional>
#include <type_traits>
#include <utility>
#include <vector>

#include "delaycomp/errors.hpp"
#include "delaycomp/quadrature.hpp"

namespace delaycomp {

/// Trailing window of the applied input U on a uniform grid t_k = k dt, used
/// to evaluate the exact transport state u(zeta, t) = U(t - D + zeta).
///
/// Before t = 0 the input is given by the initial transport profile:
/// U(s) = u0(s + D) for s in [-D, 0). The grid sample U(0) belongs to the
/// controller, so the window may jump at s = 0; intervals left of it are read
/// from the profile, intervals right of it are linear between samples.
class InputHistory {
 public:
  InputHistory(double delay, double dt, std::function<double(double)> initial_profile,
               int quadrature_points = 4);

  double delay() const { return delay_; }
  double dt() const { return dt_; }
  /// D / dt.
  int steps_per_delay() const { return steps_; }
  /// Number of samples pushed so far.
  std::size_t count() const { return count_; }
  /// Time of the latest sample; HistoryError when empty.
  double now() const;

  /// Appends U(t_k) for k = count().
  void push(double u);
  /// Overwrites the latest sample.
  void set_latest(double u);

  /// U(s) for s in [now - D, now]; right-continuous at s = 0.
  double at(double s) const;
  /// U averaged over grid interval [t_j, t_j + dt], j may be negative.
  double interval_mean(long j) const;

  /// int_0^D weight(zeta) u(zeta, now) dzeta by Gauss quadrature on every
  /// grid interval of the window. `weight` may return a scalar or an Eigen
  /// vector.
  template <typename W>
  auto integrate(W&& weight) const;

  /// int_0^D weight(zeta) u(zeta, now) dzeta given pre-tabulated weight values
  /// at the quadrature points (see quadrature_points()).
  template <typename R>
  R integrate_tabulated(const std::vector<R>& weights) const;

  /// Calls visit(index, zeta, quadrature_weight, u(zeta, now)) for every
  /// quadrature point of the window, in increasing zeta.
  template <typename F>
  void for_each_point(F&& visit) const;

  /// Positions in [0, D] of all quadrature points, interval by interval.
  std::vector<double> quadrature_points() const;
  const GaussRule& rule() const { return rule_; }

 private:
  double sample(long k) const;  // U(t_k), k >= 0 and retained
  bool in_profile(long j) const { return j < 0; }

  double delay_;
  double dt_;
  int steps_;
  std::function<double(double)> profile_;
  GaussRule rule_;
  std::vector<double> ring_;
  std::size_t count_ = 0;
};

template <typename F>
void InputHistory::for_each_point(F&& visit) const {
  const double t_now = now();
  const long k_now = static_cast<long>(count_) - 1;
  const double half = 0.5 * dt_;
  std::size_t idx = 0;
  for (int i = 0; i < steps_; ++i) {
    const long j = k_now - steps_ + i;  // grid interval [t_j, t_{j+1}] in absolute time
    const double z0 = i * dt_;
    for (int q = 0; q < rule_.size(); ++q, ++idx) {
      const auto qs = static_cast<std::size_t>(q);
      const double local = 0.5 * (1.0 + rule_.nodes[qs]);
      const double zeta = z0 + dt_ * local;
      const double u = in_profile(j) ? profile_(t_now + zeta)
                                     : (1.0 - local) * sample(j) + local * sample(j + 1);
      visit(idx, zeta, half * rule_.weights[qs], u);
    }
  }
}

template <typename W>
auto InputHistory::integrate(W&& weight) const {
  using R = std::decay_t<decltype(weight(0.0))>;
  R acc = weight(0.0);
  acc *= 0.0;
  for_each_point([&](std::size_t, double zeta, double w, double u) { acc += weight(zeta) * (w * u); });
  return acc;
}

template <typename R>
R InputHistory::integrate_tabulated(const std::vector<R>& weights) const {
  const auto per = static_cast<std::size_t>(rule_.size());
  if (weights.size() != per * static_cast<std::size_t>(steps_)) {
    throw DimensionError("integrate_tabulated: weight table does not match the window");
  }
  R acc = weights.front();
  acc *= 0.0;
  for_each_point([&](std::size_t idx, double, double w, double u) { acc += weights[idx] * (w * u); });
  return acc;
}

}  // namespace delaycomp
