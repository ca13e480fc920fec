#include "delaycomp/history.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace delaycomp {

InputHistory::InputHistory(double delay, double dt, std::function<double(double)> initial_profile,
                           int quadrature_points)
    : delay_(delay), dt_(dt), profile_(std::move(initial_profile)),
      rule_(gauss_legendre(quadrature_points)) {
  if (!(delay > 0.0) || !(dt > 0.0)) throw DomainError("InputHistory: delay and dt must be positive");
  const double ratio = delay / dt;
  steps_ = static_cast<int>(std::lround(ratio));
  if (steps_ < 1 || std::abs(ratio - steps_) > 1e-9 * ratio) {
    throw DomainError("InputHistory: delay must be an integer multiple of dt");
  }
  if (!profile_) profile_ = [](double) { return 0.0; };
  ring_.assign(static_cast<std::size_t>(steps_) + 1, 0.0);
}

double InputHistory::now() const {
  if (count_ == 0) throw HistoryError("InputHistory: no samples recorded yet");
  return static_cast<double>(count_ - 1) * dt_;
}

void InputHistory::push(double u) {
  ring_[count_ % ring_.size()] = u;
  ++count_;
}

void InputHistory::set_latest(double u) {
  if (count_ == 0) throw HistoryError("InputHistory: no sample to overwrite");
  ring_[(count_ - 1) % ring_.size()] = u;
}

double InputHistory::sample(long k) const {
  const long newest = static_cast<long>(count_) - 1;
  if (k < 0 || k > newest || newest - k >= static_cast<long>(ring_.size())) {
    throw HistoryError("InputHistory: sample " + std::to_string(k) + " is outside the window");
  }
  return ring_[static_cast<std::size_t>(k) % ring_.size()];
}

double InputHistory::at(double s) const {
  const double t_now = now();
  const double eps = 1e-9 * dt_;
  if (s < t_now - delay_ - eps || s > t_now + eps) {
    throw HistoryError("InputHistory: time " + std::to_string(s) + " outside the window");
  }
  if (s < 0.0) return profile_(s + delay_);
  const long newest = static_cast<long>(count_) - 1;
  long k = static_cast<long>(std::floor(s / dt_ + 1e-9));
  if (k >= newest) return sample(newest);
  const double xi = std::clamp(s / dt_ - static_cast<double>(k), 0.0, 1.0);
  return (1.0 - xi) * sample(k) + xi * sample(k + 1);
}

double InputHistory::interval_mean(long j) const {
  if (j < 0) {
    // Profile region: midpoint value, consistent with the midpoint rule.
    return profile_((static_cast<double>(j) + 0.5) * dt_ + delay_);
  }
  return 0.5 * (sample(j) + sample(j + 1));
}

std::vector<double> InputHistory::quadrature_points() const {
  std::vector<double> pts;
  pts.reserve(static_cast<std::size_t>(steps_ * rule_.size()));
  for (int i = 0; i < steps_; ++i) {
    for (int q = 0; q < rule_.size(); ++q) {
      pts.push_back(i * dt_ + dt_ * 0.5 * (1.0 + rule_.nodes[static_cast<std::size_t>(q)]));
    }
  }
  return pts;
}

}  // namespace delaycomp
