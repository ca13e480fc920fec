#pragma once

#include <type_traits>
#include <vector>

namespace delaycomp {

/// Gauss-Legendre rule on [-1, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  int size() const { return static_cast<int>(nodes.size()); }
};

/// Nodes and weights of the n-point rule (n >= 1), computed by Newton
/// iteration on the Legendre recurrence.
GaussRule gauss_legendre(int n);

/// int_a^b f using `rule` mapped onto [a, b].
template <typename F>
auto integrate(const GaussRule& rule, double a, double b, F&& f) {
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  using R = std::decay_t<decltype(f(mid))>;
  R acc = f(mid + half * rule.nodes[0]);
  acc *= half * rule.weights[0];
  for (int q = 1; q < rule.size(); ++q) acc += f(mid + half * rule.nodes[q]) * (half * rule.weights[q]);
  return acc;
}

}  // namespace delaycomp
