#pragma once

#include <functional>
#include <span>
#include <vector>

namespace riskmmse::quad {

/// Points per Gauss-Legendre panel in the composite rules below.
inline constexpr int kPanelOrder = 16;

struct Rule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule (Newton iteration on P_n), cached per n.
const Rule& gauss_legendre(int n);

struct Interval {
  double lo;
  double hi;

  double width() const { return hi - lo; }
};

/// Composite Gauss-Legendre nodes on [lo, hi]: ceil(total_nodes / kPanelOrder)
/// equal panels, kPanelOrder points each. Appends to x and w.
void composite(const Interval& iv, int total_nodes, std::vector<double>& x, std::vector<double>& w);

/// Same as composite() but with panel edges forced at every breakpoint that
/// falls strictly inside the interval; nodes are split across pieces by length.
void composite_with_breaks(const Interval& iv, std::span<const double> breaks, int total_nodes,
                           std::vector<double>& x, std::vector<double>& w);

using LogDensity = std::function<double(std::span<const double>)>;

struct BoxSearch {
  std::vector<Interval> box;
  std::vector<double> mode;
  double log_peak;
};

/// Truncation box for an unnormalized log-density: locate the mode with a
/// coarse scan (growing the initial box while the maximum sits on its edge),
/// then move every face outward until the density on it is below
/// exp(-log_drop) of the peak. Throws ZeroPosteriorMass when the density is
/// zero everywhere scanned and QuadratureNotConverged when the tails never
/// drop below the threshold.
BoxSearch find_box(const LogDensity& log_density, std::vector<Interval> initial, double log_drop);

}  // namespace riskmmse::quad
