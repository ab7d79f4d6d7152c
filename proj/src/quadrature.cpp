#include "riskmmse/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>

#include "riskmmse/error.hpp"

namespace riskmmse::quad {

namespace {

Rule compute_rule(int n) {
  Rule r;
  r.nodes.resize(static_cast<std::size_t>(n));
  r.weights.resize(static_cast<std::size_t>(n));
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double step = p0 / dp;
      z -= step;
      if (std::abs(step) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    r.nodes[static_cast<std::size_t>(i)] = -z;
    r.nodes[static_cast<std::size_t>(n - 1 - i)] = z;
    r.weights[static_cast<std::size_t>(i)] = w;
    r.weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
  return r;
}

bool is_bad(double v) { return std::isnan(v); }

double safe_eval(const LogDensity& f, std::span<const double> u) {
  const double v = f(u);
  return is_bad(v) ? -std::numeric_limits<double>::infinity() : v;
}

int scan_points(std::size_t dims) {
  switch (dims) {
    case 1: return 65;
    case 2: return 33;
    default: return 13;
  }
}

struct ScanResult {
  std::vector<int> index;
  std::vector<double> point;
  double value = -std::numeric_limits<double>::infinity();
};

// Lexicographic scan of an S^d grid; first maximum wins.
ScanResult scan(const LogDensity& f, const std::vector<Interval>& box, int S) {
  const std::size_t d = box.size();
  ScanResult best;
  std::vector<int> idx(d, 0);
  std::vector<int> count(d);
  for (std::size_t k = 0; k < d; ++k) count[k] = box[k].width() > 0 ? S : 1;
  std::vector<double> u(d);
  while (true) {
    for (std::size_t k = 0; k < d; ++k)
      u[k] = count[k] > 1 ? box[k].lo + box[k].width() * idx[k] / (S - 1) : box[k].lo;
    const double v = safe_eval(f, u);
    if (v > best.value) {
      best.value = v;
      best.index = idx;
      best.point = u;
    }
    std::size_t k = 0;
    while (k < d && ++idx[k] == count[k]) idx[k++] = 0;
    if (k == d) break;
  }
  return best;
}

// Maximum of f over a face of the box (dimension k pinned at `at`).
double face_max(const LogDensity& f, const std::vector<Interval>& box, std::size_t k, double at, int S) {
  std::vector<Interval> face = box;
  face[k] = {at, at};
  return scan(f, face, S).value;
}

// Moves outward from `mode` along dimension k in direction `dir` until f drops
// below `threshold`, then bisects the crossing.
double axis_crossing(const LogDensity& f, std::vector<double> point, std::size_t k, double dir, double step,
                     double threshold) {
  const double origin = point[k];
  double inside = origin;
  double outside = origin + dir * step;
  for (int it = 0;; ++it) {
    point[k] = outside;
    if (safe_eval(f, point) <= threshold) break;
    if (it > 60 || !std::isfinite(outside))
      throw Error(ErrorCode::QuadratureNotConverged, "posterior tail does not decay within the search range");
    inside = outside;
    step *= 2.0;
    outside = origin + dir * step;
  }
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (inside + outside);
    point[k] = mid;
    if (safe_eval(f, point) > threshold)
      inside = mid;
    else
      outside = mid;
  }
  return outside;
}

}  // namespace

const Rule& gauss_legendre(int n) {
  static std::mutex mu;
  static std::map<int, Rule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, compute_rule(n)).first;
  return it->second;
}

void composite(const Interval& iv, int total_nodes, std::vector<double>& x, std::vector<double>& w) {
  const Rule& rule = gauss_legendre(kPanelOrder);
  const int panels = std::max(1, (total_nodes + kPanelOrder - 1) / kPanelOrder);
  const double h = iv.width() / panels;
  for (int p = 0; p < panels; ++p) {
    const double a = iv.lo + h * p;
    const double mid = a + 0.5 * h;
    for (int i = 0; i < kPanelOrder; ++i) {
      x.push_back(mid + 0.5 * h * rule.nodes[static_cast<std::size_t>(i)]);
      w.push_back(0.5 * h * rule.weights[static_cast<std::size_t>(i)]);
    }
  }
}

void composite_with_breaks(const Interval& iv, std::span<const double> breaks, int total_nodes,
                           std::vector<double>& x, std::vector<double>& w) {
  std::vector<double> edges{iv.lo};
  for (double b : breaks)
    if (b > iv.lo && b < iv.hi) edges.push_back(b);
  edges.push_back(iv.hi);
  std::sort(edges.begin(), edges.end());
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    const double frac = (edges[i + 1] - edges[i]) / iv.width();
    const int n = std::max(kPanelOrder, static_cast<int>(std::lround(frac * total_nodes)));
    composite({edges[i], edges[i + 1]}, n, x, w);
  }
}

BoxSearch find_box(const LogDensity& f, std::vector<Interval> box, double log_drop) {
  const std::size_t d = box.size();
  const int S = scan_points(d);

  ScanResult best;
  bool located = false;
  for (int round = 0; round < 80 && !located; ++round) {
    best = scan(f, box, S);
    if (!std::isfinite(best.value)) {
      if (best.value == std::numeric_limits<double>::infinity())
        throw Error(ErrorCode::QuadratureNotConverged, "log-density is +inf");
      if (round >= 8) throw Error(ErrorCode::ZeroPosteriorMass, "posterior density vanishes on the search region");
      for (auto& iv : box) {
        const double c = 0.5 * (iv.lo + iv.hi), hw = iv.width();
        iv = {c - 2.0 * hw, c + 2.0 * hw};
      }
      continue;
    }
    located = true;
    for (std::size_t k = 0; k < d; ++k) {
      const double wdt = box[k].width();
      if (best.index[k] == 0) {
        box[k].lo -= wdt;
        located = false;
      } else if (best.index[k] == S - 1) {
        box[k].hi += wdt;
        located = false;
      }
    }
  }
  if (!located) throw Error(ErrorCode::QuadratureNotConverged, "could not locate the posterior mode");

  // Zoom in on the mode to pin the peak value.
  std::vector<double> spacing(d);
  for (std::size_t k = 0; k < d; ++k) spacing[k] = box[k].width() / (S - 1);
  std::vector<double> mode = best.point;
  double peak = best.value;
  std::vector<double> h = spacing;
  for (int z = 0; z < 4; ++z) {
    std::vector<Interval> local(d);
    for (std::size_t k = 0; k < d; ++k) local[k] = {mode[k] - 2.0 * h[k], mode[k] + 2.0 * h[k]};
    const ScanResult r = scan(f, local, S);
    if (r.value > peak) {
      peak = r.value;
      mode = r.point;
    }
    for (auto& hk : h) hk *= 4.0 / (S - 1);
  }

  const double threshold = peak - log_drop;
  std::vector<Interval> out(d);
  for (std::size_t k = 0; k < d; ++k) {
    out[k].lo = axis_crossing(f, mode, k, -1.0, spacing[k], threshold);
    out[k].hi = axis_crossing(f, mode, k, +1.0, spacing[k], threshold);
  }

  if (d > 1) {
    for (int round = 0; round < 200; ++round) {
      bool moved = false;
      for (std::size_t k = 0; k < d; ++k) {
        const double wdt = out[k].width();
        if (face_max(f, out, k, out[k].lo, S) > threshold) {
          out[k].lo -= 0.25 * wdt;
          moved = true;
        }
        if (face_max(f, out, k, out[k].hi, S) > threshold) {
          out[k].hi += 0.25 * wdt;
          moved = true;
        }
      }
      if (!moved) return {out, mode, peak};
    }
    throw Error(ErrorCode::QuadratureNotConverged, "truncation box did not stabilize");
  }
  return {out, mode, peak};
}

}  // namespace riskmmse::quad
