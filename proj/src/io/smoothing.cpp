#include "borrow/io/smoothing.hpp"

#include "borrow/errors.hpp"
#include "borrow/influence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

namespace borrow::io {

SmoothedGrid nadaraya_watson_grid(std::span<const SmoothPoint> points, double hx, double hy, const GridAxes& grid) {
  if (points.empty()) throw EmptySet("no points to smooth");
  if (!(hx > 0.0) || !(hy > 0.0)) throw DimensionError("bandwidths must be positive");
  std::vector<SmoothPoint> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end(), [](const SmoothPoint& a, const SmoothPoint& b) {
    return std::tie(a.x, a.y, a.value) < std::tie(b.x, b.y, b.value);
  });
  SmoothedGrid out;
  out.axes = grid;
  out.hx = hx;
  out.hy = hy;
  const auto nx = static_cast<Eigen::Index>(grid.xs.size());
  const auto ny = static_cast<Eigen::Index>(grid.ys.size());
  out.values.resize(ny, nx);
  for (Eigen::Index r = 0; r < ny; ++r) {
    for (Eigen::Index c = 0; c < nx; ++c) {
      double mass = 0.0, total = 0.0;
      for (const auto& p : sorted) {
        const double u = (grid.xs[c] - p.x) / hx;
        const double v = (grid.ys[r] - p.y) / hy;
        // Normalizing constants cancel in the ratio but keep the mass threshold meaningful.
        const double k = std::exp(-0.5 * (u * u + v * v)) / (2.0 * M_PI * hx * hy);
        mass += k;
        total += k * p.value;
      }
      out.values(r, c) = mass < 1e-12 ? std::numeric_limits<double>::quiet_NaN() : total / mass;
    }
  }
  return out;
}

GridAxes data_range_grid(std::span<const SmoothPoint> points, int nx, int ny) {
  if (points.empty()) throw EmptySet("no points to smooth");
  if (nx < 1 || ny < 1) throw DimensionError("grid needs at least one node per axis");
  double x0 = points[0].x, x1 = x0, y0 = points[0].y, y1 = y0;
  for (const auto& p : points) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  auto axis = [](double lo, double hi, int count) {
    if (lo == hi || count == 1) return std::vector<double>{lo};
    std::vector<double> v(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) v[k] = lo + (hi - lo) * k / (count - 1.0);
    return v;
  };
  return {axis(x0, x1, nx), axis(y0, y1, ny)};
}

double silverman_bandwidth(std::vector<double> values) {
  if (values.empty()) throw EmptySet("no values for a bandwidth");
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  std::sort(values.begin(), values.end());
  const double iqr = quantile(values, 0.75) - quantile(values, 0.25);
  double spread = sd;
  if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) return 1.0;
  return 0.9 * spread * std::pow(n, -0.2);
}

SmoothedGrid default_smooth(std::span<const SmoothPoint> points, int nx, int ny, double hx, double hy) {
  if (points.empty()) throw EmptySet("no points to smooth");
  std::vector<double> xs, ys;
  for (const auto& p : points) {
    xs.push_back(p.x);
    ys.push_back(p.y);
  }
  if (!(hx > 0.0)) hx = silverman_bandwidth(xs);
  if (!(hy > 0.0)) hy = silverman_bandwidth(ys);
  return nadaraya_watson_grid(points, hx, hy, data_range_grid(points, nx, ny));
}

}  // namespace borrow::io
