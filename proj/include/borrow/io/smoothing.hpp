#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace borrow::io {

struct SmoothPoint {
  double x = 0.0, y = 0.0, value = 0.0;
};

struct GridAxes {
  std::vector<double> xs, ys;
};

struct SmoothedGrid {
  GridAxes axes;
  double hx = 0.0, hy = 0.0;
  Eigen::MatrixXd values;  // ys.size() x xs.size(); NaN where kernel mass < 1e-12
};

/// Gaussian product-kernel Nadaraya-Watson average of the point values at each grid node.
/// Accumulation runs over points in sorted order, so the result does not depend on input order.
SmoothedGrid nadaraya_watson_grid(std::span<const SmoothPoint> points, double hx, double hy, const GridAxes& grid);

/// Evenly spaced nodes over [min, max] of each coordinate (a single node when the range is empty).
GridAxes data_range_grid(std::span<const SmoothPoint> points, int nx = 50, int ny = 50);

/// Silverman's rule 0.9 min(sd, IQR / 1.34) n^(-1/5); falls back to the sd, then to 1, when
/// the spread is zero.
double silverman_bandwidth(std::vector<double> values);

/// 50 x 50 grid over the data range with per-axis Silverman bandwidths unless given.
SmoothedGrid default_smooth(std::span<const SmoothPoint> points, int nx = 50, int ny = 50, double hx = 0.0,
                            double hy = 0.0);

}  // namespace borrow::io
