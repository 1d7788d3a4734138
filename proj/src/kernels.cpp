#include "meterwatch/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <vector>

namespace meterwatch::kernels {
namespace {

inline double sq_dist(const double* a, const double* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t j = 0; j < dim; ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

inline int nearest(const double* x, const double* centroids, Shape shape, double& best) {
  int label = 0;
  best = sq_dist(x, centroids, shape.dim);
  for (std::size_t c = 1; c < shape.k; ++c) {
    const double d = sq_dist(x, centroids + c * shape.dim, shape.dim);
    if (d < best) {
      best = d;
      label = int(c);
    }
  }
  return label;
}

}  // namespace

std::size_t assign_serial(std::span<const double> points, std::span<const double> centroids, Shape shape,
                          std::span<int> labels, std::span<double> dist2) {
  std::size_t changed = 0;
  for (std::size_t i = 0; i < shape.n; ++i) {
    double best = 0.0;
    const int label = nearest(points.data() + i * shape.dim, centroids.data(), shape, best);
    changed += label != labels[i];
    labels[i] = label;
    dist2[i] = best;
  }
  return changed;
}

std::size_t assign_omp(std::span<const double> points, std::span<const double> centroids, Shape shape,
                       std::span<int> labels, std::span<double> dist2) {
  std::size_t changed = 0;
  const auto n = std::ptrdiff_t(shape.n);
#pragma omp parallel for schedule(static) reduction(+ : changed)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double best = 0.0;
    const int label = nearest(points.data() + std::size_t(i) * shape.dim, centroids.data(), shape, best);
    changed += label != labels[std::size_t(i)];
    labels[std::size_t(i)] = label;
    dist2[std::size_t(i)] = best;
  }
  return changed;
}

void update_serial(std::span<const double> points, std::span<const int> labels, Shape shape,
                   std::span<double> centroids, std::span<std::size_t> counts) {
  std::vector<double> sums(shape.k * shape.dim, 0.0);
  std::fill(counts.begin(), counts.end(), 0);
  for (std::size_t i = 0; i < shape.n; ++i) {
    const auto c = std::size_t(labels[i]);
    ++counts[c];
    for (std::size_t j = 0; j < shape.dim; ++j) sums[c * shape.dim + j] += points[i * shape.dim + j];
  }
  for (std::size_t c = 0; c < shape.k; ++c) {
    if (counts[c] == 0) continue;
    for (std::size_t j = 0; j < shape.dim; ++j) centroids[c * shape.dim + j] = sums[c * shape.dim + j] / double(counts[c]);
  }
}

void update_omp(std::span<const double> points, std::span<const int> labels, Shape shape,
                std::span<double> centroids, std::span<std::size_t> counts) {
  std::fill(counts.begin(), counts.end(), 0);
  for (std::size_t i = 0; i < shape.n; ++i) ++counts[std::size_t(labels[i])];
  // Each thread owns a contiguous block of coordinates and walks the points
  // in index order, so every (cluster, coordinate) sum accumulates exactly as
  // in the serial loop.
#pragma omp parallel
  {
    const auto threads = std::size_t(omp_get_num_threads());
    const auto t = std::size_t(omp_get_thread_num());
    const std::size_t j0 = shape.dim * t / threads;
    const std::size_t j1 = shape.dim * (t + 1) / threads;
    const std::size_t width = j1 - j0;
    std::vector<double> sums(shape.k * width, 0.0);
    for (std::size_t i = 0; i < shape.n; ++i) {
      double* row = sums.data() + std::size_t(labels[i]) * width;
      const double* p = points.data() + i * shape.dim + j0;
      for (std::size_t j = 0; j < width; ++j) row[j] += p[j];
    }
    for (std::size_t c = 0; c < shape.k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t j = 0; j < width; ++j) centroids[c * shape.dim + j0 + j] = sums[c * width + j] / double(counts[c]);
    }
  }
}

void labelled_dist2_serial(std::span<const double> points, std::span<const double> centroids,
                           std::span<const int> labels, Shape shape, std::span<double> dist2) {
  for (std::size_t i = 0; i < shape.n; ++i) {
    dist2[i] = sq_dist(points.data() + i * shape.dim, centroids.data() + std::size_t(labels[i]) * shape.dim, shape.dim);
  }
}

void labelled_dist2_omp(std::span<const double> points, std::span<const double> centroids,
                        std::span<const int> labels, Shape shape, std::span<double> dist2) {
  const auto n = std::ptrdiff_t(shape.n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto u = std::size_t(i);
    dist2[u] = sq_dist(points.data() + u * shape.dim, centroids.data() + std::size_t(labels[u]) * shape.dim, shape.dim);
  }
}

double ordered_sum(std::span<const double> values) {
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

}  // namespace meterwatch::kernels
