#pragma once

// Inner loops of k-means and anomaly scoring, each in a serial reference
// form and an OpenMP form. Both forms perform the same floating-point
// operations in the same order per output element, so their results are
// bitwise identical; tests/test_kernels.cpp checks that.
//
// Matrices are row-major: `points` is n x dim, `centroids` is k x dim.

#include <cstddef>
#include <span>

namespace meterwatch::kernels {

enum class Exec { serial, openmp };

struct Shape {
  std::size_t n = 0;
  std::size_t dim = 0;
  std::size_t k = 0;
};

/// Nearest centroid per point (lowest index on ties) and its squared
/// distance. Returns the number of labels that changed.
std::size_t assign_serial(std::span<const double> points, std::span<const double> centroids, Shape shape,
                          std::span<int> labels, std::span<double> dist2);
std::size_t assign_omp(std::span<const double> points, std::span<const double> centroids, Shape shape,
                       std::span<int> labels, std::span<double> dist2);

/// Centroid of each cluster as the mean of its members; clusters without
/// members keep their previous centroid. `counts` receives member counts.
void update_serial(std::span<const double> points, std::span<const int> labels, Shape shape,
                   std::span<double> centroids, std::span<std::size_t> counts);
void update_omp(std::span<const double> points, std::span<const int> labels, Shape shape,
                std::span<double> centroids, std::span<std::size_t> counts);

/// Squared distance of each point to its labelled centroid.
void labelled_dist2_serial(std::span<const double> points, std::span<const double> centroids,
                           std::span<const int> labels, Shape shape, std::span<double> dist2);
void labelled_dist2_omp(std::span<const double> points, std::span<const double> centroids,
                        std::span<const int> labels, Shape shape, std::span<double> dist2);

inline std::size_t assign(Exec e, std::span<const double> p, std::span<const double> c, Shape s, std::span<int> l,
                          std::span<double> d) {
  return e == Exec::openmp ? assign_omp(p, c, s, l, d) : assign_serial(p, c, s, l, d);
}

inline void update(Exec e, std::span<const double> p, std::span<const int> l, Shape s, std::span<double> c,
                   std::span<std::size_t> n) {
  e == Exec::openmp ? update_omp(p, l, s, c, n) : update_serial(p, l, s, c, n);
}

inline void labelled_dist2(Exec e, std::span<const double> p, std::span<const double> c, std::span<const int> l,
                           Shape s, std::span<double> d) {
  e == Exec::openmp ? labelled_dist2_omp(p, c, l, s, d) : labelled_dist2_serial(p, c, l, s, d);
}

/// Sum in index order (the reduction both forms share).
double ordered_sum(std::span<const double> values);

}  // namespace meterwatch::kernels
