#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "meterwatch/civil_time.hpp"
#include "meterwatch/kernels.hpp"
#include "meterwatch/telemetry_store.hpp"

namespace meterwatch::analytics {

/// 96 quarter-hour mean power values (W) for one Warsaw civil day.
struct DailyProfile {
  std::string meter_id;
  Date day;
  std::vector<double> values;
  double completeness = 1.0;

  friend bool operator==(const DailyProfile&, const DailyProfile&) = default;
};

struct ExcludedDay {
  Date day;
  std::string reason;

  friend bool operator==(const ExcludedDay&, const ExcludedDay&) = default;
};

struct ProfileSet {
  std::vector<DailyProfile> profiles;
  std::vector<ExcludedDay> excluded;
};

inline constexpr double kDefaultMinCompleteness = 0.9;

/// One profile per civil day whose share of non-missing slots reaches
/// `min_completeness`. Gaps are filled by linear interpolation inside the
/// day with the edges held constant. DST change days (92 or 100 slots) are
/// always excluded.
ProfileSet build_daily_profiles(std::span<const store::PowerSample> samples, double min_completeness);

struct KMeansOptions {
  int k = 3;
  std::uint64_t seed = 0;
  int restarts = 10;
  int max_iters = 300;
  double tol = 1e-6;  // W of centroid movement
  kernels::Exec exec = kernels::Exec::openmp;
};

/// Result of k-means on a bare row-major matrix.
struct KMeansResult {
  std::vector<double> centroids;  // k x dim
  std::vector<int> labels;
  double inertia = 0.0;
  int iterations = 0;
  int best_restart = 0;
  std::vector<double> inertia_trace;  // per Lloyd iteration of the best restart
  std::vector<std::vector<double>> restart_traces;  // every restart
};

/// k-means++ seeding then Lloyd iterations, best of `restarts` by
/// (inertia, restart index). Restart r draws from mix_seed(seed, r), so
/// the result does not depend on how restarts are scheduled.
KMeansResult kmeans_points(std::span<const double> points, std::size_t n, std::size_t dim, const KMeansOptions& opt);

struct ClusterModel {
  int k = 0;
  std::vector<std::vector<double>> centroids;
  std::map<Date, int> assignments;
  double inertia = 0.0;
  std::uint64_t seed = 0;
  int iterations = 0;
  int restarts = 0;
  std::vector<double> inertia_trace;
};

/// Throws std::invalid_argument when k is outside [1, 6], there are fewer
/// profiles than k, or two profiles share a day.
ClusterModel kmeans_fit(std::span<const DailyProfile> profiles, const KMeansOptions& opt);

inline constexpr int kMaxK = 6;
inline constexpr double kKneeDrop = 0.15;
inline constexpr double kDegenerateFloorW = 50.0;

struct KSelectionReport {
  std::vector<double> inertia;  // index k-1 for k = 1..k_max
  std::vector<double> relative_drop;  // (I_k - I_{k+1}) / I_k, k = 1..k_max-1
  int recommended_k = 1;
  bool degenerate = false;
  double max_pairwise_distance = 0.0;
};

/// Fits k = 1..k_max and recommends the smallest k whose relative inertia
/// drop to k+1 is below 15 % (k_max when none is); inputs whose pairwise
/// distances all stay under the degenerate floor get k = 1. Needs at least
/// k_max profiles, k_max in [1, 6].
KSelectionReport select_k(std::span<const DailyProfile> profiles, std::uint64_t seed, int restarts,
                          kernels::Exec exec = kernels::Exec::openmp, int k_max = kMaxK);

/// Relative resolution at which anomaly scores tie.
inline constexpr double kScoreResolution = 1e-9;

enum class ThresholdRule {
  robust,  // median + 3 * 1.4826 * MAD
  mean_sd,  // mean + 3 * population standard deviation
};

struct AnomalyReport {
  std::map<Date, double> scores;  // distance to nearest centroid, W
  std::map<Date, int> nearest;
  std::vector<Date> ranked_days;  // score descending, earlier date first on ties
  double threshold = 0.0;
  std::vector<Date> flagged;  // score > threshold, in ranked order
  ThresholdRule rule = ThresholdRule::robust;
};

/// Scores every profile; the threshold is computed from the scores of the
/// days the model was fitted on. Throws std::invalid_argument for a profile
/// whose length does not match the centroids.
AnomalyReport anomaly_scores(const ClusterModel& model, std::span<const DailyProfile> profiles,
                             ThresholdRule rule = ThresholdRule::robust);

std::vector<Date> top_days(const AnomalyReport& report, std::size_t n);

struct ClusterSummary {
  std::vector<std::vector<double>> centroids;
  std::vector<std::size_t> counts;
  int most_populated = 0;  // lowest index among equally populated clusters
};

ClusterSummary mean_cluster_profiles(const ClusterModel& model);

double euclidean(std::span<const double> a, std::span<const double> b);

}  // namespace meterwatch::analytics
