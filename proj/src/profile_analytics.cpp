#include "meterwatch/profile_analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "meterwatch/rng.hpp"

namespace meterwatch::analytics {
namespace {

using kernels::Shape;

struct RestartResult {
  std::vector<double> centroids;
  std::vector<int> labels;
  double inertia = 0.0;
  int iterations = 0;
  std::vector<double> trace;
};

double sq_dist(const double* a, const double* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t j = 0; j < dim; ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

// k-means++: first centre uniform, then D^2 sampling.
std::vector<double> seed_centroids(std::span<const double> points, Shape shape, Rng& rng) {
  const std::size_t dim = shape.dim;
  std::vector<double> centroids(shape.k * dim);
  auto take = [&](std::size_t c, std::size_t i) {
    std::copy_n(points.begin() + std::ptrdiff_t(i * dim), dim, centroids.begin() + std::ptrdiff_t(c * dim));
  };
  take(0, std::size_t(rng.below(shape.n)));
  std::vector<double> d2(shape.n);
  for (std::size_t i = 0; i < shape.n; ++i) d2[i] = sq_dist(&points[i * dim], &centroids[0], dim);
  for (std::size_t c = 1; c < shape.k; ++c) {
    const double total = kernels::ordered_sum(d2);
    std::size_t pick = 0;
    if (total > 0.0) {
      const double u = rng.uniform() * total;
      double cum = 0.0;
      pick = shape.n;
      std::size_t last_positive = 0;
      for (std::size_t i = 0; i < shape.n; ++i) {
        if (d2[i] <= 0.0) continue;
        last_positive = i;
        cum += d2[i];
        if (u < cum) {
          pick = i;
          break;
        }
      }
      if (pick == shape.n) pick = last_positive;
    } else {
      pick = std::size_t(rng.below(shape.n));
    }
    take(c, pick);
    for (std::size_t i = 0; i < shape.n; ++i) {
      d2[i] = std::min(d2[i], sq_dist(&points[i * dim], &centroids[c * dim], dim));
    }
  }
  return centroids;
}

// Moves the point farthest from its centroid (lowest index on ties, only
// from clusters that keep a member) into each empty cluster.
void repair_empty(std::span<const double> points, Shape shape, std::vector<int>& labels, std::vector<double>& dist2,
                  std::vector<double>& centroids) {
  std::vector<std::size_t> counts(shape.k, 0);
  for (int l : labels) ++counts[std::size_t(l)];
  for (std::size_t c = 0; c < shape.k; ++c) {
    if (counts[c] != 0) continue;
    std::size_t far = shape.n;
    for (std::size_t i = 0; i < shape.n; ++i) {
      if (counts[std::size_t(labels[i])] < 2) continue;
      if (far == shape.n || dist2[i] > dist2[far]) far = i;
    }
    --counts[std::size_t(labels[far])];
    labels[far] = int(c);
    counts[c] = 1;
    std::copy_n(points.begin() + std::ptrdiff_t(far * shape.dim), shape.dim,
                centroids.begin() + std::ptrdiff_t(c * shape.dim));
    dist2[far] = 0.0;
  }
}

RestartResult run_restart(std::span<const double> points, Shape shape, const KMeansOptions& opt, int restart,
                          kernels::Exec exec) {
  Rng rng(mix_seed(opt.seed, std::uint64_t(restart)));
  RestartResult r;
  r.centroids = seed_centroids(points, shape, rng);
  r.labels.assign(shape.n, -1);
  std::vector<double> dist2(shape.n);
  std::vector<std::size_t> counts(shape.k);

  kernels::assign(exec, points, r.centroids, shape, r.labels, dist2);
  for (int it = 1; it <= opt.max_iters; ++it) {
    repair_empty(points, shape, r.labels, dist2, r.centroids);
    kernels::update(exec, points, r.labels, shape, r.centroids, counts);
    kernels::labelled_dist2(exec, points, r.centroids, r.labels, shape, dist2);
    r.trace.push_back(kernels::ordered_sum(dist2));
    r.iterations = it;
    const std::size_t changed = kernels::assign(exec, points, r.centroids, shape, r.labels, dist2);
    // Stop only at a label fixed point so the model's nearest-centroid and
    // centroid-is-mean properties hold together. The next update would move
    // no centroid, so tol is met as well.
    if (changed == 0) break;
  }
  r.inertia = kernels::ordered_sum(dist2);
  return r;
}

void check_profiles(std::span<const DailyProfile> profiles) {
  std::set<Date> days;
  for (const auto& p : profiles) {
    if (p.values.size() != std::size_t(kSlotsPerDay)) {
      throw std::invalid_argument("profile " + format_date(p.day) + " has " + std::to_string(p.values.size()) +
                                  " values, expected 96");
    }
    if (!days.insert(p.day).second) throw std::invalid_argument("duplicate profile day " + format_date(p.day));
  }
}

std::vector<double> flatten(std::span<const DailyProfile> profiles) {
  std::vector<double> m;
  m.reserve(profiles.size() * std::size_t(kSlotsPerDay));
  for (const auto& p : profiles) m.insert(m.end(), p.values.begin(), p.values.end());
  return m;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

double euclidean(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(sq_dist(a.data(), b.data(), std::min(a.size(), b.size())));
}

ProfileSet build_daily_profiles(std::span<const store::PowerSample> samples, double min_completeness) {
  struct DayAcc {
    std::vector<std::optional<double>> values;
  };
  std::map<std::pair<std::string, Date>, DayAcc> days;
  for (const auto& s : samples) {
    const Date d = warsaw_date(s.slot_start);
    auto& acc = days[{s.meter_id, d}];
    if (acc.values.empty()) acc.values.resize(std::size_t(warsaw_slots_in_day(d)));
    const int slot = warsaw_slot_index(s.slot_start);
    if (slot >= 0 && std::size_t(slot) < acc.values.size() && s.quality != store::Quality::missing) {
      acc.values[std::size_t(slot)] = s.mean_power_w;
    }
  }

  ProfileSet out;
  for (auto& [key, acc] : days) {
    const auto& [meter, day] = key;
    if (acc.values.size() != std::size_t(kSlotsPerDay)) {
      out.excluded.push_back({day, "dst-transition (" + std::to_string(acc.values.size()) + " slots)"});
      continue;
    }
    std::vector<std::size_t> present;
    for (std::size_t i = 0; i < acc.values.size(); ++i) {
      if (acc.values[i]) present.push_back(i);
    }
    const double completeness = double(present.size()) / double(kSlotsPerDay);
    if (present.empty() || completeness < min_completeness) {
      out.excluded.push_back({day, "incomplete (" + std::to_string(present.size()) + "/96 slots)"});
      continue;
    }
    DailyProfile p{meter, day, std::vector<double>(std::size_t(kSlotsPerDay)), completeness};
    std::size_t next = 0;  // index into present of the first present slot >= i
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      while (next < present.size() && present[next] < i) ++next;
      if (next < present.size() && present[next] == i) {
        p.values[i] = std::max(0.0, *acc.values[i]);
      } else if (next == 0) {
        p.values[i] = *acc.values[present.front()];
      } else if (next == present.size()) {
        p.values[i] = *acc.values[present.back()];
      } else {
        const std::size_t a = present[next - 1];
        const std::size_t b = present[next];
        const double f = double(i - a) / double(b - a);
        p.values[i] = std::max(0.0, *acc.values[a] + f * (*acc.values[b] - *acc.values[a]));
      }
    }
    out.profiles.push_back(std::move(p));
  }
  return out;
}

KMeansResult kmeans_points(std::span<const double> points, std::size_t n, std::size_t dim, const KMeansOptions& opt) {
  if (opt.k < 1) throw std::invalid_argument("k must be positive");
  if (n < std::size_t(opt.k)) {
    throw std::invalid_argument("k-means needs at least k=" + std::to_string(opt.k) + " profiles, got " +
                                std::to_string(n));
  }
  if (opt.restarts < 1) throw std::invalid_argument("restarts must be positive");
  if (points.size() != n * dim) throw std::invalid_argument("point matrix size mismatch");
  const Shape shape{n, dim, std::size_t(opt.k)};

  std::vector<RestartResult> results(std::size_t(opt.restarts));
  if (opt.exec == kernels::Exec::openmp) {
    const int restarts = opt.restarts;
#pragma omp parallel for schedule(dynamic)
    for (int r = 0; r < restarts; ++r) {
      results[std::size_t(r)] = run_restart(points, shape, opt, r, kernels::Exec::serial);
    }
  } else {
    for (int r = 0; r < opt.restarts; ++r) {
      results[std::size_t(r)] = run_restart(points, shape, opt, r, kernels::Exec::serial);
    }
  }

  std::size_t best = 0;
  for (std::size_t r = 1; r < results.size(); ++r) {
    if (results[r].inertia < results[best].inertia) best = r;
  }
  KMeansResult out;
  out.best_restart = int(best);
  for (auto& r : results) out.restart_traces.push_back(r.trace);
  out.centroids = std::move(results[best].centroids);
  out.labels = std::move(results[best].labels);
  out.inertia = results[best].inertia;
  out.iterations = results[best].iterations;
  out.inertia_trace = std::move(results[best].trace);
  return out;
}

ClusterModel kmeans_fit(std::span<const DailyProfile> profiles, const KMeansOptions& opt) {
  if (opt.k < 1 || opt.k > kMaxK) throw std::invalid_argument("k must be in [1, 6]");
  check_profiles(profiles);
  const std::vector<double> m = flatten(profiles);
  KMeansResult r = kmeans_points(m, profiles.size(), std::size_t(kSlotsPerDay), opt);

  ClusterModel model;
  model.k = opt.k;
  model.seed = opt.seed;
  model.restarts = opt.restarts;
  model.iterations = r.iterations;
  model.inertia = r.inertia;
  model.inertia_trace = std::move(r.inertia_trace);
  for (int c = 0; c < opt.k; ++c) {
    const auto first = r.centroids.begin() + std::ptrdiff_t(std::size_t(c) * kSlotsPerDay);
    model.centroids.emplace_back(first, first + kSlotsPerDay);
  }
  for (std::size_t i = 0; i < profiles.size(); ++i) model.assignments[profiles[i].day] = r.labels[i];
  return model;
}

KSelectionReport select_k(std::span<const DailyProfile> profiles, std::uint64_t seed, int restarts,
                          kernels::Exec exec, int k_max) {
  if (k_max < 1 || k_max > kMaxK) throw std::invalid_argument("k_max must be in [1, 6]");
  if (profiles.size() < std::size_t(k_max)) {
    throw std::invalid_argument("k selection up to " + std::to_string(k_max) + " needs at least " +
                                std::to_string(k_max) + " profiles, got " + std::to_string(profiles.size()));
  }
  check_profiles(profiles);
  KSelectionReport rep;
  for (int k = 1; k <= k_max; ++k) {
    KMeansOptions opt;
    opt.k = k;
    opt.seed = seed;
    opt.restarts = restarts;
    opt.exec = exec;
    rep.inertia.push_back(kmeans_fit(profiles, opt).inertia);
  }
  for (int k = 1; k < k_max; ++k) {
    const double a = rep.inertia[std::size_t(k - 1)];
    const double b = rep.inertia[std::size_t(k)];
    rep.relative_drop.push_back(a > 0.0 ? (a - b) / a : 0.0);
  }
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    for (std::size_t j = i + 1; j < profiles.size(); ++j) {
      rep.max_pairwise_distance = std::max(rep.max_pairwise_distance, euclidean(profiles[i].values, profiles[j].values));
    }
  }
  if (rep.max_pairwise_distance < kDegenerateFloorW) {
    rep.degenerate = true;
    rep.recommended_k = 1;
    return rep;
  }
  rep.recommended_k = k_max;
  for (int k = 1; k < k_max; ++k) {
    if (rep.relative_drop[std::size_t(k - 1)] < kKneeDrop) {
      rep.recommended_k = k;
      break;
    }
  }
  return rep;
}

AnomalyReport anomaly_scores(const ClusterModel& model, std::span<const DailyProfile> profiles, ThresholdRule rule) {
  if (model.centroids.empty()) throw std::invalid_argument("model has no centroids");
  const std::size_t dim = model.centroids.front().size();
  std::vector<double> flat;
  for (const auto& c : model.centroids) flat.insert(flat.end(), c.begin(), c.end());

  AnomalyReport rep;
  rep.rule = rule;
  std::vector<double> fitted;
  for (const auto& p : profiles) {
    if (p.values.size() != dim) {
      throw std::invalid_argument("profile " + format_date(p.day) + " has " + std::to_string(p.values.size()) +
                                  " values, expected " + std::to_string(dim));
    }
    int label = -1;
    double d2 = 0.0;
    kernels::assign_serial(p.values, flat, {1, dim, model.centroids.size()}, std::span(&label, 1), std::span(&d2, 1));
    const double score = std::sqrt(d2);
    rep.scores[p.day] = score;
    rep.nearest[p.day] = label;
    if (model.assignments.contains(p.day)) fitted.push_back(score);
  }

  // Scores are compared on a grid of 1e-9 of the largest one, so days that
  // tie exactly keep date order whatever the rounding of their distances.
  double top = 0.0;
  for (const auto& [day, s] : rep.scores) top = std::max(top, s);
  const double quantum = top > 0.0 ? top * kScoreResolution : 1.0;
  const auto level = [&](double s) { return std::round(s / quantum); };
  for (const auto& [day, s] : rep.scores) rep.ranked_days.push_back(day);
  std::stable_sort(rep.ranked_days.begin(), rep.ranked_days.end(),
                   [&](const Date& a, const Date& b) { return level(rep.scores.at(a)) > level(rep.scores.at(b)); });

  if (fitted.empty()) {
    rep.threshold = std::numeric_limits<double>::infinity();
  } else if (rule == ThresholdRule::robust) {
    const double med = median(fitted);
    std::vector<double> dev;
    for (double s : fitted) dev.push_back(std::abs(s - med));
    rep.threshold = med + 3.0 * 1.4826 * median(dev);
  } else {
    const double n = double(fitted.size());
    const double mean = std::accumulate(fitted.begin(), fitted.end(), 0.0) / n;
    double var = 0.0;
    for (double s : fitted) var += (s - mean) * (s - mean);
    rep.threshold = mean + 3.0 * std::sqrt(var / n);
  }
  for (const Date& d : rep.ranked_days) {
    if (level(rep.scores.at(d)) > level(rep.threshold)) rep.flagged.push_back(d);
  }
  return rep;
}

std::vector<Date> top_days(const AnomalyReport& report, std::size_t n) {
  return {report.ranked_days.begin(), report.ranked_days.begin() + std::ptrdiff_t(std::min(n, report.ranked_days.size()))};
}

ClusterSummary mean_cluster_profiles(const ClusterModel& model) {
  ClusterSummary s;
  s.centroids = model.centroids;
  s.counts.assign(model.centroids.size(), 0);
  for (const auto& [day, c] : model.assignments) ++s.counts[std::size_t(c)];
  for (std::size_t c = 1; c < s.counts.size(); ++c) {
    if (s.counts[c] > s.counts[std::size_t(s.most_populated)]) s.most_populated = int(c);
  }
  return s;
}

}  // namespace meterwatch::analytics
