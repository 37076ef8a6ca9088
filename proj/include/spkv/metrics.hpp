// spkv/metrics.hpp

// Copyright 2026 The spkv Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Detection metrics on scored trials. Decision rule everywhere: a trial is
// accepted iff score >= threshold.

#ifndef SPKV_METRICS_HPP_
#define SPKV_METRICS_HPP_

#include <algorithm>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "spkv/data.hpp"

namespace spkv::metrics {

inline double compute_beta(double c_miss, double c_fa, double p_target) {
  if (!(c_miss > 0) || !(c_fa > 0)) throw ArgumentError("detection costs must be positive");
  if (!(p_target > 0 && p_target < 1)) throw ArgumentError("P_target must lie in (0, 1)");
  return c_fa * (1.0 - p_target) / (c_miss * p_target);
}

struct DcfWeights {
  double c_miss = 1.0;
  double c_fa = 1.0;
  double p_target = 0.01;

  double beta() const { return compute_beta(c_miss, c_fa, p_target); }
};

struct ScoreSplit {
  std::vector<double> targets;
  std::vector<double> nontargets;
};

/// Separates scores by label. Every trial must be labeled and both classes
/// must be present.
inline ScoreSplit split_scores(const ScoredTrialSet &scored) {
  ScoreSplit s;
  for (const ScoredTrial &st : scored) {
    if (!st.trial.label)
      throw MetricError("trial " + st.trial.enroll_id + " " + st.trial.test_id + " has no label");
    (*st.trial.label == Label::kTarget ? s.targets : s.nontargets).push_back(st.score);
  }
  if (s.targets.empty() || s.nontargets.empty())
    throw MetricError("metrics need both target and non-target trials");
  return s;
}

namespace detail {

inline void require_both(std::span<const double> tar, std::span<const double> non) {
  if (tar.empty() || non.empty()) throw MetricError("metrics need both target and non-target trials");
}

inline double cost(size_t misses, size_t false_alarms, size_t n_tar, size_t n_non, double beta) {
  return static_cast<double>(misses) / static_cast<double>(n_tar) +
         beta * (static_cast<double>(false_alarms) / static_cast<double>(n_non));
}

/// One operating point per candidate threshold: -inf, the midpoints between
/// consecutive distinct scores, +inf. Counts are errors at that threshold.
struct OperatingPoint {
  double threshold;
  size_t misses;
  size_t false_alarms;
};

inline std::vector<OperatingPoint> sweep(std::span<const double> tar, std::span<const double> non) {
  std::vector<std::pair<double, bool>> all;  // (score, is_target)
  all.reserve(tar.size() + non.size());
  for (double s : tar) all.emplace_back(s, true);
  for (double s : non) all.emplace_back(s, false);
  std::sort(all.begin(), all.end(),
            [](const auto &a, const auto &b) { return a.first < b.first; });
  std::vector<OperatingPoint> points;
  size_t misses = 0, fa = non.size();
  points.push_back({-std::numeric_limits<double>::infinity(), misses, fa});
  for (size_t i = 0; i < all.size();) {
    const double v = all[i].first;
    while (i < all.size() && all[i].first == v) {
      if (all[i].second) ++misses;
      else --fa;
      ++i;
    }
    const double theta = i < all.size() ? v + (all[i].first - v) / 2.0
                                        : std::numeric_limits<double>::infinity();
    points.push_back({theta, misses, fa});
  }
  return points;
}

}  // namespace detail

struct ErrorRates {
  double p_miss;
  double p_fa;
};

inline ErrorRates error_rates(std::span<const double> tar, std::span<const double> non, double theta) {
  detail::require_both(tar, non);
  size_t misses = 0, fa = 0;
  for (double s : tar) misses += s < theta;
  for (double s : non) fa += s >= theta;
  return {static_cast<double>(misses) / static_cast<double>(tar.size()),
          static_cast<double>(fa) / static_cast<double>(non.size())};
}

/// Normalized detection cost P_Miss(theta) + beta * P_FA(theta).
inline double dcf(std::span<const double> tar, std::span<const double> non, double theta, double beta) {
  detail::require_both(tar, non);
  size_t misses = 0, fa = 0;
  for (double s : tar) misses += s < theta;
  for (double s : non) fa += s >= theta;
  return detail::cost(misses, fa, tar.size(), non.size(), beta);
}

inline double dcf(const ScoredTrialSet &scored, double theta, const DcfWeights &w) {
  auto s = split_scores(scored);
  return dcf(s.targets, s.nontargets, theta, w.beta());
}

struct MinDcf {
  double value;
  double threshold;
};

/// Minimum of the detection cost over all candidate thresholds, with the
/// lowest minimizing threshold.
inline MinDcf min_dcf(std::span<const double> tar, std::span<const double> non, double beta) {
  detail::require_both(tar, non);
  MinDcf best{std::numeric_limits<double>::infinity(), 0.0};
  for (const auto &p : detail::sweep(tar, non)) {
    const double c = detail::cost(p.misses, p.false_alarms, tar.size(), non.size(), beta);
    if (c < best.value) best = {c, p.threshold};
  }
  return best;
}

inline MinDcf min_dcf(const ScoredTrialSet &scored, const DcfWeights &w) {
  auto s = split_scores(scored);
  return min_dcf(s.targets, s.nontargets, w.beta());
}

/// Mean of the minimum costs at several operating points.
inline double averaged_min_dcf(const ScoredTrialSet &scored, const std::vector<DcfWeights> &ws) {
  if (ws.empty()) throw ArgumentError("no operating points given");
  auto s = split_scores(scored);
  double sum = 0.0;
  for (const auto &w : ws) sum += min_dcf(s.targets, s.nontargets, w.beta()).value;
  return sum / static_cast<double>(ws.size());
}

/// Equal error rate: the ROC staircase over candidate thresholds is followed
/// until P_Miss first reaches P_FA, and the crossing is linearly
/// interpolated between the two adjacent operating points.
inline double eer(std::span<const double> tar, std::span<const double> non) {
  detail::require_both(tar, non);
  const double nt = static_cast<double>(tar.size()), nn = static_cast<double>(non.size());
  auto points = detail::sweep(tar, non);
  double prev_miss = 0.0, prev_fa = 1.0;
  for (const auto &p : points) {
    const double pm = static_cast<double>(p.misses) / nt;
    const double pf = static_cast<double>(p.false_alarms) / nn;
    if (pm >= pf) {
      if (pm == pf) return pm;
      const double gap_prev = prev_fa - prev_miss;  // > 0
      const double lambda = gap_prev / (gap_prev + (pm - pf));
      return prev_miss + lambda * (pm - prev_miss);
    }
    prev_miss = pm;
    prev_fa = pf;
  }
  return prev_miss;  // not reached: the +inf point has P_Miss = 1 >= P_FA = 0
}

inline double eer(const ScoredTrialSet &scored) {
  auto s = split_scores(scored);
  return eer(s.targets, s.nontargets);
}

struct EvalReport {
  double eer = 0.0;
  double min_dcf = 0.0;
  double threshold = 0.0;
  std::optional<double> actual_dcf;
  DcfWeights weights;
};

inline EvalReport evaluate(const ScoredTrialSet &scored, const DcfWeights &w,
                           std::optional<double> theta = std::nullopt) {
  auto s = split_scores(scored);
  EvalReport r;
  r.weights = w;
  r.eer = eer(s.targets, s.nontargets);
  auto m = min_dcf(s.targets, s.nontargets, w.beta());
  r.min_dcf = m.value;
  r.threshold = m.threshold;
  if (theta) r.actual_dcf = dcf(s.targets, s.nontargets, *theta, w.beta());
  return r;
}

}  // namespace spkv::metrics

#endif  // SPKV_METRICS_HPP_
