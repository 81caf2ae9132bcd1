#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "superedge/image.hpp"

namespace superedge {

inline constexpr double kDefaultMaxDist = 0.0075;  // fraction of the image diagonal
inline constexpr int kDefaultThresholds = 99;

struct MatchCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
};

struct PRPoint {
  double threshold = 0.0;
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  double precision = 1.0;
  double recall = 1.0;
  double f_measure = 0.0;

  static PRPoint from_counts(double threshold, std::int64_t tp, std::int64_t fp, std::int64_t fn);
};

struct EvalReport {
  double ods = 0.0;
  double ods_threshold = 0.0;
  double ois = 0.0;
  double ap = 0.0;
  std::vector<PRPoint> per_threshold;
  std::vector<std::pair<std::string, double>> per_image_best;
};

// Greedy one-to-one matching of pred and gt pixels (> 0.5) lying within
// max_dist * diagonal of each other, closest pairs first.
MatchCounts match_boundaries(const EdgeMap& pred_binary, const EdgeMap& gt_binary, double max_dist = kDefaultMaxDist);

// k / (n + 1) for k = 1..n.
std::vector<double> uniform_thresholds(int n);

// Binarize at each threshold, thin, match.
std::vector<PRPoint> pr_at_thresholds(const EdgeMap& pred_prob, const EdgeMap& gt, std::span<const double> thresholds,
                                      double max_dist = kDefaultMaxDist);

// Area under the precision-interpolated PR curve over [0, max recall].
double average_precision(std::span<const PRPoint> curve);

EvalReport evaluate_dataset(std::span<const EdgeMap> preds, std::span<const EdgeMap> gts, int n_thresholds = kDefaultThresholds,
                            double max_dist = kDefaultMaxDist, std::span<const std::string> ids = {});

// report.txt and pr_curve.tsv
void write_report(const EvalReport& report, const std::filesystem::path& out_dir);

}  // namespace superedge
