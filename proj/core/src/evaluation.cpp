#include "superedge/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <tuple>

namespace superedge {

PRPoint PRPoint::from_counts(double threshold, std::int64_t tp, std::int64_t fp, std::int64_t fn) {
  PRPoint p;
  p.threshold = threshold;
  p.tp = tp;
  p.fp = fp;
  p.fn = fn;
  p.precision = tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  p.recall = tp + fn == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  p.f_measure = p.precision + p.recall == 0.0 ? 0.0 : 2.0 * p.precision * p.recall / (p.precision + p.recall);
  return p;
}

MatchCounts match_boundaries(const EdgeMap& pred, const EdgeMap& gt, double max_dist) {
  require_same_geometry(pred, gt, "match_boundaries");
  if (!(max_dist > 0.0)) throw std::invalid_argument("match_boundaries: max_dist must be positive");
  const int h = pred.height(), w = pred.width();
  const double radius = max_dist * std::hypot(static_cast<double>(h), static_cast<double>(w));
  const double r2 = radius * radius;
  const int reach = static_cast<int>(std::floor(radius));

  std::vector<char> gt_on(gt.size());
  std::int64_t n_pred = 0, n_gt = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    gt_on[i] = gt.pixels()[i] > 0.5F;
    n_gt += gt_on[i];
  }
  // (squared distance, pred index, gt index)
  std::vector<std::tuple<int, int, int>> pairs;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!(pred(y, x) > 0.5F)) continue;
      ++n_pred;
      for (int dy = -reach; dy <= reach; ++dy) {
        for (int dx = -reach; dx <= reach; ++dx) {
          const int d2 = dx * dx + dy * dy;
          if (d2 > r2) continue;
          const int gy = y + dy, gx = x + dx;
          if (gy < 0 || gy >= h || gx < 0 || gx >= w || !gt_on[gy * w + gx]) continue;
          pairs.emplace_back(d2, y * w + x, gy * w + gx);
        }
      }
    }
  }
  std::sort(pairs.begin(), pairs.end());
  std::vector<char> pred_used(pred.size(), 0), gt_used(gt.size(), 0);
  MatchCounts c;
  for (const auto& [d2, p, g] : pairs) {
    if (pred_used[p] || gt_used[g]) continue;
    pred_used[p] = 1;
    gt_used[g] = 1;
    ++c.tp;
  }
  c.fp = n_pred - c.tp;
  c.fn = n_gt - c.tp;
  return c;
}

std::vector<double> uniform_thresholds(int n) {
  if (n < 1) throw std::invalid_argument("uniform_thresholds: n must be >= 1");
  std::vector<double> t(n);
  for (int k = 1; k <= n; ++k) t[k - 1] = static_cast<double>(k) / (n + 1);
  return t;
}

std::vector<PRPoint> pr_at_thresholds(const EdgeMap& pred_prob, const EdgeMap& gt, std::span<const double> thresholds,
                                      double max_dist) {
  require_same_geometry(pred_prob, gt, "pr_at_thresholds");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > 0.0 && thresholds[i] < 1.0) || (i > 0 && !(thresholds[i] > thresholds[i - 1]))) {
      throw std::invalid_argument("pr_at_thresholds: thresholds must be strictly increasing in (0, 1)");
    }
  }
  std::vector<PRPoint> out;
  out.reserve(thresholds.size());
  EdgeMap previous;
  MatchCounts counts;
  for (double t : thresholds) {
    EdgeMap bin = binarize(pred_prob, static_cast<float>(t));
    // Consecutive thresholds often select the same pixel set.
    if (bin != previous) {
      counts = match_boundaries(thin(bin), gt, max_dist);
      previous = std::move(bin);
    }
    out.push_back(PRPoint::from_counts(t, counts.tp, counts.fp, counts.fn));
  }
  return out;
}

double average_precision(std::span<const PRPoint> curve) {
  if (curve.empty()) return 0.0;
  std::vector<std::pair<double, double>> pts;  // (recall, precision)
  for (const auto& p : curve) pts.emplace_back(p.recall, p.precision);
  std::sort(pts.begin(), pts.end());
  for (int i = static_cast<int>(pts.size()) - 2; i >= 0; --i) pts[i].second = std::max(pts[i].second, pts[i + 1].second);
  double area = pts.front().first * pts.front().second;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    area += (pts[i].first - pts[i - 1].first) * (pts[i].second + pts[i - 1].second) / 2.0;
  }
  return std::clamp(area, 0.0, 1.0);
}

EvalReport evaluate_dataset(std::span<const EdgeMap> preds, std::span<const EdgeMap> gts, int n_thresholds,
                            double max_dist, std::span<const std::string> ids) {
  if (preds.size() != gts.size()) throw std::invalid_argument("evaluate_dataset: prediction and GT counts differ");
  if (!ids.empty() && ids.size() != preds.size()) throw std::invalid_argument("evaluate_dataset: id count differs");
  if (n_thresholds < 2) throw std::invalid_argument("evaluate_dataset: need at least 2 thresholds");
  const auto thresholds = uniform_thresholds(n_thresholds);
  std::vector<MatchCounts> total(thresholds.size());
  EvalReport report;
  double ois_sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto curve = pr_at_thresholds(preds[i], gts[i], thresholds, max_dist);
    double best = 0.0;
    for (std::size_t k = 0; k < curve.size(); ++k) {
      total[k].tp += curve[k].tp;
      total[k].fp += curve[k].fp;
      total[k].fn += curve[k].fn;
      best = std::max(best, curve[k].f_measure);
    }
    ois_sum += best;
    report.per_image_best.emplace_back(ids.empty() ? std::to_string(i) : ids[i], best);
  }
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    report.per_threshold.push_back(PRPoint::from_counts(thresholds[k], total[k].tp, total[k].fp, total[k].fn));
    if (report.per_threshold.back().f_measure > report.ods) {
      report.ods = report.per_threshold.back().f_measure;
      report.ods_threshold = thresholds[k];
    }
  }
  report.ois = preds.empty() ? 0.0 : ois_sum / static_cast<double>(preds.size());
  report.ap = average_precision(report.per_threshold);
  return report;
}

void write_report(const EvalReport& report, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  char line[128];
  std::ofstream r(out_dir / "report.txt", std::ios::trunc);
  if (!r) throw IoError("cannot write " + (out_dir / "report.txt").string());
  std::snprintf(line, sizeof(line), "ODS\t%.6f\nOIS\t%.6f\nAP\t%.6f\nODS_threshold\t%.6f\n", report.ods, report.ois,
                report.ap, report.ods_threshold);
  r << line;
  std::ofstream c(out_dir / "pr_curve.tsv", std::ios::trunc);
  if (!c) throw IoError("cannot write " + (out_dir / "pr_curve.tsv").string());
  c << "threshold\tprecision\trecall\tf_measure\n";
  for (const auto& p : report.per_threshold) {
    std::snprintf(line, sizeof(line), "%.6f\t%.6f\t%.6f\t%.6f\n", p.threshold, p.precision, p.recall, p.f_measure);
    c << line;
  }
  if (!r || !c) throw IoError("failed writing evaluation report in " + out_dir.string());
}

}  // namespace superedge
