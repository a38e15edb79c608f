#pragma once

#include "gsplane/common.hpp"

#include <string>
#include <vector>

namespace gsplane {

/// Dense relabeling of an element->cluster assignment. Unassigned elements
/// (label < 0) either form one dedicated extra cluster (default) or are
/// dropped from both partitions by the caller before construction.
struct Partition {
  std::vector<int> labels;  // dense in [0, n_clusters)
  int n_clusters = 0;

  static Partition from_labels(const std::vector<int>& raw);
};

/// Pair-counting agreement in [0, 1], computed from the contingency table.
double rand_index(const Partition& p, const Partition& q);

/// H(P|Q) + H(Q|P) in nats.
double variation_of_information(const Partition& p, const Partition& q);

/// sum_R (|R|/N) max_R' IoU(R, R') over ground-truth regions R.
double segmentation_covering(const Partition& gt, const Partition& pred);

/// Mean nearest-neighbor distances (pred -> gt, gt -> pred), exact.
std::pair<double, double> accuracy_completeness(const std::vector<Vec3>& pred,
                                                const std::vector<Vec3>& gt);

struct MetricsReport {
  double ri = 0.0;
  double voi = 0.0;
  double sc = 0.0;
  double accuracy = -1.0;      // meters; -1 when not evaluated
  double completeness = -1.0;  // meters; -1 when not evaluated
  int n_planes_pred = 0;
  int n_planes_gt = 0;
  long n_unassigned = 0;
};

/// Partition metrics of predicted vs ground-truth labels over the same
/// element list. With include_unassigned, label -1 becomes one extra
/// predicted cluster; otherwise those elements are excluded from both sides.
MetricsReport evaluate_partitions(const std::vector<int>& gt, const std::vector<int>& pred,
                                  bool include_unassigned = true);

void save_metrics(const MetricsReport& report, const std::string& path);
MetricsReport load_metrics(const std::string& path);

}  // namespace gsplane
