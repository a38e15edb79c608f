#include "gsplane/metrics.hpp"

#include "gsplane/geometry.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

namespace gsplane {

Partition Partition::from_labels(const std::vector<int>& raw) {
  Partition p;
  p.labels.resize(raw.size());
  std::map<int, int> remap;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto [it, fresh] = remap.emplace(raw[i], p.n_clusters);
    if (fresh) ++p.n_clusters;
    p.labels[i] = it->second;
  }
  return p;
}

namespace {

struct Contingency {
  std::map<std::pair<int, int>, double> joint;
  std::vector<double> a, b;  // cluster sizes of P and Q
  double n = 0;
};

Contingency contingency_table(const Partition& p, const Partition& q) {
  if (p.labels.size() != q.labels.size() || p.labels.size() < 2)
    throw std::invalid_argument("partition metrics need two aligned partitions with N >= 2");
  Contingency t;
  t.a.assign(p.n_clusters, 0.0);
  t.b.assign(q.n_clusters, 0.0);
  t.n = static_cast<double>(p.labels.size());
  for (std::size_t i = 0; i < p.labels.size(); ++i) {
    t.a[p.labels[i]] += 1.0;
    t.b[q.labels[i]] += 1.0;
    t.joint[{p.labels[i], q.labels[i]}] += 1.0;
  }
  return t;
}

double choose2(double n) { return 0.5 * n * (n - 1.0); }

}  // namespace

double rand_index(const Partition& p, const Partition& q) {
  const Contingency t = contingency_table(p, q);
  double s_joint = 0.0, s_a = 0.0, s_b = 0.0;
  for (const auto& [_, v] : t.joint) s_joint += choose2(v);
  for (double v : t.a) s_a += choose2(v);
  for (double v : t.b) s_b += choose2(v);
  const double pairs = choose2(t.n);
  return (pairs + 2.0 * s_joint - s_a - s_b) / pairs;
}

double variation_of_information(const Partition& p, const Partition& q) {
  const Contingency t = contingency_table(p, q);
  auto entropy = [&](const std::vector<double>& sizes) {
    double h = 0.0;
    for (double v : sizes)
      if (v > 0) h -= (v / t.n) * std::log(v / t.n);
    return h;
  };
  double h_joint = 0.0;
  for (const auto& [_, v] : t.joint)
    if (v > 0) h_joint -= (v / t.n) * std::log(v / t.n);
  return 2.0 * h_joint - entropy(t.a) - entropy(t.b);
}

double segmentation_covering(const Partition& gt, const Partition& pred) {
  const Contingency t = contingency_table(gt, pred);
  std::vector<double> best_iou(gt.n_clusters, 0.0);
  for (const auto& [key, inter] : t.joint) {
    const auto [r, rp] = key;
    const double iou = inter / (t.a[r] + t.b[rp] - inter);
    best_iou[r] = std::max(best_iou[r], iou);
  }
  double sc = 0.0;
  for (int r = 0; r < gt.n_clusters; ++r) sc += (t.a[r] / t.n) * best_iou[r];
  return sc;
}

std::pair<double, double> accuracy_completeness(const std::vector<Vec3>& pred,
                                                const std::vector<Vec3>& gt) {
  if (pred.empty() || gt.empty())
    throw std::invalid_argument("accuracy_completeness: empty point set");
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  return {mean(nearest_distances(pred, gt)), mean(nearest_distances(gt, pred))};
}

MetricsReport evaluate_partitions(const std::vector<int>& gt, const std::vector<int>& pred,
                                  bool include_unassigned) {
  if (gt.size() != pred.size())
    throw std::invalid_argument("evaluate_partitions: label lists differ in length");
  std::vector<int> g, p;
  long unassigned = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (pred[i] < 0) ++unassigned;
    if (pred[i] < 0 && !include_unassigned) continue;
    g.push_back(gt[i]);
    p.push_back(pred[i]);
  }
  const Partition pg = Partition::from_labels(g);
  const Partition pp = Partition::from_labels(p);
  std::set<int> pred_ids;
  for (int v : pred)
    if (v >= 0) pred_ids.insert(v);
  MetricsReport r;
  r.ri = rand_index(pg, pp);
  r.voi = variation_of_information(pg, pp);
  r.sc = segmentation_covering(pg, pp);
  r.n_planes_gt = pg.n_clusters;
  r.n_planes_pred = static_cast<int>(pred_ids.size());
  r.n_unassigned = unassigned;
  return r;
}

void save_metrics(const MetricsReport& report, const std::string& path) {
  nlohmann::json j;
  j["ri"] = report.ri;
  j["voi"] = report.voi;
  j["sc"] = report.sc;
  j["accuracy"] = report.accuracy;
  j["completeness"] = report.completeness;
  j["n_planes_pred"] = report.n_planes_pred;
  j["n_planes_gt"] = report.n_planes_gt;
  j["n_unassigned"] = report.n_unassigned;
  std::ofstream f(path);
  if (!f) throw std::runtime_error(path + ": cannot open for writing");
  f << j.dump(2) << "\n";
}

MetricsReport load_metrics(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error(path + ": cannot open");
  nlohmann::json j = nlohmann::json::parse(f);
  MetricsReport r;
  r.ri = j.at("ri").get<double>();
  r.voi = j.at("voi").get<double>();
  r.sc = j.at("sc").get<double>();
  r.accuracy = j.at("accuracy").get<double>();
  r.completeness = j.at("completeness").get<double>();
  r.n_planes_pred = j.at("n_planes_pred").get<int>();
  r.n_planes_gt = j.at("n_planes_gt").get<int>();
  r.n_unassigned = j.at("n_unassigned").get<long>();
  return r;
}

}  // namespace gsplane
