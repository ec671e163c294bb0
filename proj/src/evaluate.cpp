#include "voxelox/evaluate.hpp"

#include "voxelox/error.hpp"
#include "voxelox/query.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <random>
#include <set>

namespace voxelox {

GroundTruthMap build_ground_truth(const SyntheticScene& scene, double resolution) {
  if (!(resolution > 0.0)) throw_validation("ground truth: resolution must be positive");
  absl::flat_hash_map<VoxelKey, absl::flat_hash_map<InstanceId, std::uint32_t>> votes;
  const auto& intr = scene.intrinsics;
  for (std::size_t k = 0; k < scene.trajectory.size(); ++k) {
    const auto gt = render_gt_frame(scene, scene.trajectory[k], k);
    for (int v = 0; v < intr.height; ++v) {
      for (int u = 0; u < intr.width; ++u) {
        const std::size_t i = static_cast<std::size_t>(v) * intr.width + u;
        if (gt.labels[i] == kNoInstance) continue;
        const auto p = back_project(u, v, gt.frame.depth_m(i), intr, gt.frame.pose);
        ++votes[voxelize(p, resolution)][gt.labels[i]];
      }
    }
  }

  absl::flat_hash_map<InstanceId, int> class_of;
  for (const auto& o : scene.objects) class_of[o.id] = o.class_id;

  GroundTruthMap gt;
  gt.resolution = resolution;
  gt.voxels.reserve(votes.size());
  for (const auto& [key, tally] : votes) {
    InstanceId best = kNoInstance;
    std::uint32_t best_n = 0;
    for (const auto& [id, n] : tally) {
      if (n > best_n || (n == best_n && id < best)) {
        best = id;
        best_n = n;
      }
    }
    gt.voxels[key] = {best, class_of.at(best)};
  }
  return gt;
}

std::vector<InstanceRegion> predicted_instances(const VoxelMap& map) {
  std::map<InstanceId, InstanceRegion> regions;
  std::map<InstanceId, double> confidence_sum;
  for (const auto& key : map.sorted_keys()) {
    const VoxelState& cell = *map.find(key);
    const InstanceId id = cell.argmax();
    auto& r = regions[id];
    r.id = id;
    r.voxels.push_back(key);
    confidence_sum[id] += cell.max_theta();
  }
  std::vector<InstanceRegion> out;
  out.reserve(regions.size());
  for (auto& [id, r] : regions) {
    r.confidence = confidence_sum[id] / static_cast<double>(r.voxels.size());
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<InstanceRegion> ground_truth_instances(const GroundTruthMap& gt) {
  std::map<InstanceId, InstanceRegion> regions;
  for (const auto& [key, v] : gt.voxels) {
    auto& r = regions[v.instance];
    r.id = v.instance;
    r.voxels.push_back(key);
  }
  std::vector<InstanceRegion> out;
  for (auto& [id, r] : regions) {
    std::sort(r.voxels.begin(), r.voxels.end());
    out.push_back(std::move(r));
  }
  return out;
}

double voxel_iou(std::span<const VoxelKey> a, std::span<const VoxelKey> b) {
  std::vector<VoxelKey> sa(a.begin(), a.end());
  std::vector<VoxelKey> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  sa.erase(std::unique(sa.begin(), sa.end()), sa.end());
  std::sort(sb.begin(), sb.end());
  sb.erase(std::unique(sb.begin(), sb.end()), sb.end());
  std::size_t inter = 0;
  auto ia = sa.begin();
  auto ib = sb.begin();
  while (ia != sa.end() && ib != sb.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++inter;
      ++ia;
      ++ib;
    }
  }
  const std::size_t uni = sa.size() + sb.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

/// IoU of every prediction against every GT instance (row per prediction).
std::vector<std::vector<double>> iou_matrix(std::span<const InstanceRegion> predictions,
                                            std::span<const InstanceRegion> ground_truth) {
  absl::flat_hash_map<VoxelKey, std::size_t> gt_index;
  for (std::size_t g = 0; g < ground_truth.size(); ++g) {
    for (const auto& key : ground_truth[g].voxels) gt_index[key] = g;
  }
  std::vector<std::vector<double>> iou(predictions.size(),
                                       std::vector<double>(ground_truth.size(), 0.0));
  for (std::size_t p = 0; p < predictions.size(); ++p) {
    std::vector<std::size_t> inter(ground_truth.size(), 0);
    for (const auto& key : predictions[p].voxels) {
      if (auto it = gt_index.find(key); it != gt_index.end()) ++inter[it->second];
    }
    for (std::size_t g = 0; g < ground_truth.size(); ++g) {
      if (inter[g] == 0) continue;
      const double uni = static_cast<double>(predictions[p].voxels.size() +
                                             ground_truth[g].voxels.size() - inter[g]);
      iou[p][g] = static_cast<double>(inter[g]) / uni;
    }
  }
  return iou;
}

double ap_from_matrix(std::span<const InstanceRegion> predictions,
                      const std::vector<std::vector<double>>& iou, std::size_t n_gt,
                      double threshold) {
  std::vector<std::size_t> order(predictions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (predictions[a].confidence != predictions[b].confidence) {
      return predictions[a].confidence > predictions[b].confidence;
    }
    return predictions[a].id < predictions[b].id;
  });

  std::vector<bool> matched(n_gt, false);
  std::vector<double> precision;
  std::vector<double> recall;
  std::size_t tp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& row = iou[order[k]];
    std::size_t best = n_gt;
    double best_iou = threshold;
    for (std::size_t g = 0; g < n_gt; ++g) {
      if (!matched[g] && row[g] >= best_iou && (best == n_gt || row[g] > row[best])) {
        best = g;
        best_iou = row[g];
      }
    }
    if (best != n_gt) {
      matched[best] = true;
      ++tp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
  }

  double sum = 0.0;
  for (int step = 0; step <= 100; ++step) {
    const double r = step / 100.0;
    double p = 0.0;
    for (std::size_t k = 0; k < precision.size(); ++k) {
      if (recall[k] >= r - 1e-12) p = std::max(p, precision[k]);
    }
    sum += p;
  }
  return sum / 101.0;
}

}  // namespace

double average_precision_at(std::span<const InstanceRegion> predictions,
                            std::span<const InstanceRegion> ground_truth, double iou_threshold) {
  if (ground_truth.empty()) throw_validation("instance AP: ground truth is empty");
  const auto iou = iou_matrix(predictions, ground_truth);
  return ap_from_matrix(predictions, iou, ground_truth.size(), iou_threshold);
}

ApScores instance_ap(std::span<const InstanceRegion> predictions,
                     std::span<const InstanceRegion> ground_truth) {
  if (ground_truth.empty()) throw_validation("instance AP: ground truth is empty");
  const auto iou = iou_matrix(predictions, ground_truth);
  ApScores s;
  double sum = 0.0;
  for (int t = 0; t < 10; ++t) {
    const double thr = 0.5 + 0.05 * t;
    const double ap = ap_from_matrix(predictions, iou, ground_truth.size(), thr);
    sum += ap;
    if (t == 0) s.ap50 = ap;
  }
  s.ap = sum / 10.0;
  s.ap25 = ap_from_matrix(predictions, iou, ground_truth.size(), 0.25);
  return s;
}

SemanticScores semantic_scores(const absl::flat_hash_map<VoxelKey, int>& predicted,
                               const absl::flat_hash_map<VoxelKey, int>& ground_truth) {
  std::map<int, std::size_t> tp;
  std::map<int, std::size_t> fp;
  std::map<int, std::size_t> gt_count;
  for (const auto& [key, gt_class] : ground_truth) {
    ++gt_count[gt_class];
    auto it = predicted.find(key);
    if (it == predicted.end()) continue;
    if (it->second == gt_class) {
      ++tp[gt_class];
    } else {
      ++fp[it->second];
    }
  }
  for (const auto& [key, pred_class] : predicted) {
    if (!ground_truth.contains(key)) ++fp[pred_class];
  }
  SemanticScores s;
  if (gt_count.empty()) return s;
  for (const auto& [c, n] : gt_count) {
    const double t = static_cast<double>(tp[c]);
    s.miou += t / static_cast<double>(n + fp[c]);
    s.macc += t / static_cast<double>(n);
  }
  s.miou /= static_cast<double>(gt_count.size());
  s.macc /= static_cast<double>(gt_count.size());
  return s;
}

std::vector<double> retrieval_recall(const Codebook& codebook,
                                     std::span<const RetrievalQuery> queries,
                                     std::span<const std::size_t> ks) {
  if (queries.empty()) throw_validation("retrieval recall: no queries");
  std::size_t k_max = 0;
  for (const auto k : ks) {
    if (k == 0) throw_usage("retrieval recall: k must be at least 1");
    k_max = std::max(k_max, k);
  }
  std::vector<std::size_t> hits(ks.size(), 0);
  for (const auto& q : queries) {
    for (const auto id : q.targets) {
      if (!codebook.contains(id)) {
        throw_validation("retrieval recall: unknown instance " + std::to_string(id));
      }
    }
    const auto ranked = retrieve(codebook, q.embedding, k_max);
    std::size_t first_hit = ranked.size() + 1;
    for (const auto& h : ranked) {
      if (std::find(q.targets.begin(), q.targets.end(), h.id) != q.targets.end()) {
        first_hit = h.rank;
        break;
      }
    }
    for (std::size_t j = 0; j < ks.size(); ++j) {
      if (first_hit <= ks[j]) ++hits[j];
    }
  }
  std::vector<double> out;
  for (const auto h : hits) out.push_back(static_cast<double>(h) / static_cast<double>(queries.size()));
  return out;
}

std::string EvalReport::to_json() const {
  nlohmann::json recalls = nlohmann::json::object();
  for (const auto& [name, r] : recall) {
    recalls[name] = {{"top1", r[0]}, {"top2", r[1]}, {"top3", r[2]}};
  }
  nlohmann::json diag = nlohmann::json::array();
  for (const auto& d : diagnostics) {
    diag.push_back({{"gt_instance", d.gt_instance},
                    {"gt_voxels", d.gt_voxels},
                    {"best_prediction", d.best_prediction == kNoInstance
                                            ? nlohmann::json(nullptr)
                                            : nlohmann::json(d.best_prediction)},
                    {"best_iou", d.best_iou}});
  }
  nlohmann::json j = {{"AP", instance.ap},     {"AP50", instance.ap50},
                      {"AP25", instance.ap25}, {"mIoU", semantic.miou},
                      {"mAcc", semantic.macc}, {"recall", recalls},
                      {"predicted_instances", predicted_instances},
                      {"gt_instances", gt_instances},
                      {"per_instance", diag}};
  return j.dump(2);
}

std::string EvalReport::to_table() const {
  char buf[256];
  std::string out;
  out += "3D instance segmentation\n";
  out += "  AP      AP50    AP25\n";
  std::snprintf(buf, sizeof(buf), "  %6.2f  %6.2f  %6.2f\n", 100 * instance.ap,
                100 * instance.ap50, 100 * instance.ap25);
  out += buf;
  out += "3D semantic segmentation\n";
  out += "  mIoU    mAcc\n";
  std::snprintf(buf, sizeof(buf), "  %6.2f  %6.2f\n", 100 * semantic.miou, 100 * semantic.macc);
  out += buf;
  out += "Retrieval recall\n";
  out += "  queries   top-1   top-2   top-3\n";
  for (const auto& [name, r] : recall) {
    std::snprintf(buf, sizeof(buf), "  %-8s  %6.2f  %6.2f  %6.2f\n", name.c_str(), 100 * r[0],
                  100 * r[1], 100 * r[2]);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "instances: %zu predicted, %zu ground truth\n",
                predicted_instances, gt_instances);
  out += buf;
  return out;
}

namespace {

/// Shared tail of the two evaluation entry points.
EvalReport evaluate_regions(std::span<const InstanceRegion> predictions,
                            const absl::flat_hash_map<VoxelKey, int>& predicted_classes,
                            const Codebook& codebook, const SyntheticScene& scene,
                            const GroundTruthMap& gt, const EvalOptions& options) {
  const auto gt_regions = ground_truth_instances(gt);
  EvalReport report;
  report.instance = instance_ap(predictions, gt_regions);
  report.predicted_instances = predictions.size();
  report.gt_instances = gt_regions.size();

  absl::flat_hash_map<VoxelKey, int> gt_classes;
  for (const auto& [key, v] : gt.voxels) gt_classes[key] = v.class_id;
  report.semantic = semantic_scores(predicted_classes, gt_classes);

  const auto iou = iou_matrix(predictions, gt_regions);
  for (std::size_t g = 0; g < gt_regions.size(); ++g) {
    InstanceDiagnostic d;
    d.gt_instance = gt_regions[g].id;
    d.gt_voxels = gt_regions[g].voxels.size();
    for (std::size_t p = 0; p < predictions.size(); ++p) {
      if (iou[p][g] > d.best_iou) {
        d.best_iou = iou[p][g];
        d.best_prediction = predictions[p].id;
      }
    }
    report.diagnostics.push_back(d);
  }

  // A prediction stands for the GT object holding the majority of its voxels.
  absl::flat_hash_map<InstanceId, int> class_of;
  for (const auto& o : scene.objects) class_of[o.id] = o.class_id;
  std::map<int, std::vector<InstanceId>> targets_by_class;
  for (const auto& p : predictions) {
    std::map<InstanceId, std::size_t> tally;
    for (const auto& key : p.voxels) {
      if (auto it = gt.voxels.find(key); it != gt.voxels.end()) ++tally[it->second.instance];
    }
    for (const auto& [gid, n] : tally) {
      if (2 * n > p.voxels.size()) targets_by_class[class_of.at(gid)].push_back(p.id);
    }
  }

  std::set<InstanceId> present;
  for (const auto& r : gt_regions) present.insert(r.id);
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<RetrievalQuery> clean;
  std::vector<RetrievalQuery> noisy;
  for (const auto& o : scene.objects) {
    if (!present.contains(o.id)) continue;
    RetrievalQuery q;
    q.embedding = scene.class_embeddings.at(static_cast<std::size_t>(o.class_id));
    q.targets = targets_by_class[o.class_id];
    RetrievalQuery qn = q;
    for (auto& x : qn.embedding) x += options.noisy_query_sigma * normal(rng);
    clean.push_back(std::move(q));
    noisy.push_back(std::move(qn));
  }
  const std::array<std::size_t, 3> ks{1, 2, 3};
  if (!clean.empty() && !codebook.empty()) {
    for (const auto& [name, queries] : {std::pair{"class", &clean}, std::pair{"noisy", &noisy}}) {
      const auto r = retrieval_recall(codebook, *queries, ks);
      report.recall[name] = {r[0], r[1], r[2]};
    }
  }
  return report;
}

}  // namespace

EvalReport evaluate_map(const VoxelMap& map, const Codebook& codebook, const SyntheticScene& scene,
                        const GroundTruthMap& gt, const EvalOptions& options) {
  if (std::abs(map.resolution() - gt.resolution) > 1e-12) {
    throw_validation("evaluate: map resolution " + std::to_string(map.resolution()) +
                     " != ground truth resolution " + std::to_string(gt.resolution));
  }
  const auto predictions = predicted_instances(map);

  std::vector<ClassEmbedding> classes;
  for (std::size_t c = 0; c < scene.class_embeddings.size(); ++c) {
    classes.push_back({static_cast<int>(c), scene.class_embeddings[c]});
  }
  const auto instance_class =
      codebook.empty() ? std::map<InstanceId, int>{} : semantic_labels(codebook, classes);
  absl::flat_hash_map<VoxelKey, int> predicted_classes;
  for (const auto& [key, cell] : map.cells()) {
    if (auto it = instance_class.find(cell.argmax()); it != instance_class.end()) {
      predicted_classes[key] = it->second;
    }
  }
  return evaluate_regions(predictions, predicted_classes, codebook, scene, gt, options);
}

EvalReport evaluate_ground_truth(const SyntheticScene& scene, const GroundTruthMap& gt,
                                 const EvalOptions& options) {
  const auto regions = ground_truth_instances(gt);
  Codebook codebook;
  for (const auto& o : scene.objects) {
    const auto& e = scene.class_embeddings.at(static_cast<std::size_t>(o.class_id));
    codebook.insert({o.id, e, 1.0, std::nullopt, 0.0});
  }
  absl::flat_hash_map<VoxelKey, int> classes;
  for (const auto& [key, v] : gt.voxels) classes[key] = v.class_id;
  return evaluate_regions(regions, classes, codebook, scene, gt, options);
}

}  // namespace voxelox
