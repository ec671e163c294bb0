#pragma once

#include "voxelox/instance_id.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace voxelox {

/// Fused embedding of one instance. `embedding` is the weight-averaged
/// observation feature and is not renormalized.
struct CodebookRecord {
  InstanceId id = 0;
  std::vector<double> embedding;
  double weight = 0.0;
  std::optional<std::string> caption;
  /// Credibility of the observation the caption came from.
  double caption_weight = 0.0;

  bool operator==(const CodebookRecord&) const = default;
};

class Codebook {
public:
  Codebook() = default;
  explicit Codebook(std::size_t embedding_dim) : dim_(embedding_dim) {}

  /// 0 until the first record fixes it.
  std::size_t embedding_dim() const { return dim_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const std::map<InstanceId, CodebookRecord>& records() const { return records_; }

  const CodebookRecord* find(InstanceId id) const;
  bool contains(InstanceId id) const { return records_.contains(id); }

  /// Starts a record from its first observation.
  void create(InstanceId id, std::span<const float> feature, double weight,
              std::optional<std::string> caption);

  /// Weighted running mean: f <- (W f + w x) / (W + w), W <- W + w.
  /// A zero weight leaves the record untouched. The caption is replaced when
  /// `weight` exceeds the credibility of the stored caption.
  void fuse(InstanceId id, std::span<const float> feature, double weight,
            const std::optional<std::string>& caption);

  /// Merges record `src` into `dst` by weight and removes `src`.
  void merge(InstanceId src, InstanceId dst);

  /// Inserts a fully formed record (snapshot restore).
  void insert(CodebookRecord record);

  void check_dim(std::size_t dim) const;

  bool operator==(const Codebook&) const = default;

private:
  CodebookRecord& at(InstanceId id);

  std::size_t dim_ = 0;
  std::map<InstanceId, CodebookRecord> records_;
};

}  // namespace voxelox
