#include "voxelox/codebook.hpp"

#include "voxelox/error.hpp"

namespace voxelox {

const CodebookRecord* Codebook::find(InstanceId id) const {
  auto it = records_.find(id);
  return it == records_.end() ? nullptr : &it->second;
}

CodebookRecord& Codebook::at(InstanceId id) {
  auto it = records_.find(id);
  if (it == records_.end()) {
    throw_validation("codebook: unknown instance " + std::to_string(id));
  }
  return it->second;
}

void Codebook::check_dim(std::size_t dim) const {
  if (dim_ != 0 && dim != dim_) {
    throw_validation("codebook: embedding dimension " + std::to_string(dim) + " != " +
                     std::to_string(dim_));
  }
}

void Codebook::create(InstanceId id, std::span<const float> feature, double weight,
                      std::optional<std::string> caption) {
  check_dim(feature.size());
  if (records_.contains(id)) {
    throw_validation("codebook: instance " + std::to_string(id) + " already exists");
  }
  dim_ = feature.size();
  CodebookRecord rec;
  rec.id = id;
  rec.embedding.assign(feature.begin(), feature.end());
  rec.weight = weight;
  rec.caption = std::move(caption);
  rec.caption_weight = rec.caption ? weight : 0.0;
  records_.emplace(id, std::move(rec));
}

void Codebook::fuse(InstanceId id, std::span<const float> feature, double weight,
                    const std::optional<std::string>& caption) {
  check_dim(feature.size());
  CodebookRecord& rec = at(id);
  if (!(weight > 0.0)) return;
  const double total = rec.weight + weight;
  for (std::size_t k = 0; k < rec.embedding.size(); ++k) {
    rec.embedding[k] = (rec.weight * rec.embedding[k] + weight * feature[k]) / total;
  }
  rec.weight = total;
  if (caption && (!rec.caption || weight > rec.caption_weight)) {
    rec.caption = caption;
    rec.caption_weight = weight;
  }
}

void Codebook::merge(InstanceId src, InstanceId dst) {
  if (src == dst) throw_validation("codebook: cannot merge an instance into itself");
  CodebookRecord& from = at(src);
  CodebookRecord& into = at(dst);
  const double total = from.weight + into.weight;
  if (total > 0.0) {
    for (std::size_t k = 0; k < into.embedding.size(); ++k) {
      into.embedding[k] = (into.weight * into.embedding[k] + from.weight * from.embedding[k]) / total;
    }
  }
  into.weight = total;
  if (from.caption && (!into.caption || from.caption_weight > into.caption_weight)) {
    into.caption = from.caption;
    into.caption_weight = from.caption_weight;
  }
  records_.erase(src);
}

void Codebook::insert(CodebookRecord record) {
  check_dim(record.embedding.size());
  dim_ = record.embedding.size();
  const InstanceId id = record.id;
  if (!records_.emplace(id, std::move(record)).second) {
    throw_validation("codebook: duplicate instance " + std::to_string(id));
  }
}

}  // namespace voxelox
