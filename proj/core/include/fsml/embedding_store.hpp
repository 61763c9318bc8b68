#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace fsml {

using ClassId = std::uint32_t;

/**
 * Immutable collection of labeled feature vectors.
 *
 * Features are kept as 32-bit floats (the on-disk precision). Statistics
 * computed from them widen to double. Construction validates every
 * invariant, so a live EmbeddingStore is always well formed:
 *   - dim > 0 and every row has exactly dim finite entries
 *   - if nonnegative() every entry is >= 0
 *   - class_index() partitions the sample indices by label
 */
class EmbeddingStore {
 public:
  EmbeddingStore(std::uint32_t dim, bool nonnegative, std::vector<ClassId> labels,
                 std::vector<float> features);

  [[nodiscard]] std::uint32_t dim() const noexcept { return dim_; }
  [[nodiscard]] std::size_t size() const noexcept { return labels_.size(); }
  [[nodiscard]] bool nonnegative() const noexcept { return nonnegative_; }

  [[nodiscard]] ClassId label(std::size_t sample) const { return labels_.at(sample); }
  [[nodiscard]] std::span<const ClassId> labels() const noexcept { return labels_; }
  [[nodiscard]] std::span<const float> features(std::size_t sample) const;
  [[nodiscard]] std::span<const float> raw_features() const noexcept { return features_; }

  [[nodiscard]] const std::map<ClassId, std::vector<std::size_t>>& class_index() const noexcept {
    return class_index_;
  }
  [[nodiscard]] std::vector<ClassId> classes() const;
  [[nodiscard]] bool has_class(ClassId c) const { return class_index_.contains(c); }
  [[nodiscard]] const std::vector<std::size_t>& samples_of(ClassId c) const;

  friend bool operator==(const EmbeddingStore& a, const EmbeddingStore& b);

 private:
  std::uint32_t dim_;
  bool nonnegative_;
  std::vector<ClassId> labels_;
  std::vector<float> features_;
  std::map<ClassId, std::vector<std::size_t>> class_index_;
};

inline constexpr std::uint32_t kFsemVersion = 1;
inline constexpr std::size_t kFsemHeaderBytes = 20;

EmbeddingStore load_store(const std::filesystem::path& path);
void save_store(const EmbeddingStore& store, const std::filesystem::path& path);

// In-memory FSEM codec; load_store/save_store are thin file wrappers.
EmbeddingStore decode_fsem(std::span<const std::byte> bytes);
std::vector<std::byte> encode_fsem(const EmbeddingStore& store);

struct SplitManifest {
  std::map<std::string, std::set<ClassId>> splits;
  std::map<ClassId, std::string> class_names;

  [[nodiscard]] std::set<ClassId> all_classes() const;
};

SplitManifest parse_manifest(const std::string& json_text);
SplitManifest load_manifest(const std::filesystem::path& path);
std::string manifest_to_json(const SplitManifest& manifest);

// Throws if splits overlap or reference classes missing from the store.
void validate_manifest(const SplitManifest& manifest, const EmbeddingStore& store);

EmbeddingStore restrict_to_split(const EmbeddingStore& store, const SplitManifest& manifest,
                                 const std::string& split);

}  // namespace fsml
