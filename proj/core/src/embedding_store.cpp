#include "fsml/embedding_store.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "fsml/error.hpp"

namespace fsml {

namespace {

constexpr std::array<char, 4> kMagic = {'F', 'S', 'E', 'M'};
constexpr std::uint32_t kFlagNonnegative = 1u;

void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) {
    out.push_back(static_cast<std::byte>((v >> shift) & 0xffu));
  }
}

std::uint32_t get_u32(std::span<const std::byte> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(bytes[offset + i]) << (8 * i);
  }
  return v;
}

}  // namespace

EmbeddingStore::EmbeddingStore(std::uint32_t dim, bool nonnegative, std::vector<ClassId> labels,
                               std::vector<float> features)
    : dim_(dim), nonnegative_(nonnegative), labels_(std::move(labels)), features_(std::move(features)) {
  if (dim_ == 0) {
    throw Error(ErrorCode::kInvalidArgument, "embedding store: dim must be positive");
  }
  if (features_.size() != labels_.size() * dim_) {
    throw Error(ErrorCode::kDimensionMismatch,
                "embedding store: feature count " + std::to_string(features_.size()) +
                    " does not match " + std::to_string(labels_.size()) + " samples x dim " +
                    std::to_string(dim_));
  }
  for (std::size_t s = 0; s < labels_.size(); ++s) {
    for (std::size_t i = 0; i < dim_; ++i) {
      const float v = features_[s * dim_ + i];
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::kFormat,
                    "embedding store: non-finite feature at sample " + std::to_string(s));
      }
      if (nonnegative_ && v < 0.0f) {
        throw Error(ErrorCode::kFormat, "embedding store: negative feature at sample " +
                                            std::to_string(s) + " in a nonnegative store");
      }
    }
    class_index_[labels_[s]].push_back(s);
  }
}

std::span<const float> EmbeddingStore::features(std::size_t sample) const {
  if (sample >= labels_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "embedding store: sample index out of range");
  }
  return {features_.data() + sample * dim_, dim_};
}

std::vector<ClassId> EmbeddingStore::classes() const {
  std::vector<ClassId> out;
  out.reserve(class_index_.size());
  for (const auto& [c, _] : class_index_) out.push_back(c);
  return out;
}

const std::vector<std::size_t>& EmbeddingStore::samples_of(ClassId c) const {
  auto it = class_index_.find(c);
  if (it == class_index_.end()) {
    throw Error(ErrorCode::kInvalidArgument, "embedding store: unknown class " + std::to_string(c));
  }
  return it->second;
}

bool operator==(const EmbeddingStore& a, const EmbeddingStore& b) {
  return a.dim_ == b.dim_ && a.nonnegative_ == b.nonnegative_ && a.labels_ == b.labels_ &&
         a.features_ == b.features_;
}

std::vector<std::byte> encode_fsem(const EmbeddingStore& store) {
  std::vector<std::byte> out;
  out.reserve(kFsemHeaderBytes + store.size() * 4 * (1 + std::size_t{store.dim()}));
  for (char ch : kMagic) out.push_back(static_cast<std::byte>(ch));
  put_u32(out, kFsemVersion);
  put_u32(out, static_cast<std::uint32_t>(store.size()));
  put_u32(out, store.dim());
  put_u32(out, store.nonnegative() ? kFlagNonnegative : 0u);
  for (ClassId label : store.labels()) put_u32(out, label);
  for (float v : store.raw_features()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

EmbeddingStore decode_fsem(std::span<const std::byte> bytes) {
  if (bytes.size() < kFsemHeaderBytes ||
      std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw Error(ErrorCode::kFormat, "FSEM: bad magic");
  }
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kFsemVersion) {
    throw Error(ErrorCode::kFormat, "FSEM: unsupported version " + std::to_string(version));
  }
  const std::uint32_t n = get_u32(bytes, 8);
  const std::uint32_t dim = get_u32(bytes, 12);
  const std::uint32_t flags = get_u32(bytes, 16);
  if (dim == 0) {
    throw Error(ErrorCode::kFormat, "FSEM: dim must be positive");
  }
  const std::uint64_t expected =
      kFsemHeaderBytes + 4ull * n + 4ull * static_cast<std::uint64_t>(n) * dim;
  if (bytes.size() < expected) {
    throw Error(ErrorCode::kFormat, "FSEM: truncated payload (" + std::to_string(bytes.size()) +
                                        " bytes, header implies " + std::to_string(expected) + ")");
  }
  if (bytes.size() > expected) {
    throw Error(ErrorCode::kFormat, "FSEM: trailing bytes after payload");
  }

  std::vector<ClassId> labels(n);
  std::size_t offset = kFsemHeaderBytes;
  for (auto& label : labels) {
    label = get_u32(bytes, offset);
    offset += 4;
  }
  std::vector<float> features(static_cast<std::size_t>(n) * dim);
  for (auto& v : features) {
    v = std::bit_cast<float>(get_u32(bytes, offset));
    offset += 4;
  }
  return EmbeddingStore(dim, (flags & kFlagNonnegative) != 0, std::move(labels), std::move(features));
}

EmbeddingStore load_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIo, "cannot open " + path.string());
  }
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_fsem(std::as_bytes(std::span(raw)));
}

void save_store(const EmbeddingStore& store, const std::filesystem::path& path) {
  const auto bytes = encode_fsem(store);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::kIo, "cannot write " + path.string());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw Error(ErrorCode::kIo, "write failed for " + path.string());
  }
}

std::set<ClassId> SplitManifest::all_classes() const {
  std::set<ClassId> out;
  for (const auto& [_, ids] : splits) out.insert(ids.begin(), ids.end());
  return out;
}

SplitManifest parse_manifest(const std::string& json_text) {
  SplitManifest m;
  try {
    const auto doc = nlohmann::json::parse(json_text);
    for (const auto& [name, ids] : doc.at("splits").items()) {
      auto& bucket = m.splits[name];
      for (const auto& id : ids) bucket.insert(id.get<ClassId>());
    }
    if (doc.contains("class_names")) {
      for (const auto& [id, name] : doc.at("class_names").items()) {
        m.class_names[static_cast<ClassId>(std::stoul(id))] = name.get<std::string>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("manifest: ") + e.what());
  } catch (const std::logic_error& e) {
    throw Error(ErrorCode::kFormat, std::string("manifest: bad class id key: ") + e.what());
  }

  // Pairwise disjointness.
  std::map<ClassId, std::string> owner;
  for (const auto& [name, ids] : m.splits) {
    for (ClassId c : ids) {
      auto [it, inserted] = owner.emplace(c, name);
      if (!inserted) {
        throw Error(ErrorCode::kFormat, "manifest: class " + std::to_string(c) +
                                            " appears in splits '" + it->second + "' and '" +
                                            name + "'");
      }
    }
  }
  return m;
}

SplitManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kIo, "cannot open " + path.string());
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str());
}

std::string manifest_to_json(const SplitManifest& manifest) {
  nlohmann::json doc;
  doc["splits"] = nlohmann::json::object();
  for (const auto& [name, ids] : manifest.splits) {
    doc["splits"][name] = std::vector<ClassId>(ids.begin(), ids.end());
  }
  doc["class_names"] = nlohmann::json::object();
  for (const auto& [id, name] : manifest.class_names) {
    doc["class_names"][std::to_string(id)] = name;
  }
  return doc.dump(2);
}

void validate_manifest(const SplitManifest& manifest, const EmbeddingStore& store) {
  for (const auto& [name, ids] : manifest.splits) {
    for (ClassId c : ids) {
      if (!store.has_class(c)) {
        throw Error(ErrorCode::kFormat, "manifest split '" + name + "' references class " +
                                            std::to_string(c) + " absent from the store");
      }
    }
  }
}

EmbeddingStore restrict_to_split(const EmbeddingStore& store, const SplitManifest& manifest,
                                 const std::string& split) {
  auto it = manifest.splits.find(split);
  if (it == manifest.splits.end()) {
    throw Error(ErrorCode::kInvalidArgument, "unknown split '" + split + "'");
  }
  const auto& wanted = it->second;
  std::vector<ClassId> labels;
  std::vector<float> features;
  for (std::size_t s = 0; s < store.size(); ++s) {
    if (!wanted.contains(store.label(s))) continue;
    labels.push_back(store.label(s));
    auto row = store.features(s);
    features.insert(features.end(), row.begin(), row.end());
  }
  return EmbeddingStore(store.dim(), store.nonnegative(), std::move(labels), std::move(features));
}

}  // namespace fsml
