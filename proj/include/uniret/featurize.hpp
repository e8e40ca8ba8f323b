#pragma once

#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "uniret/records.hpp"

namespace uniret {

inline constexpr std::uint32_t kDefaultFeatureWidth = 4096;

// Sparse L2-normalized feature vector. Indices are strictly increasing.
struct FeatureVec {
  std::uint32_t width = 0;
  std::vector<std::pair<std::uint32_t, double>> entries;

  double dot(const FeatureVec& other) const;
};

// Hashed overlapping byte 3-grams over 0x02 + content + 0x03, FNV-1a 64
// folded mod width, counted, then L2-normalized. Empty content is an error.
FeatureVec featurize_bytes(std::string_view content, std::uint32_t width);

// Loads media payloads relative to a root directory, with a small LRU cache.
// Thread-safe. Missing or unreadable files raise MediaReadError.
class MediaLoader {
 public:
  explicit MediaLoader(std::string root, std::size_t max_cached = 64);

  std::shared_ptr<const std::string> load(const std::string& relative_path);
  const std::string& root() const { return root_; }

 private:
  std::string root_;
  std::size_t max_cached_;
  std::mutex mu_;
  std::list<std::string> order_;  // most recent first
  std::unordered_map<std::string,
                     std::pair<std::shared_ptr<const std::string>, std::list<std::string>::iterator>>
      cache_;
};

// Featurizes every payload of a record (text plus each media file's bytes),
// merging by element-wise sum followed by renormalization.
FeatureVec featurize_payloads(const Payloads& payloads, MediaLoader& media, std::uint32_t width);

}  // namespace uniret
