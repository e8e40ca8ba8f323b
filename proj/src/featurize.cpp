#include "uniret/featurize.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include "uniret/error.hpp"
#include "uniret/util.hpp"

namespace uniret {

double FeatureVec::dot(const FeatureVec& other) const {
  double acc = 0.0;
  auto a = entries.begin();
  auto b = other.entries.begin();
  while (a != entries.end() && b != other.entries.end()) {
    if (a->first < b->first) {
      ++a;
    } else if (b->first < a->first) {
      ++b;
    } else {
      acc += a->second * b->second;
      ++a;
      ++b;
    }
  }
  return acc;
}

namespace {

constexpr unsigned char kPrefixSentinel = 0x02;
constexpr unsigned char kSuffixSentinel = 0x03;

void accumulate_trigrams(std::string_view content, std::uint32_t width,
                         std::map<std::uint32_t, double>& counts) {
  std::string padded;
  padded.reserve(content.size() + 2);
  padded.push_back(static_cast<char>(kPrefixSentinel));
  padded.append(content);
  padded.push_back(static_cast<char>(kSuffixSentinel));
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    const std::uint64_t h = fnv1a64(std::string_view(padded).substr(i, 3));
    counts[static_cast<std::uint32_t>(h % width)] += 1.0;
  }
}

FeatureVec normalized(std::uint32_t width, const std::map<std::uint32_t, double>& counts) {
  double sq = 0.0;
  for (const auto& [idx, v] : counts) sq += v * v;
  const double norm = std::sqrt(sq);
  FeatureVec out;
  out.width = width;
  out.entries.reserve(counts.size());
  for (const auto& [idx, v] : counts) out.entries.emplace_back(idx, v / norm);
  return out;
}

}  // namespace

FeatureVec featurize_bytes(std::string_view content, std::uint32_t width) {
  if (content.empty()) raise(ErrorKind::EmptyContent, "cannot featurize empty content");
  std::map<std::uint32_t, double> counts;
  accumulate_trigrams(content, width, counts);
  return normalized(width, counts);
}

MediaLoader::MediaLoader(std::string root, std::size_t max_cached)
    : root_(std::move(root)), max_cached_(max_cached == 0 ? 1 : max_cached) {
  if (!root_.empty() && root_.back() == '/') root_.pop_back();
}

std::shared_ptr<const std::string> MediaLoader::load(const std::string& relative_path) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    const auto it = cache_.find(relative_path);
    if (it != cache_.end()) {
      order_.splice(order_.begin(), order_, it->second.second);
      return it->second.first;
    }
  }
  const std::string full = root_.empty() ? relative_path : root_ + "/" + relative_path;
  std::ifstream in(full, std::ios::binary);
  if (!in) raise(ErrorKind::MediaReadError, "cannot read media file: " + full);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) raise(ErrorKind::MediaReadError, "error reading media file: " + full);
  auto data = std::make_shared<const std::string>(std::move(bytes));
  std::lock_guard<std::mutex> lock(mu_);
  const auto it = cache_.find(relative_path);
  if (it != cache_.end()) return it->second.first;  // raced with another loader
  order_.push_front(relative_path);
  cache_.emplace(relative_path, std::make_pair(data, order_.begin()));
  while (cache_.size() > max_cached_) {
    cache_.erase(order_.back());
    order_.pop_back();
  }
  return data;
}

FeatureVec featurize_payloads(const Payloads& payloads, MediaLoader& media, std::uint32_t width) {
  if (!payloads.text && payloads.media_paths.empty())
    raise(ErrorKind::NoPayload, "record has no payload to featurize");
  // Sum of per-payload normalized vectors, renormalized: accumulate counts
  // per payload, normalize each, then merge.
  std::map<std::uint32_t, double> merged;
  auto add_normalized = [&](std::string_view content) {
    const FeatureVec v = featurize_bytes(content, width);
    for (const auto& [idx, val] : v.entries) merged[idx] += val;
  };
  if (payloads.text) add_normalized(*payloads.text);
  for (const auto& path : payloads.media_paths) {
    const auto bytes = media.load(path);
    add_normalized(*bytes);
  }
  return normalized(width, merged);
}

}  // namespace uniret
