#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "uniret/featurize.hpp"
#include "uniret/records.hpp"
#include "uniret/rng.hpp"

namespace uniret {

// Immutable after build; media bytes load lazily through media().
class CorpusStore {
 public:
  CorpusStore(std::vector<CorpusRecord> records, std::string media_root);

  std::size_t size() const { return records_.size(); }
  const CorpusRecord& at(std::size_t index) const { return records_[index]; }
  const CorpusRecord& by_id(const std::string& docid) const;
  bool contains(const std::string& docid) const { return by_id_.count(docid) != 0; }
  std::span<const CorpusRecord> records() const { return records_; }
  MediaLoader& media() const { return media_; }

 private:
  std::vector<CorpusRecord> records_;
  std::unordered_map<std::string, std::size_t> by_id_;
  mutable MediaLoader media_;
};

struct TrainGroup {
  const QueryRecord* query = nullptr;
  const CorpusRecord* positive = nullptr;
  std::vector<const CorpusRecord*> negatives;  // exactly m
  bool padded = false;                         // some negatives drawn from the corpus fallback
};

// One positive sampled uniformly; m negatives without replacement from the
// listed negatives, shortfall padded uniformly from the corpus excluding the
// query's positives and already-chosen negatives.
TrainGroup resolve_group(const CorpusStore& store, const QueryRecord& query, std::size_t m,
                         Rng& rng);

struct EpochDataset {
  std::string name;
  std::size_t query_count = 0;
  double weight = 1.0;
};

struct PlannedBatch {
  std::size_t dataset_index = 0;
  std::vector<std::size_t> query_indices;
};

// Shuffles each dataset, slices into homogeneous batches of size B (the final
// partial batch is kept), and interleaves datasets with probability
// proportional to weight x remaining batches. Deterministic under rng state.
std::vector<PlannedBatch> plan_epoch(std::span<const EpochDataset> datasets, std::size_t batch_size,
                                     Rng& rng);

struct TrainBatch {
  std::uint32_t feature_width = 0;
  std::size_t negatives_per_query = 0;
  std::vector<FeatureVec> queries;    // B entries
  std::vector<FeatureVec> documents;  // B*(1+m): [pos(0), negs(0)..., pos(1), ...]
  std::vector<std::size_t> targets;   // targets[i] = i*(1+m)
};

using Featurizer = std::function<FeatureVec(const Payloads&)>;

TrainBatch collate(std::span<const TrainGroup> groups, const Featurizer& featurize, int threads);

}  // namespace uniret
