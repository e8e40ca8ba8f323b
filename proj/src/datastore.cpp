#include "uniret/datastore.hpp"

#include <algorithm>
#include <unordered_set>

#include "uniret/error.hpp"
#include "uniret/util.hpp"

namespace uniret {

CorpusStore::CorpusStore(std::vector<CorpusRecord> records, std::string media_root)
    : records_(std::move(records)), media_(std::move(media_root)) {
  by_id_.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (!by_id_.emplace(records_[i].docid, i).second)
      raise(ErrorKind::DuplicateDocId, "duplicate docid in corpus: " + records_[i].docid);
  }
}

const CorpusRecord& CorpusStore::by_id(const std::string& docid) const {
  const auto it = by_id_.find(docid);
  if (it == by_id_.end()) raise(ErrorKind::DanglingDocId, "unknown docid: " + docid);
  return records_[it->second];
}

TrainGroup resolve_group(const CorpusStore& store, const QueryRecord& query, std::size_t m,
                         Rng& rng) {
  if (query.positive_ids.empty())
    raise(ErrorKind::DanglingDocId, "query '" + query.query_id + "' has no positives");
  for (const auto* list : {&query.positive_ids, &query.negative_ids})
    for (const auto& id : *list)
      if (!store.contains(id))
        raise(ErrorKind::DanglingDocId,
              "query '" + query.query_id + "' references unknown docid: " + id);

  TrainGroup group;
  group.query = &query;
  const std::size_t pos_pick = rng.below(query.positive_ids.size());
  group.positive = &store.by_id(query.positive_ids[pos_pick]);

  std::unordered_set<std::string> excluded(query.positive_ids.begin(), query.positive_ids.end());
  const std::size_t from_listed = std::min(m, query.negative_ids.size());
  if (from_listed > 0) {
    const auto picks = rng.sample_without_replacement(query.negative_ids.size(), from_listed);
    for (const std::size_t idx : picks) {
      const std::string& id = query.negative_ids[idx];
      group.negatives.push_back(&store.by_id(id));
      excluded.insert(id);
    }
  }
  while (group.negatives.size() < m) {
    group.padded = true;
    if (excluded.size() >= store.size())
      raise(ErrorKind::EmptyCorpusFallback,
            "query '" + query.query_id + "': no corpus documents left to pad negatives");
    // Rejection-sample an unexcluded document; excluded stays small relative
    // to the corpus in any workable configuration.
    for (;;) {
      const CorpusRecord& cand = store.at(rng.below(store.size()));
      if (excluded.count(cand.docid) != 0) continue;
      excluded.insert(cand.docid);
      group.negatives.push_back(&cand);
      break;
    }
  }
  return group;
}

std::vector<PlannedBatch> plan_epoch(std::span<const EpochDataset> datasets,
                                     std::size_t batch_size, Rng& rng) {
  if (batch_size == 0) raise(ErrorKind::Usage, "batch size must be positive");
  std::vector<std::vector<PlannedBatch>> queues(datasets.size());
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    const auto& ds = datasets[d];
    if (ds.query_count == 0) raise(ErrorKind::EmptyDataset, "dataset '" + ds.name + "' is empty");
    if (!(ds.weight > 0.0))
      raise(ErrorKind::Usage, "dataset '" + ds.name + "' must have positive weight");
    std::vector<std::size_t> order(ds.query_count);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    for (std::size_t off = 0; off < order.size(); off += batch_size) {
      PlannedBatch batch;
      batch.dataset_index = d;
      const std::size_t end = std::min(off + batch_size, order.size());
      batch.query_indices.assign(order.begin() + off, order.begin() + end);
      queues[d].push_back(std::move(batch));
    }
  }

  std::vector<PlannedBatch> plan;
  std::vector<std::size_t> next(datasets.size(), 0);
  for (;;) {
    double total = 0.0;
    for (std::size_t d = 0; d < datasets.size(); ++d)
      total += datasets[d].weight * static_cast<double>(queues[d].size() - next[d]);
    if (total <= 0.0) break;
    const double pick = rng.next_double() * total;
    double acc = 0.0;
    std::size_t chosen = datasets.size();
    for (std::size_t d = 0; d < datasets.size(); ++d) {
      acc += datasets[d].weight * static_cast<double>(queues[d].size() - next[d]);
      if (pick < acc) {
        chosen = d;
        break;
      }
    }
    if (chosen == datasets.size() || next[chosen] >= queues[chosen].size()) {
      // fp edge: fall back to the last dataset with batches remaining
      for (std::size_t d = datasets.size(); d-- > 0;)
        if (next[d] < queues[d].size()) {
          chosen = d;
          break;
        }
    }
    plan.push_back(std::move(queues[chosen][next[chosen]]));
    ++next[chosen];
  }
  return plan;
}

TrainBatch collate(std::span<const TrainGroup> groups, const Featurizer& featurize, int threads) {
  if (groups.empty()) raise(ErrorKind::Usage, "cannot collate an empty batch");
  const std::size_t m = groups.front().negatives.size();
  for (const auto& g : groups)
    if (g.negatives.size() != m)
      raise(ErrorKind::Usage, "collate requires a uniform negative count per group");

  TrainBatch batch;
  batch.negatives_per_query = m;
  batch.queries.resize(groups.size());
  batch.documents.resize(groups.size() * (1 + m));
  batch.targets.resize(groups.size());

  parallel_for(groups.size(), threads, [&](std::size_t i) {
    const TrainGroup& g = groups[i];
    batch.queries[i] = featurize(payloads_of(*g.query));
    const std::size_t base = i * (1 + m);
    batch.documents[base] = featurize(payloads_of(*g.positive));
    for (std::size_t n = 0; n < m; ++n)
      batch.documents[base + 1 + n] = featurize(payloads_of(*g.negatives[n]));
    batch.targets[i] = base;
  });

  batch.feature_width = batch.queries.front().width;
  for (const auto& v : batch.queries)
    if (v.width != batch.feature_width)
      raise(ErrorKind::Usage, "inconsistent feature widths in batch");
  for (const auto& v : batch.documents)
    if (v.width != batch.feature_width)
      raise(ErrorKind::Usage, "inconsistent feature widths in batch");
  return batch;
}

}  // namespace uniret
