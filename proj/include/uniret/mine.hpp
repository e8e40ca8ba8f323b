#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uniret/featurize.hpp"
#include "uniret/index.hpp"
#include "uniret/model.hpp"
#include "uniret/records.hpp"

namespace uniret {

struct MineConfig {
  std::size_t top_n = 100;
  std::size_t m_out = 20;
  std::uint64_t seed = 0;
  bool drop_unfindable = true;
  int threads = 0;
};

struct MineReport {
  std::size_t queries_in = 0;
  std::size_t dropped = 0;  // no positive in the top_n hits
  std::size_t emitted = 0;
  std::size_t negatives_padded = 0;  // total shortfall below m_out
};

struct MineResult {
  std::vector<QueryRecord> queries;  // negative_document_ids replaced
  MineReport report;
};

// For each query: retrieve top_n hits with the model; drop the query when no
// positive id appears among them (if drop_unfindable); otherwise fill its
// negatives with m_out uniform no-replacement samples from hits minus
// positives. When m_out covers every eligible hit they are all emitted in
// retrieval rank order and the shortfall below m_out is counted; there is no
// corpus fallback at mining time.
MineResult mine(const ModelParams& params, std::span<const QueryRecord> queries,
                MediaLoader& media, const EmbeddingIndex& index, const MineConfig& cfg);

std::string render_report(const MineReport& report);

}  // namespace uniret
