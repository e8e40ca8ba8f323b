#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uniret/datastore.hpp"
#include "uniret/model.hpp"

namespace uniret {

// N unit-norm rows of dim D stored as 32-bit floats, with an aligned docid
// table. Immutable after load.
struct EmbeddingIndex {
  std::uint32_t dim = 0;
  std::vector<std::string> docids;
  std::vector<float> rows;  // docids.size() * dim, row-major

  std::size_t size() const { return docids.size(); }
  std::span<const float> row(std::size_t i) const {
    return {rows.data() + i * dim, dim};
  }
};

struct SearchHit {
  std::string docid;
  double score = 0.0;
  std::uint32_t rank = 0;  // 1-based
};

// Documents are assigned to shard `shard_index` of `shard_count` by corpus
// position modulo shard_count, keeping input order within the shard.
EmbeddingIndex encode_corpus(const ModelParams& params, const CorpusStore& store,
                             std::size_t shard_index, std::size_t shard_count,
                             std::size_t batch_size, int threads);

// Inverse of the modulo sharding: interleaves shard rows round-robin so the
// merge of all shards reproduces corpus order.
EmbeddingIndex merge_shards(std::span<const EmbeddingIndex> shards);

// Prefix-truncates every row to d components and renormalizes (32-bit
// storage). Raises DegeneratePrefix on a zero-norm row prefix.
EmbeddingIndex truncate_index(const EmbeddingIndex& index, std::uint32_t d);

// Index file: magic "URIX", version, dim, count, docid table, float32 rows.
void write_index(std::ostream& out, const EmbeddingIndex& index);
EmbeddingIndex read_index(std::istream& in);
void save_index(const std::string& path, const EmbeddingIndex& index);
EmbeddingIndex load_index(const std::string& path);

// Exact top-k by inner product; ties broken by docid ascending; min(k, N)
// hits with ranks from 1. With `dim` given, both the query and each row are
// prefix-truncated and renormalized before scoring; zero-norm row prefixes
// score -inf and are reported through `degenerate_rows` when provided.
std::vector<SearchHit> search(const EmbeddingIndex& index, std::span<const double> query,
                              std::size_t k, std::optional<std::uint32_t> dim = std::nullopt,
                              std::vector<std::size_t>* degenerate_rows = nullptr);

// Maps search over queries; parallel across queries and, when partitions > 1,
// across corpus chunks. Results are independent of partitioning.
std::vector<std::vector<SearchHit>> batch_search(const EmbeddingIndex& index,
                                                 std::span<const std::vector<double>> queries,
                                                 std::size_t k,
                                                 std::optional<std::uint32_t> dim = std::nullopt,
                                                 int threads = 1, std::size_t partitions = 1);

}  // namespace uniret
