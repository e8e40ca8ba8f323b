#include "uniret/index.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <unordered_set>

#include "uniret/binio.hpp"
#include "uniret/error.hpp"
#include "uniret/util.hpp"

namespace uniret {
namespace {

constexpr char kIndexMagic[4] = {'U', 'R', 'I', 'X'};
constexpr std::uint16_t kIndexVersion = 1;
constexpr double kNormFloor = 1e-12;

void check_distinct(const std::vector<std::string>& docids) {
  std::unordered_set<std::string_view> seen;
  seen.reserve(docids.size());
  for (const auto& id : docids)
    if (!seen.insert(id).second) raise(ErrorKind::DuplicateDocId, "duplicate docid in index: " + id);
}

}  // namespace

EmbeddingIndex encode_corpus(const ModelParams& params, const CorpusStore& store,
                             std::size_t shard_index, std::size_t shard_count,
                             std::size_t batch_size, int threads) {
  check_params(params);
  if (shard_count == 0 || shard_index >= shard_count)
    raise(ErrorKind::Usage, "shard index out of range");
  if (batch_size == 0) raise(ErrorKind::Usage, "batch size must be positive");

  std::vector<std::size_t> positions;
  for (std::size_t p = shard_index; p < store.size(); p += shard_count) positions.push_back(p);

  EmbeddingIndex index;
  index.dim = params.dim;
  index.docids.resize(positions.size());
  index.rows.resize(positions.size() * params.dim);

  for (std::size_t off = 0; off < positions.size(); off += batch_size) {
    const std::size_t end = std::min(off + batch_size, positions.size());
    parallel_for(end - off, threads, [&](std::size_t slot) {
      const std::size_t out_row = off + slot;
      const CorpusRecord& rec = store.at(positions[out_row]);
      try {
        const FeatureVec fv = featurize_payloads(payloads_of(rec), store.media(), params.feature_width);
        const std::vector<double> e = encode(params, fv);
        float* dst = index.rows.data() + out_row * params.dim;
        for (std::uint32_t r = 0; r < params.dim; ++r) dst[r] = static_cast<float>(e[r]);
      } catch (const Error& err) {
        raise(err.kind(), "docid '" + rec.docid + "': " + err.what());
      }
      index.docids[out_row] = rec.docid;
    });
  }
  return index;
}

EmbeddingIndex merge_shards(std::span<const EmbeddingIndex> shards) {
  if (shards.empty()) raise(ErrorKind::Usage, "no shards to merge");
  const std::uint32_t dim = shards.front().dim;
  std::size_t total = 0;
  for (const auto& s : shards) {
    if (s.dim != dim) raise(ErrorKind::CountMismatch, "shard dims differ");
    total += s.size();
  }
  const std::size_t n = shards.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t expect = total / n + (i < total % n ? 1 : 0);
    if (shards[i].size() != expect)
      raise(ErrorKind::CountMismatch, "shard " + std::to_string(i) + " holds " +
                                          std::to_string(shards[i].size()) + " rows, expected " +
                                          std::to_string(expect));
  }

  EmbeddingIndex out;
  out.dim = dim;
  out.docids.resize(total);
  out.rows.resize(total * dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < shards[i].size(); ++r) {
      const std::size_t p = i + r * n;
      out.docids[p] = shards[i].docids[r];
      std::memcpy(out.rows.data() + p * dim, shards[i].rows.data() + r * dim, dim * sizeof(float));
    }
  }
  check_distinct(out.docids);
  return out;
}

EmbeddingIndex truncate_index(const EmbeddingIndex& index, std::uint32_t d) {
  if (d == 0 || d > index.dim) raise(ErrorKind::Usage, "truncation dim out of range");
  EmbeddingIndex out;
  out.dim = d;
  out.docids = index.docids;
  out.rows.resize(index.size() * d);
  for (std::size_t i = 0; i < index.size(); ++i) {
    const float* src = index.rows.data() + i * index.dim;
    double sq = 0.0;
    for (std::uint32_t r = 0; r < d; ++r) sq += double(src[r]) * double(src[r]);
    const double norm = std::sqrt(sq);
    if (norm < kNormFloor)
      raise(ErrorKind::DegeneratePrefix, "zero-norm row prefix at row " + std::to_string(i));
    float* dst = out.rows.data() + i * d;
    for (std::uint32_t r = 0; r < d; ++r) dst[r] = static_cast<float>(double(src[r]) / norm);
  }
  return out;
}

void write_index(std::ostream& out, const EmbeddingIndex& index) {
  if (index.rows.size() != index.size() * index.dim)
    raise(ErrorKind::CountMismatch, "index row data does not match count");
  check_distinct(index.docids);
  BinWriter w(out);
  w.bytes(kIndexMagic, 4);
  w.u16(kIndexVersion);
  w.u32(index.dim);
  w.u64(index.size());
  for (const auto& id : index.docids) w.str_u32(id);
  for (const float x : index.rows) w.f32(x);
}

EmbeddingIndex read_index(std::istream& in) {
  BinReader r(in);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kIndexMagic, 4) != 0) raise(ErrorKind::BadMagic, "not an index file");
  const std::uint16_t version = r.u16();
  if (version != kIndexVersion)
    raise(ErrorKind::VersionMismatch, "unsupported index version " + std::to_string(version));
  EmbeddingIndex index;
  index.dim = r.u32();
  if (index.dim == 0) raise(ErrorKind::CountMismatch, "index dim must be positive");
  const std::uint64_t n = r.u64();
  index.docids.resize(n);
  for (auto& id : index.docids) id = r.str_u32();
  index.rows.resize(n * index.dim);
  for (auto& x : index.rows) x = r.f32();
  if (!r.at_eof()) raise(ErrorKind::CountMismatch, "trailing bytes after index payload");
  check_distinct(index.docids);
  return index;
}

void save_index(const std::string& path, const EmbeddingIndex& index) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::Io, "cannot open for writing: " + path);
  write_index(out, index);
  out.flush();
  if (!out) raise(ErrorKind::Io, "error writing index: " + path);
}

EmbeddingIndex load_index(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::Io, "cannot open index: " + path);
  return read_index(in);
}

namespace {

struct Scored {
  double score;
  std::size_t row;
};

// Scores every row against a (possibly truncated) query and keeps the exact
// top-k under (score desc, docid asc).
std::vector<SearchHit> search_range(const EmbeddingIndex& index, std::span<const double> query,
                                    std::size_t k, std::optional<std::uint32_t> dim,
                                    std::size_t row_begin, std::size_t row_end,
                                    std::vector<std::size_t>* degenerate_rows) {
  const std::uint32_t d = dim.value_or(index.dim);
  std::vector<double> q;
  if (dim.has_value()) {
    q = mrl_truncate(query, d);
  } else {
    q.assign(query.begin(), query.end());
  }

  std::vector<Scored> scored;
  scored.reserve(row_end - row_begin);
  for (std::size_t i = row_begin; i < row_end; ++i) {
    const float* row = index.rows.data() + i * index.dim;
    double score;
    if (dim.has_value()) {
      double sq = 0.0;
      for (std::uint32_t r = 0; r < d; ++r) sq += double(row[r]) * double(row[r]);
      const double norm = std::sqrt(sq);
      if (norm < kNormFloor) {
        if (degenerate_rows != nullptr) degenerate_rows->push_back(i);
        score = -std::numeric_limits<double>::infinity();
      } else {
        double dot = 0.0;
        for (std::uint32_t r = 0; r < d; ++r) dot += q[r] * double(row[r]);
        score = dot / norm;
      }
    } else {
      double dot = 0.0;
      for (std::uint32_t r = 0; r < index.dim; ++r) dot += q[r] * double(row[r]);
      score = dot;
    }
    scored.push_back({score, i});
  }

  const auto better = [&](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return index.docids[a.row] < index.docids[b.row];
  };
  const std::size_t take = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + take, scored.end(), better);
  scored.resize(take);

  std::vector<SearchHit> hits;
  hits.reserve(take);
  for (std::size_t r = 0; r < take; ++r)
    hits.push_back({index.docids[scored[r].row], scored[r].score, static_cast<std::uint32_t>(r + 1)});
  return hits;
}

}  // namespace

std::vector<SearchHit> search(const EmbeddingIndex& index, std::span<const double> query,
                              std::size_t k, std::optional<std::uint32_t> dim,
                              std::vector<std::size_t>* degenerate_rows) {
  if (k == 0) raise(ErrorKind::Usage, "k must be at least 1");
  if (query.size() != index.dim) raise(ErrorKind::CountMismatch, "query dim does not match index");
  if (dim.has_value() && (*dim == 0 || *dim > index.dim))
    raise(ErrorKind::Usage, "prefix dim out of range");
  return search_range(index, query, k, dim, 0, index.size(), degenerate_rows);
}

std::vector<std::vector<SearchHit>> batch_search(const EmbeddingIndex& index,
                                                 std::span<const std::vector<double>> queries,
                                                 std::size_t k, std::optional<std::uint32_t> dim,
                                                 int threads, std::size_t partitions) {
  if (k == 0) raise(ErrorKind::Usage, "k must be at least 1");
  if (partitions == 0) partitions = 1;
  partitions = std::min(partitions, std::max<std::size_t>(index.size(), 1));
  for (const auto& q : queries)
    if (q.size() != index.dim) raise(ErrorKind::CountMismatch, "query dim does not match index");
  if (dim.has_value() && (*dim == 0 || *dim > index.dim))
    raise(ErrorKind::Usage, "prefix dim out of range");

  std::vector<std::vector<SearchHit>> results(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t qi) {
    if (partitions == 1) {
      results[qi] = search_range(index, queries[qi], k, dim, 0, index.size(), nullptr);
      return;
    }
    // Exact merge of per-partition top-k lists under the same ordering.
    std::vector<SearchHit> pool;
    const std::size_t chunk = (index.size() + partitions - 1) / partitions;
    for (std::size_t p = 0; p < partitions; ++p) {
      const std::size_t begin = p * chunk;
      const std::size_t end = std::min(begin + chunk, index.size());
      if (begin >= end) break;
      auto part = search_range(index, queries[qi], k, dim, begin, end, nullptr);
      pool.insert(pool.end(), std::make_move_iterator(part.begin()),
                  std::make_move_iterator(part.end()));
    }
    std::sort(pool.begin(), pool.end(), [](const SearchHit& a, const SearchHit& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.docid < b.docid;
    });
    if (pool.size() > k) pool.resize(k);
    for (std::size_t r = 0; r < pool.size(); ++r) pool[r].rank = static_cast<std::uint32_t>(r + 1);
    results[qi] = std::move(pool);
  });
  return results;
}

}  // namespace uniret
