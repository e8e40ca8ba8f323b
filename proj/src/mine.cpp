#include "uniret/mine.hpp"

#include <sstream>
#include <unordered_set>

#include "uniret/error.hpp"
#include "uniret/rng.hpp"
#include "uniret/util.hpp"

namespace uniret {

MineResult mine(const ModelParams& params, std::span<const QueryRecord> queries,
                MediaLoader& media, const EmbeddingIndex& index, const MineConfig& cfg) {
  check_params(params);
  if (cfg.top_n == 0) raise(ErrorKind::Usage, "top_n must be at least 1");
  if (cfg.m_out == 0) raise(ErrorKind::Usage, "m_out must be at least 1");
  if (params.dim != index.dim)
    raise(ErrorKind::CountMismatch, "model dim does not match index dim");

  enum class Outcome { Dropped, Emitted };
  std::vector<Outcome> outcomes(queries.size(), Outcome::Dropped);
  std::vector<QueryRecord> mined(queries.size());
  std::vector<std::size_t> shortfalls(queries.size(), 0);

  parallel_for(queries.size(), cfg.threads, [&](std::size_t qi) {
    const QueryRecord& q = queries[qi];
    const FeatureVec fv = featurize_payloads(payloads_of(q), media, params.feature_width);
    const std::vector<double> emb = encode(params, fv);
    const std::vector<SearchHit> hits = search(index, emb, cfg.top_n);

    const std::unordered_set<std::string> positives(q.positive_ids.begin(), q.positive_ids.end());
    bool positive_found = false;
    std::vector<std::string> eligible;  // rank order
    eligible.reserve(hits.size());
    for (const auto& hit : hits) {
      if (positives.count(hit.docid) != 0)
        positive_found = true;
      else
        eligible.push_back(hit.docid);
    }
    if (!positive_found && cfg.drop_unfindable) return;  // stays Dropped

    QueryRecord out = q;
    out.negative_ids.clear();
    const std::size_t take = std::min(cfg.m_out, eligible.size());
    if (take == eligible.size()) {
      // the whole eligible set is emitted, kept in retrieval rank order
      out.negative_ids = std::move(eligible);
    } else {
      Rng rng = Rng::derive(cfg.seed, {0xA, qi});
      for (const std::size_t idx : rng.sample_without_replacement(eligible.size(), take))
        out.negative_ids.push_back(eligible[idx]);
    }
    shortfalls[qi] = cfg.m_out - take;
    mined[qi] = std::move(out);
    outcomes[qi] = Outcome::Emitted;
  });

  MineResult result;
  result.report.queries_in = queries.size();
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    if (outcomes[qi] == Outcome::Emitted) {
      ++result.report.emitted;
      result.report.negatives_padded += shortfalls[qi];
      result.queries.push_back(std::move(mined[qi]));
    } else {
      ++result.report.dropped;
    }
  }
  return result;
}

std::string render_report(const MineReport& report) {
  std::ostringstream out;
  out << "mining report:\n";
  out << "  queries in:       " << report.queries_in << '\n';
  out << "  dropped:          " << report.dropped << '\n';
  out << "  emitted:          " << report.emitted << '\n';
  out << "  negatives padded: " << report.negatives_padded << '\n';
  return std::move(out).str();
}

}  // namespace uniret
