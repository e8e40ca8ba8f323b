#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace uniret {

// qid -> docid -> relevance grade. Duplicate (qid, docid) lines are an error.
using Qrels = std::map<std::string, std::map<std::string, int>>;

// Ordered hits per query; the canonical TREC line is
// `qid Q0 docid rank score tag`.
struct Run {
  std::string tag = "uniret";
  std::map<std::string, std::vector<std::pair<std::string, double>>> by_query;
};

Qrels read_qrels(std::istream& in);
Qrels load_qrels(const std::string& path);

Run read_run(std::istream& in);
Run load_run(const std::string& path);
void write_run(std::ostream& out, const Run& run);
void save_run(const std::string& path, const Run& run);

struct MetricResult {
  std::map<std::string, double> per_query;
  double mean = 0.0;
  std::size_t evaluated = 0;
  std::size_t skipped_no_relevant = 0;  // qrels queries with no grade > 0
};

// DCG = sum over ranks r <= k of gain(rel_r)/log2(r+1); linear gain by
// default, 2^rel - 1 behind the flag. IDCG truncates the descending qrels
// grades at k. Queries without relevant documents are excluded and counted;
// qrels queries missing from the run score 0 and are included.
MetricResult ndcg_at_k(const Run& run, const Qrels& qrels, std::size_t k,
                       bool exponential_gain = false);

MetricResult recall_at_k(const Run& run, const Qrels& qrels, std::size_t k);

}  // namespace uniret
