#pragma once

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "uniret/records.hpp"

namespace testutil {

// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<unsigned> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("uniret-" + tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// Reference FNV-1a written independently of the library (and differently:
// bytewise table-free loop over a uint64 accumulator with inline literals).
inline std::uint64_t reference_fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : bytes) {
    h = h ^ static_cast<std::uint64_t>(c);
    h = h * 0x100000001b3ULL;
  }
  return h;
}

// Reference nDCG@k computed the slow explicit way, independent of the
// library's evaluator.
inline double reference_ndcg(const std::vector<std::string>& ranking,
                             const std::map<std::string, int>& judged, std::size_t k,
                             bool exponential = false) {
  const auto gain = [exponential](int rel) {
    return exponential ? std::pow(2.0, rel) - 1.0 : static_cast<double>(rel);
  };
  double dcg = 0.0;
  for (std::size_t r = 0; r < ranking.size() && r < k; ++r) {
    const auto it = judged.find(ranking[r]);
    const int rel = it == judged.end() ? 0 : it->second;
    dcg += gain(rel) / (std::log(static_cast<double>(r) + 2.0) / std::log(2.0));
  }
  std::vector<int> grades;
  for (const auto& [doc, rel] : judged) grades.push_back(rel);
  std::sort(grades.rbegin(), grades.rend());
  double idcg = 0.0;
  for (std::size_t r = 0; r < grades.size() && r < k; ++r)
    idcg += gain(grades[r]) / (std::log(static_cast<double>(r) + 2.0) / std::log(2.0));
  if (idcg == 0.0) return -1.0;  // caller decides; no relevant docs
  return dcg / idcg;
}

inline double reference_recall(const std::vector<std::string>& ranking,
                               const std::map<std::string, int>& judged, std::size_t k) {
  std::size_t relevant = 0, found = 0;
  for (const auto& [doc, rel] : judged) {
    if (rel <= 0) continue;
    ++relevant;
    for (std::size_t r = 0; r < ranking.size() && r < k; ++r) {
      if (ranking[r] == doc) {
        ++found;
        break;
      }
    }
  }
  if (relevant == 0) return -1.0;
  return static_cast<double>(found) / static_cast<double>(relevant);
}

// Deterministic printable-ASCII corpus of near-duplicate query/doc pairs: each
// doc is a random string, each query is its doc with `edits` byte
// substitutions. The retrieval answer is the original doc.
struct SynthTask {
  std::vector<uniret::CorpusRecord> corpus;
  std::vector<uniret::QueryRecord> queries;  // one positive, no listed negatives
  std::map<std::string, std::string> answer;  // query_id -> docid
};

inline SynthTask make_synth_task(std::size_t docs, std::size_t doc_len, std::size_t edits,
                                 std::uint64_t seed) {
  static const std::string alphabet =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 .,;:-_#+*";
  std::mt19937_64 gen(seed);
  const auto pick = [&](std::size_t n) { return static_cast<std::size_t>(gen() % n); };

  SynthTask task;
  for (std::size_t i = 0; i < docs; ++i) {
    std::string content(doc_len, ' ');
    for (auto& c : content) c = alphabet[pick(alphabet.size())];
    uniret::CorpusRecord rec;
    rec.docid = "d" + std::to_string(i);
    rec.text = content;
    task.corpus.push_back(rec);

    std::string mutated = content;
    for (std::size_t e = 0; e < edits; ++e) {
      const std::size_t pos = pick(doc_len);
      char repl = alphabet[pick(alphabet.size())];
      while (repl == mutated[pos]) repl = alphabet[pick(alphabet.size())];
      mutated[pos] = repl;
    }
    uniret::QueryRecord q;
    q.query_id = "q" + std::to_string(i);
    q.text = mutated;
    q.positive_ids = {rec.docid};
    task.queries.push_back(q);
    task.answer[q.query_id] = rec.docid;
  }
  return task;
}

inline std::string corpus_jsonl(const std::vector<uniret::CorpusRecord>& corpus) {
  std::string out;
  for (const auto& rec : corpus) out += uniret::corpus_record_json(rec) + "\n";
  return out;
}

inline std::string queries_jsonl(const std::vector<uniret::QueryRecord>& queries) {
  std::string out;
  for (const auto& rec : queries) out += uniret::query_record_json(rec) + "\n";
  return out;
}

inline std::string qrels_text(const SynthTask& task) {
  std::string out;
  for (const auto& [qid, docid] : task.answer) out += qid + " 0 " + docid + " 1\n";
  return out;
}

}  // namespace testutil
