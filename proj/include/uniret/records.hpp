#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace uniret {

// One corpus document. Payload fields hold either inline text or a relative
// media path; at least one must be present.
struct CorpusRecord {
  std::string docid;
  std::optional<std::string> text;
  std::optional<std::string> image;
  std::optional<std::string> video;
  std::optional<std::string> audio;

  bool has_payload() const { return text || image || video || audio; }
  bool operator==(const CorpusRecord&) const = default;
};

struct QueryRecord {
  std::string query_id;
  std::optional<std::string> text;
  std::optional<std::string> image;
  std::optional<std::string> video;
  std::optional<std::string> audio;
  std::vector<std::string> positive_ids;
  std::vector<std::string> negative_ids;

  bool has_payload() const { return text || image || video || audio; }
  bool usable_for_training() const { return has_payload() && !positive_ids.empty(); }
  bool operator==(const QueryRecord&) const = default;
};

struct V1Passage {
  std::string docid;
  std::string title;
  std::string text;
};

struct V1Record {
  std::string query_id;
  std::string query;
  std::vector<V1Passage> positives;
  std::vector<V1Passage> negatives;
};

// The content a featurizer consumes: optional inline text plus any media
// paths, with the modality distinction erased.
struct Payloads {
  std::optional<std::string> text;
  std::vector<std::string> media_paths;

  bool empty() const { return !text && media_paths.empty(); }
};

Payloads payloads_of(const CorpusRecord& rec);
Payloads payloads_of(const QueryRecord& rec);

struct ParseWarnings {
  std::uint64_t unknown_fields = 0;
};

std::vector<CorpusRecord> parse_corpus(std::istream& in, ParseWarnings* warnings = nullptr);
std::vector<QueryRecord> parse_queries(std::istream& in, ParseWarnings* warnings = nullptr);
std::vector<V1Record> parse_v1(std::istream& in, ParseWarnings* warnings = nullptr);

void write_corpus(std::ostream& out, std::span<const CorpusRecord> records);
void write_queries(std::ostream& out, std::span<const QueryRecord> records);

std::string corpus_record_json(const CorpusRecord& rec);
std::string query_record_json(const QueryRecord& rec);

struct ValidationReport {
  std::uint64_t dangling_query_refs = 0;
  std::vector<std::string> dangling_samples;
  std::uint64_t duplicate_docids = 0;
  std::vector<std::string> duplicate_samples;
  std::uint64_t queries_without_payload = 0;

  bool ok() const {
    return dangling_query_refs == 0 && duplicate_docids == 0 && queries_without_payload == 0;
  }
};

ValidationReport validate(std::span<const QueryRecord> queries,
                          std::span<const CorpusRecord> corpus);

std::string render_report(const ValidationReport& report);

struct ConvertStats {
  std::uint64_t passage_occurrences = 0;
  std::uint64_t distinct_passages = 0;
  std::uint64_t v1_materialized_bytes = 0;  // serialized bytes of every passage occurrence
  std::uint64_t v2_corpus_bytes = 0;        // serialized v2 corpus lines
  std::uint64_t v2_query_bytes = 0;         // serialized v2 query lines

  double duplication_factor() const {
    return distinct_passages == 0
               ? 1.0
               : static_cast<double>(passage_occurrences) / static_cast<double>(distinct_passages);
  }
};

struct ConvertResult {
  std::vector<QueryRecord> queries;
  std::vector<CorpusRecord> corpus;
  ConvertStats stats;
};

// Splits materialized v1 training data into a deduplicated corpus plus
// id-referencing queries. Same docid with different content is an error.
ConvertResult convert_v1_to_v2(std::istream& v1_in);

}  // namespace uniret
