#include "uniret/records.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "uniret/error.hpp"
#include "uniret/util.hpp"

namespace uniret {
namespace {

using ordered_json = nlohmann::ordered_json;

bool is_token(const std::string& s) {
  if (s.empty()) return false;
  for (unsigned char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') return false;
  }
  return true;
}

void check_docid(const std::string& id, std::size_t line_no, const char* what) {
  if (id.empty())
    raise(ErrorKind::MissingDocId, std::string("empty ") + what + " at line " + std::to_string(line_no));
  if (!is_token(id))
    raise(ErrorKind::BadDocId,
          std::string(what) + " contains whitespace at line " + std::to_string(line_no) + ": '" + id + "'");
}

// Media payloads must stay inside media_root: relative, no ".." components.
void check_media_path(const std::string& path, std::size_t line_no) {
  if (path.empty())
    raise(ErrorKind::BadMediaPath, "empty media path at line " + std::to_string(line_no));
  if (path.front() == '/')
    raise(ErrorKind::BadMediaPath,
          "absolute media path at line " + std::to_string(line_no) + ": " + path);
  std::size_t pos = 0;
  while (pos <= path.size()) {
    const std::size_t next = path.find('/', pos);
    const std::string part = path.substr(pos, next == std::string::npos ? next : next - pos);
    if (part == "..")
      raise(ErrorKind::BadMediaPath,
            "media path escapes media root at line " + std::to_string(line_no) + ": " + path);
    if (next == std::string::npos) break;
    pos = next + 1;
  }
}

nlohmann::json parse_line(const std::string& line, std::size_t line_no) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::MalformedLine,
          "malformed record at line " + std::to_string(line_no) + ": " + e.what());
  }
  if (!j.is_object())
    raise(ErrorKind::MalformedLine,
          "record at line " + std::to_string(line_no) + " is not an object");
  return j;
}

std::string require_string(const nlohmann::json& j, const char* key, std::size_t line_no) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null())
    raise(ErrorKind::MissingDocId,
          std::string("missing field '") + key + "' at line " + std::to_string(line_no));
  if (!it->is_string())
    raise(ErrorKind::MalformedLine,
          std::string("field '") + key + "' must be a string at line " + std::to_string(line_no));
  return it->get<std::string>();
}

std::optional<std::string> optional_string(const nlohmann::json& j, const char* key,
                                           std::size_t line_no) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string())
    raise(ErrorKind::MalformedLine,
          std::string("field '") + key + "' must be a string at line " + std::to_string(line_no));
  return it->get<std::string>();
}

std::vector<std::string> id_list(const nlohmann::json& j, const char* key, std::size_t line_no) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  if (!it->is_array())
    raise(ErrorKind::MalformedLine,
          std::string("field '") + key + "' must be an array at line " + std::to_string(line_no));
  std::vector<std::string> out;
  out.reserve(it->size());
  for (const auto& v : *it) {
    if (!v.is_string())
      raise(ErrorKind::MalformedLine,
            std::string("field '") + key + "' must contain strings at line " + std::to_string(line_no));
    out.push_back(v.get<std::string>());
    check_docid(out.back(), line_no, "document id");
  }
  return out;
}

void count_unknown(const nlohmann::json& j, std::span<const char* const> known,
                   ParseWarnings* warnings) {
  if (warnings == nullptr) return;
  for (const auto& item : j.items()) {
    bool found = false;
    for (const char* k : known) {
      if (item.key() == k) {
        found = true;
        break;
      }
    }
    if (!found) ++warnings->unknown_fields;
  }
}

template <typename Fn>
void for_each_line(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    fn(line, line_no);
  }
}

constexpr const char* kCorpusFields[] = {"docid", "document_text", "document_image",
                                         "document_video", "document_audio"};
constexpr const char* kQueryFields[] = {"query_id",        "query_text",
                                        "query_image",     "query_video",
                                        "query_audio",     "positive_document_ids",
                                        "negative_document_ids"};
constexpr const char* kV1Fields[] = {"query_id", "query", "positive_passages",
                                     "negative_passages"};

ordered_json passage_json(const V1Passage& p) {
  ordered_json j;
  j["docid"] = p.docid;
  j["title"] = p.title;
  j["text"] = p.text;
  return j;
}

std::string merged_passage_text(const V1Passage& p) {
  return p.title.empty() ? p.text : p.title + "\n" + p.text;
}

}  // namespace

Payloads payloads_of(const CorpusRecord& rec) {
  Payloads p;
  p.text = rec.text;
  for (const auto& m : {rec.image, rec.video, rec.audio})
    if (m) p.media_paths.push_back(*m);
  return p;
}

Payloads payloads_of(const QueryRecord& rec) {
  Payloads p;
  p.text = rec.text;
  for (const auto& m : {rec.image, rec.video, rec.audio})
    if (m) p.media_paths.push_back(*m);
  return p;
}

std::vector<CorpusRecord> parse_corpus(std::istream& in, ParseWarnings* warnings) {
  std::vector<CorpusRecord> out;
  for_each_line(in, [&](const std::string& line, std::size_t line_no) {
    const nlohmann::json j = parse_line(line, line_no);
    count_unknown(j, kCorpusFields, warnings);
    CorpusRecord rec;
    rec.docid = require_string(j, "docid", line_no);
    check_docid(rec.docid, line_no, "docid");
    rec.text = optional_string(j, "document_text", line_no);
    rec.image = optional_string(j, "document_image", line_no);
    rec.video = optional_string(j, "document_video", line_no);
    rec.audio = optional_string(j, "document_audio", line_no);
    if (!rec.has_payload())
      raise(ErrorKind::NoPayload,
            "corpus record '" + rec.docid + "' has no payload (line " + std::to_string(line_no) + ")");
    for (const auto& m : {rec.image, rec.video, rec.audio})
      if (m) check_media_path(*m, line_no);
    out.push_back(std::move(rec));
  });
  return out;
}

std::vector<QueryRecord> parse_queries(std::istream& in, ParseWarnings* warnings) {
  std::vector<QueryRecord> out;
  for_each_line(in, [&](const std::string& line, std::size_t line_no) {
    const nlohmann::json j = parse_line(line, line_no);
    count_unknown(j, kQueryFields, warnings);
    QueryRecord rec;
    rec.query_id = require_string(j, "query_id", line_no);
    check_docid(rec.query_id, line_no, "query_id");
    rec.text = optional_string(j, "query_text", line_no);
    rec.image = optional_string(j, "query_image", line_no);
    rec.video = optional_string(j, "query_video", line_no);
    rec.audio = optional_string(j, "query_audio", line_no);
    rec.positive_ids = id_list(j, "positive_document_ids", line_no);
    rec.negative_ids = id_list(j, "negative_document_ids", line_no);
    if (!rec.has_payload())
      raise(ErrorKind::NoPayload,
            "query '" + rec.query_id + "' has no payload (line " + std::to_string(line_no) + ")");
    for (const auto& m : {rec.image, rec.video, rec.audio})
      if (m) check_media_path(*m, line_no);
    std::unordered_set<std::string> pos(rec.positive_ids.begin(), rec.positive_ids.end());
    for (const auto& id : rec.negative_ids) {
      if (pos.count(id) != 0)
        raise(ErrorKind::OverlappingPosNeg, "query '" + rec.query_id + "' lists '" + id +
                                                "' as both positive and negative (line " +
                                                std::to_string(line_no) + ")");
    }
    out.push_back(std::move(rec));
  });
  return out;
}

std::vector<V1Record> parse_v1(std::istream& in, ParseWarnings* warnings) {
  std::vector<V1Record> out;
  for_each_line(in, [&](const std::string& line, std::size_t line_no) {
    const nlohmann::json j = parse_line(line, line_no);
    count_unknown(j, kV1Fields, warnings);
    V1Record rec;
    rec.query_id = require_string(j, "query_id", line_no);
    check_docid(rec.query_id, line_no, "query_id");
    rec.query = require_string(j, "query", line_no);
    auto read_passages = [&](const char* key, std::vector<V1Passage>& dst) {
      const auto it = j.find(key);
      if (it == j.end() || it->is_null()) return;
      if (!it->is_array())
        raise(ErrorKind::MalformedLine,
              std::string("field '") + key + "' must be an array at line " + std::to_string(line_no));
      for (const auto& pj : *it) {
        if (!pj.is_object())
          raise(ErrorKind::MalformedLine,
                std::string(key) + " entries must be objects at line " + std::to_string(line_no));
        V1Passage p;
        p.docid = require_string(pj, "docid", line_no);
        check_docid(p.docid, line_no, "docid");
        if (const auto t = optional_string(pj, "title", line_no)) p.title = *t;
        p.text = require_string(pj, "text", line_no);
        dst.push_back(std::move(p));
      }
    };
    read_passages("positive_passages", rec.positives);
    read_passages("negative_passages", rec.negatives);
    std::unordered_set<std::string> seen;
    for (const auto& p : rec.positives)
      if (!seen.insert(p.docid).second)
        raise(ErrorKind::DuplicateDocId, "duplicate docid '" + p.docid + "' within record '" +
                                             rec.query_id + "' (line " + std::to_string(line_no) + ")");
    for (const auto& p : rec.negatives)
      if (!seen.insert(p.docid).second)
        raise(ErrorKind::DuplicateDocId, "duplicate docid '" + p.docid + "' within record '" +
                                             rec.query_id + "' (line " + std::to_string(line_no) + ")");
    out.push_back(std::move(rec));
  });
  return out;
}

std::string corpus_record_json(const CorpusRecord& rec) {
  ordered_json j;
  j["docid"] = rec.docid;
  if (rec.text) j["document_text"] = *rec.text;
  if (rec.image) j["document_image"] = *rec.image;
  if (rec.video) j["document_video"] = *rec.video;
  if (rec.audio) j["document_audio"] = *rec.audio;
  return j.dump();
}

std::string query_record_json(const QueryRecord& rec) {
  ordered_json j;
  j["query_id"] = rec.query_id;
  if (rec.text) j["query_text"] = *rec.text;
  if (rec.image) j["query_image"] = *rec.image;
  if (rec.video) j["query_video"] = *rec.video;
  if (rec.audio) j["query_audio"] = *rec.audio;
  j["positive_document_ids"] = rec.positive_ids;
  j["negative_document_ids"] = rec.negative_ids;
  return j.dump();
}

void write_corpus(std::ostream& out, std::span<const CorpusRecord> records) {
  for (const auto& rec : records) out << corpus_record_json(rec) << '\n';
}

void write_queries(std::ostream& out, std::span<const QueryRecord> records) {
  for (const auto& rec : records) out << query_record_json(rec) << '\n';
}

ValidationReport validate(std::span<const QueryRecord> queries,
                          std::span<const CorpusRecord> corpus) {
  ValidationReport report;
  std::unordered_set<std::string> ids;
  ids.reserve(corpus.size());
  for (const auto& rec : corpus) {
    if (!ids.insert(rec.docid).second) {
      ++report.duplicate_docids;
      if (report.duplicate_samples.size() < 5) report.duplicate_samples.push_back(rec.docid);
    }
  }
  for (const auto& q : queries) {
    if (!q.has_payload()) ++report.queries_without_payload;
    for (const auto* list : {&q.positive_ids, &q.negative_ids}) {
      for (const auto& id : *list) {
        if (ids.count(id) == 0) {
          ++report.dangling_query_refs;
          if (report.dangling_samples.size() < 5) report.dangling_samples.push_back(id);
        }
      }
    }
  }
  return report;
}

std::string render_report(const ValidationReport& report) {
  std::ostringstream out;
  out << "validation: " << (report.ok() ? "ok" : "FAILED") << '\n';
  out << "  dangling query refs:    " << report.dangling_query_refs;
  if (!report.dangling_samples.empty()) {
    out << " (e.g.";
    for (const auto& s : report.dangling_samples) out << ' ' << s;
    out << ')';
  }
  out << '\n';
  out << "  duplicate docids:       " << report.duplicate_docids;
  if (!report.duplicate_samples.empty()) {
    out << " (e.g.";
    for (const auto& s : report.duplicate_samples) out << ' ' << s;
    out << ')';
  }
  out << '\n';
  out << "  queries without payload: " << report.queries_without_payload << '\n';
  return std::move(out).str();
}

ConvertResult convert_v1_to_v2(std::istream& v1_in) {
  ConvertResult result;
  std::unordered_map<std::string, std::uint64_t> content_hash;
  const std::vector<V1Record> v1 = parse_v1(v1_in);

  for (const auto& rec : v1) {
    QueryRecord q;
    q.query_id = rec.query_id;
    q.text = rec.query;
    auto absorb = [&](const V1Passage& p, std::vector<std::string>& ids) {
      ids.push_back(p.docid);
      const std::string merged = merged_passage_text(p);
      const std::uint64_t h = fnv1a64(merged);
      ++result.stats.passage_occurrences;
      result.stats.v1_materialized_bytes += passage_json(p).dump().size();
      const auto it = content_hash.find(p.docid);
      if (it == content_hash.end()) {
        content_hash.emplace(p.docid, h);
        CorpusRecord c;
        c.docid = p.docid;
        c.text = merged;
        result.corpus.push_back(std::move(c));
      } else if (it->second != h) {
        raise(ErrorKind::DocIdContentConflict,
              "docid '" + p.docid + "' appears with conflicting content");
      }
    };
    for (const auto& p : rec.positives) absorb(p, q.positive_ids);
    for (const auto& p : rec.negatives) absorb(p, q.negative_ids);
    result.queries.push_back(std::move(q));
  }

  result.stats.distinct_passages = result.corpus.size();
  for (const auto& c : result.corpus)
    result.stats.v2_corpus_bytes += corpus_record_json(c).size() + 1;
  for (const auto& q : result.queries)
    result.stats.v2_query_bytes += query_record_json(q).size() + 1;
  return result;
}

}  // namespace uniret
