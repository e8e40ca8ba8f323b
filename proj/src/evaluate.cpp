#include "uniret/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "uniret/error.hpp"
#include "uniret/util.hpp"

namespace uniret {
namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

long parse_long(const std::string& s, std::size_t line_no, const char* what) {
  std::size_t used = 0;
  long v = 0;
  try {
    v = std::stol(s, &used);
  } catch (const std::exception&) {
    raise(ErrorKind::MalformedLine,
          std::string("bad ") + what + " at line " + std::to_string(line_no) + ": " + s);
  }
  if (used != s.size())
    raise(ErrorKind::MalformedLine,
          std::string("bad ") + what + " at line " + std::to_string(line_no) + ": " + s);
  return v;
}

double parse_score(const std::string& s, std::size_t line_no) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    raise(ErrorKind::MalformedLine, "bad score at line " + std::to_string(line_no) + ": " + s);
  }
  if (used != s.size())
    raise(ErrorKind::MalformedLine, "bad score at line " + std::to_string(line_no) + ": " + s);
  return v;
}

}  // namespace

Qrels read_qrels(std::istream& in) {
  Qrels qrels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_ws(line);
    if (fields.size() != 4)
      raise(ErrorKind::MalformedLine,
            "qrels line " + std::to_string(line_no) + " must have 4 fields");
    const long grade = parse_long(fields[3], line_no, "grade");
    if (grade < 0)
      raise(ErrorKind::MalformedLine,
            "negative grade at line " + std::to_string(line_no));
    auto& docs = qrels[fields[0]];
    if (!docs.emplace(fields[2], static_cast<int>(grade)).second)
      raise(ErrorKind::DuplicateJudgment,
            "duplicate judgment (" + fields[0] + ", " + fields[2] + ") at line " +
                std::to_string(line_no));
  }
  return qrels;
}

Qrels load_qrels(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::Io, "cannot open qrels: " + path);
  return read_qrels(in);
}

Run read_run(std::istream& in) {
  Run run;
  run.tag.clear();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_ws(line);
    if (fields.size() != 6)
      raise(ErrorKind::MalformedLine,
            "run line " + std::to_string(line_no) + " must have 6 fields");
    const long rank = parse_long(fields[3], line_no, "rank");
    const double score = parse_score(fields[4], line_no);
    if (run.tag.empty())
      run.tag = fields[5];
    else if (run.tag != fields[5])
      raise(ErrorKind::MalformedLine,
            "run tag changes at line " + std::to_string(line_no));
    auto& hits = run.by_query[fields[0]];
    if (rank != static_cast<long>(hits.size()) + 1)
      raise(ErrorKind::MalformedLine, "rank " + std::to_string(rank) + " out of sequence at line " +
                                          std::to_string(line_no));
    if (!hits.empty() && score > hits.back().second)
      raise(ErrorKind::MalformedLine,
            "score increases with rank at line " + std::to_string(line_no));
    for (const auto& [docid, s] : hits)
      if (docid == fields[2])
        raise(ErrorKind::MalformedLine, "duplicate docid '" + fields[2] + "' for query '" +
                                            fields[0] + "' at line " + std::to_string(line_no));
    hits.emplace_back(fields[2], score);
  }
  if (run.tag.empty()) run.tag = "uniret";
  return run;
}

Run load_run(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::Io, "cannot open run: " + path);
  return read_run(in);
}

void write_run(std::ostream& out, const Run& run) {
  for (const auto& [qid, hits] : run.by_query) {
    for (std::size_t r = 0; r < hits.size(); ++r) {
      out << qid << " Q0 " << hits[r].first << ' ' << (r + 1) << ' '
          << format_double(hits[r].second) << ' ' << run.tag << '\n';
    }
  }
}

void save_run(const std::string& path, const Run& run) {
  std::ofstream out(path);
  if (!out) raise(ErrorKind::Io, "cannot open for writing: " + path);
  write_run(out, run);
  out.flush();
  if (!out) raise(ErrorKind::Io, "error writing run: " + path);
}

MetricResult ndcg_at_k(const Run& run, const Qrels& qrels, std::size_t k,
                       bool exponential_gain) {
  if (k == 0) raise(ErrorKind::Usage, "k must be at least 1");
  const auto gain = [exponential_gain](int rel) {
    return exponential_gain ? std::pow(2.0, rel) - 1.0 : static_cast<double>(rel);
  };
  MetricResult result;
  double sum = 0.0;
  for (const auto& [qid, judged] : qrels) {
    std::vector<int> grades;
    grades.reserve(judged.size());
    bool any_relevant = false;
    for (const auto& [docid, g] : judged) {
      grades.push_back(g);
      if (g > 0) any_relevant = true;
    }
    if (!any_relevant) {
      ++result.skipped_no_relevant;
      continue;
    }
    std::sort(grades.begin(), grades.end(), std::greater<int>());
    double idcg = 0.0;
    for (std::size_t r = 0; r < std::min(k, grades.size()); ++r)
      idcg += gain(grades[r]) / std::log2(static_cast<double>(r) + 2.0);

    double dcg = 0.0;
    const auto it = run.by_query.find(qid);
    if (it != run.by_query.end()) {
      const auto& hits = it->second;
      for (std::size_t r = 0; r < std::min(k, hits.size()); ++r) {
        const auto jt = judged.find(hits[r].first);
        if (jt != judged.end())
          dcg += gain(jt->second) / std::log2(static_cast<double>(r) + 2.0);
      }
    }
    const double value = dcg / idcg;
    result.per_query.emplace(qid, value);
    sum += value;
    ++result.evaluated;
  }
  if (result.evaluated > 0) result.mean = sum / static_cast<double>(result.evaluated);
  return result;
}

MetricResult recall_at_k(const Run& run, const Qrels& qrels, std::size_t k) {
  if (k == 0) raise(ErrorKind::Usage, "k must be at least 1");
  MetricResult result;
  double sum = 0.0;
  for (const auto& [qid, judged] : qrels) {
    std::set<std::string> relevant;
    for (const auto& [docid, g] : judged)
      if (g > 0) relevant.insert(docid);
    if (relevant.empty()) {
      ++result.skipped_no_relevant;
      continue;
    }
    std::size_t found = 0;
    const auto it = run.by_query.find(qid);
    if (it != run.by_query.end()) {
      const auto& hits = it->second;
      for (std::size_t r = 0; r < std::min(k, hits.size()); ++r)
        if (relevant.count(hits[r].first) != 0) ++found;
    }
    const double value = static_cast<double>(found) / static_cast<double>(relevant.size());
    result.per_query.emplace(qid, value);
    sum += value;
    ++result.evaluated;
  }
  if (result.evaluated > 0) result.mean = sum / static_cast<double>(result.evaluated);
  return result;
}

}  // namespace uniret
