#include "uniret/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <memory>
#include <sstream>

#include "json.hpp"
#include "uniret/datastore.hpp"
#include "uniret/error.hpp"
#include "uniret/index.hpp"
#include "uniret/util.hpp"

namespace uniret {
namespace {

using ordered_json = nlohmann::ordered_json;

std::string file_digest(const std::string& path) {
  return hex_u64(fnv1a64(read_file_bytes(path)));
}

// Flat key=value reproducibility log, written before any output.
class Replog {
 public:
  Replog(std::string explicit_path, const std::string& primary_output, const char* command) {
    if (!explicit_path.empty())
      path_ = std::move(explicit_path);
    else if (!primary_output.empty())
      path_ = primary_output + ".replog";
    kv("command", command);
  }

  void kv(const std::string& key, const std::string& value) {
    lines_ += key + "=" + value + "\n";
  }
  void kv(const std::string& key, std::uint64_t value) { kv(key, std::to_string(value)); }
  void kv(const std::string& key, int value) { kv(key, std::to_string(value)); }
  void kv(const std::string& key, double value) { kv(key, format_double(value)); }
  void input(const std::string& key, const std::string& path) {
    kv(key, path);
    kv(key + ".fnv64", file_digest(path));
  }

  void commit() const {
    if (path_.empty()) return;
    write_file_bytes(path_, lines_);
  }

 private:
  std::string path_;
  std::string lines_;
};

std::vector<CorpusRecord> load_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::Io, "cannot open corpus: " + path);
  return parse_corpus(in);
}

std::vector<QueryRecord> load_queries_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::Io, "cannot open queries: " + path);
  return parse_queries(in);
}

std::vector<std::uint32_t> default_mrl_dims(std::uint32_t dim) {
  std::vector<std::uint32_t> dims;
  for (const std::uint32_t d : {16u, 32u})
    if (d < dim) dims.push_back(d);
  dims.push_back(dim);
  return dims;
}

EmbeddingIndex load_merged_index(const std::vector<std::string>& paths) {
  if (paths.empty()) raise(ErrorKind::Usage, "no index files given");
  if (paths.size() == 1) return load_index(paths[0]);
  std::vector<EmbeddingIndex> shards;
  shards.reserve(paths.size());
  for (const auto& p : paths) shards.push_back(load_index(p));
  return merge_shards(shards);
}

std::string dims_to_string(std::span<const std::uint32_t> dims) {
  std::string s;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i > 0) s += ",";
    s += std::to_string(dims[i]);
  }
  return s;
}

}  // namespace

ConvertOutcome cmd_convert(const ConvertOptions& opt) {
  if (opt.v1_path.empty() || opt.out_corpus.empty() || opt.out_queries.empty())
    raise(ErrorKind::Usage, "convert requires --input, --out-corpus and --out-queries");
  Replog log(opt.replog_path, opt.out_corpus, "convert");
  log.input("input", opt.v1_path);
  log.kv("out_corpus", opt.out_corpus);
  log.kv("out_queries", opt.out_queries);
  log.commit();

  std::ifstream in(opt.v1_path);
  if (!in) raise(ErrorKind::Io, "cannot open input: " + opt.v1_path);
  ConvertResult result = convert_v1_to_v2(in);
  if (result.queries.empty()) raise(ErrorKind::EmptyDataset, "input contains no records");

  {
    std::ofstream cout_(opt.out_corpus);
    if (!cout_) raise(ErrorKind::Io, "cannot open for writing: " + opt.out_corpus);
    write_corpus(cout_, result.corpus);
    if (!cout_) raise(ErrorKind::Io, "error writing: " + opt.out_corpus);
  }
  {
    std::ofstream qout(opt.out_queries);
    if (!qout) raise(ErrorKind::Io, "cannot open for writing: " + opt.out_queries);
    write_queries(qout, result.queries);
    if (!qout) raise(ErrorKind::Io, "error writing: " + opt.out_queries);
  }

  ConvertOutcome outcome;
  outcome.stats = result.stats;
  std::ostringstream text;
  text << "converted " << result.queries.size() << " queries, " << result.corpus.size()
       << " distinct documents\n";
  text << "  passage occurrences:  " << result.stats.passage_occurrences << '\n';
  text << "  duplication factor:   " << format_double(result.stats.duplication_factor()) << '\n';
  text << "  materialized bytes:   " << result.stats.v1_materialized_bytes << '\n';
  text << "  decoupled corpus:     " << result.stats.v2_corpus_bytes << " bytes\n";
  text << "  decoupled queries:    " << result.stats.v2_query_bytes << " bytes\n";
  outcome.rendered = std::move(text).str();
  return outcome;
}

ValidateOutcome cmd_validate(const ValidateOptions& opt) {
  if (opt.queries_path.empty() || opt.corpus_path.empty())
    raise(ErrorKind::Usage, "validate requires --queries and --corpus");
  Replog log(opt.replog_path, "", "validate");
  log.input("queries", opt.queries_path);
  log.input("corpus", opt.corpus_path);
  log.commit();

  const auto queries = load_queries_file(opt.queries_path);
  const auto corpus = load_corpus_file(opt.corpus_path);
  ValidateOutcome outcome;
  outcome.report = validate(queries, corpus);
  outcome.rendered = render_report(outcome.report);
  return outcome;
}

TrainOutcome cmd_train(const TrainOptions& opt) {
  if (opt.datasets.empty()) raise(ErrorKind::Usage, "train requires at least one --dataset");
  if (opt.out_checkpoint.empty()) raise(ErrorKind::Usage, "train requires --out");
  const std::string loss_path =
      opt.loss_log_path.empty() ? opt.out_checkpoint + ".loss.jsonl" : opt.loss_log_path;

  Replog log(opt.replog_path, opt.out_checkpoint, "train");
  for (std::size_t i = 0; i < opt.datasets.size(); ++i) {
    const auto& ds = opt.datasets[i];
    const std::string prefix = "dataset." + std::to_string(i);
    log.kv(prefix + ".name", ds.name);
    log.input(prefix + ".queries", ds.queries);
    log.input(prefix + ".corpus", ds.corpus);
    log.kv(prefix + ".weight", ds.weight);
  }
  if (!opt.init_checkpoint.empty()) log.input("init_checkpoint", opt.init_checkpoint);
  log.kv("media_root", opt.media_root);
  log.kv("out_checkpoint", opt.out_checkpoint);
  log.kv("loss_log", loss_path);
  log.kv("dim", std::size_t(opt.dim));
  log.kv("feature_width", std::size_t(opt.feature_width));
  log.kv("tau", opt.tau);
  const std::vector<std::uint32_t> mrl_dims =
      opt.mrl_dims.empty() ? default_mrl_dims(opt.dim) : opt.mrl_dims;
  log.kv("mrl_dims", dims_to_string(mrl_dims));
  log.kv("batch_size", opt.batch_size);
  log.kv("negatives_per_query", opt.negatives_per_query);
  log.kv("epochs", opt.epochs);
  log.kv("lr", opt.lr);
  log.kv("seed", opt.seed);
  log.kv("threads", opt.threads);
  log.commit();

  ModelParams params;
  if (!opt.init_checkpoint.empty()) {
    params = load_checkpoint(opt.init_checkpoint);
  } else {
    params = init_params(opt.dim, opt.feature_width, opt.tau, mrl_dims, opt.seed);
  }

  std::vector<std::unique_ptr<CorpusStore>> stores;
  std::vector<TrainDataset> datasets;
  for (const auto& ds : opt.datasets) {
    stores.push_back(std::make_unique<CorpusStore>(load_corpus_file(ds.corpus), opt.media_root));
    TrainDataset td;
    td.name = ds.name.empty() ? ds.queries : ds.name;
    td.weight = ds.weight;
    td.queries = load_queries_file(ds.queries);
    td.store = stores.back().get();
    datasets.push_back(std::move(td));
  }

  TrainConfig config;
  config.batch_size = opt.batch_size;
  config.negatives_per_query = opt.negatives_per_query;
  config.epochs = opt.epochs;
  config.lr = opt.lr;
  config.seed = opt.seed;
  config.threads = opt.threads;

  const std::vector<StepLog> steps = train(params, config, datasets);

  {
    std::ofstream out(loss_path);
    if (!out) raise(ErrorKind::Io, "cannot open for writing: " + loss_path);
    for (const auto& s : steps) {
      ordered_json j;
      j["step"] = s.step;
      j["dataset"] = s.dataset;
      j["loss_total"] = s.loss_total;
      j["loss_per_dim"] = s.per_dim;
      out << j.dump() << '\n';
    }
    if (!out) raise(ErrorKind::Io, "error writing: " + loss_path);
  }
  save_checkpoint(opt.out_checkpoint, params);

  TrainOutcome outcome;
  outcome.steps = steps.size();
  if (!steps.empty()) {
    outcome.first_loss = steps.front().loss_total;
    outcome.last_loss = steps.back().loss_total;
  }
  std::ostringstream text;
  text << "trained " << steps.size() << " steps";
  if (!steps.empty())
    text << "; loss " << format_double(outcome.first_loss) << " -> "
         << format_double(outcome.last_loss);
  text << '\n' << "checkpoint written to " << opt.out_checkpoint << '\n';
  outcome.rendered = std::move(text).str();
  return outcome;
}

EncodeOutcome cmd_encode(const EncodeOptions& opt) {
  if (opt.checkpoint.empty() || opt.corpus_path.empty() || opt.out_index.empty())
    raise(ErrorKind::Usage, "encode requires --checkpoint, --corpus and --out");
  Replog log(opt.replog_path, opt.out_index, "encode");
  log.input("checkpoint", opt.checkpoint);
  log.input("corpus", opt.corpus_path);
  log.kv("media_root", opt.media_root);
  log.kv("out_index", opt.out_index);
  log.kv("shard_index", opt.shard_index);
  log.kv("shard_count", opt.shard_count);
  log.kv("batch_size", opt.batch_size);
  log.kv("threads", opt.threads);
  log.commit();

  const ModelParams params = load_checkpoint(opt.checkpoint);
  CorpusStore store(load_corpus_file(opt.corpus_path), opt.media_root);

  const auto start = std::chrono::steady_clock::now();
  const EmbeddingIndex index = encode_corpus(params, store, opt.shard_index, opt.shard_count,
                                             opt.batch_size, opt.threads);
  const auto stop = std::chrono::steady_clock::now();
  save_index(opt.out_index, index);

  EncodeOutcome outcome;
  outcome.documents = index.size();
  outcome.seconds = std::chrono::duration<double>(stop - start).count();
  std::ostringstream text;
  text << "encoded " << outcome.documents << " documents in "
       << format_double(outcome.seconds) << " s\n"
       << "index written to " << opt.out_index << '\n';
  outcome.rendered = std::move(text).str();
  return outcome;
}

SearchOutcome cmd_search(const SearchOptions& opt) {
  if (opt.checkpoint.empty() || opt.index_paths.empty() || opt.queries_path.empty() ||
      opt.out_run.empty())
    raise(ErrorKind::Usage, "search requires --checkpoint, --index, --queries and --out");
  if (opt.k == 0) raise(ErrorKind::Usage, "k must be at least 1");
  Replog log(opt.replog_path, opt.out_run, "search");
  log.input("checkpoint", opt.checkpoint);
  for (std::size_t i = 0; i < opt.index_paths.size(); ++i)
    log.input("index." + std::to_string(i), opt.index_paths[i]);
  log.input("queries", opt.queries_path);
  log.kv("media_root", opt.media_root);
  log.kv("out_run", opt.out_run);
  log.kv("k", opt.k);
  log.kv("dim", opt.dim.has_value() ? std::to_string(*opt.dim) : std::string("full"));
  log.kv("tag", opt.tag);
  log.kv("threads", opt.threads);
  log.commit();

  const ModelParams params = load_checkpoint(opt.checkpoint);
  const EmbeddingIndex index = load_merged_index(opt.index_paths);
  if (params.dim != index.dim)
    raise(ErrorKind::CountMismatch, "model dim does not match index dim");
  const auto queries = load_queries_file(opt.queries_path);
  MediaLoader media(opt.media_root);

  std::vector<std::vector<double>> embeddings(queries.size());
  parallel_for(queries.size(), opt.threads, [&](std::size_t i) {
    const FeatureVec fv = featurize_payloads(payloads_of(queries[i]), media, params.feature_width);
    embeddings[i] = encode(params, fv);
  });

  const auto hit_lists = batch_search(index, embeddings, opt.k, opt.dim, opt.threads);

  Run run;
  run.tag = opt.tag;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    auto [it, inserted] = run.by_query.emplace(queries[i].query_id,
                                               std::vector<std::pair<std::string, double>>{});
    if (!inserted)
      raise(ErrorKind::DuplicateDocId, "duplicate query_id: " + queries[i].query_id);
    it->second.reserve(hit_lists[i].size());
    for (const auto& h : hit_lists[i]) it->second.emplace_back(h.docid, h.score);
    hits += hit_lists[i].size();
  }
  save_run(opt.out_run, run);

  SearchOutcome outcome;
  outcome.queries = queries.size();
  outcome.hits = hits;
  std::ostringstream text;
  text << "searched " << outcome.queries << " queries, wrote " << outcome.hits << " hits to "
       << opt.out_run << '\n';
  outcome.rendered = std::move(text).str();
  return outcome;
}

MineOutcome cmd_mine(const MineOptions& opt) {
  if (opt.checkpoint.empty() || opt.index_paths.empty() || opt.queries_path.empty() ||
      opt.out_queries.empty())
    raise(ErrorKind::Usage, "mine requires --checkpoint, --index, --queries and --out");
  Replog log(opt.replog_path, opt.out_queries, "mine");
  log.input("checkpoint", opt.checkpoint);
  for (std::size_t i = 0; i < opt.index_paths.size(); ++i)
    log.input("index." + std::to_string(i), opt.index_paths[i]);
  log.input("queries", opt.queries_path);
  log.kv("media_root", opt.media_root);
  log.kv("out_queries", opt.out_queries);
  log.kv("top_n", opt.config.top_n);
  log.kv("m_out", opt.config.m_out);
  log.kv("seed", opt.config.seed);
  log.kv("drop_unfindable", std::string(opt.config.drop_unfindable ? "true" : "false"));
  log.kv("threads", opt.config.threads);
  log.commit();

  const ModelParams params = load_checkpoint(opt.checkpoint);
  const EmbeddingIndex index = load_merged_index(opt.index_paths);
  const auto queries = load_queries_file(opt.queries_path);
  MediaLoader media(opt.media_root);

  MineResult result = mine(params, queries, media, index, opt.config);

  {
    std::ofstream out(opt.out_queries);
    if (!out) raise(ErrorKind::Io, "cannot open for writing: " + opt.out_queries);
    write_queries(out, result.queries);
    if (!out) raise(ErrorKind::Io, "error writing: " + opt.out_queries);
  }

  MineOutcome outcome;
  outcome.report = result.report;
  outcome.rendered = render_report(result.report);
  return outcome;
}

EvalOutcome cmd_eval(const EvalOptions& opt) {
  if (opt.run_path.empty() || opt.qrels_path.empty())
    raise(ErrorKind::Usage, "eval requires --run and --qrels");
  Replog log(opt.replog_path, opt.out_report, "eval");
  log.input("run", opt.run_path);
  log.input("qrels", opt.qrels_path);
  log.kv("exponential_gain", std::string(opt.exponential_gain ? "true" : "false"));
  log.commit();

  const Run run = load_run(opt.run_path);
  const Qrels qrels = load_qrels(opt.qrels_path);

  EvalOutcome outcome;
  for (const std::size_t k : opt.ndcg_ks)
    outcome.metrics.emplace_back("ndcg@" + std::to_string(k),
                                 ndcg_at_k(run, qrels, k, opt.exponential_gain));
  for (const std::size_t k : opt.recall_ks)
    outcome.metrics.emplace_back("recall@" + std::to_string(k), recall_at_k(run, qrels, k));

  std::ostringstream text;
  for (const auto& [name, metric] : outcome.metrics) {
    text << name << ": " << format_double(metric.mean) << " over " << metric.evaluated
         << " queries";
    if (metric.skipped_no_relevant > 0)
      text << " (" << metric.skipped_no_relevant << " skipped, no relevant docs)";
    text << '\n';
  }
  outcome.rendered = std::move(text).str();

  if (!opt.out_report.empty()) {
    ordered_json j;
    for (const auto& [name, metric] : outcome.metrics) {
      ordered_json mj;
      mj["mean"] = metric.mean;
      mj["evaluated"] = metric.evaluated;
      mj["skipped_no_relevant"] = metric.skipped_no_relevant;
      ordered_json pq;
      for (const auto& [qid, v] : metric.per_query) pq[qid] = v;
      mj["per_query"] = std::move(pq);
      j[name] = std::move(mj);
    }
    write_file_bytes(opt.out_report, j.dump(2) + "\n");
  }
  return outcome;
}

BenchOutcome cmd_bench_encode(const BenchOptions& opt) {
  if (opt.corpus_path.empty()) raise(ErrorKind::Usage, "bench-encode requires --corpus");
  if (opt.batch_sizes.empty()) raise(ErrorKind::Usage, "bench-encode requires batch sizes");
  if (opt.thread_counts.empty()) raise(ErrorKind::Usage, "bench-encode requires thread counts");
  Replog log(opt.replog_path, opt.out_report, "bench-encode");
  if (!opt.checkpoint.empty()) log.input("checkpoint", opt.checkpoint);
  log.input("corpus", opt.corpus_path);
  log.kv("media_root", opt.media_root);
  {
    std::string bs;
    for (std::size_t i = 0; i < opt.batch_sizes.size(); ++i)
      bs += (i ? "," : "") + std::to_string(opt.batch_sizes[i]);
    log.kv("batch_sizes", bs);
    std::string ts;
    for (std::size_t i = 0; i < opt.thread_counts.size(); ++i)
      ts += (i ? "," : "") + std::to_string(opt.thread_counts[i]);
    log.kv("thread_counts", ts);
  }
  log.kv("seed", opt.seed);
  log.commit();

  ModelParams params;
  if (!opt.checkpoint.empty()) {
    params = load_checkpoint(opt.checkpoint);
  } else {
    params = init_params(opt.dim, opt.feature_width, kDefaultTau, default_mrl_dims(opt.dim),
                         opt.seed);
  }
  CorpusStore store(load_corpus_file(opt.corpus_path), opt.media_root);

  BenchOutcome outcome;
  std::ostringstream text;
  text << "batch  threads  docs  seconds  docs/sec\n";
  for (const std::size_t batch : opt.batch_sizes) {
    if (batch == 0) raise(ErrorKind::Usage, "batch sizes must be positive");
    for (const int threads : opt.thread_counts) {
      const auto start = std::chrono::steady_clock::now();
      const EmbeddingIndex index = encode_corpus(params, store, 0, 1, batch, threads);
      const auto stop = std::chrono::steady_clock::now();
      BenchCell cell;
      cell.batch_size = batch;
      cell.threads = threads;
      cell.documents = index.size();
      cell.seconds = std::chrono::duration<double>(stop - start).count();
      cell.docs_per_sec =
          cell.seconds > 0.0 ? static_cast<double>(cell.documents) / cell.seconds : 0.0;
      text << cell.batch_size << "  " << cell.threads << "  " << cell.documents << "  "
           << format_double(cell.seconds) << "  " << format_double(cell.docs_per_sec) << '\n';
      outcome.cells.push_back(cell);
    }
  }
  outcome.rendered = std::move(text).str();

  if (!opt.out_report.empty()) {
    ordered_json rows = ordered_json::array();
    for (const auto& cell : outcome.cells) {
      ordered_json j;
      j["batch_size"] = cell.batch_size;
      j["threads"] = cell.threads;
      j["documents"] = cell.documents;
      j["seconds"] = cell.seconds;
      j["docs_per_sec"] = cell.docs_per_sec;
      rows.push_back(std::move(j));
    }
    write_file_bytes(opt.out_report, rows.dump(2) + "\n");
  }
  return outcome;
}

}  // namespace uniret
