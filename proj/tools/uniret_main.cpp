// Command-line front end over the shared-library C interface.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "uniret.h"

namespace {

constexpr int kExitUsage = UNIRET_ERR_USAGE;

struct DatasetEntry {
  std::string name;
  std::string queries;
  std::string corpus;
  double weight = 1.0;
};

[[noreturn]] void usage_fail(const std::string& message) {
  std::cerr << "error: " << message << '\n';
  std::exit(kExitUsage);
}

DatasetEntry parse_dataset_flag(const std::string& value) {
  DatasetEntry entry;
  std::size_t pos = 0;
  while (pos < value.size()) {
    std::size_t end = value.find(',', pos);
    if (end == std::string::npos) end = value.size();
    const std::string part = value.substr(pos, end - pos);
    const std::size_t eq = part.find('=');
    if (eq == std::string::npos)
      usage_fail("dataset entry '" + part + "' is not key=value (in --dataset " + value + ")");
    const std::string key = part.substr(0, eq);
    const std::string val = part.substr(eq + 1);
    if (key == "name") {
      entry.name = val;
    } else if (key == "queries") {
      entry.queries = val;
    } else if (key == "corpus") {
      entry.corpus = val;
    } else if (key == "weight") {
      try {
        entry.weight = std::stod(val);
      } catch (const std::exception&) {
        usage_fail("bad dataset weight: " + val);
      }
    } else {
      usage_fail("unknown dataset key '" + key + "'");
    }
    pos = end + 1;
  }
  if (entry.queries.empty() || entry.corpus.empty())
    usage_fail("--dataset needs queries=... and corpus=...");
  return entry;
}

std::vector<DatasetEntry> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) usage_fail("cannot open manifest: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    usage_fail("bad manifest " + path + ": " + e.what());
  }
  if (!j.is_array()) usage_fail("manifest must be a JSON array: " + path);
  std::vector<DatasetEntry> entries;
  for (const auto& item : j) {
    DatasetEntry entry;
    if (!item.is_object() || !item.contains("queries") || !item.contains("corpus"))
      usage_fail("manifest entries need queries and corpus fields: " + path);
    entry.queries = item["queries"].get<std::string>();
    entry.corpus = item["corpus"].get<std::string>();
    if (item.contains("name")) entry.name = item["name"].get<std::string>();
    if (item.contains("weight")) entry.weight = item["weight"].get<double>();
    entries.push_back(std::move(entry));
  }
  return entries;
}

int finish(int status, char* rendered) {
  if (rendered != nullptr) {
    std::cout << rendered;
    uniret_string_free(rendered);
  }
  if (status != UNIRET_OK) std::cerr << "error: " << uniret_last_error() << '\n';
  return status;
}

const char* opt_cstr(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"retrieval pipeline: convert, validate, train, encode, search, mine, eval"};
  app.require_subcommand(1);
  app.set_config("--config", "", "flat key=value config file (flags take precedence)");
  app.allow_config_extras(CLI::config_extras_mode::error);

  int exit_status = 0;

  // ---- convert ----------------------------------------------------------
  auto* convert = app.add_subcommand(
      "convert", "split a materialized training file into corpus + query files");
  struct {
    std::string input, out_corpus, out_queries, replog;
  } cv;
  convert->add_option("--input", cv.input, "materialized training JSONL")->required();
  convert->add_option("--out-corpus", cv.out_corpus, "corpus JSONL to write")->required();
  convert->add_option("--out-queries", cv.out_queries, "queries JSONL to write")->required();
  convert->add_option("--replog", cv.replog, "reproducibility log path");
  convert->callback([&] {
    uniret_convert_opts opts;
    uniret_convert_opts_init(&opts);
    opts.input = cv.input.c_str();
    opts.out_corpus = cv.out_corpus.c_str();
    opts.out_queries = cv.out_queries.c_str();
    opts.replog = opt_cstr(cv.replog);
    char* rendered = nullptr;
    const int status = uniret_convert(&opts, nullptr, &rendered);
    exit_status = finish(status, rendered);
  });

  // ---- validate ---------------------------------------------------------
  auto* validate =
      app.add_subcommand("validate", "check query/corpus references and payloads");
  struct {
    std::string queries, corpus, replog;
  } va;
  validate->add_option("--queries", va.queries, "queries JSONL")->required();
  validate->add_option("--corpus", va.corpus, "corpus JSONL")->required();
  validate->add_option("--replog", va.replog, "reproducibility log path");
  validate->callback([&] {
    uniret_validate_opts opts;
    uniret_validate_opts_init(&opts);
    opts.queries = va.queries.c_str();
    opts.corpus = va.corpus.c_str();
    opts.replog = opt_cstr(va.replog);
    uniret_validate_report report{};
    char* rendered = nullptr;
    const int call_status = uniret_validate(&opts, &report, &rendered);
    const int status = finish(call_status, rendered);
    exit_status = status != UNIRET_OK ? status : (report.ok != 0 ? 0 : UNIRET_ERR_DATA);
  });

  // ---- train ------------------------------------------------------------
  auto* train = app.add_subcommand("train", "contrastive training over one or more datasets");
  struct {
    std::vector<std::string> dataset_flags;
    std::string manifest, media_root, out, loss_log, replog, init_checkpoint;
    std::uint32_t dim = 64;
    std::uint32_t feature_width = 4096;
    double tau = 0.02;
    std::vector<std::uint32_t> mrl_dims;
    std::uint64_t batch_size = 128;
    std::uint64_t negatives = 3;
    std::uint64_t epochs = 1;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    int threads = 0;
  } tr;
  train->add_option("--dataset", tr.dataset_flags,
                    "dataset entry: queries=PATH,corpus=PATH[,name=N][,weight=W] (repeatable)");
  train->add_option("--manifest", tr.manifest, "JSON array of dataset entries");
  train->add_option("--media-root", tr.media_root, "directory media paths resolve against");
  train->add_option("--out", tr.out, "checkpoint to write")->required();
  train->add_option("--loss-log", tr.loss_log, "per-step loss JSONL (default <out>.loss.jsonl)");
  train->add_option("--replog", tr.replog, "reproducibility log path");
  train->add_option("--init-checkpoint", tr.init_checkpoint, "resume from this checkpoint");
  train->add_option("--dim", tr.dim, "embedding dimension");
  train->add_option("--feature-width", tr.feature_width, "hashed feature width");
  train->add_option("--tau", tr.tau, "softmax temperature");
  train->add_option("--mrl-dims", tr.mrl_dims, "nested dims, e.g. 16,32,64")->delimiter(',');
  train->add_option("--batch-size", tr.batch_size, "queries per batch");
  train->add_option("--negatives", tr.negatives, "hard negatives per query");
  train->add_option("--epochs", tr.epochs, "training epochs");
  train->add_option("--lr", tr.lr, "learning rate");
  train->add_option("--seed", tr.seed, "random seed");
  train->add_option("--threads", tr.threads, "worker threads (0 = cores)");
  train->callback([&] {
    std::vector<DatasetEntry> entries;
    if (!tr.manifest.empty()) entries = load_manifest(tr.manifest);
    for (const auto& flag : tr.dataset_flags) entries.push_back(parse_dataset_flag(flag));
    if (entries.empty()) usage_fail("train needs --dataset or --manifest");
    std::vector<uniret_dataset> datasets;
    datasets.reserve(entries.size());
    for (const auto& e : entries)
      datasets.push_back({opt_cstr(e.name), e.queries.c_str(), e.corpus.c_str(), e.weight});
    uniret_train_opts opts;
    uniret_train_opts_init(&opts);
    opts.datasets = datasets.data();
    opts.n_datasets = datasets.size();
    opts.media_root = opt_cstr(tr.media_root);
    opts.out_checkpoint = tr.out.c_str();
    opts.loss_log = opt_cstr(tr.loss_log);
    opts.replog = opt_cstr(tr.replog);
    opts.init_checkpoint = opt_cstr(tr.init_checkpoint);
    opts.dim = tr.dim;
    opts.feature_width = tr.feature_width;
    opts.tau = tr.tau;
    if (!tr.mrl_dims.empty()) {
      opts.mrl_dims = tr.mrl_dims.data();
      opts.n_mrl_dims = tr.mrl_dims.size();
    }
    opts.batch_size = tr.batch_size;
    opts.negatives_per_query = tr.negatives;
    opts.epochs = tr.epochs;
    opts.lr = tr.lr;
    opts.seed = tr.seed;
    opts.threads = tr.threads;
    char* rendered = nullptr;
    const int status = uniret_train(&opts, nullptr, &rendered);
    exit_status = finish(status, rendered);
  });

  // ---- encode -----------------------------------------------------------
  auto* encode = app.add_subcommand("encode", "embed a corpus into an index shard");
  struct {
    std::string checkpoint, corpus, media_root, out, replog;
    std::uint64_t shard_index = 0;
    std::uint64_t shard_count = 1;
    std::uint64_t batch_size = 128;
    int threads = 0;
  } en;
  encode->add_option("--checkpoint", en.checkpoint, "model checkpoint")->required();
  encode->add_option("--corpus", en.corpus, "corpus JSONL")->required();
  encode->add_option("--media-root", en.media_root, "directory media paths resolve against");
  encode->add_option("--out", en.out, "index file to write")->required();
  encode->add_option("--replog", en.replog, "reproducibility log path");
  encode->add_option("--shard-index", en.shard_index, "this shard's position");
  encode->add_option("--shard-count", en.shard_count, "total shards");
  encode->add_option("--batch-size", en.batch_size, "documents per batch");
  encode->add_option("--threads", en.threads, "worker threads (0 = cores)");
  encode->callback([&] {
    uniret_encode_opts opts;
    uniret_encode_opts_init(&opts);
    opts.checkpoint = en.checkpoint.c_str();
    opts.corpus = en.corpus.c_str();
    opts.media_root = opt_cstr(en.media_root);
    opts.out_index = en.out.c_str();
    opts.replog = opt_cstr(en.replog);
    opts.shard_index = en.shard_index;
    opts.shard_count = en.shard_count;
    opts.batch_size = en.batch_size;
    opts.threads = en.threads;
    char* rendered = nullptr;
    const int status = uniret_encode(&opts, nullptr, &rendered);
    exit_status = finish(status, rendered);
  });

  // ---- search -----------------------------------------------------------
  auto* search = app.add_subcommand("search", "top-k retrieval into a TREC run file");
  struct {
    std::string checkpoint, queries, media_root, out, replog, tag = "uniret";
    std::vector<std::string> index_paths;
    std::uint64_t k = 10;
    std::uint32_t dim = 0;
    int threads = 0;
  } se;
  search->add_option("--checkpoint", se.checkpoint, "model checkpoint")->required();
  search->add_option("--index", se.index_paths, "index file (repeat to merge shards)")
      ->required();
  search->add_option("--queries", se.queries, "queries JSONL")->required();
  search->add_option("--media-root", se.media_root, "directory media paths resolve against");
  search->add_option("--out", se.out, "run file to write")->required();
  search->add_option("--replog", se.replog, "reproducibility log path");
  search->add_option("--k", se.k, "hits per query");
  search->add_option("--dim", se.dim, "prefix dimension (0 = full)");
  search->add_option("--tag", se.tag, "run tag");
  search->add_option("--threads", se.threads, "worker threads (0 = cores)");
  search->callback([&] {
    std::vector<const char*> paths;
    paths.reserve(se.index_paths.size());
    for (const auto& p : se.index_paths) paths.push_back(p.c_str());
    uniret_search_opts opts;
    uniret_search_opts_init(&opts);
    opts.checkpoint = se.checkpoint.c_str();
    opts.index_paths = paths.data();
    opts.n_index_paths = paths.size();
    opts.queries = se.queries.c_str();
    opts.media_root = opt_cstr(se.media_root);
    opts.out_run = se.out.c_str();
    opts.replog = opt_cstr(se.replog);
    opts.tag = se.tag.c_str();
    opts.k = se.k;
    opts.prefix_dim = se.dim;
    opts.threads = se.threads;
    char* rendered = nullptr;
    const int status = uniret_run_search(&opts, nullptr, &rendered);
    exit_status = finish(status, rendered);
  });

  // ---- mine -------------------------------------------------------------
  auto* mine = app.add_subcommand("mine", "fill hard negatives from top-n retrieval");
  struct {
    std::string checkpoint, queries, media_root, out, replog;
    std::vector<std::string> index_paths;
    std::uint64_t top_n = 100;
    std::uint64_t m_out = 20;
    std::uint64_t seed = 0;
    bool keep_unfindable = false;
    int threads = 0;
  } mi;
  mine->add_option("--checkpoint", mi.checkpoint, "model checkpoint")->required();
  mine->add_option("--index", mi.index_paths, "index file (repeat to merge shards)")->required();
  mine->add_option("--queries", mi.queries, "queries JSONL")->required();
  mine->add_option("--media-root", mi.media_root, "directory media paths resolve against");
  mine->add_option("--out", mi.out, "mined queries JSONL to write")->required();
  mine->add_option("--replog", mi.replog, "reproducibility log path");
  mine->add_option("--top-n", mi.top_n, "retrieval depth per query");
  mine->add_option("--m-out", mi.m_out, "negatives to keep per query");
  mine->add_option("--seed", mi.seed, "sampling seed");
  mine->add_flag("--keep-unfindable", mi.keep_unfindable,
                 "keep queries whose positives miss the top-n");
  mine->add_option("--threads", mi.threads, "worker threads (0 = cores)");
  mine->callback([&] {
    std::vector<const char*> paths;
    paths.reserve(mi.index_paths.size());
    for (const auto& p : mi.index_paths) paths.push_back(p.c_str());
    uniret_mine_opts opts;
    uniret_mine_opts_init(&opts);
    opts.checkpoint = mi.checkpoint.c_str();
    opts.index_paths = paths.data();
    opts.n_index_paths = paths.size();
    opts.queries = mi.queries.c_str();
    opts.media_root = opt_cstr(mi.media_root);
    opts.out_queries = mi.out.c_str();
    opts.replog = opt_cstr(mi.replog);
    opts.top_n = mi.top_n;
    opts.m_out = mi.m_out;
    opts.seed = mi.seed;
    opts.drop_unfindable = mi.keep_unfindable ? 0 : 1;
    opts.threads = mi.threads;
    char* rendered = nullptr;
    const int status = uniret_mine(&opts, nullptr, &rendered);
    exit_status = finish(status, rendered);
  });

  // ---- eval -------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "score a run against qrels");
  struct {
    std::string run, qrels, out_report, replog;
    std::vector<std::uint64_t> ndcg_ks{10};
    std::vector<std::uint64_t> recall_ks{1};
    bool exponential_gain = false;
  } ev;
  eval->add_option("--run", ev.run, "TREC run file")->required();
  eval->add_option("--qrels", ev.qrels, "qrels file")->required();
  eval->add_option("--out", ev.out_report, "JSON report to write");
  eval->add_option("--replog", ev.replog, "reproducibility log path");
  eval->add_option("--ndcg-k", ev.ndcg_ks, "nDCG cutoffs")->delimiter(',');
  eval->add_option("--recall-k", ev.recall_ks, "recall cutoffs")->delimiter(',');
  eval->add_flag("--exponential-gain", ev.exponential_gain, "use 2^rel - 1 nDCG gain");
  eval->callback([&] {
    uniret_eval_opts opts;
    uniret_eval_opts_init(&opts);
    opts.run = ev.run.c_str();
    opts.qrels = ev.qrels.c_str();
    opts.out_report = opt_cstr(ev.out_report);
    opts.replog = opt_cstr(ev.replog);
    opts.ndcg_ks = ev.ndcg_ks.data();
    opts.n_ndcg_ks = ev.ndcg_ks.size();
    opts.recall_ks = ev.recall_ks.data();
    opts.n_recall_ks = ev.recall_ks.size();
    opts.exponential_gain = ev.exponential_gain ? 1 : 0;
    char* rendered = nullptr;
    const int status = uniret_eval(&opts, nullptr, &rendered);
    exit_status = finish(status, rendered);
  });

  // ---- bench-encode -----------------------------------------------------
  auto* bench = app.add_subcommand("bench-encode", "encoding throughput table");
  struct {
    std::string checkpoint, corpus, media_root, out_report, replog;
    std::vector<std::uint64_t> batch_sizes{1, 32, 128};
    std::vector<int> threads{1};
    std::uint32_t dim = 64;
    std::uint32_t feature_width = 4096;
    std::uint64_t seed = 0;
  } be;
  bench->add_option("--checkpoint", be.checkpoint, "model checkpoint (default: fresh init)");
  bench->add_option("--corpus", be.corpus, "corpus JSONL")->required();
  bench->add_option("--media-root", be.media_root, "directory media paths resolve against");
  bench->add_option("--out", be.out_report, "JSON report to write");
  bench->add_option("--replog", be.replog, "reproducibility log path");
  bench->add_option("--batch-size", be.batch_sizes, "batch sizes to time")->delimiter(',');
  bench->add_option("--threads", be.threads, "thread counts to time")->delimiter(',');
  bench->add_option("--dim", be.dim, "embedding dimension for fresh init");
  bench->add_option("--feature-width", be.feature_width, "feature width for fresh init");
  bench->add_option("--seed", be.seed, "init seed");
  bench->callback([&] {
    if (be.batch_sizes.empty()) usage_fail("bench-encode needs at least one --batch-size");
    uniret_bench_opts opts;
    uniret_bench_opts_init(&opts);
    opts.checkpoint = opt_cstr(be.checkpoint);
    opts.corpus = be.corpus.c_str();
    opts.media_root = opt_cstr(be.media_root);
    opts.out_report = opt_cstr(be.out_report);
    opts.replog = opt_cstr(be.replog);
    opts.batch_sizes = be.batch_sizes.data();
    opts.n_batch_sizes = be.batch_sizes.size();
    opts.thread_counts = be.threads.data();
    opts.n_thread_counts = be.threads.size();
    opts.dim = be.dim;
    opts.feature_width = be.feature_width;
    opts.seed = be.seed;
    char* rendered = nullptr;
    const int status = uniret_bench_encode(&opts, &rendered);
    exit_status = finish(status, rendered);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return exit_status;
}
