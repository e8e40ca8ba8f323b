#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uniret/evaluate.hpp"
#include "uniret/mine.hpp"
#include "uniret/model.hpp"
#include "uniret/records.hpp"

namespace uniret {

// Every command writes a reproducibility log (effective options plus input
// digests) before touching its outputs. An empty replog_path derives
// "<primary output>.replog", or skips the log when there is no output file.

struct ConvertOptions {
  std::string v1_path;
  std::string out_corpus;
  std::string out_queries;
  std::string replog_path;
};

struct ConvertOutcome {
  ConvertStats stats;
  std::string rendered;
};

ConvertOutcome cmd_convert(const ConvertOptions& opt);

struct ValidateOptions {
  std::string queries_path;
  std::string corpus_path;
  std::string replog_path;
};

struct ValidateOutcome {
  ValidationReport report;
  std::string rendered;
};

ValidateOutcome cmd_validate(const ValidateOptions& opt);

struct DatasetPath {
  std::string name;
  std::string queries;
  std::string corpus;
  double weight = 1.0;
};

struct TrainOptions {
  std::vector<DatasetPath> datasets;
  std::string media_root;
  std::string out_checkpoint;
  std::string loss_log_path;  // empty: "<out_checkpoint>.loss.jsonl"
  std::string replog_path;
  std::uint32_t dim = kDefaultDim;
  std::uint32_t feature_width = kDefaultFeatureWidth;
  double tau = kDefaultTau;
  std::vector<std::uint32_t> mrl_dims;  // empty: {16, 32, dim} clipped to dim
  std::size_t batch_size = 128;
  std::size_t negatives_per_query = 3;
  std::size_t epochs = 1;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string init_checkpoint;  // resume from checkpoint instead of fresh init
};

struct TrainOutcome {
  std::size_t steps = 0;
  double first_loss = 0.0;
  double last_loss = 0.0;
  std::string rendered;
};

TrainOutcome cmd_train(const TrainOptions& opt);

struct EncodeOptions {
  std::string checkpoint;
  std::string corpus_path;
  std::string media_root;
  std::string out_index;
  std::string replog_path;
  std::size_t shard_index = 0;
  std::size_t shard_count = 1;
  std::size_t batch_size = 128;
  int threads = 0;
};

struct EncodeOutcome {
  std::size_t documents = 0;
  double seconds = 0.0;
  std::string rendered;
};

EncodeOutcome cmd_encode(const EncodeOptions& opt);

struct SearchOptions {
  std::string checkpoint;
  std::vector<std::string> index_paths;  // several shards merge round-robin
  std::string queries_path;
  std::string media_root;
  std::string out_run;
  std::string replog_path;
  std::size_t k = 10;
  std::optional<std::uint32_t> dim;
  std::string tag = "uniret";
  int threads = 0;
};

struct SearchOutcome {
  std::size_t queries = 0;
  std::size_t hits = 0;
  std::string rendered;
};

SearchOutcome cmd_search(const SearchOptions& opt);

struct MineOptions {
  std::string checkpoint;
  std::vector<std::string> index_paths;
  std::string queries_path;
  std::string media_root;
  std::string out_queries;
  std::string replog_path;
  MineConfig config;
};

struct MineOutcome {
  MineReport report;
  std::string rendered;
};

MineOutcome cmd_mine(const MineOptions& opt);

struct EvalOptions {
  std::string run_path;
  std::string qrels_path;
  std::string out_report;  // optional machine-readable JSON
  std::string replog_path;
  std::vector<std::size_t> ndcg_ks = {10};
  std::vector<std::size_t> recall_ks = {1};
  bool exponential_gain = false;
};

struct EvalOutcome {
  std::vector<std::pair<std::string, MetricResult>> metrics;  // "ndcg@10" etc.
  std::string rendered;
};

EvalOutcome cmd_eval(const EvalOptions& opt);

struct BenchOptions {
  std::string checkpoint;  // empty: fresh seeded init
  std::string corpus_path;
  std::string media_root;
  std::string out_report;  // optional machine-readable JSON
  std::string replog_path;
  std::vector<std::size_t> batch_sizes = {1, 32, 128};
  std::vector<int> thread_counts = {1};
  std::uint32_t dim = kDefaultDim;
  std::uint32_t feature_width = kDefaultFeatureWidth;
  std::uint64_t seed = 0;
};

struct BenchCell {
  std::size_t batch_size = 0;
  int threads = 0;
  std::size_t documents = 0;
  double seconds = 0.0;
  double docs_per_sec = 0.0;
};

struct BenchOutcome {
  std::vector<BenchCell> cells;
  std::string rendered;
};

BenchOutcome cmd_bench_encode(const BenchOptions& opt);

}  // namespace uniret
