#include "uniret.h"

#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include "uniret/error.hpp"
#include "uniret/index.hpp"
#include "uniret/model.hpp"
#include "uniret/pipeline.hpp"

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out != nullptr) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return UNIRET_OK;
  } catch (const uniret::Error& e) {
    g_last_error = e.what();
    return e.exit_code();
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return UNIRET_ERR_INTERNAL;
  }
}

const char* or_empty(const char* s) { return s == nullptr ? "" : s; }

std::vector<std::string> path_list(const char* const* paths, size_t n) {
  std::vector<std::string> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) out.emplace_back(or_empty(paths[i]));
  return out;
}

}  // namespace

struct uniret_model {
  uniret::ModelParams params;
};

struct uniret_index {
  uniret::EmbeddingIndex index;
};

struct uniret_hits {
  std::vector<uniret::SearchHit> hits;
};

extern "C" {

const char* uniret_version(void) { return "0.1.0"; }

const char* uniret_last_error(void) { return g_last_error.c_str(); }

void uniret_string_free(char* s) { std::free(s); }

/* ------------------------------------------------------------------ */

int uniret_model_init(uint32_t dim, uint32_t feature_width, double tau,
                      const uint32_t* mrl_dims, size_t n_mrl_dims, uint64_t seed,
                      uniret_model** out) {
  return guarded([&] {
    if (out == nullptr) uniret::raise(uniret::ErrorKind::Usage, "out handle is null");
    std::vector<uint32_t> dims(mrl_dims, mrl_dims + (mrl_dims != nullptr ? n_mrl_dims : 0));
    auto* handle = new uniret_model{uniret::init_params(dim, feature_width, tau, dims, seed)};
    *out = handle;
  });
}

int uniret_model_load(const char* path, uniret_model** out) {
  return guarded([&] {
    if (out == nullptr || path == nullptr)
      uniret::raise(uniret::ErrorKind::Usage, "null argument");
    *out = new uniret_model{uniret::load_checkpoint(path)};
  });
}

int uniret_model_save(const uniret_model* model, const char* path) {
  return guarded([&] {
    if (model == nullptr || path == nullptr)
      uniret::raise(uniret::ErrorKind::Usage, "null argument");
    uniret::save_checkpoint(path, model->params);
  });
}

uint32_t uniret_model_dim(const uniret_model* model) {
  return model == nullptr ? 0 : model->params.dim;
}

uint32_t uniret_model_feature_width(const uniret_model* model) {
  return model == nullptr ? 0 : model->params.feature_width;
}

void uniret_model_free(uniret_model* model) { delete model; }

int uniret_embed_text(const uniret_model* model, const char* text, double* out) {
  return guarded([&] {
    if (model == nullptr || text == nullptr || out == nullptr)
      uniret::raise(uniret::ErrorKind::Usage, "null argument");
    const uniret::FeatureVec fv =
        uniret::featurize_bytes(text, model->params.feature_width);
    const std::vector<double> e = uniret::encode(model->params, fv);
    std::memcpy(out, e.data(), e.size() * sizeof(double));
  });
}

/* ------------------------------------------------------------------ */

int uniret_index_load(const char* path, uniret_index** out) {
  return guarded([&] {
    if (out == nullptr || path == nullptr)
      uniret::raise(uniret::ErrorKind::Usage, "null argument");
    *out = new uniret_index{uniret::load_index(path)};
  });
}

int uniret_index_save(const uniret_index* index, const char* path) {
  return guarded([&] {
    if (index == nullptr || path == nullptr)
      uniret::raise(uniret::ErrorKind::Usage, "null argument");
    uniret::save_index(path, index->index);
  });
}

int uniret_index_merge(const uniret_index* const* shards, size_t n_shards, uniret_index** out) {
  return guarded([&] {
    if (shards == nullptr || out == nullptr)
      uniret::raise(uniret::ErrorKind::Usage, "null argument");
    std::vector<uniret::EmbeddingIndex> parts;
    parts.reserve(n_shards);
    for (size_t i = 0; i < n_shards; ++i) {
      if (shards[i] == nullptr) uniret::raise(uniret::ErrorKind::Usage, "null shard");
      parts.push_back(shards[i]->index);
    }
    *out = new uniret_index{uniret::merge_shards(parts)};
  });
}

uint64_t uniret_index_size(const uniret_index* index) {
  return index == nullptr ? 0 : index->index.size();
}

uint32_t uniret_index_dim(const uniret_index* index) {
  return index == nullptr ? 0 : index->index.dim;
}

void uniret_index_free(uniret_index* index) { delete index; }

int uniret_search(const uniret_index* index, const double* query, size_t k,
                  uint32_t prefix_dim, uniret_hits** out) {
  return guarded([&] {
    if (index == nullptr || query == nullptr || out == nullptr)
      uniret::raise(uniret::ErrorKind::Usage, "null argument");
    std::optional<uint32_t> dim;
    if (prefix_dim != 0) dim = prefix_dim;
    std::span<const double> q(query, index->index.dim);
    *out = new uniret_hits{uniret::search(index->index, q, k, dim)};
  });
}

size_t uniret_hits_count(const uniret_hits* hits) {
  return hits == nullptr ? 0 : hits->hits.size();
}

const char* uniret_hits_docid(const uniret_hits* hits, size_t i) {
  if (hits == nullptr || i >= hits->hits.size()) return nullptr;
  return hits->hits[i].docid.c_str();
}

double uniret_hits_score(const uniret_hits* hits, size_t i) {
  if (hits == nullptr || i >= hits->hits.size()) return 0.0;
  return hits->hits[i].score;
}

void uniret_hits_free(uniret_hits* hits) { delete hits; }

/* ------------------------------------------------------------------ */

void uniret_convert_opts_init(uniret_convert_opts* opts) {
  if (opts != nullptr) *opts = uniret_convert_opts{};
}

int uniret_convert(const uniret_convert_opts* opts, uniret_convert_stats* stats,
                   char** rendered) {
  return guarded([&] {
    if (opts == nullptr) uniret::raise(uniret::ErrorKind::Usage, "null options");
    uniret::ConvertOptions o;
    o.v1_path = or_empty(opts->input);
    o.out_corpus = or_empty(opts->out_corpus);
    o.out_queries = or_empty(opts->out_queries);
    o.replog_path = or_empty(opts->replog);
    const uniret::ConvertOutcome outcome = uniret::cmd_convert(o);
    if (stats != nullptr) {
      stats->passage_occurrences = outcome.stats.passage_occurrences;
      stats->distinct_passages = outcome.stats.distinct_passages;
      stats->v1_materialized_bytes = outcome.stats.v1_materialized_bytes;
      stats->v2_corpus_bytes = outcome.stats.v2_corpus_bytes;
      stats->v2_query_bytes = outcome.stats.v2_query_bytes;
      stats->duplication_factor = outcome.stats.duplication_factor();
    }
    if (rendered != nullptr) *rendered = dup_string(outcome.rendered);
  });
}

void uniret_validate_opts_init(uniret_validate_opts* opts) {
  if (opts != nullptr) *opts = uniret_validate_opts{};
}

int uniret_validate(const uniret_validate_opts* opts, uniret_validate_report* report,
                    char** rendered) {
  return guarded([&] {
    if (opts == nullptr) uniret::raise(uniret::ErrorKind::Usage, "null options");
    uniret::ValidateOptions o;
    o.queries_path = or_empty(opts->queries);
    o.corpus_path = or_empty(opts->corpus);
    o.replog_path = or_empty(opts->replog);
    const uniret::ValidateOutcome outcome = uniret::cmd_validate(o);
    if (report != nullptr) {
      report->dangling_query_refs = outcome.report.dangling_query_refs;
      report->duplicate_docids = outcome.report.duplicate_docids;
      report->queries_without_payload = outcome.report.queries_without_payload;
      report->ok = outcome.report.ok() ? 1 : 0;
    }
    if (rendered != nullptr) *rendered = dup_string(outcome.rendered);
  });
}

void uniret_train_opts_init(uniret_train_opts* opts) {
  if (opts == nullptr) return;
  *opts = uniret_train_opts{};
  opts->dim = 64;
  opts->feature_width = 4096;
  opts->tau = 0.02;
  opts->batch_size = 128;
  opts->negatives_per_query = 3;
  opts->epochs = 1;
  opts->lr = 1e-3;
}

int uniret_train(const uniret_train_opts* opts, uniret_train_summary* summary, char** rendered) {
  return guarded([&] {
    if (opts == nullptr) uniret::raise(uniret::ErrorKind::Usage, "null options");
    uniret::TrainOptions o;
    for (size_t i = 0; i < opts->n_datasets; ++i) {
      const uniret_dataset& ds = opts->datasets[i];
      uniret::DatasetPath dp;
      dp.name = or_empty(ds.name);
      dp.queries = or_empty(ds.queries);
      dp.corpus = or_empty(ds.corpus);
      if (ds.weight < 0.0)
        uniret::raise(uniret::ErrorKind::Usage, "dataset weight must not be negative");
      dp.weight = ds.weight == 0.0 ? 1.0 : ds.weight;
      o.datasets.push_back(std::move(dp));
    }
    o.media_root = or_empty(opts->media_root);
    o.out_checkpoint = or_empty(opts->out_checkpoint);
    o.loss_log_path = or_empty(opts->loss_log);
    o.replog_path = or_empty(opts->replog);
    o.init_checkpoint = or_empty(opts->init_checkpoint);
    o.dim = opts->dim;
    o.feature_width = opts->feature_width;
    o.tau = opts->tau;
    if (opts->mrl_dims != nullptr)
      o.mrl_dims.assign(opts->mrl_dims, opts->mrl_dims + opts->n_mrl_dims);
    o.batch_size = opts->batch_size;
    o.negatives_per_query = opts->negatives_per_query;
    o.epochs = opts->epochs;
    o.lr = opts->lr;
    o.seed = opts->seed;
    o.threads = opts->threads;
    const uniret::TrainOutcome outcome = uniret::cmd_train(o);
    if (summary != nullptr) {
      summary->steps = outcome.steps;
      summary->first_loss = outcome.first_loss;
      summary->last_loss = outcome.last_loss;
    }
    if (rendered != nullptr) *rendered = dup_string(outcome.rendered);
  });
}

void uniret_encode_opts_init(uniret_encode_opts* opts) {
  if (opts == nullptr) return;
  *opts = uniret_encode_opts{};
  opts->shard_count = 1;
  opts->batch_size = 128;
}

int uniret_encode(const uniret_encode_opts* opts, uniret_encode_summary* summary,
                  char** rendered) {
  return guarded([&] {
    if (opts == nullptr) uniret::raise(uniret::ErrorKind::Usage, "null options");
    uniret::EncodeOptions o;
    o.checkpoint = or_empty(opts->checkpoint);
    o.corpus_path = or_empty(opts->corpus);
    o.media_root = or_empty(opts->media_root);
    o.out_index = or_empty(opts->out_index);
    o.replog_path = or_empty(opts->replog);
    o.shard_index = opts->shard_index;
    o.shard_count = opts->shard_count;
    o.batch_size = opts->batch_size;
    o.threads = opts->threads;
    const uniret::EncodeOutcome outcome = uniret::cmd_encode(o);
    if (summary != nullptr) {
      summary->documents = outcome.documents;
      summary->seconds = outcome.seconds;
    }
    if (rendered != nullptr) *rendered = dup_string(outcome.rendered);
  });
}

void uniret_search_opts_init(uniret_search_opts* opts) {
  if (opts == nullptr) return;
  *opts = uniret_search_opts{};
  opts->k = 10;
}

int uniret_run_search(const uniret_search_opts* opts, uniret_search_summary* summary,
                      char** rendered) {
  return guarded([&] {
    if (opts == nullptr) uniret::raise(uniret::ErrorKind::Usage, "null options");
    uniret::SearchOptions o;
    o.checkpoint = or_empty(opts->checkpoint);
    o.index_paths = path_list(opts->index_paths, opts->n_index_paths);
    o.queries_path = or_empty(opts->queries);
    o.media_root = or_empty(opts->media_root);
    o.out_run = or_empty(opts->out_run);
    o.replog_path = or_empty(opts->replog);
    o.k = opts->k;
    if (opts->prefix_dim != 0) o.dim = opts->prefix_dim;
    if (opts->tag != nullptr) o.tag = opts->tag;
    o.threads = opts->threads;
    const uniret::SearchOutcome outcome = uniret::cmd_search(o);
    if (summary != nullptr) {
      summary->queries = outcome.queries;
      summary->hits = outcome.hits;
    }
    if (rendered != nullptr) *rendered = dup_string(outcome.rendered);
  });
}

void uniret_mine_opts_init(uniret_mine_opts* opts) {
  if (opts == nullptr) return;
  *opts = uniret_mine_opts{};
  opts->top_n = 100;
  opts->m_out = 20;
  opts->drop_unfindable = 1;
}

int uniret_mine(const uniret_mine_opts* opts, uniret_mine_report* report, char** rendered) {
  return guarded([&] {
    if (opts == nullptr) uniret::raise(uniret::ErrorKind::Usage, "null options");
    uniret::MineOptions o;
    o.checkpoint = or_empty(opts->checkpoint);
    o.index_paths = path_list(opts->index_paths, opts->n_index_paths);
    o.queries_path = or_empty(opts->queries);
    o.media_root = or_empty(opts->media_root);
    o.out_queries = or_empty(opts->out_queries);
    o.replog_path = or_empty(opts->replog);
    o.config.top_n = opts->top_n;
    o.config.m_out = opts->m_out;
    o.config.seed = opts->seed;
    o.config.drop_unfindable = opts->drop_unfindable != 0;
    o.config.threads = opts->threads;
    const uniret::MineOutcome outcome = uniret::cmd_mine(o);
    if (report != nullptr) {
      report->queries_in = outcome.report.queries_in;
      report->dropped = outcome.report.dropped;
      report->emitted = outcome.report.emitted;
      report->negatives_padded = outcome.report.negatives_padded;
    }
    if (rendered != nullptr) *rendered = dup_string(outcome.rendered);
  });
}

void uniret_eval_opts_init(uniret_eval_opts* opts) {
  if (opts != nullptr) *opts = uniret_eval_opts{};
}

int uniret_eval(const uniret_eval_opts* opts, uniret_eval_summary* summary, char** rendered) {
  return guarded([&] {
    if (opts == nullptr) uniret::raise(uniret::ErrorKind::Usage, "null options");
    uniret::EvalOptions o;
    o.run_path = or_empty(opts->run);
    o.qrels_path = or_empty(opts->qrels);
    o.out_report = or_empty(opts->out_report);
    o.replog_path = or_empty(opts->replog);
    if (opts->ndcg_ks != nullptr) {
      o.ndcg_ks.assign(opts->ndcg_ks, opts->ndcg_ks + opts->n_ndcg_ks);
    }
    if (opts->recall_ks != nullptr) {
      o.recall_ks.assign(opts->recall_ks, opts->recall_ks + opts->n_recall_ks);
    }
    o.exponential_gain = opts->exponential_gain != 0;
    const uniret::EvalOutcome outcome = uniret::cmd_eval(o);
    if (summary != nullptr) {
      *summary = uniret_eval_summary{};
      for (const auto& [name, metric] : outcome.metrics) {
        if (name.rfind("ndcg@", 0) == 0) {
          summary->ndcg_mean = metric.mean;
          summary->evaluated = metric.evaluated;
          summary->skipped_no_relevant = metric.skipped_no_relevant;
          break;
        }
      }
      for (const auto& [name, metric] : outcome.metrics) {
        if (name.rfind("recall@", 0) == 0) {
          summary->recall_mean = metric.mean;
          break;
        }
      }
    }
    if (rendered != nullptr) *rendered = dup_string(outcome.rendered);
  });
}

void uniret_bench_opts_init(uniret_bench_opts* opts) {
  if (opts == nullptr) return;
  *opts = uniret_bench_opts{};
  opts->dim = 64;
  opts->feature_width = 4096;
}

int uniret_bench_encode(const uniret_bench_opts* opts, char** rendered) {
  return guarded([&] {
    if (opts == nullptr) uniret::raise(uniret::ErrorKind::Usage, "null options");
    uniret::BenchOptions o;
    o.checkpoint = or_empty(opts->checkpoint);
    o.corpus_path = or_empty(opts->corpus);
    o.media_root = or_empty(opts->media_root);
    o.out_report = or_empty(opts->out_report);
    o.replog_path = or_empty(opts->replog);
    if (opts->batch_sizes != nullptr) {
      o.batch_sizes.assign(opts->batch_sizes, opts->batch_sizes + opts->n_batch_sizes);
    }
    if (opts->thread_counts != nullptr) {
      o.thread_counts.assign(opts->thread_counts, opts->thread_counts + opts->n_thread_counts);
    }
    o.dim = opts->dim;
    o.feature_width = opts->feature_width;
    o.seed = opts->seed;
    const uniret::BenchOutcome outcome = uniret::cmd_bench_encode(o);
    if (rendered != nullptr) *rendered = dup_string(outcome.rendered);
  });
}

} /* extern "C" */
