#ifndef UNIRET_H
#define UNIRET_H

/*
 * C interface to the retrieval pipeline: training-data conversion and
 * validation, contrastive training with nested embedding dims, corpus
 * encoding into exact-search indexes, top-k search, hard-negative mining,
 * and relevance evaluation.
 *
 * Every function returns a status code (below); on failure a thread-local
 * message is available from uniret_last_error(). Strings returned through
 * char** parameters are owned by the caller and released with
 * uniret_string_free(). Option structs must be initialized with their
 * matching *_opts_init() before use.
 */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes; the CLI uses them verbatim as exit codes. */
enum {
  UNIRET_OK = 0,
  UNIRET_ERR_INTERNAL = 1,
  UNIRET_ERR_USAGE = 2,
  UNIRET_ERR_DATA = 3,
  UNIRET_ERR_IO = 4,
  UNIRET_ERR_NUMERIC = 5
};

const char* uniret_version(void);

/* Message for the most recent failing call on this thread. */
const char* uniret_last_error(void);

void uniret_string_free(char* s);

/* ------------------------------------------------------------------ */
/* Model and index handles                                             */
/* ------------------------------------------------------------------ */

typedef struct uniret_model uniret_model;
typedef struct uniret_index uniret_index;
typedef struct uniret_hits uniret_hits;

int uniret_model_init(uint32_t dim, uint32_t feature_width, double tau,
                      const uint32_t* mrl_dims, size_t n_mrl_dims, uint64_t seed,
                      uniret_model** out);
int uniret_model_load(const char* path, uniret_model** out);
int uniret_model_save(const uniret_model* model, const char* path);
uint32_t uniret_model_dim(const uniret_model* model);
uint32_t uniret_model_feature_width(const uniret_model* model);
void uniret_model_free(uniret_model* model);

/* Embeds UTF-8 text into out[0..dim); out must hold dim doubles. */
int uniret_embed_text(const uniret_model* model, const char* text, double* out);

int uniret_index_load(const char* path, uniret_index** out);
int uniret_index_save(const uniret_index* index, const char* path);
/* Round-robin interleave of shards encoded with matching shard counts. */
int uniret_index_merge(const uniret_index* const* shards, size_t n_shards, uniret_index** out);
uint64_t uniret_index_size(const uniret_index* index);
uint32_t uniret_index_dim(const uniret_index* index);
void uniret_index_free(uniret_index* index);

/* Exact top-k inner-product search; prefix_dim 0 scores at full dimension,
 * otherwise query and rows are truncated to prefix_dim and renormalized. */
int uniret_search(const uniret_index* index, const double* query, size_t k,
                  uint32_t prefix_dim, uniret_hits** out);
size_t uniret_hits_count(const uniret_hits* hits);
const char* uniret_hits_docid(const uniret_hits* hits, size_t i);
double uniret_hits_score(const uniret_hits* hits, size_t i);
void uniret_hits_free(uniret_hits* hits);

/* ------------------------------------------------------------------ */
/* Pipeline commands (path level)                                      */
/* ------------------------------------------------------------------ */

typedef struct uniret_convert_opts {
  const char* input;       /* materialized training file (required) */
  const char* out_corpus;  /* decoupled corpus output (required) */
  const char* out_queries; /* decoupled queries output (required) */
  const char* replog;      /* reproducibility log; NULL derives from output */
} uniret_convert_opts;

typedef struct uniret_convert_stats {
  uint64_t passage_occurrences;
  uint64_t distinct_passages;
  uint64_t v1_materialized_bytes;
  uint64_t v2_corpus_bytes;
  uint64_t v2_query_bytes;
  double duplication_factor;
} uniret_convert_stats;

void uniret_convert_opts_init(uniret_convert_opts* opts);
int uniret_convert(const uniret_convert_opts* opts, uniret_convert_stats* stats,
                   char** rendered);

typedef struct uniret_validate_opts {
  const char* queries;
  const char* corpus;
  const char* replog;
} uniret_validate_opts;

typedef struct uniret_validate_report {
  uint64_t dangling_query_refs;
  uint64_t duplicate_docids;
  uint64_t queries_without_payload;
  int ok;
} uniret_validate_report;

void uniret_validate_opts_init(uniret_validate_opts* opts);
int uniret_validate(const uniret_validate_opts* opts, uniret_validate_report* report,
                    char** rendered);

typedef struct uniret_dataset {
  const char* name;    /* optional; defaults to the queries path */
  const char* queries; /* required */
  const char* corpus;  /* required */
  double weight;       /* interleave weight; 0 means the default 1.0 */
} uniret_dataset;

typedef struct uniret_train_opts {
  const uniret_dataset* datasets;
  size_t n_datasets;
  const char* media_root;      /* optional */
  const char* out_checkpoint;  /* required */
  const char* loss_log;        /* optional; defaults beside the checkpoint */
  const char* replog;
  const char* init_checkpoint; /* optional: resume instead of fresh init */
  uint32_t dim;
  uint32_t feature_width;
  double tau;
  const uint32_t* mrl_dims; /* optional; NULL uses {16, 32, dim} clipped */
  size_t n_mrl_dims;
  uint64_t batch_size;
  uint64_t negatives_per_query;
  uint64_t epochs;
  double lr;
  uint64_t seed;
  int threads; /* 0 = available cores */
} uniret_train_opts;

typedef struct uniret_train_summary {
  uint64_t steps;
  double first_loss;
  double last_loss;
} uniret_train_summary;

void uniret_train_opts_init(uniret_train_opts* opts);
int uniret_train(const uniret_train_opts* opts, uniret_train_summary* summary, char** rendered);

typedef struct uniret_encode_opts {
  const char* checkpoint;
  const char* corpus;
  const char* media_root;
  const char* out_index;
  const char* replog;
  uint64_t shard_index; /* documents at positions == shard_index mod shard_count */
  uint64_t shard_count;
  uint64_t batch_size;
  int threads;
} uniret_encode_opts;

typedef struct uniret_encode_summary {
  uint64_t documents;
  double seconds;
} uniret_encode_summary;

void uniret_encode_opts_init(uniret_encode_opts* opts);
int uniret_encode(const uniret_encode_opts* opts, uniret_encode_summary* summary,
                  char** rendered);

typedef struct uniret_search_opts {
  const char* checkpoint;
  const char* const* index_paths; /* several shards merge round-robin */
  size_t n_index_paths;
  const char* queries;
  const char* media_root;
  const char* out_run; /* TREC run file */
  const char* replog;
  const char* tag;     /* run tag; NULL = "uniret" */
  uint64_t k;
  uint32_t prefix_dim; /* 0 = full dimension */
  int threads;
} uniret_search_opts;

typedef struct uniret_search_summary {
  uint64_t queries;
  uint64_t hits;
} uniret_search_summary;

void uniret_search_opts_init(uniret_search_opts* opts);
int uniret_run_search(const uniret_search_opts* opts, uniret_search_summary* summary,
                      char** rendered);

typedef struct uniret_mine_opts {
  const char* checkpoint;
  const char* const* index_paths;
  size_t n_index_paths;
  const char* queries;
  const char* media_root;
  const char* out_queries;
  const char* replog;
  uint64_t top_n;
  uint64_t m_out;
  uint64_t seed;
  int drop_unfindable;
  int threads;
} uniret_mine_opts;

typedef struct uniret_mine_report {
  uint64_t queries_in;
  uint64_t dropped;
  uint64_t emitted;
  uint64_t negatives_padded;
} uniret_mine_report;

void uniret_mine_opts_init(uniret_mine_opts* opts);
int uniret_mine(const uniret_mine_opts* opts, uniret_mine_report* report, char** rendered);

typedef struct uniret_eval_opts {
  const char* run;
  const char* qrels;
  const char* out_report; /* optional JSON report */
  const char* replog;
  const uint64_t* ndcg_ks;   /* NULL = {10} */
  size_t n_ndcg_ks;
  const uint64_t* recall_ks; /* NULL = {1} */
  size_t n_recall_ks;
  int exponential_gain;
} uniret_eval_opts;

/* Summary of the first requested k of each metric family. */
typedef struct uniret_eval_summary {
  double ndcg_mean;
  double recall_mean;
  uint64_t evaluated;
  uint64_t skipped_no_relevant;
} uniret_eval_summary;

void uniret_eval_opts_init(uniret_eval_opts* opts);
int uniret_eval(const uniret_eval_opts* opts, uniret_eval_summary* summary, char** rendered);

typedef struct uniret_bench_opts {
  const char* checkpoint; /* optional; NULL benchmarks a fresh seeded model */
  const char* corpus;
  const char* media_root;
  const char* out_report; /* optional JSON table */
  const char* replog;
  const uint64_t* batch_sizes; /* NULL = {1, 32, 128} */
  size_t n_batch_sizes;
  const int* thread_counts;    /* NULL = {1} */
  size_t n_thread_counts;
  uint32_t dim;
  uint32_t feature_width;
  uint64_t seed;
} uniret_bench_opts;

void uniret_bench_opts_init(uniret_bench_opts* opts);
int uniret_bench_encode(const uniret_bench_opts* opts, char** rendered);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* UNIRET_H */
