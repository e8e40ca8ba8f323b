#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "uniret/datastore.hpp"
#include "uniret/featurize.hpp"
#include "uniret/rng.hpp"

namespace uniret {

inline constexpr std::uint32_t kDefaultDim = 64;
inline constexpr double kDefaultTau = 0.02;

// Linear projection W (dim x feature_width, row-major 64-bit) whose
// L2-normalized outputs are the embeddings; nested prefix dims give the
// reduced-dimension model family.
struct ModelParams {
  std::uint32_t dim = kDefaultDim;
  std::uint32_t feature_width = kDefaultFeatureWidth;
  double tau = kDefaultTau;
  std::vector<std::uint32_t> mrl_dims;  // strictly ascending, last == dim
  std::vector<double> weights;          // dim * feature_width

  double& w(std::uint32_t row, std::uint32_t col) { return weights[std::size_t(row) * feature_width + col]; }
  double w(std::uint32_t row, std::uint32_t col) const { return weights[std::size_t(row) * feature_width + col]; }
};

void check_params(const ModelParams& params);

ModelParams init_params(std::uint32_t dim, std::uint32_t feature_width, double tau,
                        std::vector<std::uint32_t> mrl_dims, std::uint64_t seed);

// e = Wx / ||Wx||; raises DegenerateEmbedding when ||Wx|| < 1e-12.
std::vector<double> encode(const ModelParams& params, const FeatureVec& fv);

// First d components, renormalized; raises DegeneratePrefix when the prefix
// norm is below 1e-12.
std::vector<double> mrl_truncate(std::span<const double> embedding, std::uint32_t d);

struct LossResult {
  double total = 0.0;
  std::vector<double> per_dim;  // aligned with params.mrl_dims
  std::vector<double> grad;     // dim * feature_width
};

// InfoNCE over all B(1+m) in-batch documents at every nested dim, summed
// unweighted; exact analytic gradient through truncation and both
// normalizations.
LossResult loss_and_grad(const ModelParams& params, const TrainBatch& batch, int threads = 1);

struct OptState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<double> m;  // first moment, shape of W
  std::vector<double> v;  // second moment, shape of W
};

OptState init_opt(const ModelParams& params, double lr);

void adam_step(ModelParams& params, OptState& opt, std::span<const double> grad);

// Checkpoint file: "URET" magic, version, dims, tau, nested dims, then W as
// little-endian 64-bit floats row-major. Bit-exact round-trip.
void write_checkpoint(std::ostream& out, const ModelParams& params);
ModelParams read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path);

struct StepLog {
  std::size_t step = 0;
  std::string dataset;
  double loss_total = 0.0;
  std::vector<double> per_dim;
};

struct TrainConfig {
  std::size_t batch_size = 128;
  std::size_t negatives_per_query = 3;
  std::size_t epochs = 1;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = hardware concurrency
};

struct TrainDataset {
  std::string name;
  double weight = 1.0;
  std::vector<QueryRecord> queries;
  const CorpusStore* store = nullptr;
};

// plan_epoch -> resolve_group -> collate -> loss_and_grad -> adam_step,
// deterministic under seed.
std::vector<StepLog> train(ModelParams& params, const TrainConfig& config,
                           std::span<const TrainDataset> datasets);

}  // namespace uniret
