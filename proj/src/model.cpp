#include "uniret/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "uniret/binio.hpp"
#include "uniret/error.hpp"
#include "uniret/util.hpp"

namespace uniret {
namespace {

constexpr double kNormFloor = 1e-12;

double l2_norm(std::span<const double> v) {
  double sq = 0.0;
  for (const double x : v) sq += x * x;
  return std::sqrt(sq);
}

}  // namespace

void check_params(const ModelParams& params) {
  if (params.dim == 0) raise(ErrorKind::Usage, "embedding dim must be positive");
  if (params.feature_width == 0) raise(ErrorKind::Usage, "feature width must be positive");
  if (!(params.tau > 0.0)) raise(ErrorKind::Usage, "tau must be positive");
  if (params.mrl_dims.empty()) raise(ErrorKind::Usage, "mrl_dims must be non-empty");
  for (std::size_t i = 0; i < params.mrl_dims.size(); ++i) {
    if (params.mrl_dims[i] == 0) raise(ErrorKind::Usage, "mrl_dims entries must be positive");
    if (i > 0 && params.mrl_dims[i] <= params.mrl_dims[i - 1])
      raise(ErrorKind::Usage, "mrl_dims must be strictly ascending");
  }
  if (params.mrl_dims.back() != params.dim)
    raise(ErrorKind::Usage, "last mrl_dims entry must equal the embedding dim");
  if (params.weights.size() != std::size_t(params.dim) * params.feature_width)
    raise(ErrorKind::CountMismatch, "weight matrix shape does not match dims");
}

ModelParams init_params(std::uint32_t dim, std::uint32_t feature_width, double tau,
                        std::vector<std::uint32_t> mrl_dims, std::uint64_t seed) {
  ModelParams params;
  params.dim = dim;
  params.feature_width = feature_width;
  params.tau = tau;
  params.mrl_dims = std::move(mrl_dims);
  if (params.mrl_dims.empty()) params.mrl_dims = {dim};
  params.weights.resize(std::size_t(dim) * feature_width);
  Rng rng = Rng::derive(seed, {0x1});
  const double scale = 1.0 / std::sqrt(static_cast<double>(feature_width));
  for (double& w : params.weights) w = rng.next_gaussian() * scale;
  check_params(params);
  return params;
}

std::vector<double> encode(const ModelParams& params, const FeatureVec& fv) {
  if (fv.width != params.feature_width)
    raise(ErrorKind::CountMismatch, "feature width does not match model");
  std::vector<double> z(params.dim, 0.0);
  for (const auto& [idx, xv] : fv.entries) {
    const double* col = params.weights.data() + idx;
    for (std::uint32_t r = 0; r < params.dim; ++r)
      z[r] += col[std::size_t(r) * params.feature_width] * xv;
  }
  const double norm = l2_norm(z);
  if (norm < kNormFloor) raise(ErrorKind::DegenerateEmbedding, "embedding norm below 1e-12");
  for (double& x : z) x /= norm;
  return z;
}

std::vector<double> mrl_truncate(std::span<const double> embedding, std::uint32_t d) {
  if (d == 0 || d > embedding.size())
    raise(ErrorKind::Usage, "truncation dim out of range");
  std::vector<double> out(embedding.begin(), embedding.begin() + d);
  const double norm = l2_norm(out);
  if (norm < kNormFloor) raise(ErrorKind::DegeneratePrefix, "prefix norm below 1e-12");
  for (double& x : out) x /= norm;
  return out;
}

namespace {

// Raw projection plus the normalization chain used by backprop.
struct Encoded {
  std::vector<double> z;  // Wx
  double z_norm = 0.0;
  std::vector<double> e;  // z / ||z||
};

Encoded encode_chain(const ModelParams& params, const FeatureVec& fv) {
  if (fv.width != params.feature_width)
    raise(ErrorKind::CountMismatch, "feature width does not match model");
  Encoded enc;
  enc.z.assign(params.dim, 0.0);
  for (const auto& [idx, xv] : fv.entries) {
    const double* col = params.weights.data() + idx;
    for (std::uint32_t r = 0; r < params.dim; ++r)
      enc.z[r] += col[std::size_t(r) * params.feature_width] * xv;
  }
  enc.z_norm = l2_norm(enc.z);
  if (enc.z_norm < kNormFloor) raise(ErrorKind::DegenerateEmbedding, "embedding norm below 1e-12");
  enc.e.resize(params.dim);
  for (std::uint32_t r = 0; r < params.dim; ++r) enc.e[r] = enc.z[r] / enc.z_norm;
  return enc;
}

}  // namespace

LossResult loss_and_grad(const ModelParams& params, const TrainBatch& batch, int threads) {
  check_params(params);
  const std::size_t B = batch.queries.size();
  const std::size_t M = batch.documents.size();
  if (B == 0 || M != B * (1 + batch.negatives_per_query))
    raise(ErrorKind::Usage, "batch layout is inconsistent");
  const std::uint32_t D = params.dim;

  std::vector<Encoded> enc_q(B), enc_d(M);
  parallel_for(B + M, threads, [&](std::size_t i) {
    if (i < B)
      enc_q[i] = encode_chain(params, batch.queries[i]);
    else
      enc_d[i - B] = encode_chain(params, batch.documents[i - B]);
  });

  // Gradient wrt the normalized full-dim embeddings, accumulated across dims.
  std::vector<std::vector<double>> de_q(B, std::vector<double>(D, 0.0));
  std::vector<std::vector<double>> de_d(M, std::vector<double>(D, 0.0));

  LossResult result;
  result.per_dim.reserve(params.mrl_dims.size());

  std::vector<std::vector<double>> u_q(B), u_d(M);
  std::vector<double> pnorm_q(B), pnorm_d(M);
  std::vector<std::vector<double>> probs(B);

  for (const std::uint32_t d : params.mrl_dims) {
    parallel_for(B + M, threads, [&](std::size_t i) {
      auto truncate_into = [&](const Encoded& enc, std::vector<double>& u, double& pnorm) {
        u.assign(enc.e.begin(), enc.e.begin() + d);
        pnorm = l2_norm(u);
        if (pnorm < kNormFloor) raise(ErrorKind::DegeneratePrefix, "prefix norm below 1e-12");
        for (double& x : u) x /= pnorm;
      };
      if (i < B)
        truncate_into(enc_q[i], u_q[i], pnorm_q[i]);
      else
        truncate_into(enc_d[i - B], u_d[i - B], pnorm_d[i - B]);
    });

    std::vector<double> losses(B, 0.0);
    parallel_for(B, threads, [&](std::size_t i) {
      std::vector<double>& p = probs[i];
      p.assign(M, 0.0);
      double max_s = -1e300;
      for (std::size_t j = 0; j < M; ++j) {
        double dot = 0.0;
        for (std::uint32_t r = 0; r < d; ++r) dot += u_q[i][r] * u_d[j][r];
        p[j] = dot / params.tau;
        max_s = std::max(max_s, p[j]);
      }
      double denom = 0.0;
      for (std::size_t j = 0; j < M; ++j) {
        p[j] = std::exp(p[j] - max_s);
        denom += p[j];
      }
      for (std::size_t j = 0; j < M; ++j) p[j] /= denom;
      losses[i] = -std::log(p[batch.targets[i]]);
    });
    double dim_loss = 0.0;
    for (const double l : losses) dim_loss += l;
    dim_loss /= static_cast<double>(B);
    result.per_dim.push_back(dim_loss);
    result.total += dim_loss;

    // dL/ds_ij = (p_ij - [j == target_i]) / B; backprop through the dot
    // products and the prefix normalization into de.
    const double inv_btau = 1.0 / (static_cast<double>(B) * params.tau);
    parallel_for(B, threads, [&](std::size_t i) {
      std::vector<double> du(d, 0.0);
      for (std::size_t j = 0; j < M; ++j) {
        const double coef = (probs[i][j] - (j == batch.targets[i] ? 1.0 : 0.0)) * inv_btau;
        for (std::uint32_t r = 0; r < d; ++r) du[r] += coef * u_d[j][r];
      }
      double du_dot_u = 0.0;
      for (std::uint32_t r = 0; r < d; ++r) du_dot_u += du[r] * u_q[i][r];
      for (std::uint32_t r = 0; r < d; ++r)
        de_q[i][r] += (du[r] - du_dot_u * u_q[i][r]) / pnorm_q[i];
    });
    parallel_for(M, threads, [&](std::size_t j) {
      std::vector<double> du(d, 0.0);
      for (std::size_t i = 0; i < B; ++i) {
        const double coef = (probs[i][j] - (j == batch.targets[i] ? 1.0 : 0.0)) * inv_btau;
        for (std::uint32_t r = 0; r < d; ++r) du[r] += coef * u_q[i][r];
      }
      double du_dot_u = 0.0;
      for (std::uint32_t r = 0; r < d; ++r) du_dot_u += du[r] * u_d[j][r];
      for (std::uint32_t r = 0; r < d; ++r)
        de_d[j][r] += (du[r] - du_dot_u * u_d[j][r]) / pnorm_d[j];
    });
  }

  // Through the full-embedding normalization: dz = (de - (de.e)e) / ||z||,
  // then grad_W[r] += dz[r] * x (sparse). Rows are independent tasks, and
  // each row sums its contributions in a fixed order (queries then docs).
  std::vector<std::vector<double>> dz_q(B), dz_d(M);
  parallel_for(B + M, threads, [&](std::size_t i) {
    auto to_dz = [&](const Encoded& enc, const std::vector<double>& de, std::vector<double>& dz) {
      double de_dot_e = 0.0;
      for (std::uint32_t r = 0; r < D; ++r) de_dot_e += de[r] * enc.e[r];
      dz.resize(D);
      for (std::uint32_t r = 0; r < D; ++r) dz[r] = (de[r] - de_dot_e * enc.e[r]) / enc.z_norm;
    };
    if (i < B)
      to_dz(enc_q[i], de_q[i], dz_q[i]);
    else
      to_dz(enc_d[i - B], de_d[i - B], dz_d[i - B]);
  });

  result.grad.assign(params.weights.size(), 0.0);
  const std::uint32_t F = params.feature_width;
  parallel_for(D, threads, [&](std::size_t r) {
    double* row = result.grad.data() + r * F;
    for (std::size_t i = 0; i < B; ++i) {
      const double coef = dz_q[i][r];
      if (coef == 0.0) continue;
      for (const auto& [idx, xv] : batch.queries[i].entries) row[idx] += coef * xv;
    }
    for (std::size_t j = 0; j < M; ++j) {
      const double coef = dz_d[j][r];
      if (coef == 0.0) continue;
      for (const auto& [idx, xv] : batch.documents[j].entries) row[idx] += coef * xv;
    }
  });
  return result;
}

OptState init_opt(const ModelParams& params, double lr) {
  OptState opt;
  opt.lr = lr;
  opt.m.assign(params.weights.size(), 0.0);
  opt.v.assign(params.weights.size(), 0.0);
  return opt;
}

void adam_step(ModelParams& params, OptState& opt, std::span<const double> grad) {
  if (grad.size() != params.weights.size() || opt.m.size() != grad.size())
    raise(ErrorKind::CountMismatch, "gradient shape does not match parameters");
  opt.step += 1;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
  for (std::size_t i = 0; i < grad.size(); ++i) {
    opt.m[i] = opt.beta1 * opt.m[i] + (1.0 - opt.beta1) * grad[i];
    opt.v[i] = opt.beta2 * opt.v[i] + (1.0 - opt.beta2) * grad[i] * grad[i];
    const double mhat = opt.m[i] / bc1;
    const double vhat = opt.v[i] / bc2;
    params.weights[i] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
  }
}

namespace {
constexpr char kCheckpointMagic[4] = {'U', 'R', 'E', 'T'};
constexpr std::uint16_t kCheckpointVersion = 1;
}  // namespace

void write_checkpoint(std::ostream& out, const ModelParams& params) {
  check_params(params);
  BinWriter w(out);
  w.bytes(kCheckpointMagic, 4);
  w.u16(kCheckpointVersion);
  w.u32(params.dim);
  w.u32(params.feature_width);
  w.f64(params.tau);
  w.u32(static_cast<std::uint32_t>(params.mrl_dims.size()));
  for (const std::uint32_t d : params.mrl_dims) w.u32(d);
  for (const double x : params.weights) w.f64(x);
}

ModelParams read_checkpoint(std::istream& in) {
  BinReader r(in);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0)
    raise(ErrorKind::BadMagic, "not a model checkpoint file");
  const std::uint16_t version = r.u16();
  if (version != kCheckpointVersion)
    raise(ErrorKind::VersionMismatch,
          "unsupported checkpoint version " + std::to_string(version));
  ModelParams params;
  params.dim = r.u32();
  params.feature_width = r.u32();
  params.tau = r.f64();
  const std::uint32_t n_dims = r.u32();
  if (n_dims == 0 || n_dims > params.dim)
    raise(ErrorKind::CountMismatch, "invalid nested-dim count in checkpoint");
  params.mrl_dims.resize(n_dims);
  for (auto& d : params.mrl_dims) d = r.u32();
  const std::size_t n = std::size_t(params.dim) * params.feature_width;
  params.weights.resize(n);
  for (auto& x : params.weights) x = r.f64();
  if (!r.at_eof()) raise(ErrorKind::CountMismatch, "trailing bytes after checkpoint payload");
  check_params(params);
  return params;
}

void save_checkpoint(const std::string& path, const ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::Io, "cannot open for writing: " + path);
  write_checkpoint(out, params);
  out.flush();
  if (!out) raise(ErrorKind::Io, "error writing checkpoint: " + path);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::Io, "cannot open checkpoint: " + path);
  return read_checkpoint(in);
}

std::vector<StepLog> train(ModelParams& params, const TrainConfig& config,
                           std::span<const TrainDataset> datasets) {
  check_params(params);
  if (datasets.empty()) raise(ErrorKind::EmptyDataset, "no training datasets given");
  for (const auto& ds : datasets) {
    if (ds.queries.empty()) raise(ErrorKind::EmptyDataset, "dataset '" + ds.name + "' is empty");
    if (ds.store == nullptr) raise(ErrorKind::Usage, "dataset '" + ds.name + "' has no corpus");
  }

  OptState opt = init_opt(params, config.lr);
  std::vector<StepLog> log;
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<EpochDataset> specs;
    specs.reserve(datasets.size());
    for (const auto& ds : datasets)
      specs.push_back({ds.name, ds.queries.size(), ds.weight});
    Rng plan_rng = Rng::derive(config.seed, {0x5, epoch});
    const std::vector<PlannedBatch> plan = plan_epoch(specs, config.batch_size, plan_rng);

    for (std::size_t b = 0; b < plan.size(); ++b) {
      const PlannedBatch& pb = plan[b];
      const TrainDataset& ds = datasets[pb.dataset_index];
      std::vector<TrainGroup> groups(pb.query_indices.size());
      const std::size_t m = config.negatives_per_query;
      parallel_for(pb.query_indices.size(), config.threads, [&](std::size_t slot) {
        Rng rng = Rng::derive(config.seed, {0x9, epoch, b, slot});
        groups[slot] = resolve_group(*ds.store, ds.queries[pb.query_indices[slot]], m, rng);
      });
      const std::uint32_t width = params.feature_width;
      MediaLoader& media = ds.store->media();
      const Featurizer featurize = [&media, width](const Payloads& p) {
        return featurize_payloads(p, media, width);
      };
      TrainBatch batch;
      ++step;  // logged steps count completed updates, starting at 1
      try {
        batch = collate(groups, featurize, config.threads);
        const LossResult loss = loss_and_grad(params, batch, config.threads);
        adam_step(params, opt, loss.grad);
        log.push_back({step, ds.name, loss.total, loss.per_dim});
      } catch (const Error& e) {
        raise(e.kind(), "dataset '" + ds.name + "', batch " + std::to_string(b) + ": " + e.what());
      }
    }
  }
  return log;
}

}  // namespace uniret
