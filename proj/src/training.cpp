#include "csf/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "csf/resampling.hpp"
#include "csf/wire.hpp"

namespace csf {
namespace {

using namespace wire;

constexpr char kMagic[4] = {'C', 'S', 'F', 'D'};

// Builds the batch graph shared by dsm_loss and dsm_loss_and_grads:
// per-sample encoder subgraphs stacked row-wise, concatenated with the
// [x_tilde; time_embed] block, through the score MLP to the scalar loss.
struct DsmGraph {
    ad::Graph g;
    int loss = -1;
    BoundParams<float> enc_bound;
    BoundParams<float> score_bound;
};

void build_dsm_graph(DsmGraph& dg, const PriorDataset& ds, const std::vector<DsmSample>& batch,
                     const ParamStore& enc_params, const ParamStore& score_params,
                     const EncoderConfig& enc_cfg, const ScoreNetConfig& score_cfg,
                     const NoiseSchedule& sched) {
    if (batch.empty()) throw ShapeError("dsm_loss: empty batch");
    const int d = ds.d;
    const int b = static_cast<int>(batch.size());
    ad::Graph& g = dg.g;
    dg.enc_bound = BoundParams<float>::bind(g, enc_params);
    dg.score_bound = BoundParams<float>::bind(g, score_params);

    const std::vector<double> freqs = time_frequencies(score_cfg.n_freq);
    ad::Tensor xt_emb(b, d + 2 * score_cfg.n_freq);
    ad::Tensor neg_z(b, d);
    int codes = -1;
    for (int j = 0; j < b; ++j) {
        const DsmSample& s = batch[j];
        if (static_cast<int>(s.x0.size()) != d || static_cast<int>(s.z.size()) != d)
            throw ShapeError("dsm_loss: sample dimension mismatch");
        const auto [alpha, sigma] = sched.alpha_sigma(s.t);
        int c = 0;
        for (int i = 0; i < d; ++i)
            xt_emb.at(j, c++) = static_cast<float>(alpha * s.x0[i] + sigma * s.z[i]);
        for (double e : time_embed(s.t, freqs, sched.horizon))
            xt_emb.at(j, c++) = static_cast<float>(e);
        for (int i = 0; i < d; ++i) neg_z.at(j, i) = static_cast<float>(-s.z[i]);

        const Matrix ens = ds.ensemble(static_cast<std::size_t>(s.record));
        const int u = g.input(augment<float>(ens, &s.subset), false);
        const int code = build_encoder(g, u, dg.enc_bound, enc_cfg);
        codes = j == 0 ? code : g.concat_rows(codes, code);
    }
    const int xt_id = g.input(std::move(xt_emb), false);
    const int in = g.concat_cols(xt_id, codes);
    const int raw = build_score(g, in, dg.score_bound, score_cfg);
    // || sigma s_hat + z ||^2 == || raw + z ||^2 because s_hat = raw / sigma.
    const int target = g.input(std::move(neg_z), false);
    dg.loss = g.scale(g.sse(raw, target), 1.0f / static_cast<float>(b));
}

std::vector<DsmSample> draw_batch(const PriorDataset& ds, const std::vector<int>& order,
                                  std::size_t start, std::size_t count, int multi_x0,
                                  const EncoderConfig& enc_cfg, const NoiseSchedule& sched,
                                  Rng& rng) {
    std::vector<DsmSample> batch;
    batch.reserve(count * static_cast<std::size_t>(multi_x0));
    const int d = ds.d;
    for (std::size_t i = 0; i < count; ++i) {
        const int rec = order[(start + i) % order.size()];
        const std::vector<int> subset = subsample_indices(ds.particles, enc_cfg.cap, rng);
        for (int m = 0; m < multi_x0; ++m) {
            DsmSample s;
            s.record = rec;
            s.subset = subset;
            const auto& data = ds.records[rec].data;
            const int pick = static_cast<int>(rng.index(static_cast<std::size_t>(ds.particles)));
            s.x0.resize(d);
            for (int c = 0; c < d; ++c)
                s.x0[c] = static_cast<double>(data[static_cast<std::size_t>(pick) * d + c]);
            s.t = sched.eps + (sched.horizon - sched.eps) * rng.uniform();
            s.z = rng.normal_vec(static_cast<std::size_t>(d));
            batch.push_back(std::move(s));
        }
    }
    return batch;
}

}  // namespace

void save_dataset(const std::string& path, const PriorDataset& ds) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open dataset for writing: " + path);
    os.write(kMagic, 4);
    put_u32(os, 1);
    put_u32(os, static_cast<uint32_t>(ds.d));
    put_u32(os, static_cast<uint32_t>(ds.particles));
    put_u32(os, static_cast<uint32_t>(ds.records.size()));
    const std::size_t expect = static_cast<std::size_t>(ds.particles) * ds.d;
    for (const auto& r : ds.records) {
        if (r.data.size() != expect) throw ShapeError("dataset record size mismatch");
        put_u32(os, r.traj);
        put_u32(os, r.step);
        os.put(static_cast<char>(r.degenerate));
        for (float f : r.data) put_f32(os, f);
    }
    if (!os) throw IoError("write failure: " + path);
}

PriorDataset load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open dataset: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) throw IoError("not a CSFD dataset: " + path);
    if (get_u32(is) != 1) throw IoError("unsupported CSFD version");
    PriorDataset ds;
    ds.d = static_cast<int>(get_u32(is));
    ds.particles = static_cast<int>(get_u32(is));
    const uint32_t count = get_u32(is);
    const std::size_t n = static_cast<std::size_t>(ds.particles) * ds.d;
    ds.records.resize(count);
    for (auto& r : ds.records) {
        r.traj = get_u32(is);
        r.step = get_u32(is);
        r.degenerate = static_cast<uint8_t>(is.get());
        r.data.resize(n);
        for (auto& f : r.data) f = get_f32(is);
        if (!is) throw IoError("truncated CSFD dataset: " + path);
    }
    return ds;
}

DatasetInfo inspect_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open dataset: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) throw IoError("not a CSFD dataset: " + path);
    DatasetInfo info;
    info.version = get_u32(is);
    info.d = get_u32(is);
    info.particles = get_u32(is);
    info.count = get_u32(is);
    const std::streamoff rec = 9 + static_cast<std::streamoff>(info.particles) * info.d * 4;
    for (uint32_t i = 0; i < info.count; ++i) {
        is.seekg(8, std::ios::cur);
        info.degenerate += static_cast<uint8_t>(is.get()) != 0 ? 1 : 0;
        is.seekg(rec - 9, std::ios::cur);
        if (!is) throw IoError("truncated CSFD dataset: " + path);
    }
    return info;
}

PriorDataset generate_prior_dataset(const StateSpaceModel& model, int trajectories,
                                    int particles, int steps, const ShockSpec& shocks,
                                    uint64_t seed) {
    if (trajectories < 1 || particles < 1 || steps < 1)
        throw ConfigError("generate_prior_dataset: sizes must be >= 1");
    model.validate();
    PriorDataset ds;
    ds.d = model.dim;
    ds.particles = particles;
    ds.records.reserve(static_cast<std::size_t>(trajectories) * steps);
    std::vector<double> x(model.dim), logw(particles), w;
    for (int m = 0; m < trajectories; ++m) {
        Rng rng_truth(Rng::derive(seed, static_cast<uint64_t>(m), 1));
        Rng rng_pf(Rng::derive(seed, static_cast<uint64_t>(m), 2));
        const Trajectory traj = model.simulate_truth(steps, shocks, rng_truth);
        Matrix ensemble = model.initial_ensemble(particles, rng_pf);
        for (int k = 1; k <= steps; ++k) {
            ensemble = model.propagate(ensemble, rng_pf);
            PriorDataset::Record rec;
            rec.traj = static_cast<uint32_t>(m);
            rec.step = static_cast<uint32_t>(k);
            rec.data.resize(static_cast<std::size_t>(particles) * model.dim);
            for (int r = 0; r < particles; ++r)
                for (int c = 0; c < model.dim; ++c)
                    rec.data[static_cast<std::size_t>(r) * model.dim + c] =
                        static_cast<float>(ensemble(r, c));
            std::vector<double> y(model.dim);
            for (int c = 0; c < model.dim; ++c) y[c] = traj.observations(k - 1, c);
            for (int r = 0; r < particles; ++r) {
                for (int c = 0; c < model.dim; ++c) x[c] = ensemble(r, c);
                logw[r] = model.log_likelihood(y, x);
            }
            if (!normalize_log_weights(logw, w)) {
                // Weight collapse: posterior falls back to the propagated prior.
                rec.degenerate = 1;
            } else {
                const std::vector<int> idx = systematic_resample(w, rng_pf);
                Matrix resampled(particles, model.dim);
                for (int r = 0; r < particles; ++r)
                    for (int c = 0; c < model.dim; ++c) resampled(r, c) = ensemble(idx[r], c);
                ensemble = std::move(resampled);
            }
            ds.records.push_back(std::move(rec));
        }
    }
    return ds;
}

double dsm_loss(const PriorDataset& ds, const std::vector<DsmSample>& batch,
                const ParamStore& enc_params, const ParamStore& score_params,
                const EncoderConfig& enc_cfg, const ScoreNetConfig& score_cfg,
                const NoiseSchedule& sched) {
    DsmGraph dg;
    build_dsm_graph(dg, ds, batch, enc_params, score_params, enc_cfg, score_cfg, sched);
    return static_cast<double>(dg.g.value(dg.loss).data[0]);
}

double dsm_loss_and_grads(const PriorDataset& ds, const std::vector<DsmSample>& batch,
                          const ParamStore& enc_params, const ParamStore& score_params,
                          const EncoderConfig& enc_cfg, const ScoreNetConfig& score_cfg,
                          const NoiseSchedule& sched, std::vector<ad::Tensor>& enc_grads,
                          std::vector<ad::Tensor>& score_grads) {
    DsmGraph dg;
    build_dsm_graph(dg, ds, batch, enc_params, score_params, enc_cfg, score_cfg, sched);
    dg.g.backward(dg.loss);
    enc_grads = dg.enc_bound.grads();
    score_grads = dg.score_bound.grads();
    return static_cast<double>(dg.g.value(dg.loss).data[0]);
}

TrainResult train_conditional(const PriorDataset& ds, const TrainConfig& cfg,
                              const EncoderConfig& enc_cfg, const ScoreNetConfig& score_cfg,
                              const NoiseSchedule& sched) {
    cfg.validate();
    enc_cfg.validate();
    score_cfg.validate();
    sched.validate();
    if (ds.records.empty()) throw ConfigError("train_conditional: empty dataset");

    Rng rng(Rng::derive(cfg.seed, 0x7261494e, 0));
    TrainResult result;
    result.encoder = init_encoder_params(enc_cfg, ds.d, rng);
    result.score = init_score_params(score_cfg, ds.d, enc_cfg.code_dim, rng);
    OptimState opt_enc = OptimState::init(result.encoder, cfg.lr);
    OptimState opt_score = OptimState::init(result.score, cfg.lr);
    opt_enc.steplr_period = opt_score.steplr_period = cfg.steplr_period;
    opt_enc.steplr_gamma = opt_score.steplr_gamma = cfg.steplr_gamma;

    std::vector<int> order(ds.records.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<ad::Tensor> enc_grads, score_grads;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = opt_enc.lr_at_epoch(epoch);
        // Fisher-Yates shuffle from the training stream.
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j = rng.index(i);
            std::swap(order[i - 1], order[j]);
        }
        double epoch_sum = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch)) {
            const std::size_t count =
                std::min(static_cast<std::size_t>(cfg.batch), order.size() - start);
            const auto batch =
                draw_batch(ds, order, start, count, cfg.multi_x0, enc_cfg, sched, rng);
            const double loss =
                dsm_loss_and_grads(ds, batch, result.encoder, result.score, enc_cfg, score_cfg,
                                   sched, enc_grads, score_grads);
            if (!std::isfinite(loss))
                throw NumericError("train_conditional: divergent loss at epoch " +
                                   std::to_string(epoch));
            adam_step(result.encoder, enc_grads, opt_enc, lr);
            adam_step(result.score, score_grads, opt_score, lr);
            epoch_sum += loss;
            ++batches;
        }
        result.epoch_loss.push_back(epoch_sum / std::max(batches, 1));
    }
    return result;
}

ParamStore train_unconditional_score(const Matrix& ensemble, int iters, int batch, double lr,
                                     const ScoreNetConfig& score_cfg, const NoiseSchedule& sched,
                                     Rng& rng) {
    const int d = ensemble.cols();
    const int n = ensemble.rows();
    if (n < 1 || d < 1) throw ShapeError("train_unconditional_score: empty ensemble");
    ParamStore params = init_score_params(score_cfg, d, 0, rng);
    if (iters <= 0) return params;
    OptimState opt = OptimState::init(params, lr);
    const std::vector<double> freqs = time_frequencies(score_cfg.n_freq);
    const std::vector<float> no_code;
    for (int it = 0; it < iters; ++it) {
        ad::Graph g;
        const auto bound = BoundParams<float>::bind(g, params);
        ad::Tensor in(batch, d + 2 * score_cfg.n_freq);
        ad::Tensor neg_z(batch, d);
        for (int j = 0; j < batch; ++j) {
            const int pick = static_cast<int>(rng.index(static_cast<std::size_t>(n)));
            const double t = sched.eps + (sched.horizon - sched.eps) * rng.uniform();
            const auto [alpha, sigma] = sched.alpha_sigma(t);
            int c = 0;
            for (int i = 0; i < d; ++i) {
                const double z = rng.normal();
                in.at(j, c) = static_cast<float>(alpha * ensemble(pick, i) + sigma * z);
                neg_z.at(j, i) = static_cast<float>(-z);
                ++c;
            }
            for (double e : time_embed(t, freqs, sched.horizon))
                in.at(j, c++) = static_cast<float>(e);
        }
        const int raw = build_score(g, g.input(std::move(in), false), bound, score_cfg);
        const int loss =
            g.scale(g.sse(raw, g.input(std::move(neg_z), false)), 1.0f / batch);
        g.backward(loss);
        if (!std::isfinite(static_cast<double>(g.value(loss).data[0])))
            throw NumericError("train_unconditional_score: divergent loss");
        auto grads = bound.grads();
        adam_step(params, grads, opt);
    }
    return params;
}

}  // namespace csf
