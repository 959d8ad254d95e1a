#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csf/linalg.hpp"
#include "csf/params.hpp"
#include "csf/schedule.hpp"
#include "csf/score_net.hpp"
#include "csf/set_encoder.hpp"
#include "csf/ssm.hpp"

namespace csf {

/// Recorded particle-filter prior ensembles, the offline training corpus.
/// Every ensemble is the propagated (pre-conditioning) particle set.
struct PriorDataset {
    int d = 0;
    int particles = 0;
    struct Record {
        uint32_t traj = 0;
        uint32_t step = 0;
        uint8_t degenerate = 0;  // weight collapse at this step
        std::vector<float> data;  // particles x d, row-major
    };
    std::vector<Record> records;

    Matrix ensemble(std::size_t i) const {
        const Record& r = records.at(i);
        Matrix m(particles, d);
        for (int row = 0; row < particles; ++row)
            for (int c = 0; c < d; ++c)
                m(row, c) = static_cast<double>(r.data[static_cast<std::size_t>(row) * d + c]);
        return m;
    }
};

// Dataset file ("CSFD"): u32 version=1, u32 d, u32 N, u32 count; per record
// u32 traj, u32 step, u8 degenerate flag, N*d little-endian f32.
void save_dataset(const std::string& path, const PriorDataset& ds);
PriorDataset load_dataset(const std::string& path);

struct DatasetInfo {
    uint32_t version = 0, d = 0, particles = 0, count = 0, degenerate = 0;
};
DatasetInfo inspect_dataset(const std::string& path);

/// Runs M independent truth simulations, filters each with an N-particle SIR
/// particle filter, and records every propagated prior ensemble.
PriorDataset generate_prior_dataset(const StateSpaceModel& model, int trajectories,
                                    int particles, int steps, const ShockSpec& shocks,
                                    uint64_t seed);

struct TrainConfig {
    int epochs = 20;
    int batch = 32;
    double lr = 1e-3;
    int steplr_period = 5;  // epochs between decays; 0 disables
    double steplr_gamma = 0.5;
    uint64_t seed = 1;
    int multi_x0 = 1;  // (x0, t, z) triples drawn per ensemble per batch element

    void validate() const {
        if (epochs < 0 || batch < 1 || multi_x0 < 1) throw ConfigError("train: bad sizes");
        if (!(lr > 0.0)) throw ConfigError("train: lr must be positive");
    }
};

/// One pre-drawn denoising sample: ensemble index, encoder subset, clean
/// member x0, diffusion time t and noise z.
struct DsmSample {
    int record = 0;
    std::vector<int> subset;
    std::vector<double> x0;
    double t = 0.0;
    std::vector<double> z;
};

/// Conditional denoising score-matching loss
/// (1/B) sum_j || sigma_{t_j} s_hat_j + z_j ||^2 for a pre-drawn batch.
double dsm_loss(const PriorDataset& ds, const std::vector<DsmSample>& batch,
                const ParamStore& enc_params, const ParamStore& score_params,
                const EncoderConfig& enc_cfg, const ScoreNetConfig& score_cfg,
                const NoiseSchedule& sched);

/// Same loss plus parameter gradients (store order).
double dsm_loss_and_grads(const PriorDataset& ds, const std::vector<DsmSample>& batch,
                          const ParamStore& enc_params, const ParamStore& score_params,
                          const EncoderConfig& enc_cfg, const ScoreNetConfig& score_cfg,
                          const NoiseSchedule& sched, std::vector<ad::Tensor>& enc_grads,
                          std::vector<ad::Tensor>& score_grads);

struct TrainResult {
    ParamStore encoder;
    ParamStore score;
    std::vector<double> epoch_loss;
};

/// Joint minibatched Adam training of encoder and score network.
TrainResult train_conditional(const PriorDataset& ds, const TrainConfig& cfg,
                              const EncoderConfig& enc_cfg, const ScoreNetConfig& score_cfg,
                              const NoiseSchedule& sched);

/// From-scratch unconditional score network fitted to a single ensemble;
/// the per-step training run of the score-filter baseline.
ParamStore train_unconditional_score(const Matrix& ensemble, int iters, int batch, double lr,
                                     const ScoreNetConfig& score_cfg, const NoiseSchedule& sched,
                                     Rng& rng);

}  // namespace csf
