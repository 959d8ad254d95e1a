#pragma once

#include <functional>
#include <string>
#include <vector>

#include "csf/linalg.hpp"
#include "csf/params.hpp"
#include "csf/resampling.hpp"
#include "csf/schedule.hpp"
#include "csf/score_net.hpp"
#include "csf/set_encoder.hpp"
#include "csf/ssm.hpp"
#include "csf/training.hpp"

namespace csf {

/// Particle representation of the current posterior.
struct FilterState {
    Matrix ensemble;  // N x d
    int step = 0;
};

/// Posterior-sampling controls for the diffusion-based filters.
struct GuidanceOpts {
    double zeta = 1.0;        // likelihood-score weight
    double clip_norm = 0.0;   // per-sample guidance norm clip; 0 disables
    bool exact_jacobian = false;  // vector-Jacobian through the score network
    bool skip_first_guidance = false;
};

/// Prior score surrogate used by the reverse integration. `eval` returns
/// n x d scores; `vjp`, when set, returns rows of w^T ds/dx.
struct PriorScoreFn {
    std::function<Matrix(const Matrix&, double)> eval;
    std::function<Matrix(const Matrix&, double, const Matrix&)> vjp;
};

/// SIR particle filter step: propagate, weight, resample every step.
/// Returns the weighted posterior mean (computed before resampling).
std::vector<double> pf_step(FilterState& state, const StateSpaceModel& model,
                            const std::vector<double>& y, Rng& rng);

/// Stochastic (perturbed-observation) ensemble Kalman step. Under Cauchy
/// observation noise the update uses the unit-variance Gaussian surrogate.
std::vector<double> enkf_step(FilterState& state, const StateSpaceModel& model,
                              const std::vector<double>& y, Rng& rng);

/// Tweedie posterior mean x0_hat = (x_t + sigma_t^2 score) / alpha_t.
std::vector<double> tweedie_denoise(const std::vector<double>& x_t, double t,
                                    const std::vector<double>& score,
                                    const NoiseSchedule& sched);
Matrix tweedie_denoise(const Matrix& x_t, double t, const Matrix& score,
                       const NoiseSchedule& sched);

/// Unconditional samples from the modeled prior: reverse integration from
/// N(0, sigma_T^2 I) with zero guidance.
Matrix sample_prior(const PriorScoreFn& score, int n, int d, const NoiseSchedule& sched,
                    Rng& rng);

/// Convenience overload running the trained score network with a fixed code.
Matrix sample_prior(const std::vector<float>& code, int n, const ParamStore& score_params,
                    const ScoreNetConfig& score_cfg, int d, const NoiseSchedule& sched,
                    Rng& rng);

/// Diffusion posterior sampling: reverse integration with the likelihood
/// score evaluated at the Tweedie denoised state added to the prior score.
Matrix csf_conditioning(const PriorScoreFn& score, const std::vector<double>& y,
                        const NoiseSchedule& sched, const StateSpaceModel& model, int n,
                        const GuidanceOpts& opts, Rng& rng);

/// Trained conditional-score-filter assets.
struct CsfModel {
    ParamStore encoder;
    ParamStore score;
    EncoderConfig enc_cfg;
    ScoreNetConfig score_cfg;

    /// Splits a combined checkpoint by the enc. / score. name prefixes and
    /// validates tensor shapes against the configs and state dimension d.
    static CsfModel from_checkpoint(const std::string& path, const EncoderConfig& enc_cfg,
                                    const ScoreNetConfig& score_cfg, int d);

    ParamStore combined() const;

    PriorScoreFn score_fn(const std::vector<float>& code, const NoiseSchedule& sched) const;
};

/// Conditional score filter step: propagate, encode, conditional diffusion
/// posterior sampling; the estimate is the posterior ensemble mean.
std::vector<double> csf_step(FilterState& state, const StateSpaceModel& model,
                             const std::vector<double>& y, const CsfModel& csf,
                             const NoiseSchedule& sched, const GuidanceOpts& opts, Rng& rng);

struct SfConfig {
    int iters = 500;
    int batch = 128;
    double lr = 1e-3;
};

/// Score-filter baseline step: identical to csf_step except the prior score
/// comes from a fresh unconditional network trained on the propagated
/// ensemble only.
std::vector<double> sf_step(FilterState& state, const StateSpaceModel& model,
                            const std::vector<double>& y, const ScoreNetConfig& score_cfg,
                            const NoiseSchedule& sched, const GuidanceOpts& opts,
                            const SfConfig& sf, Rng& rng);

}  // namespace csf
