#include "csf/filters.hpp"

#include <cmath>
#include <iostream>

namespace csf {
namespace {

std::vector<double> weighted_col_mean(const Matrix& m, const std::vector<double>& w) {
    std::vector<double> mean(m.cols(), 0.0);
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) mean[c] += w[r] * m(r, c);
    return mean;
}

/// Shared reverse-time integrator; guidance is active when `model` is set.
Matrix integrate_reverse(const PriorScoreFn& score, int n, int d, const NoiseSchedule& sched,
                         Rng& rng, const StateSpaceModel* model, const std::vector<double>* y,
                         const GuidanceOpts& opts) {
    sched.validate();
    if (n < 0 || d < 1) throw ShapeError("integrate_reverse: bad sizes");
    if (n == 0) return Matrix(0, d);
    const double sigma_init = sched.sigma(sched.horizon);
    Matrix x(n, d);
    for (auto& v : x.data()) v = sigma_init * rng.normal();

    const int steps = sched.reverse_steps;
    const double dt = (sched.horizon - sched.eps) / steps;
    Matrix xi(n, d);
    std::vector<double> row(d), w(d);
    for (int l = 0; l < steps; ++l) {
        const double t = sched.horizon - l * dt;
        Matrix total = score.eval(x, t);
        if (total.rows() != n || total.cols() != d)
            throw ShapeError("prior score returned wrong shape");
        if (model != nullptr) {
            const double sig = sched.sigma(t);
            Matrix x0 = tweedie_denoise(x, t, total, sched);
            Matrix guide(n, d);
            for (int r = 0; r < n; ++r) {
                for (int c = 0; c < d; ++c) row[c] = x0(r, c);
                const std::vector<double> g = model->likelihood_score(*y, row);
                for (int c = 0; c < d; ++c) guide(r, c) = g[c];
            }
            if (opts.exact_jacobian && score.vjp) {
                // d(x0_hat)/dx = (I + sigma^2 ds/dx) / alpha with alpha == 1.
                const Matrix jv = score.vjp(x, t, guide);
                for (int r = 0; r < n; ++r)
                    for (int c = 0; c < d; ++c) guide(r, c) += sig * sig * jv(r, c);
            }
            for (int r = 0; r < n; ++r) {
                double norm2 = 0.0;
                for (int c = 0; c < d; ++c) {
                    guide(r, c) *= opts.zeta;
                    norm2 += guide(r, c) * guide(r, c);
                }
                if (opts.clip_norm > 0.0 && norm2 > opts.clip_norm * opts.clip_norm) {
                    const double f = opts.clip_norm / std::sqrt(norm2);
                    for (int c = 0; c < d; ++c) guide(r, c) *= f;
                }
                for (int c = 0; c < d; ++c) total(r, c) += guide(r, c);
            }
        }
        for (auto& v : xi.data()) v = rng.normal();
        sched.reverse_euler_step_batch(x, t, total, dt, xi);
        if (!x.all_finite())
            throw NumericError("reverse integration diverged at t = " + std::to_string(t));
    }
    return x;
}

Matrix enkf_gain(const Matrix& anomalies_x, const Matrix& anomalies_h, double r_var) {
    const int n = anomalies_x.rows();
    const int d = anomalies_x.cols();
    const int m = anomalies_h.cols();
    Matrix cxh(d, m), chh(m, m);
    for (int r = 0; r < n; ++r) {
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < m; ++j) cxh(i, j) += anomalies_x(r, i) * anomalies_h(r, j);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) chh(i, j) += anomalies_h(r, i) * anomalies_h(r, j);
    }
    for (auto& v : cxh.data()) v /= (n - 1);
    for (auto& v : chh.data()) v /= (n - 1);
    for (int i = 0; i < m; ++i) chh(i, i) += r_var;

    // K = Cxh (Chh + R)^-1, solved column-wise; singular innovation
    // covariance gets a Tikhonov jitter.
    Matrix gain(d, m);
    std::vector<double> rhs(m), sol;
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < m; ++j) rhs[j] = cxh(i, j);
        if (!cholesky_solve(chh, rhs, sol)) {
            std::cerr << "enkf: singular innovation covariance, adding 1e-6 jitter\n";
            Matrix jittered = chh;
            for (int j = 0; j < m; ++j) jittered(j, j) += 1e-6;
            if (!cholesky_solve(jittered, rhs, sol))
                throw NumericError("enkf: innovation covariance not factorizable");
        }
        for (int j = 0; j < m; ++j) gain(i, j) = sol[j];
    }
    return gain;
}

}  // namespace

std::vector<double> pf_step(FilterState& state, const StateSpaceModel& model,
                            const std::vector<double>& y, Rng& rng) {
    state.ensemble = model.propagate(state.ensemble, rng);
    const int n = state.ensemble.rows();
    std::vector<double> logw(n), x(model.dim), w;
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < model.dim; ++c) x[c] = state.ensemble(r, c);
        logw[r] = model.log_likelihood(y, x);
    }
    normalize_log_weights(logw, w);  // collapse falls back to uniform weights
    const std::vector<double> estimate = weighted_col_mean(state.ensemble, w);
    const std::vector<int> idx = systematic_resample(w, rng);
    Matrix resampled(n, model.dim);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < model.dim; ++c) resampled(r, c) = state.ensemble(idx[r], c);
    state.ensemble = std::move(resampled);
    state.step += 1;
    return estimate;
}

std::vector<double> enkf_step(FilterState& state, const StateSpaceModel& model,
                              const std::vector<double>& y, Rng& rng) {
    state.ensemble = model.propagate(state.ensemble, rng);
    const int n = state.ensemble.rows();
    const int d = model.dim;
    Matrix h(n, d);
    std::vector<double> x(d);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < d; ++c) x[c] = state.ensemble(r, c);
        const std::vector<double> hx = model.observe(x);
        for (int c = 0; c < d; ++c) h(r, c) = hx[c];
    }
    const std::vector<double> xm = state.ensemble.col_mean();
    const std::vector<double> hm = h.col_mean();
    Matrix ax(n, d), ah(n, d);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < d; ++c) {
            ax(r, c) = state.ensemble(r, c) - xm[c];
            ah(r, c) = h(r, c) - hm[c];
        }
    // Cauchy observations use the unit-variance Gaussian surrogate.
    const double r_sigma = model.observation.kind == NoiseKind::kGaussian
                               ? model.observation.scale
                               : 1.0;
    const Matrix gain = enkf_gain(ax, ah, r_sigma * r_sigma);
    std::vector<double> innov(d);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < d; ++c) innov[c] = y[c] + r_sigma * rng.normal() - h(r, c);
        for (int i = 0; i < d; ++i) {
            double upd = 0.0;
            for (int j = 0; j < d; ++j) upd += gain(i, j) * innov[j];
            state.ensemble(r, i) += upd;
        }
    }
    if (!state.ensemble.all_finite()) throw NumericError("enkf: non-finite ensemble");
    state.step += 1;
    return state.ensemble.col_mean();
}

std::vector<double> tweedie_denoise(const std::vector<double>& x_t, double t,
                                    const std::vector<double>& score,
                                    const NoiseSchedule& sched) {
    if (x_t.size() != score.size()) throw ShapeError("tweedie_denoise: dim mismatch");
    const auto [alpha, sigma] = sched.alpha_sigma(t);
    std::vector<double> out(x_t.size());
    for (std::size_t i = 0; i < x_t.size(); ++i)
        out[i] = (x_t[i] + sigma * sigma * score[i]) / alpha;
    return out;
}

Matrix tweedie_denoise(const Matrix& x_t, double t, const Matrix& score,
                       const NoiseSchedule& sched) {
    if (x_t.rows() != score.rows() || x_t.cols() != score.cols())
        throw ShapeError("tweedie_denoise: dim mismatch");
    const auto [alpha, sigma] = sched.alpha_sigma(t);
    Matrix out(x_t.rows(), x_t.cols());
    for (std::size_t i = 0; i < out.data().size(); ++i)
        out.data()[i] = (x_t.data()[i] + sigma * sigma * score.data()[i]) / alpha;
    return out;
}

Matrix sample_prior(const PriorScoreFn& score, int n, int d, const NoiseSchedule& sched,
                    Rng& rng) {
    return integrate_reverse(score, n, d, sched, rng, nullptr, nullptr, {});
}

Matrix sample_prior(const std::vector<float>& code, int n, const ParamStore& score_params,
                    const ScoreNetConfig& score_cfg, int d, const NoiseSchedule& sched,
                    Rng& rng) {
    PriorScoreFn fn;
    fn.eval = [&](const Matrix& x, double t) {
        return score_forward_batch(x, t, code, score_params, score_cfg, sched);
    };
    return sample_prior(fn, n, d, sched, rng);
}

Matrix csf_conditioning(const PriorScoreFn& score, const std::vector<double>& y,
                        const NoiseSchedule& sched, const StateSpaceModel& model, int n,
                        const GuidanceOpts& opts, Rng& rng) {
    if (opts.zeta == 0.0) return integrate_reverse(score, n, model.dim, sched, rng, nullptr,
                                                   nullptr, opts);
    return integrate_reverse(score, n, model.dim, sched, rng, &model, &y, opts);
}

CsfModel CsfModel::from_checkpoint(const std::string& path, const EncoderConfig& enc_cfg,
                                   const ScoreNetConfig& score_cfg, int d) {
    enc_cfg.validate();
    score_cfg.validate();
    const ParamStore all = load_checkpoint(path);
    CsfModel m;
    m.enc_cfg = enc_cfg;
    m.score_cfg = score_cfg;
    for (std::size_t i = 0; i < all.size(); ++i) {
        const auto& [name, t] = all.item(i);
        if (name.rfind("enc.", 0) == 0) m.encoder.add(name, t);
        else if (name.rfind("score.", 0) == 0) m.score.add(name, t);
    }
    // Shape validation against a reference initialization.
    Rng probe(0);
    const ParamStore ref_enc = init_encoder_params(enc_cfg, d, probe);
    const ParamStore ref_score = init_score_params(score_cfg, d, enc_cfg.code_dim, probe);
    auto check = [&](const ParamStore& ref, const ParamStore& got, const char* which) {
        if (ref.size() != got.size())
            throw ConfigError(std::string("checkpoint/") + which +
                              " parameter count mismatch: " + path);
        for (std::size_t i = 0; i < ref.size(); ++i) {
            const auto& [name, t] = ref.item(i);
            if (!got.at(name).same_shape(t))
                throw ConfigError("checkpoint tensor shape mismatch for " + name);
        }
    };
    check(ref_enc, m.encoder, "encoder");
    check(ref_score, m.score, "score");
    return m;
}

ParamStore CsfModel::combined() const {
    ParamStore all;
    all.merge(encoder);
    all.merge(score);
    return all;
}

PriorScoreFn CsfModel::score_fn(const std::vector<float>& code,
                                const NoiseSchedule& sched) const {
    PriorScoreFn fn;
    fn.eval = [this, code, &sched](const Matrix& x, double t) {
        return score_forward_batch(x, t, code, score, score_cfg, sched);
    };
    fn.vjp = [this, code, &sched](const Matrix& x, double t, const Matrix& w) {
        return score_vjp_batch(x, t, code, w, score, score_cfg, sched);
    };
    return fn;
}

std::vector<double> csf_step(FilterState& state, const StateSpaceModel& model,
                             const std::vector<double>& y, const CsfModel& csf,
                             const NoiseSchedule& sched, const GuidanceOpts& opts, Rng& rng) {
    state.ensemble = model.propagate(state.ensemble, rng);
    const std::vector<float> code = encode(state.ensemble, csf.encoder, csf.enc_cfg, rng);
    GuidanceOpts eff = opts;
    if (opts.skip_first_guidance && state.step == 0) eff.zeta = 0.0;
    const PriorScoreFn fn = csf.score_fn(code, sched);
    state.ensemble = csf_conditioning(fn, y, sched, model, state.ensemble.rows(), eff, rng);
    state.step += 1;
    return state.ensemble.col_mean();
}

std::vector<double> sf_step(FilterState& state, const StateSpaceModel& model,
                            const std::vector<double>& y, const ScoreNetConfig& score_cfg,
                            const NoiseSchedule& sched, const GuidanceOpts& opts,
                            const SfConfig& sf, Rng& rng) {
    state.ensemble = model.propagate(state.ensemble, rng);
    const ParamStore theta =
        train_unconditional_score(state.ensemble, sf.iters, sf.batch, sf.lr, score_cfg, sched,
                                  rng);
    GuidanceOpts eff = opts;
    if (opts.skip_first_guidance && state.step == 0) eff.zeta = 0.0;
    const std::vector<float> no_code;
    PriorScoreFn fn;
    fn.eval = [&](const Matrix& x, double t) {
        return score_forward_batch(x, t, no_code, theta, score_cfg, sched);
    };
    fn.vjp = [&](const Matrix& x, double t, const Matrix& w) {
        return score_vjp_batch(x, t, no_code, w, theta, score_cfg, sched);
    };
    state.ensemble = csf_conditioning(fn, y, sched, model, state.ensemble.rows(), eff, rng);
    state.step += 1;
    return state.ensemble.col_mean();
}

}  // namespace csf
