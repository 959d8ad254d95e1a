#include "csf/score_net.hpp"

#include <cmath>

#include "csf/set_encoder.hpp"

namespace csf {

std::vector<double> time_frequencies(int n_freq) {
    if (n_freq < 1) throw ConfigError("time_frequencies: n_freq >= 1");
    std::vector<double> f(n_freq);
    if (n_freq == 1) {
        f[0] = 1.0;
        return f;
    }
    for (int j = 0; j < n_freq; ++j)
        f[j] = std::pow(100.0, static_cast<double>(j) / (n_freq - 1));
    return f;
}

std::vector<double> time_embed(double t, const std::vector<double>& freqs, double t_max) {
    if (!(t >= 0.0) || t > t_max + 1e-9) throw NumericError("time_embed: t out of range");
    const double two_pi = 6.283185307179586476925286766559;
    std::vector<double> e(2 * freqs.size());
    for (std::size_t j = 0; j < freqs.size(); ++j) {
        e[j] = std::sin(two_pi * freqs[j] * t);
        e[freqs.size() + j] = std::cos(two_pi * freqs[j] * t);
    }
    return e;
}

ParamStore init_score_params(const ScoreNetConfig& cfg, int d, int code_dim, Rng& rng) {
    cfg.validate();
    if (d < 1 || code_dim < 0) throw ConfigError("score net: bad dimensions");
    ParamStore p;
    const int in_dim = cfg.input_dim(d, code_dim);
    p.add("score.in.w", ad::xavier_init<float>(in_dim, cfg.hidden, rng));
    p.add("score.in.b", ad::Tensor(1, cfg.hidden));
    for (int l = 0; l < cfg.layers; ++l) {
        const std::string prefix = "score.h" + std::to_string(l);
        p.add(prefix + ".w", ad::xavier_init<float>(cfg.hidden, cfg.hidden, rng));
        p.add(prefix + ".b", ad::Tensor(1, cfg.hidden));
    }
    p.add("score.out.w", ad::xavier_init<float>(cfg.hidden, d, rng));
    p.add("score.out.b", ad::Tensor(1, d));
    return p;
}

Matrix score_forward_batch(const Matrix& x, double t, const std::vector<float>& code,
                           const ParamStore& params, const ScoreNetConfig& cfg,
                           const NoiseSchedule& sched) {
    const double sigma = sched.sigma(t);
    ad::Graph g;
    const auto bound = BoundParams<float>::bind(g, params);
    const int in = g.input(score_input_rows<float>(x, t, code, cfg, sched.horizon), false);
    const int raw = build_score(g, in, bound, cfg);
    const auto& out = g.value(raw);
    Matrix score(x.rows(), x.cols());
    for (int r = 0; r < x.rows(); ++r)
        for (int c = 0; c < x.cols(); ++c)
            score(r, c) = static_cast<double>(out.at(r, c)) / sigma;
    return score;
}

std::vector<double> score_forward(const std::vector<double>& x, double t,
                                  const std::vector<float>& code, const ParamStore& params,
                                  const ScoreNetConfig& cfg, const NoiseSchedule& sched) {
    Matrix m(1, static_cast<int>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) m(0, i) = x[i];
    const Matrix s = score_forward_batch(m, t, code, params, cfg, sched);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = s(0, i);
    return out;
}

Matrix score_vjp_batch(const Matrix& x, double t, const std::vector<float>& code,
                       const Matrix& w, const ParamStore& params, const ScoreNetConfig& cfg,
                       const NoiseSchedule& sched) {
    if (w.rows() != x.rows() || w.cols() != x.cols()) throw ShapeError("score_vjp: shape");
    const double sigma = sched.sigma(t);
    const int d = x.cols();
    ad::Graph g;
    const auto bound = BoundParams<float>::bind(g, params);
    const int in = g.input(score_input_rows<float>(x, t, code, cfg, sched.horizon), true);
    const int raw = build_score(g, in, bound, cfg);
    ad::Tensor seed(x.rows(), d);
    for (int r = 0; r < x.rows(); ++r)
        for (int c = 0; c < d; ++c) seed.at(r, c) = static_cast<float>(w(r, c));
    g.backward(raw, seed);
    // Rows of the MLP are independent, so the input gradient's first d columns
    // are exactly w^T d(raw)/dx per row; dividing by sigma maps raw to score.
    const auto& gin = g.grad(in);
    Matrix out(x.rows(), d);
    for (int r = 0; r < x.rows(); ++r)
        for (int c = 0; c < d; ++c) out(r, c) = static_cast<double>(gin.at(r, c)) / sigma;
    return out;
}

}  // namespace csf
