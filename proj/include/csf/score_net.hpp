#pragma once

#include <vector>

#include "csf/autodiff.hpp"
#include "csf/linalg.hpp"
#include "csf/params.hpp"
#include "csf/schedule.hpp"

namespace csf {

struct ScoreNetConfig {
    int layers = 4;    // hidden layers between input stage and output head
    int hidden = 256;
    int n_freq = 16;

    void validate() const {
        if (layers < 0 || hidden < 1 || n_freq < 1)
            throw ConfigError("score net: invalid architecture constants");
    }

    int input_dim(int d, int code_dim) const { return d + 2 * n_freq + code_dim; }
};

/// Fixed log-spaced frequencies spanning [1, 100].
std::vector<double> time_frequencies(int n_freq);

/// [sin(2 pi f_j t) ...; cos(2 pi f_j t) ...]; length 2 * n_freq.
std::vector<double> time_embed(double t, const std::vector<double>& freqs, double t_max = 1.0);

ParamStore init_score_params(const ScoreNetConfig& cfg, int d, int code_dim, Rng& rng);

/// Raw network output (B x d); the score is raw / sigma_t.
template <typename S>
int build_score(ad::GraphT<S>& g, int input, const BoundParams<S>& p, const ScoreNetConfig& cfg) {
    int h = g.gelu(g.add(g.matmul(input, p("score.in.w")), p("score.in.b")));
    for (int l = 0; l < cfg.layers; ++l) {
        const std::string prefix = "score.h" + std::to_string(l);
        h = g.gelu(g.add(g.matmul(h, p(prefix + ".w")), p(prefix + ".b")));
    }
    return g.add(g.matmul(h, p("score.out.w")), p("score.out.b"));
}

/// Assembles [x; time_embed(t); code] rows for a batch sharing one t.
template <typename S>
ad::TensorT<S> score_input_rows(const Matrix& x, double t, const std::vector<float>& code,
                                const ScoreNetConfig& cfg, double t_max) {
    const int n = x.rows();
    const int d = x.cols();
    const std::vector<double> emb = time_embed(t, time_frequencies(cfg.n_freq), t_max);
    ad::TensorT<S> in(n, d + static_cast<int>(emb.size() + code.size()));
    for (int r = 0; r < n; ++r) {
        int c = 0;
        for (int j = 0; j < d; ++j) in.at(r, c++) = static_cast<S>(x(r, j));
        for (double e : emb) in.at(r, c++) = static_cast<S>(e);
        for (float v : code) in.at(r, c++) = static_cast<S>(v);
    }
    return in;
}

/// s_theta(x, t; c) for a batch of states (rows of x). Output n x d.
Matrix score_forward_batch(const Matrix& x, double t, const std::vector<float>& code,
                           const ParamStore& params, const ScoreNetConfig& cfg,
                           const NoiseSchedule& sched);

/// Single-state convenience wrapper.
std::vector<double> score_forward(const std::vector<double>& x, double t,
                                  const std::vector<float>& code, const ParamStore& params,
                                  const ScoreNetConfig& cfg, const NoiseSchedule& sched);

/// Rows of w^T ds/dx for each batch row (vector-Jacobian product through the
/// network with respect to the state input).
Matrix score_vjp_batch(const Matrix& x, double t, const std::vector<float>& code,
                       const Matrix& w, const ParamStore& params, const ScoreNetConfig& cfg,
                       const NoiseSchedule& sched);

}  // namespace csf
