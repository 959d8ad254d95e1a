#pragma once

#include <string>
#include <vector>

#include "csf/autodiff.hpp"
#include "csf/linalg.hpp"
#include "csf/params.hpp"
#include "csf/rng.hpp"

namespace csf {

constexpr double kLayernormEps = 1e-5;

struct EncoderConfig {
    int sab_layers = 2;
    int hidden = 128;
    int heads = 4;
    int code_dim = 64;
    int cap = 1000;  // ensembles larger than this are subsampled before attention

    void validate() const {
        if (sab_layers < 1 || hidden < 1 || heads < 1 || code_dim < 1 || cap < 2)
            throw ConfigError("encoder: invalid architecture constants");
        if (hidden % heads != 0) throw ConfigError("encoder: hidden must divide by heads");
    }
};

/// Multi-head attention rows(out) == rows(q). Scaling is 1/sqrt(hidden/heads)
/// per head; projections carry no bias.
template <typename S>
int build_mha(ad::GraphT<S>& g, int q_in, int kv_in, const BoundParams<S>& p,
              const std::string& prefix, int hidden, int heads) {
    const int q = g.matmul(q_in, p(prefix + ".wq"));
    const int k = g.matmul(kv_in, p(prefix + ".wk"));
    const int v = g.matmul(kv_in, p(prefix + ".wv"));
    const int dh = hidden / heads;
    const S inv_sqrt_dh = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));
    int merged = -1;
    for (int h = 0; h < heads; ++h) {
        const int qh = g.slice_cols(q, h * dh, (h + 1) * dh);
        const int kh = g.slice_cols(k, h * dh, (h + 1) * dh);
        const int vh = g.slice_cols(v, h * dh, (h + 1) * dh);
        const int logits = g.scale(g.matmul(qh, kh, false, true), inv_sqrt_dh);
        const int attn = g.softmax(logits);
        const int oh = g.matmul(attn, vh);
        merged = h == 0 ? oh : g.concat_cols(merged, oh);
    }
    return g.matmul(merged, p(prefix + ".wo"));
}

template <typename S>
int build_layernorm_affine(ad::GraphT<S>& g, int x, const BoundParams<S>& p,
                           const std::string& prefix) {
    const int ln = g.layernorm(x, static_cast<S>(kLayernormEps));
    return g.add(g.mul(ln, p(prefix + ".g")), p(prefix + ".b"));
}

/// Encoder graph: embedded ensemble -> SAB stack -> PMA against a learnable
/// seed -> layernorm -> two-layer MLP. Returns the 1 x code_dim output node.
/// `u` holds the augmented rows [x_i; mu; sigma^2] (N x 3d).
/// `sab_outputs`, when given, receives the hidden state after each SAB layer.
template <typename S>
int build_encoder(ad::GraphT<S>& g, int u, const BoundParams<S>& p, const EncoderConfig& cfg,
                  std::vector<int>* sab_outputs = nullptr) {
    int x = g.add(g.matmul(u, p("enc.embed.w")), p("enc.embed.b"));
    for (int l = 0; l < cfg.sab_layers; ++l) {
        const std::string prefix = "enc.sab" + std::to_string(l);
        const int attn = build_mha(g, x, x, p, prefix, cfg.hidden, cfg.heads);
        x = build_layernorm_affine(g, g.add(x, attn), p, prefix + ".ln");
        if (sab_outputs) sab_outputs->push_back(x);
    }
    // PMA: the seed is prepended to the set and its attention row is taken.
    // Using the seed as the only query row yields that row directly.
    const int seed = p("enc.pma.seed");
    const int kv = g.concat_rows(seed, x);
    const int pooled = build_mha(g, seed, kv, p, "enc.pma", cfg.hidden, cfg.heads);
    const int z = build_layernorm_affine(g, pooled, p, "enc.pma.ln");
    const int hid = g.gelu(g.add(g.matmul(z, p("enc.out.w1")), p("enc.out.b1")));
    return g.add(g.matmul(hid, p("enc.out.w2")), p("enc.out.b2"));
}

/// Fresh Xavier-initialized encoder parameters for state dimension d.
ParamStore init_encoder_params(const EncoderConfig& cfg, int d, Rng& rng);

/// Augmented input rows u_i = [x_i; mu; sigma^2]; mean and biased variance are
/// always computed over the full ensemble, regardless of `subset`.
template <typename S>
ad::TensorT<S> augment(const Matrix& ensemble, const std::vector<int>* subset = nullptr) {
    const int n_full = ensemble.rows();
    const int d = ensemble.cols();
    if (n_full < 2) throw ShapeError("augment: need at least two particles");
    if (!ensemble.all_finite()) throw NumericError("augment: non-finite ensemble");
    const std::vector<double> mu = ensemble.col_mean();
    const std::vector<double> var = ensemble.col_var();
    const int n = subset ? static_cast<int>(subset->size()) : n_full;
    ad::TensorT<S> u(n, 3 * d);
    for (int r = 0; r < n; ++r) {
        const int src = subset ? (*subset)[r] : r;
        for (int c = 0; c < d; ++c) {
            u.at(r, c) = static_cast<S>(ensemble(src, c));
            u.at(r, d + c) = static_cast<S>(mu[c]);
            u.at(r, 2 * d + c) = static_cast<S>(var[c]);
        }
    }
    return u;
}

/// Uniform subsample without replacement when the ensemble exceeds `cap`;
/// identity otherwise.
std::vector<int> subsample_indices(int n, int cap, Rng& rng);

/// Permutation-invariant condition code for an ensemble (inference path).
std::vector<float> encode(const Matrix& ensemble, const ParamStore& params,
                          const EncoderConfig& cfg, Rng& rng);

}  // namespace csf
