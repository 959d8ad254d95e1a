#include "csf/set_encoder.hpp"

#include <numeric>

namespace csf {

ParamStore init_encoder_params(const EncoderConfig& cfg, int d, Rng& rng) {
    cfg.validate();
    if (d < 1) throw ConfigError("encoder: state dimension >= 1 required");
    const int h = cfg.hidden;
    ParamStore p;
    p.add("enc.embed.w", ad::xavier_init<float>(3 * d, h, rng));
    p.add("enc.embed.b", ad::Tensor(1, h));
    auto add_mha = [&](const std::string& prefix) {
        p.add(prefix + ".wq", ad::xavier_init<float>(h, h, rng));
        p.add(prefix + ".wk", ad::xavier_init<float>(h, h, rng));
        p.add(prefix + ".wv", ad::xavier_init<float>(h, h, rng));
        p.add(prefix + ".wo", ad::xavier_init<float>(h, h, rng));
    };
    auto add_ln = [&](const std::string& prefix) {
        p.add(prefix + ".g", ad::Tensor(1, h, 1.0f));
        p.add(prefix + ".b", ad::Tensor(1, h));
    };
    for (int l = 0; l < cfg.sab_layers; ++l) {
        const std::string prefix = "enc.sab" + std::to_string(l);
        add_mha(prefix);
        add_ln(prefix + ".ln");
    }
    p.add("enc.pma.seed", ad::xavier_init<float>(1, h, rng));
    add_mha("enc.pma");
    add_ln("enc.pma.ln");
    p.add("enc.out.w1", ad::xavier_init<float>(h, h, rng));
    p.add("enc.out.b1", ad::Tensor(1, h));
    p.add("enc.out.w2", ad::xavier_init<float>(h, cfg.code_dim, rng));
    p.add("enc.out.b2", ad::Tensor(1, cfg.code_dim));
    return p;
}

std::vector<int> subsample_indices(int n, int cap, Rng& rng) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (n <= cap) return idx;
    // Partial Fisher-Yates: the first `cap` entries form the sample.
    for (int i = 0; i < cap; ++i) {
        const int j = i + static_cast<int>(rng.index(static_cast<std::size_t>(n - i)));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(cap);
    return idx;
}

std::vector<float> encode(const Matrix& ensemble, const ParamStore& params,
                          const EncoderConfig& cfg, Rng& rng) {
    cfg.validate();
    const std::vector<int> subset = subsample_indices(ensemble.rows(), cfg.cap, rng);
    ad::Graph g;
    const auto bound = BoundParams<float>::bind(g, params);
    const int u = g.input(augment<float>(ensemble, &subset), false);
    const int code = build_encoder(g, u, bound, cfg);
    return g.value(code).data;
}

}  // namespace csf
