#include "csf/resampling.hpp"

#include <cmath>

namespace csf {

std::vector<int> systematic_resample(const std::vector<double>& weights, Rng& rng) {
    const int n = static_cast<int>(weights.size());
    if (n == 0) throw ShapeError("systematic_resample: empty weights");
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw NumericError("systematic_resample: negative or NaN weight");
        sum += w;
    }
    if (!(sum > 0.0)) throw NumericError("systematic_resample: all weights zero");
    const double offset = rng.uniform();
    std::vector<int> idx(n);
    double cumulative = weights[0] / sum;
    int j = 0;
    for (int i = 0; i < n; ++i) {
        const double u = (i + offset) / n;
        while (u > cumulative && j + 1 < n) {
            ++j;
            cumulative += weights[j] / sum;
        }
        idx[i] = j;
    }
    return idx;
}

bool normalize_log_weights(const std::vector<double>& logw, std::vector<double>& w) {
    const double lse = log_sum_exp(logw);
    w.assign(logw.size(), 1.0 / static_cast<double>(logw.size()));
    if (!std::isfinite(lse)) return false;
    for (std::size_t i = 0; i < logw.size(); ++i) w[i] = std::exp(logw[i] - lse);
    return true;
}

}  // namespace csf
