#pragma once

#include <vector>

#include "csf/common.hpp"
#include "csf/linalg.hpp"
#include "csf/rng.hpp"

namespace csf {

/// Systematic resampling: one uniform offset, stratified cumulative scan.
/// Expected copy count of index i is N * w_i. Weights are renormalized
/// internally; they must be nonnegative with a positive sum.
std::vector<int> systematic_resample(const std::vector<double>& weights, Rng& rng);

/// Normalizes log-weights via log-sum-exp. Returns false (uniform weights)
/// when every log-weight is -inf or non-finite.
bool normalize_log_weights(const std::vector<double>& logw, std::vector<double>& w);

}  // namespace csf
