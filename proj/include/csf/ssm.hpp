#pragma once

#include <string>
#include <vector>

#include "csf/common.hpp"
#include "csf/linalg.hpp"
#include "csf/rng.hpp"

namespace csf {

enum class DriftKind { kDoubleWell, kTripleWell, kCosine, kCorrelatedCosine, kLinear };
enum class ObsKind { kCubic, kLinear };
enum class NoiseKind { kGaussian, kCauchy };

DriftKind drift_kind_from_string(const std::string& s);
ObsKind obs_kind_from_string(const std::string& s);
NoiseKind noise_kind_from_string(const std::string& s);

/// Per-dimension i.i.d. noise law.
struct NoiseLaw {
    NoiseKind kind = NoiseKind::kGaussian;
    double scale = 0.1;  // Gaussian sigma or Cauchy gamma

    void validate() const {
        if (!(scale > 0.0)) throw ConfigError("noise scale must be positive");
    }
    double sample(Rng& rng) const;
};

struct ShockSpec {
    std::vector<int> steps;  // 1-based step indices; empty disables shocks
    double sigma = 1.0;
};

struct Trajectory {
    Matrix truth;         // K x d
    Matrix observations;  // K x m
    std::vector<std::pair<int, std::vector<double>>> shocks;
};

/// One filtering problem: drift kind with constants, componentwise
/// observation map, and the two noise laws. The observation dimension always
/// equals the state dimension.
class StateSpaceModel {
   public:
    DriftKind drift = DriftKind::kDoubleWell;
    ObsKind obs = ObsKind::kCubic;
    int dim = 1;
    double dt = 0.1;
    double well_scale = 1.0;   // C in the potential definitions
    double linear_rho = 0.9;   // linear drift multiplier
    bool ou_form = false;      // well models: use x + drift instead of drift alone
    NoiseLaw process{NoiseKind::kGaussian, 0.2};
    NoiseLaw observation{NoiseKind::kGaussian, 0.1};
    double init_sigma = 0.5;   // filter ensemble spread around the zero start

    void validate() const;

    /// Superdiagonal 0.1 / diagonal -0.5 coupling used by the correlated drift.
    double coupling(int i, int j) const {
        if (i == j) return -0.5;
        if (i + 1 == j) return 0.1;
        return 0.0;
    }

    /// Per-step displacement, already including dt where the recursion does.
    std::vector<double> drift_eval(const std::vector<double>& x) const;

    /// Whether the recursion keeps the x_k term (well models drop it unless
    /// ou_form is set).
    bool keeps_state_term() const {
        if (drift == DriftKind::kDoubleWell || drift == DriftKind::kTripleWell) return ou_form;
        return true;
    }

    /// Process-noise multiplier in the recursion (sqrt(dt) for well models).
    double noise_multiplier() const {
        if (drift == DriftKind::kDoubleWell || drift == DriftKind::kTripleWell)
            return std::sqrt(dt);
        return 1.0;
    }

    /// One application of the state recursion to a single state.
    std::vector<double> step(const std::vector<double>& x, Rng& rng) const;

    /// Observation map h applied componentwise.
    std::vector<double> observe(const std::vector<double>& x) const;
    double obs_derivative(double x) const { return obs == ObsKind::kCubic ? 3.0 * x * x : 1.0; }

    /// Propagates every ensemble row with an independent process-noise draw.
    Matrix propagate(const Matrix& ensemble, Rng& rng) const;

    double log_likelihood(const std::vector<double>& y, const std::vector<double>& x) const;

    /// Gradient of log_likelihood w.r.t. the state.
    std::vector<double> likelihood_score(const std::vector<double>& y,
                                         const std::vector<double>& x0) const;

    /// Simulates K steps from the zero state; shock displacements are added to
    /// the truth only and recorded.
    Trajectory simulate_truth(int steps, const ShockSpec& shocks, Rng& rng) const;

    /// Initial filter ensemble N(0, init_sigma^2 I).
    Matrix initial_ensemble(int particles, Rng& rng) const;

   private:
    double potential_gradient(double x) const;
};

}  // namespace csf
