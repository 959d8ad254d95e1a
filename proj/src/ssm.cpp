#include "csf/ssm.hpp"

#include <algorithm>
#include <cmath>

namespace csf {

DriftKind drift_kind_from_string(const std::string& s) {
    if (s == "double_well") return DriftKind::kDoubleWell;
    if (s == "triple_well") return DriftKind::kTripleWell;
    if (s == "cosine") return DriftKind::kCosine;
    if (s == "correlated_cosine") return DriftKind::kCorrelatedCosine;
    if (s == "linear") return DriftKind::kLinear;
    throw ConfigError("unknown drift kind: " + s);
}

ObsKind obs_kind_from_string(const std::string& s) {
    if (s == "cubic") return ObsKind::kCubic;
    if (s == "linear") return ObsKind::kLinear;
    throw ConfigError("unknown observation kind: " + s);
}

NoiseKind noise_kind_from_string(const std::string& s) {
    if (s == "gaussian") return NoiseKind::kGaussian;
    if (s == "cauchy") return NoiseKind::kCauchy;
    throw ConfigError("unknown noise kind: " + s);
}

double NoiseLaw::sample(Rng& rng) const {
    return kind == NoiseKind::kGaussian ? scale * rng.normal() : rng.cauchy(scale);
}

void StateSpaceModel::validate() const {
    if (dim < 1) throw ConfigError("model: dim >= 1 required");
    if (!(dt > 0.0)) throw ConfigError("model: dt must be positive");
    process.validate();
    observation.validate();
    if (!(init_sigma > 0.0)) throw ConfigError("model: init_sigma must be positive");
}

// dV/dx for the well potentials; the triple well is written through
// u = (x^2 - 1)(x - 0.5) so V = C u^2 and V' = 2 C u u'.
double StateSpaceModel::potential_gradient(double x) const {
    if (drift == DriftKind::kDoubleWell) return 4.0 * well_scale * x * (x * x - 1.0);
    const double u = (x * x - 1.0) * (x - 0.5);
    const double du = 3.0 * x * x - x - 1.0;
    return 2.0 * well_scale * u * du;
}

std::vector<double> StateSpaceModel::drift_eval(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != dim) throw ShapeError("drift_eval: dim mismatch");
    for (double v : x) require_finite(v, "drift_eval input");
    std::vector<double> out(x.size());
    switch (drift) {
        case DriftKind::kDoubleWell:
        case DriftKind::kTripleWell:
            for (std::size_t i = 0; i < x.size(); ++i)
                out[i] = -potential_gradient(x[i]) * dt;
            break;
        case DriftKind::kCosine:
            for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::cos(x[i]) * dt;
            break;
        case DriftKind::kCorrelatedCosine:
            for (int i = 0; i < dim; ++i) {
                double a = -0.5 * x[i];
                if (i + 1 < dim) a += 0.1 * x[i + 1];
                out[i] = (a + std::cos(x[i])) * dt;
            }
            break;
        case DriftKind::kLinear:
            for (std::size_t i = 0; i < x.size(); ++i) out[i] = (linear_rho - 1.0) * x[i];
            break;
    }
    return out;
}

std::vector<double> StateSpaceModel::step(const std::vector<double>& x, Rng& rng) const {
    std::vector<double> d = drift_eval(x);
    const double nm = noise_multiplier();
    const bool keep = keeps_state_term();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = (keep ? x[i] : 0.0) + d[i] + nm * process.sample(rng);
    return out;
}

std::vector<double> StateSpaceModel::observe(const std::vector<double>& x) const {
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        y[i] = obs == ObsKind::kCubic ? x[i] * x[i] * x[i] : x[i];
    return y;
}

Matrix StateSpaceModel::propagate(const Matrix& ensemble, Rng& rng) const {
    if (ensemble.cols() != dim) throw ShapeError("propagate: dim mismatch");
    if (!ensemble.all_finite()) throw NumericError("propagate: non-finite ensemble");
    Matrix out(ensemble.rows(), dim);
    std::vector<double> x(dim);
    for (int r = 0; r < ensemble.rows(); ++r) {
        for (int c = 0; c < dim; ++c) x[c] = ensemble(r, c);
        const std::vector<double> nx = step(x, rng);
        for (int c = 0; c < dim; ++c) out(r, c) = nx[c];
    }
    return out;
}

double StateSpaceModel::log_likelihood(const std::vector<double>& y,
                                       const std::vector<double>& x) const {
    if (y.size() != x.size() || static_cast<int>(x.size()) != dim)
        throw ShapeError("log_likelihood: dim mismatch");
    const std::vector<double> hx = observe(x);
    double ll = 0.0;
    if (observation.kind == NoiseKind::kGaussian) {
        const double s2 = observation.scale * observation.scale;
        const double c = -0.5 * std::log(2.0 * 3.14159265358979323846 * s2);
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double r = y[i] - hx[i];
            ll += -r * r / (2.0 * s2) + c;
        }
    } else {
        const double g = observation.scale;
        const double c = -std::log(3.14159265358979323846 * g);
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double u = (y[i] - hx[i]) / g;
            ll += -std::log1p(u * u) + c;
        }
    }
    return ll;
}

std::vector<double> StateSpaceModel::likelihood_score(const std::vector<double>& y,
                                                      const std::vector<double>& x0) const {
    if (y.size() != x0.size() || static_cast<int>(x0.size()) != dim)
        throw ShapeError("likelihood_score: dim mismatch");
    const std::vector<double> hx = observe(x0);
    std::vector<double> grad(x0.size());
    if (observation.kind == NoiseKind::kGaussian) {
        const double s2 = observation.scale * observation.scale;
        for (std::size_t i = 0; i < y.size(); ++i)
            grad[i] = (y[i] - hx[i]) / s2 * obs_derivative(x0[i]);
    } else {
        const double g = observation.scale;
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double r = y[i] - hx[i];
            grad[i] = 2.0 * r / (g * g * (1.0 + (r / g) * (r / g))) * obs_derivative(x0[i]);
        }
    }
    return grad;
}

Trajectory StateSpaceModel::simulate_truth(int steps, const ShockSpec& shocks, Rng& rng) const {
    if (steps < 1) throw ConfigError("simulate_truth: steps >= 1");
    for (int s : shocks.steps)
        if (s < 1 || s > steps) throw ConfigError("simulate_truth: shock step out of range");
    Trajectory traj;
    traj.truth = Matrix(steps, dim);
    traj.observations = Matrix(steps, dim);
    std::vector<double> x(dim, 0.0);
    for (int k = 1; k <= steps; ++k) {
        x = step(x, rng);
        if (std::find(shocks.steps.begin(), shocks.steps.end(), k) != shocks.steps.end()) {
            std::vector<double> delta(dim);
            for (int c = 0; c < dim; ++c) {
                delta[c] = shocks.sigma * rng.normal();
                x[c] += delta[c];
            }
            traj.shocks.emplace_back(k, std::move(delta));
        }
        const std::vector<double> y = observe(x);
        for (int c = 0; c < dim; ++c) {
            traj.truth(k - 1, c) = x[c];
            traj.observations(k - 1, c) = y[c] + observation.sample(rng);
        }
    }
    return traj;
}

Matrix StateSpaceModel::initial_ensemble(int particles, Rng& rng) const {
    Matrix e(particles, dim);
    for (int r = 0; r < particles; ++r)
        for (int c = 0; c < dim; ++c) e(r, c) = init_sigma * rng.normal();
    return e;
}

}  // namespace csf
