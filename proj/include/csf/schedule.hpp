#pragma once

#include <cmath>
#include <vector>

#include "csf/common.hpp"
#include "csf/linalg.hpp"

namespace csf {

/// Variance-exploding diffusion schedule. The forward SDE has zero drift, so
/// alpha_t == 1 and sigma_t^2 = sigma_min^2 (r^{2t/T} - 1) with
/// r = sigma_max / sigma_min; g(t)^2 equals d(sigma_t^2)/dt.
struct NoiseSchedule {
    double sigma_min = 0.01;
    double sigma_max = 25.0;
    double horizon = 1.0;   // T
    double eps = 1e-3;      // earliest sample time
    int reverse_steps = 500;

    void validate() const {
        if (!(sigma_min > 0.0) || !(sigma_max > sigma_min))
            throw ConfigError("schedule: need 0 < sigma_min < sigma_max");
        if (!(horizon > 0.0) || !(eps > 0.0) || !(eps < horizon))
            throw ConfigError("schedule: need 0 < eps < T");
        if (reverse_steps < 1) throw ConfigError("schedule: reverse_steps >= 1");
    }

    double ratio() const { return sigma_max / sigma_min; }

    void check_time(double t) const {
        if (t < eps - 1e-12 || t > horizon + 1e-12)
            throw NumericError("schedule: t outside [eps, T]");
    }

    /// (alpha_t, sigma_t); alpha is identically 1 for the VE schedule.
    std::pair<double, double> alpha_sigma(double t) const {
        check_time(t);
        const double r = ratio();
        const double sigma = sigma_min * std::sqrt(std::pow(r, 2.0 * t / horizon) - 1.0);
        return {1.0, sigma};
    }

    double sigma(double t) const { return alpha_sigma(t).second; }

    double diffusion_coeff(double t) const {
        check_time(t);
        const double r = ratio();
        return sigma_min * std::pow(r, t / horizon) * std::sqrt(2.0 * std::log(r) / horizon);
    }

    /// x_t = alpha_t x0 + sigma_t z.
    std::vector<double> perturb(const std::vector<double>& x0, double t,
                                const std::vector<double>& z) const {
        if (x0.size() != z.size()) throw ShapeError("perturb: dim mismatch");
        const auto [alpha, sig] = alpha_sigma(t);
        std::vector<double> out(x0.size());
        for (std::size_t i = 0; i < x0.size(); ++i) out[i] = alpha * x0[i] + sig * z[i];
        return out;
    }

    /// One reverse-time Euler-Maruyama step of size dt > 0 (integrating from
    /// t = T down to t = eps): x + g^2 score dt + g sqrt(dt) xi.
    std::vector<double> reverse_euler_step(const std::vector<double>& x, double t,
                                           const std::vector<double>& total_score, double dt,
                                           const std::vector<double>& xi) const {
        if (x.size() != total_score.size() || x.size() != xi.size())
            throw ShapeError("reverse_euler_step: dim mismatch");
        if (!(dt > 0.0)) throw NumericError("reverse_euler_step: dt must be positive");
        const double g = diffusion_coeff(t);
        const double gg = g * g;
        const double gs = g * std::sqrt(dt);
        std::vector<double> out(x.size());
        for (std::size_t i = 0; i < x.size(); ++i)
            out[i] = x[i] + gg * total_score[i] * dt + gs * xi[i];
        return out;
    }

    /// In-place batched variant over an n x d matrix.
    void reverse_euler_step_batch(Matrix& x, double t, const Matrix& total_score, double dt,
                                  const Matrix& xi) const {
        if (x.rows() != total_score.rows() || x.cols() != total_score.cols() ||
            x.rows() != xi.rows() || x.cols() != xi.cols())
            throw ShapeError("reverse_euler_step: dim mismatch");
        if (!(dt > 0.0)) throw NumericError("reverse_euler_step: dt must be positive");
        const double g = diffusion_coeff(t);
        const double gg = g * g;
        const double gs = g * std::sqrt(dt);
        auto& xd = x.data();
        const auto& sd = total_score.data();
        const auto& nd = xi.data();
        for (std::size_t i = 0; i < xd.size(); ++i) xd[i] += gg * sd[i] * dt + gs * nd[i];
    }
};

}  // namespace csf
