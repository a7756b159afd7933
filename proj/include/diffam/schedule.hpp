#pragma once

#include <vector>

#include <Eigen/Core>

namespace diffam {

/// Per-step variances beta_t (t = 1..T) and cumulative products alpha_bar_t
/// (t = 0..T, alpha_bar_0 = 1). Immutable after construction.
class NoiseSchedule {
public:
    explicit NoiseSchedule(Eigen::VectorXd betas);

    int t_full() const { return static_cast<int>(betas_.size()); }
    double beta(int t) const;
    double alpha_bar(int t) const;
    const Eigen::VectorXd& betas() const { return betas_; }
    const Eigen::VectorXd& alpha_bars() const { return alpha_bars_; }

private:
    Eigen::VectorXd betas_;
    Eigen::VectorXd alpha_bars_;
};

NoiseSchedule make_linear_schedule(int t_full, double beta_start, double beta_end);

/// Strictly increasing timesteps in [1, t0], ending at t0.
struct TimestepSequence {
    int t0 = 0;
    std::vector<int> steps;

    int size() const { return static_cast<int>(steps.size()); }
};

/// round(t0 * i / s) for i = 1..s, deduplicated, last entry t0.
TimestepSequence discretize(int t0, int s, int t_full);
TimestepSequence discretize(int t0, int s, const NoiseSchedule& schedule);

}  // namespace diffam
