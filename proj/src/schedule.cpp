#include "diffam/schedule.hpp"

#include <string>

#include "diffam/errors.hpp"

namespace diffam {

NoiseSchedule::NoiseSchedule(Eigen::VectorXd betas) : betas_(std::move(betas))
{
    if (betas_.size() < 1)
        throw std::invalid_argument("noise schedule: need at least one step");
    alpha_bars_.resize(betas_.size() + 1);
    alpha_bars_(0) = 1.0;
    for (Eigen::Index t = 0; t < betas_.size(); ++t) {
        const double b = betas_(t);
        if (!(b > 0.0 && b < 1.0))
            throw std::invalid_argument("noise schedule: beta_" + std::to_string(t + 1) + " = " + std::to_string(b) +
                                        " outside (0, 1)");
        alpha_bars_(t + 1) = alpha_bars_(t) * (1.0 - b);
    }
}

double NoiseSchedule::beta(int t) const
{
    if (t < 1 || t > t_full())
        throw std::out_of_range("noise schedule: beta index " + std::to_string(t));
    return betas_(t - 1);
}

double NoiseSchedule::alpha_bar(int t) const
{
    if (t < 0 || t > t_full())
        throw std::out_of_range("noise schedule: timestep " + std::to_string(t) + " outside [0, " +
                                std::to_string(t_full()) + "]");
    return alpha_bars_(t);
}

NoiseSchedule make_linear_schedule(int t_full, double beta_start, double beta_end)
{
    if (t_full < 1)
        throw std::invalid_argument("linear schedule: t_full must be positive");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw std::invalid_argument("linear schedule: need 0 < beta_start <= beta_end < 1");
    Eigen::VectorXd betas = Eigen::VectorXd::Constant(1, beta_start);
    if (t_full > 1)
        betas = Eigen::VectorXd::LinSpaced(t_full, beta_start, beta_end);
    return NoiseSchedule(std::move(betas));
}

TimestepSequence discretize(int t0, int s, int t_full)
{
    if (t0 < 1 || t0 > t_full)
        throw std::invalid_argument("discretize: t0 = " + std::to_string(t0) + " outside [1, " +
                                    std::to_string(t_full) + "]");
    if (s < 1 || s > t0)
        throw std::invalid_argument("discretize: steps = " + std::to_string(s) + " outside [1, t0]");
    TimestepSequence seq{t0, {}};
    seq.steps.reserve(static_cast<std::size_t>(s));
    for (long i = 1; i <= s; ++i) {
        // round-half-up of t0 * i / s in integer arithmetic
        const int t = static_cast<int>((2L * t0 * i + s) / (2L * s));
        if (seq.steps.empty() || t > seq.steps.back())
            seq.steps.push_back(t);
    }
    seq.steps.back() = t0;
    return seq;
}

TimestepSequence discretize(int t0, int s, const NoiseSchedule& schedule)
{
    return discretize(t0, s, schedule.t_full());
}

}  // namespace diffam
