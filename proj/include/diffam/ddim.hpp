#pragma once

// Deterministic (sigma = 0) DDIM sampling and inversion over an abstract
// noise-prediction model.

#include <cmath>
#include <iterator>
#include <memory>
#include <string>

#include "diffam/schedule.hpp"
#include "diffam/types.hpp"

namespace diffam {

/// Noise predictor eps(x_t, t). Parameters live in one flat vector so that a
/// frozen original and a trainable copy are two instances of the same model.
class Denoiser {
public:
    virtual ~Denoiser() = default;

    virtual ImageBuffer predict_noise(const ImageBuffer& x, int t) const = 0;
    /// Evaluation with gradients flowing to `params` (and to x).
    virtual Image<ad::Var> predict_noise(const Image<ad::Var>& x, int t, const VectorX<ad::Var>& params) const = 0;

    virtual const Eigen::VectorXd& parameters() const = 0;
    virtual void set_parameters(const Eigen::VectorXd& params) = 0;
    virtual std::unique_ptr<Denoiser> clone() const = 0;
    virtual const NoiseSchedule& schedule() const = 0;
    virtual std::string kind() const = 0;
};

/// Noise callable bound to a denoiser's own parameters.
inline auto noise_fn(const Denoiser& model)
{
    return [&model](const ImageBuffer& x, int t) { return model.predict_noise(x, t); };
}

/// Noise callable bound to taped parameters.
inline auto noise_fn(const Denoiser& model, const VectorX<ad::Var>& params)
{
    return [&model, &params](const Image<ad::Var>& x, int t) { return model.predict_noise(x, t, params); };
}

/// sqrt(abar_t) x0 + sqrt(1 - abar_t) eps
template <typename Scalar>
Image<Scalar> forward_sample(const Image<Scalar>& x0, int t, const Image<Scalar>& eps, const NoiseSchedule& sched)
{
    require_same_shape(x0, eps, "forward_sample");
    const double ab = sched.alpha_bar(t);
    return Image<Scalar>(x0.height(), x0.width(),
                         x0.pixels() * Scalar(std::sqrt(ab)) + eps.pixels() * Scalar(std::sqrt(1.0 - ab)));
}

/// (x_t - sqrt(1 - abar_t) eps) / sqrt(abar_t)
template <typename Scalar>
Image<Scalar> predict_x0(const Image<Scalar>& xt, int t, const Image<Scalar>& eps_pred, const NoiseSchedule& sched)
{
    require_same_shape(xt, eps_pred, "predict_x0");
    const double ab = sched.alpha_bar(t);
    return Image<Scalar>(xt.height(), xt.width(),
                         (xt.pixels() - eps_pred.pixels() * Scalar(std::sqrt(1.0 - ab))) * Scalar(1.0 / std::sqrt(ab)));
}

/// One deterministic DDIM move from t to t_next, in either direction:
/// x' = sqrt(abar') f(x_t, t) + sqrt(1 - abar') eps(x_t, t).
template <typename Scalar, typename NoiseFn>
Image<Scalar> ddim_step(const Image<Scalar>& xt, int t, int t_next, NoiseFn&& noise, const NoiseSchedule& sched)
{
    if (t_next == t)
        throw std::invalid_argument("ddim_step: t_next equals t (" + std::to_string(t) + ")");
    const Image<Scalar> eps = noise(xt, t);
    require_same_shape(xt, eps, "ddim_step (denoiser output)");
    const Image<Scalar> x0 = predict_x0(xt, t, eps, sched);
    const double ab_next = sched.alpha_bar(t_next);
    return Image<Scalar>(xt.height(), xt.width(),
                         x0.pixels() * Scalar(std::sqrt(ab_next)) + eps.pixels() * Scalar(std::sqrt(1.0 - ab_next)));
}

/// x0 -> latent at ts.t0, stepping 0 -> ts.steps[0] -> ... -> t0.
template <typename Scalar, typename NoiseFn>
Image<Scalar> ddim_invert(const Image<Scalar>& x0, NoiseFn&& noise, const NoiseSchedule& sched,
                          const TimestepSequence& ts)
{
    Image<Scalar> x = x0;
    int t = 0;
    for (int next : ts.steps) {
        x = ddim_step(x, t, next, noise, sched);
        t = next;
    }
    return x;
}

/// latent at ts.t0 -> x0 estimate, stepping t0 -> ... -> ts.steps[0] -> 0.
template <typename Scalar, typename NoiseFn>
Image<Scalar> ddim_sample(const Image<Scalar>& latent, NoiseFn&& noise, const NoiseSchedule& sched,
                          const TimestepSequence& ts)
{
    Image<Scalar> x = latent;
    for (auto it = ts.steps.rbegin(); it != ts.steps.rend(); ++it) {
        const int next = std::next(it) == ts.steps.rend() ? 0 : *std::next(it);
        x = ddim_step(x, *it, next, noise, sched);
    }
    return x;
}

inline ImageBuffer ddim_invert(const ImageBuffer& x0, const Denoiser& model, const TimestepSequence& ts)
{
    return ddim_invert(x0, noise_fn(model), model.schedule(), ts);
}

inline ImageBuffer ddim_sample(const ImageBuffer& latent, const Denoiser& model, const TimestepSequence& ts)
{
    return ddim_sample(latent, noise_fn(model), model.schedule(), ts);
}

}  // namespace diffam
