#pragma once

#include <vector>

#include "diffam/ddim.hpp"

namespace diffam {

enum class ParameterSharing { global, per_channel, per_pixel };

const char* to_string(ParameterSharing sharing);
ParameterSharing parse_parameter_sharing(const std::string& name);

/// Noise predictor that is exact for data drawn from an axis-aligned Gaussian
/// with mean m and variance v:
///
///   eps(x_t, t) = sqrt(1 - abar) (x_t - sqrt(abar) m) / (abar v + 1 - abar)
///
/// Parameters are [m..., log v...], shared globally, per channel or per pixel.
/// Fitting the moments of a dataset is its training procedure.
class GaussianDenoiser final : public Denoiser {
public:
    GaussianDenoiser(NoiseSchedule schedule, int height, int width, ParameterSharing sharing, Eigen::VectorXd params);

    static GaussianDenoiser fit(const std::vector<ImageBuffer>& data, NoiseSchedule schedule, ParameterSharing sharing,
                                double min_variance = 1e-3);

    ImageBuffer predict_noise(const ImageBuffer& x, int t) const override;
    Image<ad::Var> predict_noise(const Image<ad::Var>& x, int t, const VectorX<ad::Var>& params) const override;

    const Eigen::VectorXd& parameters() const override { return params_; }
    void set_parameters(const Eigen::VectorXd& params) override;
    std::unique_ptr<Denoiser> clone() const override { return std::make_unique<GaussianDenoiser>(*this); }
    const NoiseSchedule& schedule() const override { return schedule_; }
    std::string kind() const override { return "toy-gaussian"; }

    ParameterSharing sharing() const { return sharing_; }
    int height() const { return height_; }
    int width() const { return width_; }
    Eigen::Index group_count() const;

    template <typename Scalar>
    Image<Scalar> evaluate(const Image<Scalar>& x, int t, const VectorX<Scalar>& params) const;

private:
    template <typename Scalar>
    PixelArray<Scalar> broadcast(const Image<Scalar>& x, const Eigen::Ref<const VectorX<Scalar>>& block) const;

    NoiseSchedule schedule_;
    int height_;
    int width_;
    ParameterSharing sharing_;
    Eigen::VectorXd params_;
};

template <typename Scalar>
PixelArray<Scalar> GaussianDenoiser::broadcast(const Image<Scalar>& x,
                                               const Eigen::Ref<const VectorX<Scalar>>& block) const
{
    const Eigen::Index n = x.pixel_count();
    switch (sharing_) {
    case ParameterSharing::global:
        return PixelArray<Scalar>::Constant(n, 3, block(0));
    case ParameterSharing::per_channel: {
        PixelArray<Scalar> out(n, 3);
        for (int c = 0; c < 3; ++c)
            out.col(c).setConstant(block(c));
        return out;
    }
    case ParameterSharing::per_pixel:
    default:
        return Eigen::Map<const PixelArray<Scalar>>(block.data(), n, 3);
    }
}

template <typename Scalar>
Image<Scalar> GaussianDenoiser::evaluate(const Image<Scalar>& x, int t, const VectorX<Scalar>& params) const
{
    if (sharing_ == ParameterSharing::per_pixel && (x.height() != height_ || x.width() != width_))
        throw ShapeError("gaussian denoiser: input " + std::to_string(x.height()) + "x" + std::to_string(x.width()) +
                         " does not match model " + std::to_string(height_) + "x" + std::to_string(width_));
    if (params.size() != params_.size())
        throw std::invalid_argument("gaussian denoiser: parameter count mismatch");
    const Eigen::Index g = group_count();
    const PixelArray<Scalar> mean = broadcast<Scalar>(x, params.head(g));
    const PixelArray<Scalar> var = broadcast<Scalar>(x, params.tail(g)).unaryExpr([](const Scalar& lv) {
        using std::exp;
        return exp(lv);
    });
    const double ab = schedule_.alpha_bar(t);
    const Scalar noise_scale(std::sqrt(1.0 - ab));
    const Scalar signal_scale(std::sqrt(ab));
    PixelArray<Scalar> eps =
        noise_scale * (x.pixels() - signal_scale * mean) / (Scalar(ab) * var + Scalar(1.0 - ab));
    return Image<Scalar>(x.height(), x.width(), std::move(eps));
}

}  // namespace diffam
