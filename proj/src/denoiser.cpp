#include "diffam/denoiser.hpp"

#include <cmath>

namespace diffam {

const char* to_string(ParameterSharing sharing)
{
    switch (sharing) {
    case ParameterSharing::global:
        return "global";
    case ParameterSharing::per_channel:
        return "per_channel";
    case ParameterSharing::per_pixel:
        return "per_pixel";
    }
    return "?";
}

ParameterSharing parse_parameter_sharing(const std::string& name)
{
    if (name == "global")
        return ParameterSharing::global;
    if (name == "per_channel")
        return ParameterSharing::per_channel;
    if (name == "per_pixel")
        return ParameterSharing::per_pixel;
    throw std::invalid_argument("unknown parameter sharing '" + name + "'");
}

GaussianDenoiser::GaussianDenoiser(NoiseSchedule schedule, int height, int width, ParameterSharing sharing,
                                   Eigen::VectorXd params)
    : schedule_(std::move(schedule)), height_(height), width_(width), sharing_(sharing), params_(std::move(params))
{
    if (height_ <= 0 || width_ <= 0)
        throw ShapeError("gaussian denoiser: dimensions must be positive");
    if (params_.size() != 2 * group_count())
        throw std::invalid_argument("gaussian denoiser: expected " + std::to_string(2 * group_count()) +
                                    " parameters, got " + std::to_string(params_.size()));
}

Eigen::Index GaussianDenoiser::group_count() const
{
    switch (sharing_) {
    case ParameterSharing::global:
        return 1;
    case ParameterSharing::per_channel:
        return 3;
    case ParameterSharing::per_pixel:
        break;
    }
    return Eigen::Index(height_) * width_ * 3;
}

GaussianDenoiser GaussianDenoiser::fit(const std::vector<ImageBuffer>& data, NoiseSchedule schedule,
                                       ParameterSharing sharing, double min_variance)
{
    if (data.empty())
        throw std::invalid_argument("gaussian denoiser: empty training set");
    const int h = data.front().height();
    const int w = data.front().width();
    const Eigen::Index n = Eigen::Index(h) * w;

    PixelArray<double> sum = PixelArray<double>::Zero(n, 3);
    PixelArray<double> sum_sq = PixelArray<double>::Zero(n, 3);
    for (const auto& img : data) {
        require_same_shape(img, data.front(), "gaussian denoiser fit");
        sum += img.pixels();
        sum_sq += img.pixels().square();
    }
    const double count = static_cast<double>(data.size());

    Eigen::VectorXd mean;
    Eigen::VectorXd var;
    switch (sharing) {
    case ParameterSharing::global: {
        const double m = sum.sum() / (count * double(n * 3));
        mean = Eigen::VectorXd::Constant(1, m);
        var = Eigen::VectorXd::Constant(1, sum_sq.sum() / (count * double(n * 3)) - m * m);
        break;
    }
    case ParameterSharing::per_channel: {
        mean.resize(3);
        var.resize(3);
        for (int c = 0; c < 3; ++c) {
            mean(c) = sum.col(c).sum() / (count * double(n));
            var(c) = sum_sq.col(c).sum() / (count * double(n)) - mean(c) * mean(c);
        }
        break;
    }
    case ParameterSharing::per_pixel: {
        const PixelArray<double> m = sum / count;
        const PixelArray<double> v = sum_sq / count - m.square();
        mean = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
        var = Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
        break;
    }
    }
    Eigen::VectorXd params(mean.size() * 2);
    params.head(mean.size()) = mean;
    params.tail(var.size()) = var.cwiseMax(min_variance).array().log().matrix();
    return GaussianDenoiser(std::move(schedule), h, w, sharing, std::move(params));
}

ImageBuffer GaussianDenoiser::predict_noise(const ImageBuffer& x, int t) const
{
    return evaluate<double>(x, t, params_);
}

Image<ad::Var> GaussianDenoiser::predict_noise(const Image<ad::Var>& x, int t, const VectorX<ad::Var>& params) const
{
    return evaluate<ad::Var>(x, t, params);
}

void GaussianDenoiser::set_parameters(const Eigen::VectorXd& params)
{
    if (params.size() != params_.size())
        throw std::invalid_argument("gaussian denoiser: parameter count mismatch");
    params_ = params;
}

}  // namespace diffam
