#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "diffam/ad.hpp"
#include "diffam/random.hpp"
#include "diffam/regions.hpp"
#include "diffam/types.hpp"

namespace testing {

using namespace diffam;
using ad::Var;

inline ImageBuffer random_image(Rng& rng, int h, int w, double lo = -1.0, double hi = 1.0)
{
    ImageBuffer img(h, w);
    for (Eigen::Index i = 0; i < img.size(); ++i)
        img.pixels().data()[i] = rng.uniform(lo, hi);
    return img;
}

inline RegionMasks random_masks(Rng& rng, int h, int w, int max_label = 3)
{
    RegionMasks::Labels labels(Eigen::Index(h) * w);
    for (Eigen::Index i = 0; i < labels.size(); ++i)
        labels(i) = static_cast<std::uint8_t>(rng.below(std::uint64_t(max_label) + 1));
    return RegionMasks(h, w, labels);
}

/// Image whose every entry is a fresh tape variable.
inline Image<Var> taped_image(ad::Tape& tape, const ImageBuffer& x, VectorX<Var>& vars)
{
    const Eigen::Map<const Eigen::VectorXd> flat(x.pixels().data(), x.size());
    vars = tape.variables(flat);
    PixelArray<Var> p(x.pixel_count(), 3);
    for (Eigen::Index i = 0; i < x.size(); ++i)
        p.data()[i] = vars(i);
    return Image<Var>(x.height(), x.width(), p);
}

struct GradCheck {
    Eigen::VectorXd analytic;
    Eigen::VectorXd numeric;
    double rel_error = 0.0;
};

inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b)
{
    const double scale = std::max({a.norm(), b.norm(), 1e-12});
    return (a - b).norm() / scale;
}

/// Reverse-mode gradient of f at x against central differences.
template <typename F>
GradCheck check_image_gradient(F&& f, const ImageBuffer& x, double h = 1e-6)
{
    GradCheck out;
    {
        ad::Tape tape;
        VectorX<Var> vars;
        const Image<Var> xv = taped_image(tape, x, vars);
        const Var loss = f(xv);
        out.analytic = tape.gradient(loss, vars);
    }
    out.numeric.resize(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        ImageBuffer plus = x, minus = x;
        plus.pixels().data()[i] += h;
        minus.pixels().data()[i] -= h;
        out.numeric(i) = (f(plus) - f(minus)) / (2.0 * h);
    }
    out.rel_error = relative_error(out.analytic, out.numeric);
    return out;
}

/// Sort-and-assign histogram matching written independently of the library:
/// ranks by counting, quantiles by direct interpolation.
inline Eigen::VectorXd brute_force_hm(const Eigen::VectorXd& src, const Eigen::VectorXd& ref)
{
    const Eigen::Index n = src.size(), m = ref.size();
    std::vector<double> sorted(ref.data(), ref.data() + m);
    std::sort(sorted.begin(), sorted.end());
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index rank = 0;
        for (Eigen::Index j = 0; j < n; ++j)
            if (src(j) < src(i) || (src(j) == src(i) && j < i))
                ++rank;
        if (n == m) {
            out(i) = sorted[std::size_t(rank)];
            continue;
        }
        const double pos = (n == 1 ? 0.5 : double(rank) / double(n - 1)) * double(m - 1);
        const double lo = std::floor(pos);
        const double hi = std::min(lo + 1.0, double(m - 1));
        out(i) = sorted[std::size_t(lo)] * (1.0 - (pos - lo)) + sorted[std::size_t(hi)] * (pos - lo);
    }
    return out;
}

inline ImageBuffer brute_force_hm_image(const ImageBuffer& x, const ImageBuffer& y, const RegionMasks& mx,
                                        const RegionMasks& my)
{
    ImageBuffer out = x;
    for (int r = 1; r <= 3; ++r) {
        std::vector<Eigen::Index> px, py;
        for (Eigen::Index i = 0; i < x.pixel_count(); ++i)
            if (mx.labels()(i) == r)
                px.push_back(i);
        for (Eigen::Index i = 0; i < y.pixel_count(); ++i)
            if (my.labels()(i) == r)
                py.push_back(i);
        if (px.empty() || py.empty())
            continue;
        for (int c = 0; c < 3; ++c) {
            Eigen::VectorXd s(Eigen::Index(px.size())), t(Eigen::Index(py.size()));
            for (std::size_t k = 0; k < px.size(); ++k)
                s(Eigen::Index(k)) = x.pixels()(px[k], c);
            for (std::size_t k = 0; k < py.size(); ++k)
                t(Eigen::Index(k)) = y.pixels()(py[k], c);
            const Eigen::VectorXd matched = brute_force_hm(s, t);
            for (std::size_t k = 0; k < px.size(); ++k)
                out.pixels()(px[k], c) = matched(Eigen::Index(k));
        }
    }
    return out;
}

/// Smallest score whose acceptance fraction is within far, by direct counting.
inline double brute_force_threshold(const std::vector<double>& scores, double far)
{
    std::vector<double> candidates = scores;
    std::sort(candidates.begin(), candidates.end());
    for (double tau : candidates) {
        const auto count = std::count_if(scores.begin(), scores.end(), [tau](double s) { return s >= tau; });
        if (double(count) / double(scores.size()) <= far)
            return tau;
    }
    return candidates.back() + 1e-9;
}

inline std::filesystem::path temp_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("diffam-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing
