#include "diffam/regions.hpp"

#include <algorithm>
#include <numeric>

#include "diffam/image_io.hpp"

namespace diffam {

const char* to_string(Region region)
{
    switch (region) {
    case Region::background:
        return "background";
    case Region::skin:
        return "skin";
    case Region::lips:
        return "lips";
    case Region::eyes:
        return "eyes";
    }
    return "?";
}

RegionMasks::RegionMasks(int height, int width, Labels labels)
    : height_(height), width_(width), labels_(std::move(labels))
{
    if (height_ <= 0 || width_ <= 0 || labels_.size() != Eigen::Index(height_) * width_)
        throw MaskError("region masks: label count does not match " + std::to_string(height) + "x" +
                        std::to_string(width));
    for (Eigen::Index i = 0; i < labels_.size(); ++i)
        if (labels_(i) > 3)
            throw MaskError("region masks: label value " + std::to_string(int(labels_(i))) + " at pixel " +
                            std::to_string(i) + " outside {0,1,2,3}");
}

RegionMasks RegionMasks::background(int height, int width)
{
    return RegionMasks(height, width, Labels::Zero(Eigen::Index(height) * width));
}

std::vector<Eigen::Index> RegionMasks::pixels_in(Region region) const
{
    std::vector<Eigen::Index> out;
    const auto label = static_cast<std::uint8_t>(region);
    for (Eigen::Index i = 0; i < labels_.size(); ++i)
        if (labels_(i) == label)
            out.push_back(i);
    return out;
}

RegionMasks load_label_map(const std::filesystem::path& path, int expected_height, int expected_width)
{
    const GrayImage gray = load_gray_png(path);
    if (expected_height >= 0 && (gray.height != expected_height || gray.width != expected_width))
        throw MaskError(path.string() + ": mask is " + std::to_string(gray.height) + "x" + std::to_string(gray.width) +
                        ", image is " + std::to_string(expected_height) + "x" + std::to_string(expected_width));
    RegionMasks::Labels labels(static_cast<Eigen::Index>(gray.data.size()));
    for (std::size_t i = 0; i < gray.data.size(); ++i)
        labels(static_cast<Eigen::Index>(i)) = gray.data[i];
    try {
        return RegionMasks(gray.height, gray.width, std::move(labels));
    } catch (const MaskError& e) {
        throw MaskError(path.string() + ": " + e.what());
    }
}

void save_label_map(const RegionMasks& masks, const std::filesystem::path& path)
{
    GrayImage gray{masks.height(), masks.width(), {masks.labels().data(), masks.labels().data() + masks.labels().size()}};
    save_gray_png(gray, path);
}

Eigen::VectorXd histogram_match_region(const Eigen::VectorXd& src, const Eigen::VectorXd& ref)
{
    if (src.size() == 0 || ref.size() == 0)
        throw std::invalid_argument("histogram_match_region: empty input");
    const Eigen::Index n = src.size();
    const Eigen::Index m = ref.size();

    std::vector<double> sorted_ref(ref.data(), ref.data() + m);
    std::sort(sorted_ref.begin(), sorted_ref.end());

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return src(a) < src(b); });

    Eigen::VectorXd out(n);
    for (Eigen::Index rank = 0; rank < n; ++rank) {
        double value;
        if (n == m) {
            value = sorted_ref[static_cast<std::size_t>(rank)];
        } else {
            // a single source value takes the reference median
            const double q = n == 1 ? 0.5 : double(rank) / double(n - 1);
            const double pos = q * double(m - 1);
            const auto lo = static_cast<std::size_t>(pos);
            const std::size_t hi = std::min(lo + 1, static_cast<std::size_t>(m - 1));
            const double frac = pos - double(lo);
            value = sorted_ref[lo] + frac * (sorted_ref[hi] - sorted_ref[lo]);
        }
        out(order[static_cast<std::size_t>(rank)]) = value;
    }
    return out;
}

HistogramMatch hm_image(const ImageBuffer& x_prime, const ImageBuffer& y, const RegionMasks& masks_x,
                        const RegionMasks& masks_y)
{
    if (!masks_x.matches(x_prime) || !masks_y.matches(y))
        throw ShapeError("hm_image: masks are not aligned to their images");
    HistogramMatch result{x_prime, {}};
    for (Region region : facial_regions) {
        const auto px = masks_x.pixels_in(region);
        const auto py = masks_y.pixels_in(region);
        if (px.empty() || py.empty()) {
            result.skipped.push_back(region);
            continue;
        }
        for (int c = 0; c < 3; ++c) {
            Eigen::VectorXd src(static_cast<Eigen::Index>(px.size()));
            Eigen::VectorXd ref(static_cast<Eigen::Index>(py.size()));
            for (std::size_t i = 0; i < px.size(); ++i)
                src(static_cast<Eigen::Index>(i)) = x_prime.pixels()(px[i], c);
            for (std::size_t i = 0; i < py.size(); ++i)
                ref(static_cast<Eigen::Index>(i)) = y.pixels()(py[i], c);
            const Eigen::VectorXd matched = histogram_match_region(src, ref);
            for (std::size_t i = 0; i < px.size(); ++i)
                result.image.pixels()(px[i], c) = matched(static_cast<Eigen::Index>(i));
        }
    }
    return result;
}

}  // namespace diffam
