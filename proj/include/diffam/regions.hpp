#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "diffam/types.hpp"

namespace diffam {

enum class Region : std::uint8_t { background = 0, skin = 1, lips = 2, eyes = 3 };

inline constexpr std::array<Region, 3> facial_regions{Region::skin, Region::lips, Region::eyes};

const char* to_string(Region region);

struct MaskError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Per-pixel facial region labels, same row-major pixel order as Image.
class RegionMasks {
public:
    using Labels = Eigen::Array<std::uint8_t, Eigen::Dynamic, 1>;

    RegionMasks(int height, int width, Labels labels);
    static RegionMasks background(int height, int width);

    int height() const { return height_; }
    int width() const { return width_; }
    const Labels& labels() const { return labels_; }
    Region at(int y, int x) const { return static_cast<Region>(labels_(Eigen::Index(y) * width_ + x)); }

    /// Pixel indices carrying `region`, ascending.
    std::vector<Eigen::Index> pixels_in(Region region) const;

    template <typename Scalar>
    bool matches(const Image<Scalar>& img) const
    {
        return img.height() == height_ && img.width() == width_;
    }

private:
    int height_;
    int width_;
    Labels labels_;
};

/// Reads an 8-bit single-channel PNG with values in {0, 1, 2, 3}.
/// expected_height/width of -1 skip the shape check.
RegionMasks load_label_map(const std::filesystem::path& path, int expected_height = -1, int expected_width = -1);
void save_label_map(const RegionMasks& masks, const std::filesystem::path& path);

/// Rank-based histogram matching. Element i receives the reference quantile at
/// its stable rank (ties broken by index), linearly interpolated when the two
/// lengths differ.
Eigen::VectorXd histogram_match_region(const Eigen::VectorXd& src, const Eigen::VectorXd& ref);

struct HistogramMatch {
    ImageBuffer image;
    std::vector<Region> skipped;  // regions empty on either side
};

/// Region-wise, channel-wise histogram matching of x_prime against y.
/// Background and skipped regions are copied from x_prime.
HistogramMatch hm_image(const ImageBuffer& x_prime, const ImageBuffer& y, const RegionMasks& masks_x,
                        const RegionMasks& masks_y);

}  // namespace diffam
