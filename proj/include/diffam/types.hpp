#pragma once

#include <Eigen/Core>

#include "diffam/ad.hpp"
#include "diffam/errors.hpp"

namespace diffam {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// One row per pixel (row-major, index y * width + x), one column per channel.
template <typename Scalar>
using PixelArray = Eigen::Array<Scalar, Eigen::Dynamic, 3>;

template <typename Scalar>
using Embedding = VectorX<Scalar>;
using EmbeddingVector = Embedding<double>;

/// H x W x 3 image, values conventionally in [-1, 1].
template <typename Scalar>
class Image {
public:
    Image() = default;
    Image(int height, int width) : height_(height), width_(width), pixels_(PixelArray<Scalar>::Zero(rows(height, width), 3)) {}
    Image(int height, int width, PixelArray<Scalar> pixels) : height_(height), width_(width), pixels_(std::move(pixels))
    {
        if (pixels_.rows() != rows(height, width))
            throw ShapeError("image: pixel array does not match " + std::to_string(height) + "x" + std::to_string(width));
    }

    static Image constant(int height, int width, Scalar value)
    {
        return Image(height, width, PixelArray<Scalar>::Constant(rows(height, width), 3, value));
    }

    int height() const { return height_; }
    int width() const { return width_; }
    Eigen::Index pixel_count() const { return pixels_.rows(); }
    Eigen::Index size() const { return pixels_.size(); }

    PixelArray<Scalar>& pixels() { return pixels_; }
    const PixelArray<Scalar>& pixels() const { return pixels_; }

    Scalar& operator()(int y, int x, int c) { return pixels_(Eigen::Index(y) * width_ + x, c); }
    const Scalar& operator()(int y, int x, int c) const { return pixels_(Eigen::Index(y) * width_ + x, c); }

    template <typename Other>
    bool same_shape(const Image<Other>& other) const
    {
        return height_ == other.height() && width_ == other.width();
    }

    template <typename Target>
    Image<Target> cast() const
    {
        return Image<Target>(height_, width_, pixels_.template cast<Target>());
    }

private:
    static Eigen::Index rows(int height, int width)
    {
        if (height <= 0 || width <= 0)
            throw ShapeError("image: dimensions must be positive");
        return Eigen::Index(height) * width;
    }

    int height_ = 0;
    int width_ = 0;
    PixelArray<Scalar> pixels_;
};

using ImageBuffer = Image<double>;

template <typename A, typename B>
void require_same_shape(const Image<A>& a, const Image<B>& b, const char* what)
{
    if (!a.same_shape(b))
        throw ShapeError(std::string(what) + ": shape mismatch (" + std::to_string(a.height()) + "x" +
                         std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                         std::to_string(b.width()) + ")");
}

inline ImageBuffer values(const Image<ad::Var>& img)
{
    return ImageBuffer(img.height(), img.width(), ad::values(img.pixels()));
}
inline const ImageBuffer& values(const ImageBuffer& img) { return img; }

template <typename Scalar>
Image<Scalar> lift(const ImageBuffer& img)
{
    return img.template cast<Scalar>();
}

template <typename Scalar>
bool all_finite(const Image<Scalar>& img)
{
    for (Eigen::Index i = 0; i < img.size(); ++i)
        if (!std::isfinite(ad::value_of(img.pixels().data()[i])))
            return false;
    return true;
}

}  // namespace diffam
