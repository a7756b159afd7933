#pragma once

// Learned feature extractors behind abstract interfaces, plus seeded toy
// implementations. Each encoder owns its input preprocessing.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "diffam/types.hpp"

namespace diffam {

/// One feature map: one row per spatial location, one column per channel.
template <typename Scalar>
using FeatureMap = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

class ImageEncoder {
public:
    virtual ~ImageEncoder() = default;
    virtual int dimension() const = 0;
    virtual EmbeddingVector embed(const ImageBuffer& img) const = 0;
    virtual Embedding<ad::Var> embed(const Image<ad::Var>& img) const = 0;
};

class TextEncoder {
public:
    virtual ~TextEncoder() = default;
    virtual int dimension() const = 0;
    virtual EmbeddingVector embed(const std::string& text) const = 0;
};

class FaceEmbedder {
public:
    virtual ~FaceEmbedder() = default;
    virtual int dimension() const = 0;
    virtual EmbeddingVector embed(const ImageBuffer& img) const = 0;
    virtual Embedding<ad::Var> embed(const Image<ad::Var>& img) const = 0;
    virtual std::string name() const = 0;
};

class PerceptualExtractor {
public:
    virtual ~PerceptualExtractor() = default;
    virtual std::vector<FeatureMap<double>> features(const ImageBuffer& img) const = 0;
    virtual std::vector<FeatureMap<ad::Var>> features(const Image<ad::Var>& img) const = 0;
};

/// Image and text encoders sharing one embedding space.
struct JointEncoders {
    JointEncoders(std::shared_ptr<const ImageEncoder> image_encoder, std::shared_ptr<const TextEncoder> text_encoder);

    std::shared_ptr<const ImageEncoder> image;
    std::shared_ptr<const TextEncoder> text;
};

template <typename Scalar>
Embedding<Scalar> embed_image(const ImageEncoder& enc, const Image<Scalar>& img)
{
    if (!all_finite(img))
        throw std::domain_error("embed_image: non-finite input");
    return enc.embed(img);
}

EmbeddingVector embed_text(const TextEncoder& enc, const std::string& text);

template <typename Scalar>
Embedding<Scalar> face_embed(const FaceEmbedder& emb, const Image<Scalar>& img)
{
    if (!all_finite(img))
        throw std::domain_error("face_embed: non-finite input");
    return emb.embed(img);
}

/// Adaptive average pooling to out_h x out_w (bins as floor/ceil of the
/// proportional input range, matching the usual deep-learning definition).
template <typename Scalar>
Image<Scalar> adaptive_average_pool(const Image<Scalar>& img, int out_h, int out_w)
{
    if (out_h == img.height() && out_w == img.width())
        return img;
    Image<Scalar> out(out_h, out_w);
    for (int oy = 0; oy < out_h; ++oy) {
        const int y0 = oy * img.height() / out_h;
        const int y1 = ((oy + 1) * img.height() + out_h - 1) / out_h;
        for (int ox = 0; ox < out_w; ++ox) {
            const int x0 = ox * img.width() / out_w;
            const int x1 = ((ox + 1) * img.width() + out_w - 1) / out_w;
            const double inv = 1.0 / double((y1 - y0) * (x1 - x0));
            for (int c = 0; c < 3; ++c) {
                Scalar acc(0.0);
                for (int y = y0; y < y1; ++y)
                    for (int x = x0; x < x1; ++x)
                        acc += img(y, x, c);
                out(oy, ox, c) = acc * Scalar(inv);
            }
        }
    }
    return out;
}

/// Flattened channel-planar view of an image as a column vector.
template <typename Scalar>
VectorX<Scalar> flatten(const Image<Scalar>& img)
{
    return Eigen::Map<const VectorX<Scalar>>(img.pixels().data(), img.size());
}

// -- toy implementations -------------------------------------------------------

/// Pool to grid x grid, flatten, multiply by a fixed Gaussian matrix.
class ToyLinearImageEncoder final : public ImageEncoder {
public:
    ToyLinearImageEncoder(int dimension, std::uint64_t seed, int grid = 16);

    int dimension() const override { return static_cast<int>(weights_.rows()); }
    EmbeddingVector embed(const ImageBuffer& img) const override { return apply(img); }
    Embedding<ad::Var> embed(const Image<ad::Var>& img) const override { return apply(img); }

    const Eigen::MatrixXd& weights() const { return weights_; }
    int grid() const { return grid_; }

    template <typename Scalar>
    Embedding<Scalar> apply(const Image<Scalar>& img) const
    {
        const VectorX<Scalar> v = flatten(adaptive_average_pool(img, grid_, grid_));
        return weights_.template cast<Scalar>() * v;
    }

private:
    int grid_;
    Eigen::MatrixXd weights_;
};

/// Bag of lower-cased whitespace tokens; each token maps to a seeded Gaussian
/// vector keyed by its hash.
class ToyHashTextEncoder final : public TextEncoder {
public:
    ToyHashTextEncoder(int dimension, std::uint64_t seed) : dimension_(dimension), seed_(seed) {}

    int dimension() const override { return dimension_; }
    EmbeddingVector embed(const std::string& text) const override;
    EmbeddingVector token_vector(const std::string& token) const;

private:
    int dimension_;
    std::uint64_t seed_;
};

/// Pool to grid x grid, subtract the per-channel pooled mean, project.
class ToyFaceEmbedder final : public FaceEmbedder {
public:
    ToyFaceEmbedder(std::string name, int dimension, std::uint64_t seed, int grid = 8);

    int dimension() const override { return static_cast<int>(weights_.rows()); }
    EmbeddingVector embed(const ImageBuffer& img) const override { return apply(img); }
    Embedding<ad::Var> embed(const Image<ad::Var>& img) const override { return apply(img); }
    std::string name() const override { return name_; }

    const Eigen::MatrixXd& weights() const { return weights_; }
    int grid() const { return grid_; }

    template <typename Scalar>
    Embedding<Scalar> apply(const Image<Scalar>& img) const
    {
        Image<Scalar> pooled = adaptive_average_pool(img, grid_, grid_);
        for (int c = 0; c < 3; ++c) {
            const Scalar mean = pooled.pixels().col(c).sum() / Scalar(double(pooled.pixel_count()));
            pooled.pixels().col(c) -= mean;
        }
        return weights_.template cast<Scalar>() * flatten(pooled);
    }

private:
    std::string name_;
    int grid_;
    Eigen::MatrixXd weights_;
};

/// Two random 3x3 convolution layers with tanh, the second after 2x2 pooling.
/// A random-feature stand-in for a perceptual network; not calibrated.
class ToyConvPerceptual final : public PerceptualExtractor {
public:
    explicit ToyConvPerceptual(std::uint64_t seed, int channels = 8);

    std::vector<FeatureMap<double>> features(const ImageBuffer& img) const override { return apply(img); }
    std::vector<FeatureMap<ad::Var>> features(const Image<ad::Var>& img) const override { return apply(img); }

    template <typename Scalar>
    std::vector<FeatureMap<Scalar>> apply(const Image<Scalar>& img) const;

private:
    int channels_;
    Eigen::MatrixXd conv1_;  // (9 * 3) x channels
    Eigen::MatrixXd conv2_;  // (9 * channels) x channels
};

/// Single layer: the pixels themselves.
class IdentityPerceptual final : public PerceptualExtractor {
public:
    std::vector<FeatureMap<double>> features(const ImageBuffer& img) const override { return {img.pixels()}; }
    std::vector<FeatureMap<ad::Var>> features(const Image<ad::Var>& img) const override { return {img.pixels()}; }
};

/// Single all-zero layer.
class ZeroPerceptual final : public PerceptualExtractor {
public:
    std::vector<FeatureMap<double>> features(const ImageBuffer& img) const override
    {
        return {FeatureMap<double>::Zero(img.pixel_count(), 1)};
    }
    std::vector<FeatureMap<ad::Var>> features(const Image<ad::Var>& img) const override
    {
        return {FeatureMap<ad::Var>::Zero(img.pixel_count(), 1)};
    }
};

/// 3x3 same-padded convolution of an H x W x C_in map (row per location).
template <typename Scalar>
FeatureMap<Scalar> conv3x3(const FeatureMap<Scalar>& in, int height, int width, const Eigen::MatrixXd& kernel)
{
    const Eigen::Index c_in = in.cols();
    MatrixX<Scalar> patches = MatrixX<Scalar>::Zero(Eigen::Index(height) * width, 9 * c_in);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int sy = y + dy;
                    const int sx = x + dx;
                    if (sy < 0 || sy >= height || sx < 0 || sx >= width)
                        continue;
                    const int k = (dy + 1) * 3 + (dx + 1);
                    for (Eigen::Index c = 0; c < c_in; ++c)
                        patches(Eigen::Index(y) * width + x, k * c_in + c) = in(Eigen::Index(sy) * width + sx, c);
                }
    return (patches * kernel.template cast<Scalar>()).array();
}

template <typename Scalar>
std::vector<FeatureMap<Scalar>> ToyConvPerceptual::apply(const Image<Scalar>& img) const
{
    const auto act = [](const Scalar& v) {
        using std::tanh;
        return tanh(v);
    };
    FeatureMap<Scalar> f1 = conv3x3<Scalar>(img.pixels(), img.height(), img.width(), conv1_).unaryExpr(act);

    const int h2 = std::max(1, img.height() / 2);
    const int w2 = std::max(1, img.width() / 2);
    FeatureMap<Scalar> pooled = FeatureMap<Scalar>::Zero(Eigen::Index(h2) * w2, channels_);
    for (int y = 0; y < h2; ++y)
        for (int x = 0; x < w2; ++x) {
            const int y0 = y * img.height() / h2, y1 = ((y + 1) * img.height() + h2 - 1) / h2;
            const int x0 = x * img.width() / w2, x1 = ((x + 1) * img.width() + w2 - 1) / w2;
            const double inv = 1.0 / double((y1 - y0) * (x1 - x0));
            for (int c = 0; c < channels_; ++c) {
                Scalar acc(0.0);
                for (int sy = y0; sy < y1; ++sy)
                    for (int sx = x0; sx < x1; ++sx)
                        acc += f1(Eigen::Index(sy) * img.width() + sx, c);
                pooled(Eigen::Index(y) * w2 + x, c) = acc * Scalar(inv);
            }
        }
    FeatureMap<Scalar> f2 = conv3x3<Scalar>(pooled, h2, w2, conv2_).unaryExpr(act);
    return {std::move(f1), std::move(f2)};
}

// -- registry --------------------------------------------------------------------

/// Name -> factory registry for every extractor role. Built-in toy names:
///   image:      toy-linear-<dim>
///   text:       toy-hash-<dim>
///   face:       toy-face-<k>            (32-dim, independent weights per k)
///   perceptual: toy-conv, identity, zero
/// Plug-ins register further names; factories receive the run seed.
class EncoderRegistry {
public:
    template <typename T>
    using Factory = std::function<std::shared_ptr<const T>(const std::string& name, std::uint64_t seed)>;

    static EncoderRegistry& instance();

    void register_image_encoder(const std::string& prefix, Factory<ImageEncoder> factory);
    void register_text_encoder(const std::string& prefix, Factory<TextEncoder> factory);
    void register_face_embedder(const std::string& prefix, Factory<FaceEmbedder> factory);
    void register_perceptual(const std::string& prefix, Factory<PerceptualExtractor> factory);

    std::shared_ptr<const ImageEncoder> image_encoder(const std::string& name, std::uint64_t seed) const;
    std::shared_ptr<const TextEncoder> text_encoder(const std::string& name, std::uint64_t seed) const;
    std::shared_ptr<const FaceEmbedder> face_embedder(const std::string& name, std::uint64_t seed) const;
    std::shared_ptr<const PerceptualExtractor> perceptual(const std::string& name, std::uint64_t seed) const;

private:
    EncoderRegistry();

    template <typename T>
    struct Entry {
        std::string prefix;
        Factory<T> factory;
    };
    template <typename T>
    static std::shared_ptr<const T> lookup(const std::vector<Entry<T>>& entries, const std::string& name,
                                           std::uint64_t seed, const char* role);

    std::vector<Entry<ImageEncoder>> image_;
    std::vector<Entry<TextEncoder>> text_;
    std::vector<Entry<FaceEmbedder>> face_;
    std::vector<Entry<PerceptualExtractor>> perceptual_;
};

}  // namespace diffam
