#include "diffam/encoders.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

#include "diffam/random.hpp"

namespace diffam {

namespace {

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale)
{
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i)
            m(i, j) = scale * rng.normal();
    return m;
}

int parse_suffix(const std::string& name, const std::string& prefix, const char* role, int min_value = 1)
{
    const std::string tail = name.substr(prefix.size());
    try {
        std::size_t used = 0;
        const int v = std::stoi(tail, &used);
        if (used != tail.size() || v < min_value)
            throw std::invalid_argument(tail);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(std::string("unknown ") + role + " '" + name + "'");
    }
}

}  // namespace

JointEncoders::JointEncoders(std::shared_ptr<const ImageEncoder> image_encoder,
                             std::shared_ptr<const TextEncoder> text_encoder)
    : image(std::move(image_encoder)), text(std::move(text_encoder))
{
    if (!image || !text)
        throw std::invalid_argument("joint encoders: both encoders are required");
    if (image->dimension() != text->dimension())
        throw ShapeError("joint encoders: image dimension " + std::to_string(image->dimension()) +
                         " differs from text dimension " + std::to_string(text->dimension()));
}

EmbeddingVector embed_text(const TextEncoder& enc, const std::string& text)
{
    if (text.find_first_not_of(" \t\r\n") == std::string::npos)
        throw std::invalid_argument("embed_text: empty prompt");
    return enc.embed(text);
}

ToyLinearImageEncoder::ToyLinearImageEncoder(int dimension, std::uint64_t seed, int grid) : grid_(grid)
{
    if (dimension <= 0 || grid <= 0)
        throw std::invalid_argument("toy linear encoder: dimension and grid must be positive");
    Rng rng(seed, "toy-linear-image");
    const Eigen::Index in = Eigen::Index(grid) * grid * 3;
    weights_ = gaussian_matrix(dimension, in, rng, 1.0 / std::sqrt(double(in)));
}

EmbeddingVector ToyHashTextEncoder::token_vector(const std::string& token) const
{
    Rng rng(derive_seed(seed_, "toy-hash-text"), token);
    EmbeddingVector v(dimension_);
    for (int i = 0; i < dimension_; ++i)
        v(i) = rng.normal();
    return v;
}

EmbeddingVector ToyHashTextEncoder::embed(const std::string& text) const
{
    EmbeddingVector out = EmbeddingVector::Zero(dimension_);
    std::istringstream in(text);
    std::string token;
    while (in >> token) {
        for (char& ch : token)
            ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        out += token_vector(token);
    }
    return out;
}

ToyFaceEmbedder::ToyFaceEmbedder(std::string name, int dimension, std::uint64_t seed, int grid)
    : name_(std::move(name)), grid_(grid)
{
    if (dimension <= 0 || grid <= 0)
        throw std::invalid_argument("toy face embedder: dimension and grid must be positive");
    Rng rng(seed, "toy-face");
    const Eigen::Index in = Eigen::Index(grid) * grid * 3;
    weights_ = gaussian_matrix(dimension, in, rng, 1.0 / std::sqrt(double(in)));
}

ToyConvPerceptual::ToyConvPerceptual(std::uint64_t seed, int channels) : channels_(channels)
{
    if (channels <= 0)
        throw std::invalid_argument("toy perceptual: channels must be positive");
    Rng rng(seed, "toy-conv-perceptual");
    conv1_ = gaussian_matrix(27, channels, rng, 1.0 / std::sqrt(27.0));
    conv2_ = gaussian_matrix(9 * channels, channels, rng, 1.0 / std::sqrt(9.0 * channels));
}

// -- registry --------------------------------------------------------------------

EncoderRegistry& EncoderRegistry::instance()
{
    static EncoderRegistry registry;
    return registry;
}

EncoderRegistry::EncoderRegistry()
{
    register_image_encoder("toy-linear-", [](const std::string& name, std::uint64_t seed) {
        const int dim = parse_suffix(name, "toy-linear-", "image encoder");
        return std::make_shared<const ToyLinearImageEncoder>(dim, derive_seed(seed, name));
    });
    register_text_encoder("toy-hash-", [](const std::string& name, std::uint64_t seed) {
        const int dim = parse_suffix(name, "toy-hash-", "text encoder");
        return std::make_shared<const ToyHashTextEncoder>(dim, derive_seed(seed, name));
    });
    register_face_embedder("toy-face-", [](const std::string& name, std::uint64_t seed) {
        parse_suffix(name, "toy-face-", "face embedder", 0);
        return std::make_shared<const ToyFaceEmbedder>(name, 32, derive_seed(seed, name));
    });
    register_perceptual("toy-conv", [](const std::string& name, std::uint64_t seed) {
        if (name != "toy-conv")
            throw ConfigError("unknown perceptual extractor '" + name + "'");
        return std::make_shared<const ToyConvPerceptual>(derive_seed(seed, name));
    });
    register_perceptual("identity", [](const std::string&, std::uint64_t) {
        return std::make_shared<const IdentityPerceptual>();
    });
    register_perceptual("zero", [](const std::string&, std::uint64_t) {
        return std::make_shared<const ZeroPerceptual>();
    });
}

void EncoderRegistry::register_image_encoder(const std::string& prefix, Factory<ImageEncoder> factory)
{
    image_.push_back({prefix, std::move(factory)});
}
void EncoderRegistry::register_text_encoder(const std::string& prefix, Factory<TextEncoder> factory)
{
    text_.push_back({prefix, std::move(factory)});
}
void EncoderRegistry::register_face_embedder(const std::string& prefix, Factory<FaceEmbedder> factory)
{
    face_.push_back({prefix, std::move(factory)});
}
void EncoderRegistry::register_perceptual(const std::string& prefix, Factory<PerceptualExtractor> factory)
{
    perceptual_.push_back({prefix, std::move(factory)});
}

template <typename T>
std::shared_ptr<const T> EncoderRegistry::lookup(const std::vector<Entry<T>>& entries, const std::string& name,
                                                 std::uint64_t seed, const char* role)
{
    // latest registration wins so plug-ins can shadow built-ins
    for (auto it = entries.rbegin(); it != entries.rend(); ++it)
        if (name.rfind(it->prefix, 0) == 0)
            return it->factory(name, seed);
    throw ConfigError(std::string("unknown ") + role + " '" + name + "'");
}

std::shared_ptr<const ImageEncoder> EncoderRegistry::image_encoder(const std::string& name, std::uint64_t seed) const
{
    return lookup(image_, name, seed, "image encoder");
}
std::shared_ptr<const TextEncoder> EncoderRegistry::text_encoder(const std::string& name, std::uint64_t seed) const
{
    return lookup(text_, name, seed, "text encoder");
}
std::shared_ptr<const FaceEmbedder> EncoderRegistry::face_embedder(const std::string& name, std::uint64_t seed) const
{
    return lookup(face_, name, seed, "face embedder");
}
std::shared_ptr<const PerceptualExtractor> EncoderRegistry::perceptual(const std::string& name,
                                                                       std::uint64_t seed) const
{
    return lookup(perceptual_, name, seed, "perceptual extractor");
}

}  // namespace diffam
