#pragma once

// Training objectives as pure functions templated on the scalar type, so the
// same code yields values (double) or taped gradients (ad::Var).

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "diffam/encoders.hpp"
#include "diffam/regions.hpp"

namespace diffam {

/// Stage-1 weights (removal, identity, lpips) and stage-2 weights (the rest).
struct LossWeights {
    double removal = 3.0;
    double identity = 1.0;
    double lpips = 1.0;
    double makeup = 1.0;
    double direction = 1.0;
    double pixel = 0.1;
    double adversarial = 1.0;
    double visual = 1.0;
    double l1 = 1.0;

    void validate() const;
};

template <typename Scalar>
Embedding<Scalar> as_scalar(const EmbeddingVector& v)
{
    return v.template cast<Scalar>();
}

/// Euclidean norm; with norm_eps > 0 it is sqrt(|v|^2 + eps^2) and never zero.
template <typename Scalar>
Scalar safe_norm(const Embedding<Scalar>& v, double norm_eps)
{
    using std::sqrt;
    return sqrt(v.squaredNorm() + Scalar(norm_eps * norm_eps));
}

/// Cosine similarity. A zero vector raises DegenerateDirection unless
/// norm_eps > 0 (training-time smoothing).
template <typename Scalar>
Scalar cosine_similarity(const Embedding<Scalar>& a, const Embedding<Scalar>& b, double norm_eps = 0.0)
{
    if (a.size() != b.size())
        throw ShapeError("cosine: dimension mismatch " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    const Scalar na = safe_norm(a, norm_eps);
    const Scalar nb = safe_norm(b, norm_eps);
    if (ad::value_of(na) == 0.0 || ad::value_of(nb) == 0.0)
        throw DegenerateDirection("cosine: zero-norm direction");
    return a.dot(b) / (na * nb);
}

/// 1 - cos(a, b), in [0, 2].
template <typename Scalar>
Scalar direction_loss(const Embedding<Scalar>& delta_a, const Embedding<Scalar>& delta_b, double norm_eps = 0.0)
{
    return Scalar(1.0) - cosine_similarity(delta_a, delta_b, norm_eps);
}

/// E_T(clean) - E_T(makeup)
EmbeddingVector text_direction(const TextEncoder& enc, const std::string& prompt_clean,
                               const std::string& prompt_makeup);

/// Directional removal loss: 1 - cos(E_I(y_hat) - E_I(y), E_T(clean) - E_T(makeup)).
template <typename Scalar>
Scalar makeup_removal_loss(const ImageBuffer& y, const Image<Scalar>& y_hat, const JointEncoders& encoders,
                           const std::string& prompt_clean, const std::string& prompt_makeup, double norm_eps = 0.0)
{
    require_same_shape(y, y_hat, "makeup_removal_loss");
    const Embedding<Scalar> delta_image =
        embed_image(*encoders.image, y_hat) - as_scalar<Scalar>(embed_image(*encoders.image, y));
    const Embedding<Scalar> delta_text = as_scalar<Scalar>(text_direction(*encoders.text, prompt_clean, prompt_makeup));
    return direction_loss(delta_image, delta_text, norm_eps);
}

/// E_I(y) - E_I(y_hat): the direction from the clean domain to the reference makeup.
EmbeddingVector reference_direction(const ImageEncoder& enc, const ImageBuffer& y, const ImageBuffer& y_hat);

/// 1 - cos(E_I(x') - E_I(x), delta_ref) with a cached reference direction.
template <typename Scalar>
Scalar makeup_direction_loss(const ImageBuffer& x, const Image<Scalar>& x_prime, const EmbeddingVector& delta_ref,
                             const ImageEncoder& enc, double norm_eps = 0.0)
{
    require_same_shape(x, x_prime, "makeup_direction_loss");
    const Embedding<Scalar> delta_x = embed_image(enc, x_prime) - as_scalar<Scalar>(embed_image(enc, x));
    return direction_loss(delta_x, as_scalar<Scalar>(delta_ref), norm_eps);
}

template <typename Scalar>
Scalar makeup_direction_loss(const ImageBuffer& x, const Image<Scalar>& x_prime, const ImageBuffer& y,
                             const ImageBuffer& y_hat, const ImageEncoder& enc, double norm_eps = 0.0)
{
    return makeup_direction_loss(x, x_prime, reference_direction(enc, y, y_hat), enc, norm_eps);
}

template <typename Scalar>
struct PixelMakeupLoss {
    Scalar value;
    std::vector<Region> skipped;  // empty-region warnings
};

/// Mean |x' - HM(x', y)| over labeled pixels and channels. The histogram
/// matched target is a constant: no gradient flows through HM.
template <typename Scalar>
PixelMakeupLoss<Scalar> pixel_makeup_loss(const Image<Scalar>& x_prime, const ImageBuffer& y,
                                          const RegionMasks& masks_x, const RegionMasks& masks_y)
{
    const HistogramMatch target = hm_image(values(x_prime), y, masks_x, masks_y);
    PixelMakeupLoss<Scalar> out{Scalar(0.0), target.skipped};
    Scalar sum(0.0);
    Eigen::Index count = 0;
    for (Region region : facial_regions) {
        if (std::find(target.skipped.begin(), target.skipped.end(), region) != target.skipped.end())
            continue;
        for (Eigen::Index p : masks_x.pixels_in(region)) {
            for (int c = 0; c < 3; ++c) {
                using std::abs;
                sum += abs(x_prime.pixels()(p, c) - Scalar(target.image.pixels()(p, c)));
            }
            count += 3;
        }
    }
    if (count > 0)
        out.value = sum / Scalar(double(count));
    return out;
}

using Ensemble = std::vector<std::shared_ptr<const FaceEmbedder>>;

template <typename Scalar>
struct EnsembleAttack {
    Scalar loss;
    std::vector<double> cosines;  // cos(m_k(x'), m_k(x*)) per member
};

template <typename Scalar>
EnsembleAttack<Scalar> ensemble_attack_terms(const Image<Scalar>& x_prime, const ImageBuffer& x_star,
                                             const Ensemble& embedders)
{
    if (embedders.empty())
        throw std::invalid_argument("ensemble attack: need at least one face embedder");
    EnsembleAttack<Scalar> out{Scalar(0.0), {}};
    Scalar sum(0.0);
    for (const auto& m : embedders) {
        const Scalar cos =
            cosine_similarity(face_embed(*m, x_prime), as_scalar<Scalar>(face_embed(*m, x_star)));
        out.cosines.push_back(ad::value_of(cos));
        sum += Scalar(1.0) - cos;
    }
    out.loss = sum / Scalar(double(embedders.size()));
    return out;
}

/// (1/K) sum_k [1 - cos(m_k(x'), m_k(x*))]
template <typename Scalar>
Scalar ensemble_attack_loss(const Image<Scalar>& x_prime, const ImageBuffer& x_star, const Ensemble& embedders)
{
    return ensemble_attack_terms(x_prime, x_star, embedders).loss;
}

/// Channel-wise unit normalization at every location.
template <typename Scalar>
FeatureMap<Scalar> unit_normalize(const FeatureMap<Scalar>& f)
{
    constexpr double eps = 1e-10;
    using std::sqrt;
    FeatureMap<Scalar> out(f.rows(), f.cols());
    for (Eigen::Index r = 0; r < f.rows(); ++r) {
        const Scalar n = sqrt(f.row(r).square().sum() + Scalar(eps * eps));
        out.row(r) = f.row(r) / n;
    }
    return out;
}

/// Sum over layers of the location-averaged squared distance between
/// unit-normalized feature vectors.
template <typename Scalar>
Scalar perceptual_distance(const Image<Scalar>& a, const ImageBuffer& b, const PerceptualExtractor& perc)
{
    require_same_shape(a, b, "perceptual_distance");
    const auto fa = perc.features(a);
    const auto fb = perc.features(b);
    Scalar total(0.0);
    for (std::size_t l = 0; l < fa.size(); ++l) {
        const FeatureMap<Scalar> diff = unit_normalize(fa[l]) - unit_normalize(fb[l]).template cast<Scalar>();
        total += diff.square().sum() / Scalar(double(diff.rows()));
    }
    return total;
}

template <typename Scalar>
Scalar mean_absolute_error(const Image<Scalar>& a, const ImageBuffer& b)
{
    require_same_shape(a, b, "mean_absolute_error");
    return (a.pixels() - b.pixels().template cast<Scalar>()).abs().sum() / Scalar(double(a.size()));
}

/// perceptual(x', x) + lambda_l1 * mean|x' - x|
template <typename Scalar>
Scalar visual_loss(const Image<Scalar>& x_prime, const ImageBuffer& x, const PerceptualExtractor& perc,
                   double lambda_l1)
{
    require_same_shape(x_prime, x, "visual_loss");
    Scalar loss = perceptual_distance(x_prime, x, perc);
    if (lambda_l1 != 0.0)
        loss += Scalar(lambda_l1) * mean_absolute_error(x_prime, x);
    return loss;
}

/// 1 - cos(emb(a), emb(b))
template <typename Scalar>
Scalar identity_loss(const Image<Scalar>& a, const ImageBuffer& b, const FaceEmbedder& emb)
{
    return Scalar(1.0) - cosine_similarity(face_embed(emb, a), as_scalar<Scalar>(face_embed(emb, b)));
}

template <typename Scalar>
struct WeightedLoss {
    Scalar total;
    std::vector<std::pair<std::string, double>> terms;  // unweighted term values
};

template <typename Scalar>
struct Stage1Terms {
    Scalar removal;
    Scalar identity;
    Scalar lpips;
};

/// lambda_MR L_MR + lambda_id L_id + lambda_LPIPS L_LPIPS
template <typename Scalar>
WeightedLoss<Scalar> stage1_total(const Stage1Terms<Scalar>& t, const LossWeights& w)
{
    w.validate();
    return {Scalar(w.removal) * t.removal + Scalar(w.identity) * t.identity + Scalar(w.lpips) * t.lpips,
            {{"removal", ad::value_of(t.removal)},
             {"identity", ad::value_of(t.identity)},
             {"lpips", ad::value_of(t.lpips)}}};
}

template <typename Scalar>
struct Stage2Terms {
    Scalar direction;
    Scalar pixel;
    Scalar adversarial;
    Scalar visual;
};

/// lambda_MT (lambda_dir L_dir + lambda_px L_px) + lambda_adv L_adv + lambda_vis L_vis
template <typename Scalar>
WeightedLoss<Scalar> stage2_total(const Stage2Terms<Scalar>& t, const LossWeights& w)
{
    w.validate();
    const Scalar makeup = Scalar(w.direction) * t.direction + Scalar(w.pixel) * t.pixel;
    return {Scalar(w.makeup) * makeup + Scalar(w.adversarial) * t.adversarial + Scalar(w.visual) * t.visual,
            {{"direction", ad::value_of(t.direction)},
             {"pixel", ad::value_of(t.pixel)},
             {"adversarial", ad::value_of(t.adversarial)},
             {"visual", ad::value_of(t.visual)}}};
}

}  // namespace diffam
