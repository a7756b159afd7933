#include "diffam/eval.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "diffam/losses.hpp"
#include "diffam/random.hpp"

namespace diffam {

namespace {

// Largest acceptance count allowed at `far` among n scores.
long allowed_acceptances(std::size_t n, double far)
{
    return static_cast<long>(std::floor(far * double(n) + 1e-9));
}

}  // namespace

VerificationThreshold calibrate_threshold(const std::vector<double>& impostor_scores, double far)
{
    if (impostor_scores.empty())
        throw std::invalid_argument("calibrate_threshold: no impostor scores");
    if (!(far > 0.0 && far < 1.0))
        throw std::invalid_argument("calibrate_threshold: far must lie in (0, 1)");

    std::vector<double> sorted = impostor_scores;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const long allowed = allowed_acceptances(sorted.size(), far);

    VerificationThreshold th{0.0, far, static_cast<int>(sorted.size()), false};
    // Walk distinct values from the top; |{s >= v}| is the index past the last copy of v.
    double best = std::numeric_limits<double>::quiet_NaN();
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i])
            ++j;
        if (static_cast<long>(j) > allowed)
            break;
        best = sorted[i];
        i = j;
    }
    if (std::isnan(best)) {
        th.tau = sorted.front() + tie_epsilon;
        th.saturated = true;
    } else {
        th.tau = best;
    }
    return th;
}

double acceptance_rate(const std::vector<double>& scores, double tau)
{
    if (scores.empty())
        throw std::invalid_argument("acceptance_rate: no scores");
    const auto accepted = std::count_if(scores.begin(), scores.end(), [tau](double s) { return s > tau; });
    return double(accepted) / double(scores.size());
}

AttackSuccess attack_success_rate(const std::vector<ImageBuffer>& protected_images, const ImageBuffer& target,
                                  const FaceEmbedder& emb, const VerificationThreshold& threshold)
{
    if (protected_images.empty())
        throw std::invalid_argument("attack_success_rate: no protected images");
    const EmbeddingVector t = face_embed(emb, target);
    AttackSuccess out;
    for (const auto& img : protected_images)
        out.scores.push_back(cosine_similarity(face_embed(emb, img), t));
    out.rate = acceptance_rate(out.scores, threshold.tau);
    return out;
}

double psnr(const ImageBuffer& a, const ImageBuffer& b)
{
    require_same_shape(a, b, "psnr");
    const double mse = (a.pixels() - b.pixels()).square().mean();
    if (mse == 0.0)
        return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(4.0 / mse);
}

double ssim(const ImageBuffer& a, const ImageBuffer& b)
{
    require_same_shape(a, b, "ssim");
    constexpr int win = 11;
    constexpr double sigma = 1.5;
    constexpr double range = 2.0;
    const double c1 = (0.01 * range) * (0.01 * range);
    const double c2 = (0.03 * range) * (0.03 * range);
    if (a.height() < win || a.width() < win)
        throw ShapeError("ssim: images smaller than the 11x11 window");

    Eigen::Matrix<double, win, win> w;
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j)
            w(i, j) = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2.0 * sigma * sigma));
    w /= w.sum();

    const int out_h = a.height() - win + 1;
    const int out_w = a.width() - win + 1;
    double total = 0.0;
    for (int c = 0; c < 3; ++c) {
        double channel = 0.0;
        for (int y = 0; y < out_h; ++y)
            for (int x = 0; x < out_w; ++x) {
                double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
                for (int i = 0; i < win; ++i)
                    for (int j = 0; j < win; ++j) {
                        const double va = a(y + i, x + j, c);
                        const double vb = b(y + i, x + j, c);
                        const double k = w(i, j);
                        ma += k * va;
                        mb += k * vb;
                        saa += k * va * va;
                        sbb += k * vb * vb;
                        sab += k * va * vb;
                    }
                const double var_a = saa - ma * ma;
                const double var_b = sbb - mb * mb;
                const double cov = sab - ma * mb;
                channel += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
            }
        total += channel / double(out_h * out_w);
    }
    return total / 3.0;
}

namespace {

void moments(const std::vector<EmbeddingVector>& feats, Eigen::VectorXd& mean, Eigen::MatrixXd& cov)
{
    const Eigen::Index d = feats.front().size();
    const double n = double(feats.size());
    mean = Eigen::VectorXd::Zero(d);
    for (const auto& f : feats) {
        if (f.size() != d)
            throw ShapeError("fid: inconsistent feature dimensions");
        mean += f;
    }
    mean /= n;
    cov = Eigen::MatrixXd::Zero(d, d);
    for (const auto& f : feats)
        cov += (f - mean) * (f - mean).transpose();
    cov /= (n - 1.0);
    // rank-deficient estimates get a small ridge
    if (feats.size() <= static_cast<std::size_t>(d))
        cov += 1e-6 * Eigen::MatrixXd::Identity(d, d);
}

Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& m)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
    const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double fid(const std::vector<EmbeddingVector>& feats_a, const std::vector<EmbeddingVector>& feats_b)
{
    if (feats_a.size() < 2 || feats_b.size() < 2)
        throw std::invalid_argument("fid: need at least two samples per set");
    Eigen::VectorXd mu_a, mu_b;
    Eigen::MatrixXd cov_a, cov_b;
    moments(feats_a, mu_a, cov_a);
    moments(feats_b, mu_b, cov_b);
    if (mu_a.size() != mu_b.size())
        throw ShapeError("fid: feature dimensions differ between sets");

    // Tr((A B)^{1/2}) = Tr((A^{1/2} B A^{1/2})^{1/2})
    const Eigen::MatrixXd root_a = symmetric_sqrt(cov_a);
    const Eigen::MatrixXd cross = symmetric_sqrt(root_a * cov_b * root_a);
    const double value = (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * cross.trace();
    return std::max(value, 0.0);
}

std::vector<std::pair<int, int>> impostor_pairs(const std::vector<int>& labels, std::size_t max_pairs,
                                                std::uint64_t seed)
{
    std::vector<std::pair<int, int>> pairs;
    for (std::size_t i = 0; i < labels.size(); ++i)
        for (std::size_t j = i + 1; j < labels.size(); ++j)
            if (labels[i] != labels[j])
                pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
    if (pairs.size() > max_pairs) {
        Rng rng(seed, "impostor-pairs");
        for (std::size_t i = pairs.size() - 1; i > 0; --i)
            std::swap(pairs[i], pairs[rng.below(i + 1)]);
        pairs.resize(max_pairs);
        std::sort(pairs.begin(), pairs.end());
    }
    return pairs;
}

std::vector<double> impostor_scores(const std::vector<ImageBuffer>& images, const std::vector<int>& labels,
                                    const FaceEmbedder& emb, std::size_t max_pairs, std::uint64_t seed)
{
    if (images.size() != labels.size())
        throw std::invalid_argument("impostor_scores: one label per image required");
    std::vector<EmbeddingVector> embeddings;
    for (const auto& img : images)
        embeddings.push_back(face_embed(emb, img));
    std::vector<double> scores;
    for (const auto& [i, j] : impostor_pairs(labels, max_pairs, seed))
        scores.push_back(cosine_similarity(embeddings[std::size_t(i)], embeddings[std::size_t(j)]));
    if (scores.empty())
        throw std::invalid_argument("impostor_scores: dataset has no cross-identity pairs");
    return scores;
}

}  // namespace diffam
