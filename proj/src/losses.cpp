#include "diffam/losses.hpp"

namespace diffam {

void LossWeights::validate() const
{
    const std::pair<const char*, double> all[] = {
        {"removal", removal}, {"identity", identity}, {"lpips", lpips},         {"makeup", makeup}, {"direction", direction},
        {"pixel", pixel},     {"adversarial", adversarial}, {"visual", visual}, {"l1", l1}};
    for (const auto& [name, value] : all)
        if (!(value >= 0.0))
            throw std::invalid_argument(std::string("loss weight '") + name + "' must be nonnegative");
}

EmbeddingVector text_direction(const TextEncoder& enc, const std::string& prompt_clean,
                               const std::string& prompt_makeup)
{
    return embed_text(enc, prompt_clean) - embed_text(enc, prompt_makeup);
}

EmbeddingVector reference_direction(const ImageEncoder& enc, const ImageBuffer& y, const ImageBuffer& y_hat)
{
    require_same_shape(y, y_hat, "reference_direction");
    return embed_image(enc, y) - embed_image(enc, y_hat);
}

}  // namespace diffam
