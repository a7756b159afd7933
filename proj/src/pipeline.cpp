#include "diffam/pipeline.hpp"

#include <cmath>

namespace diffam {

void FineTuneConfig::validate(int t_full) const
{
    const auto& d = diffusion;
    if (d.t0 < 1 || d.t0 > t_full)
        throw std::invalid_argument("fine-tune config: t0 = " + std::to_string(d.t0) + " outside [1, " +
                                    std::to_string(t_full) + "]");
    if (d.s_inv < 1 || d.s_inv > d.t0 || d.s_sam < 1 || d.s_sam > d.t0)
        throw std::invalid_argument("fine-tune config: s_inv and s_sam must lie in [1, t0]");
    if (epochs < 1)
        throw std::invalid_argument("fine-tune config: epochs must be >= 1");
    if (!(base_lr > 0.0))
        throw std::invalid_argument("fine-tune config: base_lr must be positive");
    if (lr_step < 1)
        throw std::invalid_argument("fine-tune config: lr_step must be >= 1");
    if (prompt_clean.empty() || prompt_makeup.empty())
        throw std::invalid_argument("fine-tune config: prompts must be set");
    weights.validate();
}

double lr_at(int iter, const FineTuneConfig& cfg)
{
    if (iter < 0)
        throw std::invalid_argument("lr_at: negative iteration");
    const int k = iter / cfg.lr_step;
    if (cfg.lr_mode == LrMode::multiplicative)
        return cfg.base_lr * std::pow(1.0 + cfg.lr_slope, k);
    return cfg.base_lr * (1.0 + cfg.lr_slope * k);
}

Adam::Adam(Eigen::Index size, double beta1, double beta2, double epsilon)
    : beta1_(beta1), beta2_(beta2), epsilon_(epsilon), m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size))
{
}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr)
{
    ++steps_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1_, steps_);
    const double c2 = 1.0 - std::pow(beta2_, steps_);
    params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + epsilon_);
}

std::string experiment_tag(const FineTuneConfig& cfg)
{
    const bool direction = cfg.weights.direction > 0.0 && cfg.weights.makeup > 0.0;
    return std::string(direction ? "full" : "wo-dir") + "_t" + std::to_string(cfg.diffusion.t0);
}

Eigen::Index clamp_unit(ImageBuffer& img)
{
    Eigen::Index count = 0;
    for (Eigen::Index i = 0; i < img.size(); ++i) {
        double& v = img.pixels().data()[i];
        if (v > 1.0 || v < -1.0) {
            v = v > 1.0 ? 1.0 : -1.0;
            ++count;
        }
    }
    return count;
}

ImageBuffer reconstruct(const ImageBuffer& x, const Denoiser& frozen, const DiffusionSettings& settings)
{
    const auto& sched = frozen.schedule();
    const auto latent = ddim_invert(x, frozen, discretize(settings.t0, settings.s_inv, sched));
    return ddim_sample(latent, frozen, discretize(settings.t0, settings.s_sam, sched));
}

namespace {

using ad::Var;

// Evaluates a term on the tape when it carries weight; otherwise only its value
// is computed (for the log) and it enters the total as a constant.
template <typename Fn>
Var weighted_term(double effective_weight, const Image<Var>& img, Fn&& fn)
{
    if (effective_weight > 0.0)
        return fn(img);
    return Var(fn(values(img)));
}

void check_finite(double total, int iter)
{
    if (!std::isfinite(total))
        throw TrainingError("non-finite loss", iter);
}

struct Trainer {
    const Denoiser& frozen;
    const FineTuneConfig& cfg;
    TimestepSequence sample_steps;
    Eigen::VectorXd params;
    Adam adam;

    Trainer(const Denoiser& model, const FineTuneConfig& config)
        : frozen(model),
          cfg(config),
          sample_steps(discretize(config.diffusion.t0, config.diffusion.s_sam, model.schedule())),
          params(model.parameters()),
          adam(model.parameters().size(), config.adam_beta1, config.adam_beta2, config.adam_epsilon)
    {
    }

    std::vector<ImageBuffer> invert_all(const std::vector<ImageBuffer>& images) const
    {
        const auto ts = discretize(cfg.diffusion.t0, cfg.diffusion.s_inv, frozen.schedule());
        std::vector<ImageBuffer> latents;
        latents.reserve(images.size());
        for (const auto& img : images)
            latents.push_back(ddim_invert(img, frozen, ts));
        return latents;
    }

    Image<Var> sample(const ImageBuffer& latent, const VectorX<Var>& taped) const
    {
        return ddim_sample(lift<Var>(latent), noise_fn(frozen, taped), frozen.schedule(), sample_steps);
    }

    ImageBuffer sample_final(const ImageBuffer& latent) const
    {
        auto tuned = frozen.clone();
        tuned->set_parameters(params);
        ImageBuffer out = ddim_sample(latent, *tuned, sample_steps);
        clamp_unit(out);
        return out;
    }

    void update(const ad::Tape& tape, const Var& total, const VectorX<Var>& taped, double lr)
    {
        const Eigen::VectorXd grad = tape.gradient(total, taped);
        adam.step(params, grad, lr);
    }
};

}  // namespace

StageArtifacts run_makeup_removal(const std::vector<ImageBuffer>& references, const Denoiser& frozen,
                                  const RemovalModels& models, const FineTuneConfig& cfg, const LogSink& sink)
{
    if (references.empty())
        throw std::invalid_argument("makeup removal: no reference images");
    cfg.validate(frozen.schedule().t_full());
    const LossWeights& w = cfg.weights;

    Trainer trainer(frozen, cfg);
    StageArtifacts art;
    art.stage = "remove-makeup";
    art.tag = experiment_tag(cfg);
    art.settings = cfg.diffusion;
    art.latents = trainer.invert_all(references);

    int iter = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = 0; i < references.size(); ++i, ++iter) {
            const ImageBuffer& y = references[i];
            ad::Tape tape;
            const VectorX<Var> taped = tape.variables(trainer.params);
            const Image<Var> y_hat = trainer.sample(art.latents[i], taped);

            const Stage1Terms<Var> terms{
                weighted_term(w.removal, y_hat,
                              [&](const auto& img) {
                                  return makeup_removal_loss(y, img, models.clip, cfg.prompt_clean, cfg.prompt_makeup,
                                                             cfg.norm_epsilon);
                              }),
                weighted_term(w.identity, y_hat,
                              [&](const auto& img) { return identity_loss(img, y, *models.identity); }),
                weighted_term(w.lpips, y_hat,
                              [&](const auto& img) { return perceptual_distance(img, y, *models.perceptual); }),
            };
            const WeightedLoss<Var> loss = stage1_total(terms, w);
            check_finite(loss.total.value(), iter);

            const double lr = lr_at(iter, cfg);
            LogRecord rec{art.stage, art.tag, iter, epoch, static_cast<int>(i), lr, loss.total.value(), loss.terms,
                          {}, {}};
            trainer.update(tape, loss.total, taped, lr);
            if (sink)
                sink(rec);
            art.log.push_back(std::move(rec));
        }
    }

    art.parameters = trainer.params;
    for (std::size_t i = 0; i < references.size(); ++i) {
        art.outputs.push_back(trainer.sample_final(art.latents[i]));
        art.reference_directions.push_back(reference_direction(*models.clip.image, references[i], art.outputs.back()));
    }
    return art;
}

StageArtifacts run_adversarial_transfer(const TransferInputs& in, const Denoiser& frozen, const TransferModels& models,
                                        const FineTuneConfig& cfg, const LogSink& sink)
{
    if (in.sources.empty())
        throw std::invalid_argument("adversarial transfer: no source images");
    if (in.source_masks.size() != in.sources.size())
        throw std::invalid_argument("adversarial transfer: missing region masks for " +
                                    std::to_string(in.sources.size() - std::min(in.sources.size(), in.source_masks.size())) +
                                    " source image(s)");
    if (models.ensemble.empty())
        throw std::invalid_argument("adversarial transfer: empty FR ensemble");
    if (!in.reference_mask.matches(in.reference))
        throw ShapeError("adversarial transfer: reference mask does not match the reference image");
    for (std::size_t i = 0; i < in.sources.size(); ++i)
        if (!in.source_masks[i].matches(in.sources[i]))
            throw ShapeError("adversarial transfer: mask " + std::to_string(i) + " does not match its source");
    cfg.validate(frozen.schedule().t_full());
    const LossWeights& w = cfg.weights;

    const EmbeddingVector delta_ref = reference_direction(*models.clip.image, in.reference, in.reference_clean);

    Trainer trainer(frozen, cfg);
    StageArtifacts art;
    art.stage = "transfer";
    art.tag = experiment_tag(cfg);
    art.settings = cfg.diffusion;
    art.latents = trainer.invert_all(in.sources);
    art.reference_directions = {delta_ref};

    int iter = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = 0; i < in.sources.size(); ++i, ++iter) {
            const ImageBuffer& x = in.sources[i];
            ad::Tape tape;
            const VectorX<Var> taped = tape.variables(trainer.params);
            const Image<Var> x_prime = trainer.sample(art.latents[i], taped);

            std::vector<std::string> warnings;
            const Var direction = weighted_term(w.makeup * w.direction, x_prime, [&](const auto& img) {
                return makeup_direction_loss(x, img, delta_ref, *models.clip.image, cfg.norm_epsilon);
            });
            const Var pixel = weighted_term(w.makeup * w.pixel, x_prime, [&](const auto& img) {
                auto r = pixel_makeup_loss(img, in.reference, in.source_masks[i], in.reference_mask);
                for (Region skipped : r.skipped)
                    warnings.push_back(std::string("empty region: ") + to_string(skipped));
                return r.value;
            });
            std::vector<double> cosines;
            const Var adversarial = weighted_term(w.adversarial, x_prime, [&](const auto& img) {
                auto r = ensemble_attack_terms(img, in.target, models.ensemble);
                cosines = r.cosines;
                return r.loss;
            });
            const Var visual = weighted_term(w.visual, x_prime, [&](const auto& img) {
                return visual_loss(img, x, *models.perceptual, w.l1);
            });

            const WeightedLoss<Var> loss = stage2_total(Stage2Terms<Var>{direction, pixel, adversarial, visual}, w);
            check_finite(loss.total.value(), iter);

            const double lr = lr_at(iter, cfg);
            LogRecord rec{art.stage, art.tag, iter, epoch, static_cast<int>(i), lr, loss.total.value(), loss.terms,
                          {}, std::move(warnings)};
            for (std::size_t k = 0; k < cosines.size(); ++k)
                rec.cosines.emplace_back(models.ensemble[k]->name(), cosines[k]);
            trainer.update(tape, loss.total, taped, lr);
            if (sink)
                sink(rec);
            art.log.push_back(std::move(rec));
        }
    }

    art.parameters = trainer.params;
    for (const auto& latent : art.latents)
        art.outputs.push_back(trainer.sample_final(latent));
    return art;
}

ProtectedImage protect(const ImageBuffer& x, const StageArtifacts& artifacts, const Denoiser& frozen,
                       const FineTuneConfig& cfg)
{
    if (!(artifacts.settings == cfg.diffusion))
        throw std::invalid_argument("protect: artifacts were trained with t0/s_inv/s_sam = " +
                                    std::to_string(artifacts.settings.t0) + "/" +
                                    std::to_string(artifacts.settings.s_inv) + "/" +
                                    std::to_string(artifacts.settings.s_sam) + ", config asks for " +
                                    std::to_string(cfg.diffusion.t0) + "/" + std::to_string(cfg.diffusion.s_inv) +
                                    "/" + std::to_string(cfg.diffusion.s_sam));
    if (artifacts.parameters.size() != frozen.parameters().size())
        throw std::invalid_argument("protect: artifact parameters do not fit the denoiser");
    const auto& sched = frozen.schedule();
    const ImageBuffer latent = ddim_invert(x, frozen, discretize(cfg.diffusion.t0, cfg.diffusion.s_inv, sched));
    auto tuned = frozen.clone();
    tuned->set_parameters(artifacts.parameters);
    ProtectedImage out{ddim_sample(latent, *tuned, discretize(cfg.diffusion.t0, cfg.diffusion.s_sam, sched)), 0};
    out.clamped = clamp_unit(out.image);
    return out;
}

}  // namespace diffam
