#include "diffam/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "diffam/api_client.hpp"
#include "diffam/errors.hpp"
#include "diffam/eval.hpp"
#include "diffam/image_io.hpp"
#include "diffam/synth.hpp"

namespace diffam {

namespace {

void require_file(const fs::path& p, const char* what)
{
    if (p.empty())
        throw ConfigError(std::string("config: ") + what + " is not set");
    if (!fs::is_regular_file(p))
        throw ConfigError(std::string("missing ") + what + ": " + p.string());
}

void require_dir(const fs::path& p, const char* what)
{
    if (p.empty())
        throw ConfigError(std::string("config: ") + what + " is not set");
    if (!fs::is_directory(p))
        throw ConfigError(std::string("missing ") + what + " directory: " + p.string());
}

bool ends_with(const std::string& s, const std::string& suffix)
{
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string rel(const fs::path& p, const fs::path& base) { return p.lexically_relative(base).generic_string(); }

NamedImage load_named(const fs::path& path, const char* what)
{
    require_file(path, what);
    return {path.stem().string(), path, load_image(path)};
}

void append_log(const fs::path& path, const std::vector<LogRecord>& log)
{
    std::ofstream out(path, std::ios::binary | std::ios::app);
    for (const auto& r : log)
        out << log_record_json(r).dump() << '\n';
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
}

json base_manifest(const ExperimentConfig& cfg, const std::string& command)
{
    return {{"command", command}, {"config_hash", config_hash(cfg)}, {"seed", cfg.train.seed}};
}

void prepare_out(const ExperimentConfig& cfg)
{
    fs::create_directories(cfg.out);
    std::ofstream(cfg.out / "config.ini", std::ios::binary) << canonical_config(cfg);
    fs::remove(cfg.out / "log.jsonl");
}

json embedder_scores(const ModelBundle& m, const ImageBuffer& img, const ImageBuffer& target)
{
    json scores = json::object();
    for (const auto& e : m.ensemble)
        scores[e->name()] = cosine_similarity(face_embed(*e, img), face_embed(*e, target));
    scores[m.evaluator->name()] = cosine_similarity(face_embed(*m.evaluator, img), face_embed(*m.evaluator, target));
    return scores;
}

// Stage 1 over the configured reference; writes reference_clean.png and stage1.json.
StageArtifacts removal_stage(const ExperimentConfig& cfg, const ModelBundle& m, const NamedImage& reference,
                             json& manifest)
{
    RemovalModels models{m.clip, m.identity, m.perceptual};
    StageArtifacts art = run_makeup_removal({reference.image}, *m.denoiser, models, cfg.train);
    save_image(art.outputs.front(), cfg.out / "reference_clean.png");
    write_json(cfg.out / "stage1.json", artifacts_json(art, *m.denoiser));
    append_log(cfg.out / "log.jsonl", art.log);
    manifest["artifacts"]["stage1"] = "stage1.json";
    manifest["artifacts"]["reference_clean"] = "reference_clean.png";
    manifest["artifacts"]["log"] = "log.jsonl";
    manifest["stage1"] = {{"tag", art.tag},
                          {"final_loss", art.log.back().total},
                          {"iterations", art.log.size()},
                          {"reference", reference.path.generic_string()}};
    return art;
}

double log_value_last_epoch_mean(const StageArtifacts& art)
{
    const int last = art.log.back().epoch;
    double sum = 0.0;
    int n = 0;
    for (const auto& r : art.log)
        if (r.epoch == last) {
            sum += r.total;
            ++n;
        }
    return sum / n;
}

}  // namespace

std::vector<NamedImage> load_image_dir(const fs::path& dir)
{
    require_dir(dir, "image");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (entry.is_regular_file() && ends_with(name, ".png") && !ends_with(name, ".mask.png"))
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty())
        throw ConfigError("no PNG images in " + dir.string());
    std::vector<NamedImage> out;
    for (const auto& f : files)
        out.push_back({f.stem().string(), f, load_image(f)});
    return out;
}

RegionMasks load_mask_for(const fs::path& masks_dir, const NamedImage& img)
{
    const fs::path p = masks_dir / (img.stem + ".mask.png");
    require_file(p, "mask file");
    try {
        return load_label_map(p, img.image.height(), img.image.width());
    } catch (const MaskError& e) {
        throw ConfigError(p.string() + ": " + e.what());
    }
}

IdentityDataset load_identity_dataset(const fs::path& root)
{
    const fs::path tsv = root / "identities.tsv";
    require_file(tsv, "identity table");
    std::ifstream in(tsv);
    std::map<std::string, int> label_of;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#')
            continue;
        std::istringstream ls(line);
        std::string stem;
        int label = 0;
        if (!(std::getline(ls, stem, '\t') && ls >> label))
            throw ConfigError(tsv.string() + ":" + std::to_string(line_no) + ": expected <stem>\\t<identity>");
        label_of[stem] = label;
    }
    IdentityDataset ds;
    for (auto& img : load_image_dir(root / "images")) {
        auto it = label_of.find(img.stem);
        if (it == label_of.end())
            throw ConfigError(tsv.string() + ": no identity for " + img.stem);
        ds.labels.push_back(it->second);
        ds.images.push_back(std::move(img));
    }
    return ds;
}

void write_identity_tsv(const fs::path& path, const std::vector<std::string>& stems, const std::vector<int>& labels)
{
    std::ofstream out(path, std::ios::binary);
    for (std::size_t i = 0; i < stems.size(); ++i)
        out << stems[i] << '\t' << labels[i] << '\n';
}

NoiseSchedule schedule_for(const ExperimentConfig& cfg)
{
    return make_linear_schedule(cfg.schedule.t_full, cfg.schedule.beta_start, cfg.schedule.beta_end);
}

ModelBundle build_models(const ExperimentConfig& cfg)
{
    std::vector<ImageBuffer> data;
    for (auto& img : load_image_dir(cfg.data.denoiser_data))
        data.push_back(std::move(img.image));
    ParameterSharing sharing;
    try {
        sharing = parse_parameter_sharing(cfg.models.denoiser_sharing);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    auto denoiser = std::make_unique<GaussianDenoiser>(GaussianDenoiser::fit(data, schedule_for(cfg), sharing));

    auto& reg = EncoderRegistry::instance();
    const std::uint64_t seed = cfg.train.seed;
    try {
        Ensemble ensemble;
        for (const auto& name : cfg.models.ensemble)
            ensemble.push_back(reg.face_embedder(name, seed));
        return ModelBundle{std::move(denoiser),
                           JointEncoders(reg.image_encoder(cfg.models.image_encoder, seed),
                                         reg.text_encoder(cfg.models.text_encoder, seed)),
                           reg.face_embedder(cfg.models.identity, seed),
                           std::move(ensemble),
                           reg.face_embedder(cfg.models.eval_embedder, seed),
                           reg.perceptual(cfg.models.perceptual, seed),
                           reg.image_encoder(cfg.models.fid_features, seed)};
    } catch (const ShapeError& e) {
        throw ConfigError(e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

json log_record_json(const LogRecord& r)
{
    json terms = json::object();
    for (const auto& [k, v] : r.terms)
        terms[k] = v;
    json cosine = json::object();
    for (const auto& [k, v] : r.cosines)
        cosine[k] = v;
    json j = {{"stage", r.stage}, {"tag", r.tag},     {"iter", r.iter},   {"epoch", r.epoch}, {"image", r.image},
              {"lr", r.lr},       {"total", r.total}, {"terms", terms}, {"cosine", cosine}};
    if (!r.warnings.empty())
        j["warnings"] = r.warnings;
    return j;
}

json artifacts_json(const StageArtifacts& a, const Denoiser& frozen)
{
    std::vector<double> params(a.parameters.data(), a.parameters.data() + a.parameters.size());
    const Eigen::VectorXd& fp = frozen.parameters();
    const std::string frozen_bytes(reinterpret_cast<const char*>(fp.data()), std::size_t(fp.size()) * sizeof(double));
    json dirs = json::array();
    for (const auto& d : a.reference_directions)
        dirs.push_back(std::vector<double>(d.data(), d.data() + d.size()));
    return {{"stage", a.stage},
            {"tag", a.tag},
            {"t0", a.settings.t0},
            {"s_inv", a.settings.s_inv},
            {"s_sam", a.settings.s_sam},
            {"denoiser", frozen.kind()},
            {"frozen_checksum", sha256_hex(frozen_bytes)},
            {"parameters", params},
            {"reference_directions", dirs}};
}

StageArtifacts artifacts_from_json(const json& j, const Denoiser& frozen)
{
    StageArtifacts a;
    try {
        a.stage = j.at("stage").get<std::string>();
        a.tag = j.at("tag").get<std::string>();
        a.settings = {j.at("t0").get<int>(), j.at("s_inv").get<int>(), j.at("s_sam").get<int>()};
        if (j.at("denoiser").get<std::string>() != frozen.kind())
            throw ConfigError("artifacts: trained for denoiser kind " + j.at("denoiser").get<std::string>());
        const auto params = j.at("parameters").get<std::vector<double>>();
        a.parameters = Eigen::Map<const Eigen::VectorXd>(params.data(), Eigen::Index(params.size()));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("artifacts: ") + e.what());
    }
    const Eigen::VectorXd& fp = frozen.parameters();
    const std::string frozen_bytes(reinterpret_cast<const char*>(fp.data()), std::size_t(fp.size()) * sizeof(double));
    if (j.value("frozen_checksum", "") != sha256_hex(frozen_bytes))
        throw ConfigError("artifacts: frozen denoiser differs from the one used in training");
    return a;
}

void write_json(const fs::path& path, const json& j)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << j.dump(2) << '\n';
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
}

json read_json(const fs::path& path)
{
    require_file(path, "JSON file");
    std::ifstream in(path, std::ios::binary);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

json run_remove_makeup(const ExperimentConfig& cfg)
{
    validate_config(cfg);
    const NamedImage reference = load_named(cfg.data.reference, "reference image");
    ModelBundle m = build_models(cfg);
    prepare_out(cfg);
    json manifest = base_manifest(cfg, "remove-makeup");
    removal_stage(cfg, m, reference, manifest);
    write_json(cfg.out / "manifest.json", manifest);
    return manifest;
}

json run_transfer(const ExperimentConfig& cfg)
{
    validate_config(cfg);
    TransferInputs in;
    const auto sources = load_image_dir(cfg.data.sources);
    for (const auto& s : sources) {
        in.sources.push_back(s.image);
        in.source_masks.push_back(load_mask_for(cfg.data.masks, s));
    }
    const NamedImage reference = load_named(cfg.data.reference, "reference image");
    in.reference = reference.image;
    require_file(cfg.data.reference_mask, "mask file");
    try {
        in.reference_mask = load_label_map(cfg.data.reference_mask, in.reference.height(), in.reference.width());
    } catch (const MaskError& e) {
        throw ConfigError(cfg.data.reference_mask.string() + ": " + e.what());
    }
    const NamedImage target = load_named(cfg.data.target, "target image");
    in.target = target.image;

    ModelBundle m = build_models(cfg);
    prepare_out(cfg);
    json manifest = base_manifest(cfg, "transfer");
    if (cfg.data.reference_clean.empty()) {
        in.reference_clean = removal_stage(cfg, m, reference, manifest).outputs.front();
    } else {
        in.reference_clean = load_named(cfg.data.reference_clean, "clean reference image").image;
    }

    TransferModels models{m.clip, m.ensemble, m.perceptual};
    const StageArtifacts art = run_adversarial_transfer(in, *m.denoiser, models, cfg.train);
    write_json(cfg.out / "stage2.json", artifacts_json(art, *m.denoiser));
    append_log(cfg.out / "log.jsonl", art.log);

    json records = json::array();
    for (std::size_t i = 0; i < sources.size(); ++i) {
        const fs::path out_path = cfg.out / "protected" / (sources[i].stem + ".png");
        save_image(art.outputs[i], out_path);
        records.push_back({{"input", sources[i].path.generic_string()},
                           {"output", rel(out_path, cfg.out)},
                           {"scores", embedder_scores(m, art.outputs[i], in.target)},
                           {"clean_scores", embedder_scores(m, in.sources[i], in.target)}});
    }
    manifest["artifacts"]["stage2"] = "stage2.json";
    manifest["artifacts"]["log"] = "log.jsonl";
    manifest["target"] = target.path.generic_string();
    manifest["tag"] = art.tag;
    manifest["records"] = records;
    manifest["stage2"] = {{"first_loss", art.log.front().total},
                          {"last_epoch_mean_loss", log_value_last_epoch_mean(art)},
                          {"iterations", art.log.size()}};
    write_json(cfg.out / "manifest.json", manifest);
    return manifest;
}

json run_protect(const ExperimentConfig& cfg, const fs::path& artifacts_path, const std::vector<fs::path>& inputs)
{
    validate_config(cfg);
    std::vector<NamedImage> images;
    if (inputs.empty()) {
        images = load_image_dir(cfg.data.sources);
    } else {
        for (const auto& p : inputs) {
            if (fs::is_directory(p)) {
                for (auto& img : load_image_dir(p))
                    images.push_back(std::move(img));
            } else {
                images.push_back(load_named(p, "input image"));
            }
        }
    }
    ModelBundle m = build_models(cfg);
    const StageArtifacts art = artifacts_from_json(read_json(artifacts_path), *m.denoiser);
    if (!(art.settings == cfg.train.diffusion))
        throw ConfigError("artifacts were trained with t0/s_inv/s_sam = " + std::to_string(art.settings.t0) + "/" +
                          std::to_string(art.settings.s_inv) + "/" + std::to_string(art.settings.s_sam));

    fs::create_directories(cfg.out);
    std::ofstream(cfg.out / "config.ini", std::ios::binary) << canonical_config(cfg);
    json manifest = base_manifest(cfg, "protect");
    manifest["artifacts"]["parameters"] = fs::absolute(artifacts_path).lexically_normal().generic_string();
    json records = json::array();
    for (const auto& img : images) {
        const ProtectedImage p = protect(img.image, art, *m.denoiser, cfg.train);
        const fs::path out_path = cfg.out / "protected" / (img.stem + ".png");
        save_image(p.image, out_path);
        records.push_back(
            {{"input", img.path.generic_string()}, {"output", rel(out_path, cfg.out)}, {"clamped", p.clamped}});
    }
    manifest["records"] = records;
    write_json(cfg.out / "manifest.json", manifest);
    return manifest;
}

namespace {

VerificationThreshold calibrate(const ExperimentConfig& cfg, const FaceEmbedder& emb)
{
    const IdentityDataset ds = load_identity_dataset(cfg.data.impostors);
    std::vector<ImageBuffer> images;
    for (const auto& img : ds.images)
        images.push_back(img.image);
    const auto scores = impostor_scores(images, ds.labels, emb, std::size_t(cfg.eval.max_impostor_pairs),
                                        derive_seed(cfg.train.seed, "impostor-pairs"));
    return calibrate_threshold(scores, cfg.eval.far);
}

json threshold_json(const VerificationThreshold& t, const std::string& model)
{
    json j = {{"model_name", model},
              {"tau", t.tau},
              {"far", t.far},
              {"n_impostor_pairs", t.n_impostor_pairs},
              {"saturated", t.saturated}};
    if (t.saturated)
        j["warning"] = "no impostor score can be accepted at this FAR; tau set above the maximum";
    return j;
}

}  // namespace

json run_calibrate(const ExperimentConfig& cfg)
{
    validate_config(cfg);
    require_dir(cfg.data.impostors, "impostor dataset");
    auto& reg = EncoderRegistry::instance();
    std::shared_ptr<const FaceEmbedder> emb;
    try {
        emb = reg.face_embedder(cfg.models.eval_embedder, cfg.train.seed);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const VerificationThreshold t = calibrate(cfg, *emb);
    json report = threshold_json(t, cfg.eval.model_name);
    report["config_hash"] = config_hash(cfg);
    fs::create_directories(cfg.out);
    write_json(cfg.out / "threshold.json", report);
    return report;
}

json run_evaluate(const ExperimentConfig& cfg, const fs::path& manifest_path, const fs::path& threshold_path)
{
    validate_config(cfg);
    const json manifest = read_json(manifest_path);
    const fs::path run_dir = manifest_path.parent_path();
    if (!manifest.contains("records") || manifest["records"].empty())
        throw ConfigError(manifest_path.string() + ": manifest has no image records");
    const ImageBuffer target = load_named(cfg.data.target, "target image").image;

    auto& reg = EncoderRegistry::instance();
    std::shared_ptr<const FaceEmbedder> emb;
    std::shared_ptr<const ImageEncoder> features;
    try {
        emb = reg.face_embedder(cfg.models.eval_embedder, cfg.train.seed);
        features = reg.image_encoder(cfg.models.fid_features, cfg.train.seed);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }

    VerificationThreshold threshold;
    if (threshold_path.empty()) {
        require_dir(cfg.data.impostors, "impostor dataset");
        threshold = calibrate(cfg, *emb);
    } else {
        const json t = read_json(threshold_path);
        threshold = {t.at("tau").get<double>(), t.at("far").get<double>(), t.at("n_impostor_pairs").get<int>(),
                     t.value("saturated", false)};
    }

    std::vector<ImageBuffer> clean, protected_images;
    std::vector<EmbeddingVector> clean_feats, protected_feats;
    double psnr_sum = 0.0, ssim_sum = 0.0;
    for (const auto& rec : manifest["records"]) {
        const fs::path in_path = rec.at("input").get<std::string>();
        const fs::path out_path = run_dir / rec.at("output").get<std::string>();
        clean.push_back(load_named(in_path, "manifest input").image);
        protected_images.push_back(load_named(out_path, "manifest output").image);
        psnr_sum += psnr(clean.back(), protected_images.back());
        ssim_sum += ssim(clean.back(), protected_images.back());
        clean_feats.push_back(embed_image(*features, clean.back()));
        protected_feats.push_back(embed_image(*features, protected_images.back()));
    }
    const double n = double(clean.size());
    const AttackSuccess asr = attack_success_rate(protected_images, target, *emb, threshold);
    const AttackSuccess asr_clean = attack_success_rate(clean, target, *emb, threshold);

    json report = {{"model_name", cfg.eval.model_name},
                   {"tau", threshold.tau},
                   {"far", threshold.far},
                   {"asr", asr.rate},
                   {"asr_clean", asr_clean.rate},
                   {"psnr_mean", psnr_sum / n},
                   {"ssim_mean", ssim_sum / n},
                   {"fid", clean.size() >= 2 ? json(fid(clean_feats, protected_feats)) : json(nullptr)},
                   {"n_images", clean.size()},
                   {"n_impostor_pairs", threshold.n_impostor_pairs},
                   {"config_hash", config_hash(cfg)},
                   {"scores", asr.scores},
                   {"clean_scores", asr_clean.scores}};
    if (threshold.saturated)
        report["warning"] = "threshold saturated: no impostor score can be accepted at this FAR";
    fs::create_directories(cfg.out);
    write_json(cfg.out / "report.json", report);
    return report;
}

json run_compare_api(const ExperimentConfig& cfg, const fs::path& manifest_path, const std::string& endpoint,
                     const std::string& api_key)
{
    validate_config(cfg);
    const json manifest = read_json(manifest_path);
    const fs::path run_dir = manifest_path.parent_path();
    if (!manifest.contains("records") || manifest["records"].empty())
        throw ConfigError(manifest_path.string() + ": manifest has no image records");
    const ImageBuffer target = load_named(cfg.data.target, "target image").image;

    api::ClientOptions options;
    try {
        options = api::options_from_env(endpoint.empty() ? cfg.api.endpoint : endpoint, api_key);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    options.rate_limit = cfg.api.rate_limit;
    options.timeout = cfg.api.timeout;
    const api::CompareClient client(options);

    std::vector<std::string> outputs;
    std::vector<ImageBuffer> images;
    for (const auto& rec : manifest["records"]) {
        outputs.push_back(rec.at("output").get<std::string>());
        images.push_back(load_named(run_dir / outputs.back(), "manifest output").image);
    }
    const api::BatchResult batch = client.batch_compare(images, target, cfg.api.concurrency);

    json results = json::array();
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto& item = batch.items[i];
        if (item.result)
            results.push_back({{"output", outputs[i]}, {"confidence", item.result->confidence}});
        else
            results.push_back({{"output", outputs[i]}, {"error", item.error}});
    }
    const auto& s = batch.summary;
    json report = {{"provider", options.provider},
                   {"config_hash", config_hash(cfg)},
                   {"n_images", images.size()},
                   {"results", results},
                   {"summary",
                    {{"mean", s.mean}, {"median", s.median}, {"std", s.std}, {"n_success", s.n_success},
                     {"n_failed", s.n_failed}}}};
    fs::create_directories(cfg.out);
    write_json(cfg.out / "api_report.json", report);
    return report;
}

fs::path write_synthetic_dataset(const fs::path& root, std::uint64_t seed, int n_sources)
{
    constexpr int size = 32;
    fs::create_directories(root);

    const ToyFaceSet train = make_face_set(derive_seed(seed, "train"), 64, 32, size, true);
    for (std::size_t i = 0; i < train.faces.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "train_%03zu.png", i);
        save_image(train.faces[i].image, root / "train" / name);
    }

    // sources plus one extra identity used as the impersonation target
    const ToyFaceSet people = make_face_set(derive_seed(seed, "sources"), n_sources + 1, n_sources + 1, size, false);
    for (int i = 0; i < n_sources; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "src_%03d", i);
        save_image(people.faces[std::size_t(i)].image, root / "sources" / "images" / (std::string(name) + ".png"));
        save_label_map(people.faces[std::size_t(i)].masks, root / "sources" / "masks" / (std::string(name) + ".mask.png"));
    }
    save_image(people.faces.back().image, root / "target.png");

    Rng style_rng(seed, "reference-style");
    Rng id_rng(seed, "reference-identity");
    const MakeupStyle style = random_style(style_rng);
    const SyntheticFace ref = render_face(random_identity(id_rng), &style, size);
    save_image(ref.image, root / "reference.png");
    save_label_map(ref.masks, root / "sources" / "masks" / "reference.mask.png");

    const ToyFaceSet impostors = make_face_set(derive_seed(seed, "impostors"), 40, 10, size, true);
    std::vector<std::string> stems;
    for (std::size_t i = 0; i < impostors.faces.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "imp_%03zu", i);
        stems.emplace_back(name);
        save_image(impostors.faces[i].image, root / "impostors" / "images" / (stems.back() + ".png"));
    }
    write_identity_tsv(root / "impostors" / "identities.tsv", stems, impostors.identities);

    const fs::path config = root / "config.ini";
    std::ofstream out(config, std::ios::binary);
    out << "[data]\n"
           "sources = sources/images\n"
           "masks = sources/masks\n"
           "reference = reference.png\n"
           "target = target.png\n"
           "impostors = impostors\n"
           "denoiser_data = train\n"
           "\n"
           "[train]\n"
           "base_lr = 0.02\n"
           "\n"
           "[eval]\n"
           "far = 0.01\n"
           "\n"
           "[run]\n"
           "seed = "
        << seed
        << "\n"
           "out = runs/default\n";
    return config;
}

}  // namespace diffam
