#include <csignal>
#include <iostream>

#include "CLI11.hpp"

#include "diffam/errors.hpp"
#include "diffam/experiment.hpp"
#include "diffam/mock_server.hpp"
#include "diffam/regions.hpp"

using namespace diffam;

namespace {

constexpr int exit_runtime = 1;
constexpr int exit_config = 2;

int fail(const char* kind, const std::string& message, int code)
{
    std::cerr << json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << '\n';
    return code;
}

struct Common {
    std::string config;
    ConfigOverrides overrides;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;

    void attach(CLI::App* cmd)
    {
        cmd->add_option("--config", config, "experiment config file")->required()->check(CLI::ExistingFile);
        cmd->add_option("--t0", overrides.t0, "return step");
        cmd->add_option("--s-inv", overrides.s_inv, "inversion steps");
        cmd->add_option("--s-sam", overrides.s_sam, "sampling steps");
        cmd->add_option("--lambda-dir", overrides.lambda_dir, "makeup direction loss weight");
        cmd->add_option("--seed", overrides.seed, "run seed");
        cmd->add_option("--out", out, "output directory");
    }

    ExperimentConfig load()
    {
        ExperimentConfig cfg = load_config(config);
        if (out)
            overrides.out = *out;
        apply_overrides(cfg, overrides);
        return cfg;
    }
};

void print(const json& j) { std::cout << j.dump(2) << '\n'; }

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Adversarial makeup transfer for facial privacy protection (toy diffusion pipeline)"};
    app.require_subcommand(1);

    Common common;

    auto* remove = app.add_subcommand("remove-makeup", "fine-tune for makeup removal on the reference image");
    common.attach(remove);

    auto* transfer = app.add_subcommand("transfer", "fine-tune for adversarial makeup transfer over the sources");
    common.attach(transfer);

    auto* protect_cmd = app.add_subcommand("protect", "apply tuned parameters to new images");
    common.attach(protect_cmd);
    std::string artifacts;
    std::vector<std::string> inputs;
    protect_cmd->add_option("--artifacts", artifacts, "stage2.json from a transfer run")
        ->required()
        ->check(CLI::ExistingFile);
    protect_cmd->add_option("--input", inputs, "image files or directories (default: data.sources)");

    auto* evaluate = app.add_subcommand("evaluate", "ASR, PSNR, SSIM and FID for a transfer run");
    common.attach(evaluate);
    std::string manifest;
    std::string threshold;
    evaluate->add_option("--manifest", manifest, "manifest.json of a transfer or protect run")->required();
    evaluate->add_option("--threshold", threshold, "threshold.json (default: calibrate now)");

    auto* calibrate = app.add_subcommand("calibrate-threshold", "FAR-calibrated verification threshold");
    common.attach(calibrate);

    auto* compare = app.add_subcommand("compare-api", "score protected images with a face-compare service");
    common.attach(compare);
    std::string endpoint;
    std::string key;
    compare->add_option("--manifest", manifest, "manifest.json of a transfer or protect run")->required();
    compare->add_option("--endpoint", endpoint, "service endpoint (default: api.endpoint or FACECOMPARE_ENDPOINT)");
    compare->add_option("--key", key, "API key (default: FACECOMPARE_KEY)");

    auto* synth = app.add_subcommand("synth-data", "write a synthetic toy dataset and config");
    std::string synth_root;
    std::uint64_t synth_seed = 0;
    int synth_sources = 8;
    synth->add_option("--out", synth_root, "dataset root")->required();
    synth->add_option("--seed", synth_seed, "dataset seed");
    synth->add_option("--sources", synth_sources, "number of source faces")->check(CLI::Range(1, 1000));

    auto* mock = app.add_subcommand("mock-server", "serve the face-compare protocol locally");
    std::string mock_host = "127.0.0.1";
    int mock_port = 8808;
    std::string mock_mode = "fixed";
    double mock_score = 73.5;
    std::string mock_embedder = "toy-face-4";
    std::uint64_t mock_seed = 0;
    std::string mock_key;
    mock->add_option("--host", mock_host);
    mock->add_option("--port", mock_port);
    mock->add_option("--mode", mock_mode)->check(CLI::IsMember({"fixed", "cosine"}));
    mock->add_option("--score", mock_score, "fixed-mode confidence");
    mock->add_option("--embedder", mock_embedder, "cosine-mode face embedder");
    mock->add_option("--seed", mock_seed, "cosine-mode embedder seed");
    mock->add_option("--key", mock_key, "required API key");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0)
            return app.exit(e);
        return fail("usage", e.what(), exit_config);
    }

    try {
        if (*remove)
            print(run_remove_makeup(common.load()));
        else if (*transfer)
            print(run_transfer(common.load()));
        else if (*protect_cmd)
            print(run_protect(common.load(), artifacts, {inputs.begin(), inputs.end()}));
        else if (*evaluate)
            print(run_evaluate(common.load(), manifest, threshold));
        else if (*calibrate)
            print(run_calibrate(common.load()));
        else if (*compare)
            print(run_compare_api(common.load(), manifest, endpoint, key));
        else if (*synth)
            std::cout << write_synthetic_dataset(synth_root, synth_seed, synth_sources).string() << '\n';
        else if (*mock) {
            api::MockOptions options;
            options.mode = mock_mode == "cosine" ? api::MockOptions::Mode::cosine : api::MockOptions::Mode::fixed;
            options.fixed_score = mock_score;
            options.api_key = mock_key;
            if (options.mode == api::MockOptions::Mode::cosine)
                options.embedder = EncoderRegistry::instance().face_embedder(mock_embedder, mock_seed);
            api::MockCompareServer server(options);
            std::cerr << "serving on http://" << mock_host << ":" << mock_port << '\n';
            server.serve(mock_host, mock_port);
        }
    } catch (const ConfigError& e) {
        return fail("config", e.what(), exit_config);
    } catch (const MaskError& e) {
        return fail("config", e.what(), exit_config);
    } catch (const TrainingError& e) {
        return fail("training", e.what(), exit_runtime);
    } catch (const std::exception& e) {
        return fail("runtime", e.what(), exit_runtime);
    }
    return 0;
}
