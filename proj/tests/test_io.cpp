#include "doctest.h"

#include <fstream>

#include "diffam/errors.hpp"
#include "diffam/experiment.hpp"
#include "diffam/image_io.hpp"
#include "support.hpp"

using namespace testing;

#ifndef DIFFAM_TEST_DATA
#error "DIFFAM_TEST_DATA must point at tests/data"
#endif

namespace {

const fs::path data_dir = DIFFAM_TEST_DATA;

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// One synthetic dataset shared by the command tests.
const fs::path& dataset()
{
    static const fs::path root = [] {
        const fs::path r = temp_dir("dataset");
        write_synthetic_dataset(r, 11, 3);
        return r;
    }();
    return root;
}

ExperimentConfig dataset_config(const std::string& out)
{
    ExperimentConfig cfg = load_config(dataset() / "config.ini");
    cfg.train.epochs = 2;
    ConfigOverrides o;
    o.out = temp_dir(out);
    apply_overrides(cfg, o);
    return cfg;
}

}  // namespace

TEST_SUITE("io")
{
    TEST_CASE("byte mapping")
    {
        CHECK(from_byte(255) == 1.0);
        CHECK(from_byte(0) == -1.0);
        CHECK(from_byte(127) == doctest::Approx(-0.00392156862745098).epsilon(1e-15));
        for (int p = 0; p < 256; ++p)
            REQUIRE(to_byte(from_byte(std::uint8_t(p))) == p);
        CHECK(to_byte(2.0) == 255);
        CHECK(to_byte(-7.0) == 0);
        CHECK(to_byte(std::nan("")) == 0);
        // ties round away from zero: 127.5 - 0.5 would sit on 127; this lands on 128
        CHECK(to_byte(0.5 / 127.5) == 128);
    }

    TEST_CASE("png corpus round trip")
    {
        for (const char* name : {"rgb_7x5.png", "rgb_7x5_best.png", "ramp_256x1.png"}) {
            CAPTURE(name);
            const ImageBuffer img = load_image(data_dir / name);
            const auto once = encode_png(img);
            const auto twice = encode_png(decode_png(once));
            CHECK(once == twice);
            CHECK(decode_png(once).pixels().isApprox(img.pixels(), 0.0));
        }
        const ImageBuffer a = load_image(data_dir / "rgb_7x5.png");
        CHECK(a.height() == 5);
        CHECK(a.width() == 7);
        CHECK(a(2, 3, 0) == from_byte((3 * 37 + 2 * 11) % 256));
        CHECK(a(4, 6, 2) == from_byte(255 - 6 * 20 - 4 * 9));
        CHECK(load_image(data_dir / "rgb_7x5_best.png").pixels().isApprox(a.pixels(), 0.0));
        const ImageBuffer ramp = load_image(data_dir / "ramp_256x1.png");
        for (int i = 0; i < 256; ++i)
            REQUIRE(to_byte(ramp(0, i, 0)) == i);
    }

    TEST_CASE("bad image files")
    {
        const auto dir = temp_dir("badpng");
        CHECK_THROWS_AS(load_image(dir / "missing.png"), ImageIoError);
        std::ofstream(dir / "junk.png") << "not a png";
        CHECK_THROWS_AS(load_image(dir / "junk.png"), ImageIoError);
        auto bytes = read_file(data_dir / "rgb_7x5.png");
        bytes.resize(bytes.size() / 2);
        CHECK_THROWS_AS(decode_png(bytes), ImageIoError);
    }
}

TEST_SUITE("config")
{
    TEST_CASE("parse, resolve and validate")
    {
        const std::string text = "[data]\nsources = imgs\nmasks = /abs/masks\nreference = ref.png\n"
                                 "[diffusion]\nt0 = 100\n[weights]\ndirection = 0\n"
                                 "[models]\nensemble = toy-face-1, toy-face-5\n[run]\nseed = 42\n";
        const ExperimentConfig cfg = parse_config(text, "/base/dir");
        CHECK(cfg.data.sources == fs::path("/base/dir/imgs"));
        CHECK(cfg.data.masks == fs::path("/abs/masks"));
        CHECK(cfg.data.reference_mask == fs::path("/abs/masks/ref.mask.png"));
        CHECK(cfg.data.reference_clean.empty());
        CHECK(cfg.train.diffusion.t0 == 100);
        CHECK(cfg.train.weights.direction == 0.0);
        CHECK(cfg.train.seed == 42);
        CHECK(cfg.models.ensemble == std::vector<std::string>{"toy-face-1", "toy-face-5"});
        CHECK(cfg.train.base_lr == 4e-6);
        CHECK_NOTHROW(validate_config(cfg));

        CHECK_THROWS_AS(parse_config("[data]\nsorces = x\n", "/"), ConfigError);
        CHECK_THROWS_AS(parse_config("[diffusion]\nt0 = sixty\n", "/"), ConfigError);
        CHECK_THROWS_AS(parse_config("[train]\nlr_mode = cubic\n", "/"), ConfigError);
        CHECK_THROWS_AS(parse_config("[diffusion\n", "/"), ConfigError);
        CHECK_THROWS_AS(validate_config(parse_config("[diffusion]\nt0 = 2000\n", "/")), ConfigError);
        CHECK_THROWS_AS(validate_config(parse_config("[eval]\nfar = 1.5\n", "/")), ConfigError);
        CHECK_THROWS_AS(load_config("/nonexistent/config.ini"), ConfigError);
    }

    TEST_CASE("canonical form and hash")
    {
        ExperimentConfig a = parse_config("[run]\nseed = 1\n[diffusion]\nt0 = 60\n", "/b");
        ExperimentConfig b = parse_config("[diffusion]\nt0 = 60\n\n[run]\nseed = 1\nout = elsewhere\n", "/b");
        CHECK(config_hash(a) == config_hash(b));
        CHECK(canonical_config(a) != canonical_config(b));
        CHECK(config_hash(a).size() == 64);
        b.train.diffusion.t0 = 61;
        CHECK(config_hash(a) != config_hash(b));

        const std::string canon = canonical_config(a);
        CHECK(canon.find("[api]") < canon.find("[data]"));
        CHECK(canon.find("base_lr = 4e-06") != std::string::npos);
        CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    TEST_CASE("overrides round-trip through the persisted config")
    {
        ExperimentConfig cfg = parse_config("[data]\nsources = s\n", "/root");
        ConfigOverrides o;
        o.t0 = 100;
        o.s_inv = 25;
        o.s_sam = 5;
        o.lambda_dir = 0.0;
        o.seed = 99;
        o.out = "/tmp/somewhere";
        apply_overrides(cfg, o);
        const ExperimentConfig back = parse_config(canonical_config(cfg), "/unrelated");
        CHECK(canonical_config(back) == canonical_config(cfg));
        CHECK(back.train.diffusion.t0 == 100);
        CHECK(back.train.diffusion.s_inv == 25);
        CHECK(back.train.diffusion.s_sam == 5);
        CHECK(back.train.weights.direction == 0.0);
        CHECK(back.train.seed == 99);
        CHECK(back.out == fs::path("/tmp/somewhere"));
        CHECK(back.data.sources == fs::path("/root/s"));
    }

    TEST_CASE("dataset layout")
    {
        const fs::path& root = dataset();
        const auto sources = load_image_dir(root / "sources" / "images");
        CHECK(sources.size() == 3);
        CHECK(sources[0].stem == "src_000");
        const RegionMasks m = load_mask_for(root / "sources" / "masks", sources[0]);
        CHECK(m.matches(sources[0].image));
        NamedImage ghost = sources[0];
        ghost.stem = "ghost";
        CHECK_THROWS_WITH_AS(load_mask_for(root / "sources" / "masks", ghost), doctest::Contains("ghost.mask.png"),
                             ConfigError);

        const IdentityDataset ids = load_identity_dataset(root / "impostors");
        CHECK(ids.images.size() == ids.labels.size());
        CHECK(ids.images.size() == 40);
        CHECK_THROWS_AS(load_identity_dataset(root / "sources"), ConfigError);
        CHECK_THROWS_AS(load_image_dir(root / "nothing-here"), ConfigError);
    }
}

TEST_SUITE("commands")
{
    TEST_CASE("transfer, protect, evaluate and calibrate")
    {
        const ExperimentConfig cfg = dataset_config("cmd-transfer");
        const json manifest = run_transfer(cfg);
        CHECK(manifest["command"] == "transfer");
        CHECK(manifest["config_hash"] == config_hash(cfg));
        CHECK(manifest["tag"] == "full_t60");
        REQUIRE(manifest["records"].size() == 3);
        for (const auto& rec : manifest["records"]) {
            CHECK(fs::exists(cfg.out / rec["output"].get<std::string>()));
            CHECK(fs::exists(rec["input"].get<std::string>()));
            CHECK(rec["scores"].contains("toy-face-4"));
        }
        for (const auto& [k, v] : manifest["artifacts"].items())
            CHECK(fs::exists(cfg.out / v.get<std::string>()));

        std::ifstream log(cfg.out / "log.jsonl");
        std::string line;
        int stage1 = 0, stage2 = 0;
        while (std::getline(log, line)) {
            const json r = json::parse(line);
            for (const char* key : {"stage", "iter", "lr", "total", "terms", "cosine", "tag"})
                REQUIRE(r.contains(key));
            (r["stage"] == "transfer" ? stage2 : stage1)++;
        }
        CHECK(stage1 == 2);
        CHECK(stage2 == 6);

        // protect with the tuned parameters reproduces the transfer outputs
        const json prot = run_protect(cfg, cfg.out / "stage2.json", {});
        REQUIRE(prot["records"].size() == 3);
        for (std::size_t i = 0; i < 3; ++i)
            CHECK(slurp(cfg.out / prot["records"][i]["output"].get<std::string>()) ==
                  slurp(cfg.out / manifest["records"][i]["output"].get<std::string>()));

        ExperimentConfig other = cfg;
        other.train.diffusion.t0 = 100;
        CHECK_THROWS_AS(run_protect(other, cfg.out / "stage2.json", {}), ConfigError);

        const json threshold = run_calibrate(cfg);
        CHECK(threshold["n_impostor_pairs"].get<int>() > 0);
        CHECK(fs::exists(cfg.out / "threshold.json"));

        const json report = run_evaluate(cfg, cfg.out / "manifest.json", cfg.out / "threshold.json");
        for (const char* key : {"model_name", "tau", "far", "asr", "psnr_mean", "ssim_mean", "fid", "n_images",
                                "config_hash"})
            CHECK(report.contains(key));
        CHECK(report["n_images"] == 3);
        CHECK(report["tau"] == threshold["tau"]);
        CHECK(report["psnr_mean"].get<double>() > 20.0);
        CHECK(report["ssim_mean"].get<double>() <= 1.0);
        CHECK(run_evaluate(cfg, cfg.out / "manifest.json")["tau"] == threshold["tau"]);
    }

    TEST_CASE("remove-makeup writes the clean reference")
    {
        const ExperimentConfig cfg = dataset_config("cmd-remove");
        const json manifest = run_remove_makeup(cfg);
        CHECK(fs::exists(cfg.out / "reference_clean.png"));
        CHECK(fs::exists(cfg.out / "stage1.json"));
        CHECK(manifest["stage1"]["iterations"] == 2);

        // a later transfer can reuse it instead of running removal inline
        ExperimentConfig reuse = dataset_config("cmd-reuse");
        reuse.data.reference_clean = cfg.out / "reference_clean.png";
        const json m2 = run_transfer(reuse);
        CHECK_FALSE(m2.contains("stage1"));
    }

    TEST_CASE("missing inputs are config errors")
    {
        ExperimentConfig cfg = dataset_config("cmd-missing");
        cfg.data.reference = dataset() / "no-such.png";
        CHECK_THROWS_AS(run_transfer(cfg), ConfigError);
        cfg = dataset_config("cmd-missing");
        cfg.data.masks = dataset() / "sources";
        CHECK_THROWS_WITH_AS(run_transfer(cfg), doctest::Contains("src_000.mask.png"), ConfigError);
        cfg = dataset_config("cmd-missing");
        cfg.models.ensemble = {"toy-nothing"};
        CHECK_THROWS_AS(run_transfer(cfg), ConfigError);
    }

    TEST_CASE("artifacts json round trip")
    {
        const ExperimentConfig cfg = dataset_config("cmd-artifacts");
        const ModelBundle m = build_models(cfg);
        StageArtifacts a;
        a.stage = "transfer";
        a.tag = "full_t60";
        a.settings = {60, 20, 6};
        a.parameters = m.denoiser->parameters() * 1.0000001;
        const StageArtifacts b = artifacts_from_json(json::parse(artifacts_json(a, *m.denoiser).dump()), *m.denoiser);
        CHECK(b.parameters == a.parameters);
        CHECK(b.settings == a.settings);
        auto other = m.denoiser->clone();
        other->set_parameters(a.parameters);
        CHECK_THROWS_AS(artifacts_from_json(artifacts_json(a, *m.denoiser), *other), ConfigError);
    }
}
