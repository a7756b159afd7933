#include "diffam/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/evp.h>

#include "diffam/errors.hpp"

namespace diffam {

namespace pt = boost::property_tree;

namespace {

std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (auto t = trim(item); !t.empty())
            out.push_back(t);
    return out;
}

std::string join_list(const std::vector<std::string>& items)
{
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i)
        out += (i ? "," : "") + items[i];
    return out;
}

// Ordered section -> key -> value view of a config.
using Table = std::map<std::string, std::map<std::string, std::string>>;

class Reader {
public:
    Reader(const pt::ptree& tree, fs::path base) : base_(std::move(base))
    {
        for (const auto& [section, body] : tree) {
            if (body.empty() && !body.data().empty())
                throw ConfigError("config: key '" + section + "' outside any section");
            for (const auto& [key, value] : body)
                table_[section][key] = trim(value.data());
        }
    }

    template <typename T>
    void get(const std::string& section, const std::string& key, T& out)
    {
        const std::string* raw = take(section, key);
        if (!raw)
            return;
        if constexpr (std::is_same_v<T, std::string>) {
            out = *raw;
        } else if constexpr (std::is_same_v<T, fs::path>) {
            out = raw->empty() ? fs::path() : (base_ / *raw).lexically_normal();
        } else {
            T value{};
            const auto* end = raw->data() + raw->size();
            const auto res = std::from_chars(raw->data(), end, value);
            if (res.ec != std::errc() || res.ptr != end)
                throw ConfigError("config: bad value for " + section + "." + key + ": '" + *raw + "'");
            out = value;
        }
    }

    void get_list(const std::string& section, const std::string& key, std::vector<std::string>& out)
    {
        if (const std::string* raw = take(section, key))
            out = split_list(*raw);
    }

    void finish() const
    {
        for (const auto& [section, keys] : table_)
            for (const auto& [key, value] : keys)
                if (!used_.count(section + "." + key))
                    throw ConfigError("config: unknown key " + section + "." + key);
    }

private:
    const std::string* take(const std::string& section, const std::string& key)
    {
        auto s = table_.find(section);
        if (s == table_.end())
            return nullptr;
        auto k = s->second.find(key);
        if (k == s->second.end())
            return nullptr;
        used_.insert(section + "." + key);
        return &k->second;
    }

    fs::path base_;
    Table table_;
    std::set<std::string> used_;
};

Table to_table(const ExperimentConfig& cfg, bool include_out)
{
    const auto path = [](const fs::path& p) { return p.generic_string(); };
    const auto& t = cfg.train;
    const auto& w = t.weights;
    Table tab;
    tab["data"] = {{"sources", path(cfg.data.sources)},
                   {"masks", path(cfg.data.masks)},
                   {"reference", path(cfg.data.reference)},
                   {"reference_mask", path(cfg.data.reference_mask)},
                   {"reference_clean", path(cfg.data.reference_clean)},
                   {"target", path(cfg.data.target)},
                   {"impostors", path(cfg.data.impostors)},
                   {"denoiser_data", path(cfg.data.denoiser_data)}};
    tab["models"] = {{"denoiser_sharing", cfg.models.denoiser_sharing},
                     {"image_encoder", cfg.models.image_encoder},
                     {"text_encoder", cfg.models.text_encoder},
                     {"identity", cfg.models.identity},
                     {"ensemble", join_list(cfg.models.ensemble)},
                     {"eval_embedder", cfg.models.eval_embedder},
                     {"perceptual", cfg.models.perceptual},
                     {"fid_features", cfg.models.fid_features}};
    tab["diffusion"] = {{"t0", std::to_string(t.diffusion.t0)},
                        {"s_inv", std::to_string(t.diffusion.s_inv)},
                        {"s_sam", std::to_string(t.diffusion.s_sam)},
                        {"t_full", std::to_string(cfg.schedule.t_full)},
                        {"beta_start", format_double(cfg.schedule.beta_start)},
                        {"beta_end", format_double(cfg.schedule.beta_end)}};
    tab["train"] = {{"epochs", std::to_string(t.epochs)},
                    {"base_lr", format_double(t.base_lr)},
                    {"lr_step", std::to_string(t.lr_step)},
                    {"lr_slope", format_double(t.lr_slope)},
                    {"lr_mode", t.lr_mode == LrMode::additive ? "additive" : "multiplicative"},
                    {"adam_beta1", format_double(t.adam_beta1)},
                    {"adam_beta2", format_double(t.adam_beta2)},
                    {"adam_epsilon", format_double(t.adam_epsilon)},
                    {"norm_epsilon", format_double(t.norm_epsilon)},
                    {"prompt_clean", t.prompt_clean},
                    {"prompt_makeup", t.prompt_makeup}};
    tab["weights"] = {{"removal", format_double(w.removal)},     {"identity", format_double(w.identity)},
                      {"lpips", format_double(w.lpips)},         {"makeup", format_double(w.makeup)},
                      {"direction", format_double(w.direction)}, {"pixel", format_double(w.pixel)},
                      {"adversarial", format_double(w.adversarial)}, {"visual", format_double(w.visual)},
                      {"l1", format_double(w.l1)}};
    tab["eval"] = {{"far", format_double(cfg.eval.far)},
                   {"max_impostor_pairs", std::to_string(cfg.eval.max_impostor_pairs)},
                   {"model_name", cfg.eval.model_name}};
    tab["api"] = {{"endpoint", cfg.api.endpoint},
                  {"rate_limit", format_double(cfg.api.rate_limit)},
                  {"concurrency", std::to_string(cfg.api.concurrency)},
                  {"timeout", format_double(cfg.api.timeout)}};
    tab["run"] = {{"seed", std::to_string(t.seed)}};
    if (include_out)
        tab["run"]["out"] = path(cfg.out);
    return tab;
}

std::string render(const Table& tab)
{
    std::string out;
    for (const auto& [section, keys] : tab) {
        out += "[" + section + "]\n";
        for (const auto& [key, value] : keys)
            out += key + " = " + value + "\n";
    }
    return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const fs::path& base_dir)
{
    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }

    ExperimentConfig cfg;
    Reader r(tree, base_dir);
    auto& d = cfg.data;
    r.get("data", "sources", d.sources);
    r.get("data", "masks", d.masks);
    r.get("data", "reference", d.reference);
    r.get("data", "reference_mask", d.reference_mask);
    r.get("data", "reference_clean", d.reference_clean);
    r.get("data", "target", d.target);
    r.get("data", "impostors", d.impostors);
    r.get("data", "denoiser_data", d.denoiser_data);

    auto& m = cfg.models;
    r.get("models", "denoiser_sharing", m.denoiser_sharing);
    r.get("models", "image_encoder", m.image_encoder);
    r.get("models", "text_encoder", m.text_encoder);
    r.get("models", "identity", m.identity);
    r.get_list("models", "ensemble", m.ensemble);
    r.get("models", "eval_embedder", m.eval_embedder);
    r.get("models", "perceptual", m.perceptual);
    r.get("models", "fid_features", m.fid_features);

    auto& t = cfg.train;
    r.get("diffusion", "t0", t.diffusion.t0);
    r.get("diffusion", "s_inv", t.diffusion.s_inv);
    r.get("diffusion", "s_sam", t.diffusion.s_sam);
    r.get("diffusion", "t_full", cfg.schedule.t_full);
    r.get("diffusion", "beta_start", cfg.schedule.beta_start);
    r.get("diffusion", "beta_end", cfg.schedule.beta_end);

    r.get("train", "epochs", t.epochs);
    r.get("train", "base_lr", t.base_lr);
    r.get("train", "lr_step", t.lr_step);
    r.get("train", "lr_slope", t.lr_slope);
    std::string mode = "additive";
    r.get("train", "lr_mode", mode);
    if (mode == "additive")
        t.lr_mode = LrMode::additive;
    else if (mode == "multiplicative")
        t.lr_mode = LrMode::multiplicative;
    else
        throw ConfigError("config: train.lr_mode must be additive or multiplicative");
    r.get("train", "adam_beta1", t.adam_beta1);
    r.get("train", "adam_beta2", t.adam_beta2);
    r.get("train", "adam_epsilon", t.adam_epsilon);
    r.get("train", "norm_epsilon", t.norm_epsilon);
    r.get("train", "prompt_clean", t.prompt_clean);
    r.get("train", "prompt_makeup", t.prompt_makeup);

    auto& w = t.weights;
    r.get("weights", "removal", w.removal);
    r.get("weights", "identity", w.identity);
    r.get("weights", "lpips", w.lpips);
    r.get("weights", "makeup", w.makeup);
    r.get("weights", "direction", w.direction);
    r.get("weights", "pixel", w.pixel);
    r.get("weights", "adversarial", w.adversarial);
    r.get("weights", "visual", w.visual);
    r.get("weights", "l1", w.l1);

    r.get("eval", "far", cfg.eval.far);
    r.get("eval", "max_impostor_pairs", cfg.eval.max_impostor_pairs);
    r.get("eval", "model_name", cfg.eval.model_name);

    r.get("api", "endpoint", cfg.api.endpoint);
    r.get("api", "rate_limit", cfg.api.rate_limit);
    r.get("api", "concurrency", cfg.api.concurrency);
    r.get("api", "timeout", cfg.api.timeout);

    r.get("run", "seed", t.seed);
    r.get("run", "out", cfg.out);
    r.finish();

    if (d.reference_mask.empty() && !d.masks.empty() && !d.reference.empty())
        d.reference_mask = d.masks / (d.reference.stem().string() + ".mask.png");
    return cfg;
}

ExperimentConfig load_config(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("config: cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), fs::absolute(path).parent_path());
}

void apply_overrides(ExperimentConfig& cfg, const ConfigOverrides& o)
{
    if (o.t0)
        cfg.train.diffusion.t0 = *o.t0;
    if (o.s_inv)
        cfg.train.diffusion.s_inv = *o.s_inv;
    if (o.s_sam)
        cfg.train.diffusion.s_sam = *o.s_sam;
    if (o.lambda_dir)
        cfg.train.weights.direction = *o.lambda_dir;
    if (o.seed)
        cfg.train.seed = *o.seed;
    if (o.out)
        cfg.out = fs::absolute(*o.out).lexically_normal();
}

std::string canonical_config(const ExperimentConfig& cfg) { return render(to_table(cfg, true)); }

std::string sha256_hex(const std::string& bytes)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256: digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

std::string config_hash(const ExperimentConfig& cfg) { return sha256_hex(render(to_table(cfg, false))); }

void validate_config(const ExperimentConfig& cfg)
{
    try {
        cfg.train.validate(cfg.schedule.t_full);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (cfg.schedule.t_full < 1 || !(cfg.schedule.beta_start > 0) || !(cfg.schedule.beta_end < 1))
        throw ConfigError("config: invalid diffusion schedule");
    if (!(cfg.eval.far > 0 && cfg.eval.far < 1))
        throw ConfigError("config: eval.far must lie in (0, 1)");
    if (cfg.eval.max_impostor_pairs < 1)
        throw ConfigError("config: eval.max_impostor_pairs must be positive");
    if (cfg.models.ensemble.empty())
        throw ConfigError("config: models.ensemble is empty");
    if (cfg.api.rate_limit <= 0 || cfg.api.concurrency < 1)
        throw ConfigError("config: api.rate_limit and api.concurrency must be positive");
}

}  // namespace diffam
