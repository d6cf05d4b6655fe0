#include "imit/cli/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "imit/core/error.hpp"

namespace imit {

namespace {

std::string trim(const std::string& s) {
    const std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::string fmt_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_sizes(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const std::uint64_t out = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw UsageError("config: key '" + key + "' expects an unsigned integer, got '" +
                         v + "'");
    }
}

double parse_real(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw UsageError("config: key '" + key + "' expects a real number, got '" + v +
                         "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw UsageError("config: key '" + key + "' expects true/false, got '" + v + "'");
}

std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty())
            throw UsageError("config: key '" + key + "' has an empty list element");
        out.push_back(parse_u64(key, item));
    }
    if (out.empty()) throw UsageError("config: key '" + key + "' expects a size list");
    return out;
}

}  // namespace

TrainConfig parse_config(const std::string& text) {
    TrainConfig cfg;
    std::stringstream ss(text);
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        const std::size_t comment = line.find('#');
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw UsageError("config line " + std::to_string(line_no) +
                                 ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError("config line " + std::to_string(line_no) +
                             ": expected key = value");
        const std::string key = section + "." + trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        if (key == "run.seed") cfg.seed = parse_u64(key, value);
        else if (key == "env.kind") cfg.kind = kind_from_name(value);
        else if (key == "env.horizon") cfg.horizon = parse_u64(key, value);
        else if (key == "dataset.reacher_train_targets")
            cfg.reacher_train_targets = parse_u64(key, value);
        else if (key == "dataset.reacher_rollouts")
            cfg.reacher_rollouts = parse_u64(key, value);
        else if (key == "dataset.reacher_test_targets")
            cfg.reacher_test_targets = parse_u64(key, value);
        else if (key == "dataset.walker_styles") cfg.walker_styles = parse_u64(key, value);
        else if (key == "dataset.walker_rollouts")
            cfg.walker_rollouts = parse_u64(key, value);
        else if (key == "dataset.expert_noise") cfg.expert_noise = parse_real(key, value);
        else if (key == "dataset.seed") cfg.dataset_seed = parse_u64(key, value);
        else if (key == "vae.encoder_width") cfg.encoder_width = parse_u64(key, value);
        else if (key == "vae.latent_dim") cfg.latent_dim = parse_u64(key, value);
        else if (key == "vae.action_hidden") cfg.action_hidden = parse_sizes(key, value);
        else if (key == "vae.state_channels") cfg.state_channels = parse_u64(key, value);
        else if (key == "vae.state_layers") cfg.state_layers = parse_u64(key, value);
        else if (key == "vae.mixture_k") cfg.mixture_k = parse_u64(key, value);
        else if (key == "vae.epochs") cfg.vae_epochs = parse_u64(key, value);
        else if (key == "vae.batch_size") cfg.vae_batch = parse_u64(key, value);
        else if (key == "vae.learning_rate") cfg.vae_lr = parse_real(key, value);
        else if (key == "vae.clip_norm") cfg.vae_clip = parse_real(key, value);
        else if (key == "gail.iterations") cfg.gail_iterations = parse_u64(key, value);
        else if (key == "gail.demos_per_iter") cfg.demos_per_iter = parse_u64(key, value);
        else if (key == "gail.disc_steps") cfg.disc_steps = parse_u64(key, value);
        else if (key == "gail.disc_lr") cfg.disc_lr = parse_real(key, value);
        else if (key == "gail.clip_max") cfg.clip_max = parse_real(key, value);
        else if (key == "gail.max_kl") cfg.max_kl = parse_real(key, value);
        else if (key == "gail.gamma") cfg.gamma = parse_real(key, value);
        else if (key == "gail.lambda") cfg.lambda = parse_real(key, value);
        else if (key == "gail.fvp_subsample") cfg.fvp_subsample = parse_u64(key, value);
        else if (key == "gail.policy_hidden") cfg.policy_hidden = parse_sizes(key, value);
        else if (key == "gail.disc_hidden") cfg.disc_hidden = parse_sizes(key, value);
        else if (key == "gail.critic_hidden") cfg.critic_hidden = parse_sizes(key, value);
        else if (key == "gail.standardize_disc_input")
            cfg.standardize_disc_input = parse_bool(key, value);
        else if (key == "eval.seed") cfg.eval_seed = parse_u64(key, value);
        else if (key == "eval.rollouts") cfg.eval_rollouts = parse_u64(key, value);
        else if (key == "eval.tolerance") cfg.eval_tolerance = parse_real(key, value);
        else
            throw UsageError("config line " + std::to_string(line_no) +
                             ": unknown key '" + key + "'");
    }
    return cfg;
}

TrainConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("config: cannot read '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_config(buf.str());
    } catch (const UsageError& e) {
        throw UsageError(std::string(e.what()) + " (" + path + ")");
    }
}

std::string serialize_config(const TrainConfig& c) {
    std::string out;
    out += "[run]\n";
    out += "seed = " + std::to_string(c.seed) + "\n\n";
    out += "[env]\n";
    out += "kind = " + kind_name(c.kind) + "\n";
    out += "horizon = " + std::to_string(c.horizon) + "\n\n";
    out += "[dataset]\n";
    out += "reacher_train_targets = " + std::to_string(c.reacher_train_targets) + "\n";
    out += "reacher_rollouts = " + std::to_string(c.reacher_rollouts) + "\n";
    out += "reacher_test_targets = " + std::to_string(c.reacher_test_targets) + "\n";
    out += "walker_styles = " + std::to_string(c.walker_styles) + "\n";
    out += "walker_rollouts = " + std::to_string(c.walker_rollouts) + "\n";
    out += "expert_noise = " + fmt_real(c.expert_noise) + "\n";
    out += "seed = " + std::to_string(c.dataset_seed) + "\n\n";
    out += "[vae]\n";
    out += "encoder_width = " + std::to_string(c.encoder_width) + "\n";
    out += "latent_dim = " + std::to_string(c.latent_dim) + "\n";
    out += "action_hidden = " + fmt_sizes(c.action_hidden) + "\n";
    out += "state_channels = " + std::to_string(c.state_channels) + "\n";
    out += "state_layers = " + std::to_string(c.state_layers) + "\n";
    out += "mixture_k = " + std::to_string(c.mixture_k) + "\n";
    out += "epochs = " + std::to_string(c.vae_epochs) + "\n";
    out += "batch_size = " + std::to_string(c.vae_batch) + "\n";
    out += "learning_rate = " + fmt_real(c.vae_lr) + "\n";
    out += "clip_norm = " + fmt_real(c.vae_clip) + "\n\n";
    out += "[gail]\n";
    out += "iterations = " + std::to_string(c.gail_iterations) + "\n";
    out += "demos_per_iter = " + std::to_string(c.demos_per_iter) + "\n";
    out += "disc_steps = " + std::to_string(c.disc_steps) + "\n";
    out += "disc_lr = " + fmt_real(c.disc_lr) + "\n";
    out += "clip_max = " + fmt_real(c.clip_max) + "\n";
    out += "max_kl = " + fmt_real(c.max_kl) + "\n";
    out += "gamma = " + fmt_real(c.gamma) + "\n";
    out += "lambda = " + fmt_real(c.lambda) + "\n";
    out += "fvp_subsample = " + std::to_string(c.fvp_subsample) + "\n";
    out += "policy_hidden = " + fmt_sizes(c.policy_hidden) + "\n";
    out += "disc_hidden = " + fmt_sizes(c.disc_hidden) + "\n";
    out += "critic_hidden = " + fmt_sizes(c.critic_hidden) + "\n";
    out += "standardize_disc_input = " +
           std::string(c.standardize_disc_input ? "true" : "false") + "\n\n";
    out += "[eval]\n";
    out += "seed = " + std::to_string(c.eval_seed) + "\n";
    out += "rollouts = " + std::to_string(c.eval_rollouts) + "\n";
    out += "tolerance = " + fmt_real(c.eval_tolerance) + "\n";
    return out;
}

void save_config(const std::string& path, const TrainConfig& config) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("config: cannot write '" + path + "'");
    out << serialize_config(config);
}

DatasetConfig dataset_config_of(const TrainConfig& c) {
    DatasetConfig d;
    d.kind = c.kind;
    d.reacher_train_targets = c.reacher_train_targets;
    d.reacher_rollouts = c.reacher_rollouts;
    d.reacher_test_targets = c.reacher_test_targets;
    d.walker_styles = c.walker_styles;
    d.walker_rollouts = c.walker_rollouts;
    d.horizon = c.horizon;
    d.expert_noise = c.expert_noise;
    d.seed = c.dataset_seed;
    return d;
}

VaeSpecs vae_specs_of(const TrainConfig& c) {
    return make_vae_specs(c.kind, c.encoder_width, c.latent_dim, c.action_hidden,
                          c.state_channels, c.state_layers, c.mixture_k);
}

VaeTrainConfig vae_train_config_of(const TrainConfig& c) {
    VaeTrainConfig v;
    v.epochs = c.vae_epochs;
    v.batch_size = c.vae_batch;
    v.learning_rate = c.vae_lr;
    v.clip_norm = c.vae_clip;
    return v;
}

GailConfig gail_config_of(const TrainConfig& c) {
    GailConfig g;
    g.iterations = c.gail_iterations;
    g.demos_per_iter = c.demos_per_iter;
    g.disc_steps = c.disc_steps;
    g.disc_lr = c.disc_lr;
    g.clip_max = c.clip_max;
    g.gamma = c.gamma;
    g.lambda = c.lambda;
    g.policy_hidden = c.policy_hidden;
    g.disc_hidden = c.disc_hidden;
    g.critic_hidden = c.critic_hidden;
    g.standardize_disc_input = c.standardize_disc_input;
    g.trpo.max_kl = c.max_kl;
    g.trpo.fvp_subsample = c.fvp_subsample;
    return g;
}

std::vector<ScalePair> full_scale_reference_table() {
    return {
        {"encoder_width", {64}, {200}},   {"latent_dim", {8}, {20}},
        {"action_hidden", {64, 64}, {200, 200}}, {"state_channels", {16}, {32}},
        {"state_layers", {4}, {6}},       {"policy_hidden", {64, 32}, {200, 100}},
        {"disc_hidden", {32, 32}, {100, 64}},    {"critic_hidden", {64, 32}, {200, 100}},
    };
}

}  // namespace imit
