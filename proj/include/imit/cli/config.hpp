#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "imit/envs/dataset.hpp"
#include "imit/gail/gail.hpp"
#include "imit/vae/vae.hpp"

namespace imit {

// Complete experiment configuration. Serialized as sectioned key/value text
// with 17-significant-digit reals so a config archived next to its outputs
// reloads losslessly.
struct TrainConfig {
    // [run]
    std::uint64_t seed = 0;

    // [env]
    EnvKind kind = EnvKind::kReacher;
    std::size_t horizon = 0;  // 0 → environment default

    // [dataset]
    std::size_t reacher_train_targets = 50;
    std::size_t reacher_rollouts = 4;
    std::size_t reacher_test_targets = 10;
    std::size_t walker_styles = 3;
    std::size_t walker_rollouts = 5;
    double expert_noise = 0.05;
    std::uint64_t dataset_seed = 0;

    // [vae]
    std::size_t encoder_width = 64;
    std::size_t latent_dim = 8;
    std::vector<std::size_t> action_hidden = {64, 64};
    std::size_t state_channels = 16;
    std::size_t state_layers = 4;
    std::size_t mixture_k = 5;
    std::size_t vae_epochs = 50;
    std::size_t vae_batch = 8;
    double vae_lr = 1e-3;
    double vae_clip = 10.0;

    // [gail]
    std::size_t gail_iterations = 300;
    std::size_t demos_per_iter = 8;
    std::size_t disc_steps = 10;
    double disc_lr = 1e-4;
    double clip_max = 10.0;
    double max_kl = 0.01;
    double gamma = 0.995;
    double lambda = 0.97;
    std::size_t fvp_subsample = 1;
    std::vector<std::size_t> policy_hidden = {64, 32};
    std::vector<std::size_t> disc_hidden = {32, 32};
    std::vector<std::size_t> critic_hidden = {64, 32};
    bool standardize_disc_input = true;

    // [eval]
    std::uint64_t eval_seed = 1;
    std::size_t eval_rollouts = 1;
    double eval_tolerance = 0.1;
};

TrainConfig parse_config(const std::string& text);
TrainConfig load_config(const std::string& path);
std::string serialize_config(const TrainConfig& config);
void save_config(const std::string& path, const TrainConfig& config);

DatasetConfig dataset_config_of(const TrainConfig& config);
VaeSpecs vae_specs_of(const TrainConfig& config);
VaeTrainConfig vae_train_config_of(const TrainConfig& config);
GailConfig gail_config_of(const TrainConfig& config);

// Desk-scale default next to its full-scale counterpart (the sizes used for
// the original locomotion-scale experiments), for the scaling audit.
struct ScalePair {
    std::string name;
    std::vector<std::size_t> desk;
    std::vector<std::size_t> full;
};
std::vector<ScalePair> full_scale_reference_table();

}  // namespace imit
