#include "imit/cli/run.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "imit/cli/checkpoint.hpp"
#include "imit/cli/config.hpp"
#include "imit/cli/report.hpp"
#include "imit/core/error.hpp"
#include "imit/core/hash.hpp"
#include "imit/core/param.hpp"
#include "imit/core/rng.hpp"
#include "imit/core/tape.hpp"
#include "imit/envs/dataset.hpp"
#include "imit/envs/env.hpp"
#include "imit/envs/trajectory.hpp"
#include "imit/eval/metrics.hpp"
#include "imit/gail/gail.hpp"
#include "imit/theory/discrete_gan.hpp"
#include "imit/trpo/trpo.hpp"
#include "imit/vae/vae.hpp"

namespace imit {
namespace {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

struct Common {
    std::string config_path;
    std::string out = ".";
    std::uint64_t seed = 0;
    CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config_path, "experiment configuration file");
    c.seed_opt = cmd->add_option("--seed", c.seed, "override the [run] seed");
    cmd->add_option("--out", c.out, "output directory (default: current)");
}

TrainConfig effective_config(const Common& c) {
    TrainConfig cfg =
        c.config_path.empty() ? TrainConfig{} : load_config(c.config_path);
    if (c.seed_opt != nullptr && c.seed_opt->count() > 0) cfg.seed = c.seed;
    return cfg;
}

// Records every file the command read or wrote, with content hashes, so a
// finished output directory is self-describing and re-runs can be diffed.
class Manifest {
  public:
    Manifest(std::string command, std::string dir, std::uint64_t seed)
        : command_(std::move(command)), dir_(std::move(dir)), seed_(seed) {}

    void input(const std::string& path) {
        rows_.push_back("input " + path + " " + hex64(hash_file(path)));
    }
    void output(const std::string& name) {
        rows_.push_back("output " + name + " " + hex64(hash_file(dir_ + "/" + name)));
    }
    void write() const {
        const std::string path = dir_ + "/run_manifest.txt";
        std::ofstream f(path, std::ios::binary);
        if (!f.good()) throw UsageError("cannot write " + path);
        f << "command " << command_ << "\n";
        f << "seed " << seed_ << "\n";
        for (const std::string& row : rows_) f << row << "\n";
    }

  private:
    std::string command_;
    std::string dir_;
    std::uint64_t seed_;
    std::vector<std::string> rows_;
};

void echo_config(const TrainConfig& cfg, const std::string& dir, Manifest& m) {
    save_config(dir + "/config.ini", cfg);
    m.output("config.ini");
}

std::vector<Trajectory> load_demos(const std::string& path, const TrainConfig& cfg) {
    std::vector<Trajectory> demos = load_trajectories(path);
    if (demos.empty()) throw UsageError("dataset " + path + " is empty");
    for (const Trajectory& tr : demos) {
        if (kind_from_name(tr.meta.kind) != cfg.kind) {
            throw UsageError("dataset " + path + " holds " + tr.meta.kind +
                             " trajectories but the config selects " +
                             kind_name(cfg.kind));
        }
    }
    return demos;
}

std::string join_sizes(const std::vector<std::size_t>& sizes) {
    std::string s;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(sizes[i]);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Checkpoint metadata: the architecture fields a checkpoint was trained with,
// compared against the active config on load so mismatched nets fail by name
// instead of by shape explosion.
// ---------------------------------------------------------------------------

std::map<std::string, std::string> vae_spec_meta(const TrainConfig& cfg) {
    return {{"kind", kind_name(cfg.kind)},
            {"encoder_width", std::to_string(cfg.encoder_width)},
            {"latent_dim", std::to_string(cfg.latent_dim)},
            {"action_hidden", join_sizes(cfg.action_hidden)},
            {"state_channels", std::to_string(cfg.state_channels)},
            {"state_layers", std::to_string(cfg.state_layers)},
            {"mixture_k", std::to_string(cfg.mixture_k)}};
}

std::map<std::string, std::string> policy_spec_meta(const TrainConfig& cfg,
                                                    bool unconditional) {
    return {{"kind", kind_name(cfg.kind)},
            {"policy_hidden", join_sizes(cfg.policy_hidden)},
            {"latent_dim",
             std::to_string(unconditional ? std::size_t{0} : cfg.latent_dim)},
            {"unconditional", unconditional ? "1" : "0"}};
}

void check_meta(const std::map<std::string, std::string>& meta,
                const std::map<std::string, std::string>& expected,
                const std::string& path) {
    for (const auto& [key, want] : expected) {
        const auto it = meta.find(key);
        if (it == meta.end())
            throw UsageError("checkpoint " + path + ": missing field " + key);
        if (it->second != want)
            throw UsageError("checkpoint " + path + ": field " + key + " is '" +
                             it->second + "' but the config expects '" + want + "'");
    }
}

// The three VAE parameter groups travel as one checkpoint; entry names keep
// their module prefixes (enc./act./sd.) so the merge is order-preserving
// concatenation and the split routes on the first name component.
ParamVector merge_vae_params(const VaeParams& p) {
    ParamVector merged;
    for (const ParamVector* src : {&p.encoder, &p.action_decoder, &p.state_decoder}) {
        for (std::size_t i = 0; i < src->entry_count(); ++i) {
            const ParamVector::Entry& e = src->entry(i);
            merged.add(e.name, src->get(e.name));
        }
    }
    return merged;
}

VaeParams split_vae_params(const ParamVector& merged, const std::string& path) {
    VaeParams p;
    for (std::size_t i = 0; i < merged.entry_count(); ++i) {
        const ParamVector::Entry& e = merged.entry(i);
        const std::string head = e.name.substr(0, e.name.find('.'));
        ParamVector* dst = head == "enc"   ? &p.encoder
                           : head == "act" ? &p.action_decoder
                           : head == "sd"  ? &p.state_decoder
                                           : nullptr;
        if (dst == nullptr)
            throw UsageError("checkpoint " + path + ": unexpected parameter " + e.name);
        dst->add(e.name, merged.get(e.name));
    }
    return p;
}

struct LoadedVae {
    VaeSpecs specs;
    VaeParams params;
};

LoadedVae load_vae(const std::string& path, const TrainConfig& cfg) {
    const Checkpoint ck = load_checkpoint(path);
    check_meta(ck.meta, vae_spec_meta(cfg), path);
    return LoadedVae{vae_specs_of(cfg), split_vae_params(ck.params, path)};
}

double final_x(const Trajectory& t) { return t.states.back().data[0]; }
double final_y(const Trajectory& t) { return t.states.back().data[1]; }

double point_segment_distance(double px, double py, double ax, double ay, double bx,
                              double by) {
    const double vx = bx - ax;
    const double vy = by - ay;
    const double vv = vx * vx + vy * vy;
    double t = vv > 0.0 ? ((px - ax) * vx + (py - ay) * vy) / vv : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(px - (ax + t * vx), py - (ay + t * vy));
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f.good()) throw UsageError("cannot write " + path);
    f << text;
}

// ---------------------------------------------------------------------------
// gen-demos
// ---------------------------------------------------------------------------

int cmd_gen_demos(const Common& c) {
    const TrainConfig cfg = effective_config(c);
    fs::create_directories(c.out);
    const Dataset ds = generate_dataset(dataset_config_of(cfg));
    save_trajectories(c.out + "/train.trajs", ds.train);
    save_trajectories(c.out + "/test.trajs", ds.test);

    Manifest m("gen-demos", c.out, cfg.seed);
    if (!c.config_path.empty()) m.input(c.config_path);
    m.output("train.trajs");
    m.output("test.trajs");
    echo_config(cfg, c.out, m);
    m.write();
    std::cout << "gen-demos: " << ds.train.size() << " train / " << ds.test.size()
              << " test trajectories\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train-vae
// ---------------------------------------------------------------------------

int cmd_train_vae(const Common& c, const std::string& data) {
    const TrainConfig cfg = effective_config(c);
    fs::create_directories(c.out);
    const std::vector<Trajectory> demos = load_demos(data, cfg);

    const VaeSpecs specs = vae_specs_of(cfg);
    const VaeTrainConfig tc = vae_train_config_of(cfg);
    Rng rng(cfg.seed);
    const VaeTrainResult res = train_vae(demos, specs, tc, rng);

    std::map<std::string, std::string> meta = vae_spec_meta(cfg);
    meta["seed"] = std::to_string(cfg.seed);
    meta["epochs"] = std::to_string(tc.epochs);
    meta["final_loss"] =
        format_real(res.epoch_loss.empty() ? 0.0 : res.epoch_loss.back());
    save_checkpoint(c.out + "/vae.ckpt", merge_vae_params(res.params), meta);

    std::vector<std::vector<double>> rows;
    rows.reserve(res.epoch_loss.size());
    for (std::size_t i = 0; i < res.epoch_loss.size(); ++i)
        rows.push_back({static_cast<double>(i + 1), res.epoch_loss[i]});
    write_csv(c.out + "/vae_metrics.csv", "epoch,loss", rows);

    Manifest m("train-vae", c.out, cfg.seed);
    if (!c.config_path.empty()) m.input(c.config_path);
    m.input(data);
    m.output("vae.ckpt");
    m.output("vae.ckpt.f64");
    m.output("vae_metrics.csv");
    echo_config(cfg, c.out, m);
    m.write();
    std::cout << "train-vae: " << tc.epochs << " epochs, final loss "
              << format_real(res.epoch_loss.empty() ? 0.0 : res.epoch_loss.back())
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train-gail
// ---------------------------------------------------------------------------

int cmd_train_gail(const Common& c, const std::string& data,
                   const std::string& vae_path, bool unconditional) {
    const TrainConfig cfg = effective_config(c);
    fs::create_directories(c.out);
    const std::vector<Trajectory> demos = load_demos(data, cfg);

    const GailConfig g = gail_config_of(cfg);
    Rng rng(cfg.seed);
    GailResult res;
    if (unconditional) {
        res = unconditional_gail_train(demos, g, rng);
    } else {
        if (vae_path.empty())
            throw UsageError("train-gail requires --vae unless --unconditional is set");
        const LoadedVae vae = load_vae(vae_path, cfg);
        res = diverse_gail_train(vae.specs, vae.params, demos, g, rng);
    }

    std::map<std::string, std::string> pmeta = policy_spec_meta(cfg, unconditional);
    pmeta["seed"] = std::to_string(cfg.seed);
    save_checkpoint(c.out + "/policy.ckpt", res.policy, pmeta);

    ParamVector disc = res.disc;
    disc.add("standardize.shift", res.disc_specs.shift);
    disc.add("standardize.inv_scale", res.disc_specs.inv_scale);
    const std::map<std::string, std::string> dmeta = {
        {"kind", kind_name(cfg.kind)},
        {"disc_hidden", join_sizes(cfg.disc_hidden)},
        {"latent_dim",
         std::to_string(unconditional ? std::size_t{0} : cfg.latent_dim)},
        {"seed", std::to_string(cfg.seed)}};
    save_checkpoint(c.out + "/disc.ckpt", disc, dmeta);

    const bool walker = cfg.kind == EnvKind::kWalker;
    const std::string header =
        std::string("iteration,mean_reward,disc_loss,policy_kl_step,") +
        (walker ? "mean_speed_diff" : "mean_endpoint_err");
    std::vector<std::vector<double>> rows;
    rows.reserve(res.metrics.size());
    for (const GailIterRow& r : res.metrics)
        rows.push_back({static_cast<double>(r.iteration), r.mean_reward, r.disc_loss,
                        r.policy_kl_step, r.task_metric});
    write_csv(c.out + "/gail_metrics.csv", header, rows);

    Manifest m("train-gail", c.out, cfg.seed);
    if (!c.config_path.empty()) m.input(c.config_path);
    m.input(data);
    if (!unconditional) {
        m.input(vae_path);
        m.input(vae_path + ".f64");
    }
    m.output("policy.ckpt");
    m.output("policy.ckpt.f64");
    m.output("disc.ckpt");
    m.output("disc.ckpt.f64");
    m.output("gail_metrics.csv");

    if (!unconditional) {
        std::vector<std::vector<double>> zrows;
        for (std::size_t it = 0; it < res.sampled_z.size(); ++it)
            for (std::size_t j = 0; j < res.sampled_z[it].size(); ++j)
                for (std::size_t k = 0; k < res.sampled_z[it][j].data.size(); ++k)
                    zrows.push_back({static_cast<double>(it), static_cast<double>(j),
                                     static_cast<double>(k),
                                     res.sampled_z[it][j].data[k]});
        write_csv(c.out + "/embeddings.csv", "iteration,slot,component,value", zrows);
        m.output("embeddings.csv");
    }
    echo_config(cfg, c.out, m);
    m.write();
    std::cout << "train-gail: " << res.metrics.size() << " iterations ("
              << (unconditional ? "unconditional" : "embedding-conditioned") << ")\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

int cmd_eval(const Common& c, const std::string& data, const std::string& vae_path,
             const std::string& policy_path, bool unconditional, bool stochastic) {
    const TrainConfig cfg = effective_config(c);
    fs::create_directories(c.out);
    const std::vector<Trajectory> demos = load_demos(data, cfg);
    if (cfg.eval_rollouts == 0) throw UsageError("eval_rollouts must be >= 1");

    const bool with_policy = !policy_path.empty();
    if (unconditional && !with_policy)
        throw UsageError("--unconditional applies to --policy evaluation only");
    const bool need_vae = !with_policy || !unconditional;
    if (need_vae && vae_path.empty())
        throw UsageError("eval requires --vae (except for an unconditional policy)");

    LoadedVae vae;
    if (need_vae) vae = load_vae(vae_path, cfg);

    PolicySpecs pspecs;
    ParamVector theta;
    if (with_policy) {
        const Checkpoint pc = load_checkpoint(policy_path);
        check_meta(pc.meta, policy_spec_meta(cfg, unconditional), policy_path);
        const std::size_t latent = unconditional ? 0 : cfg.latent_dim;
        pspecs = make_policy_specs(obs_dim(cfg.kind), action_dim(cfg.kind), latent,
                                   cfg.policy_hidden);
        theta = pc.params;
    }
    const BaseMeanFn base =
        (with_policy && !unconditional)
            ? BaseMeanFn([&](const Tensor& obs, const Tensor& z) {
                  return action_mean_forward(vae.specs, vae.params.action_decoder, obs,
                                             z);
              })
            : BaseMeanFn{};

    const bool walker = cfg.kind == EnvKind::kWalker;
    const Rng eval_root(cfg.eval_seed);
    const std::size_t R = cfg.eval_rollouts;

    std::vector<EvalRecord> records;
    std::vector<Trajectory> imitations;
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < demos.size(); ++i) {
        const Trajectory& demo = demos[i];
        const EnvParams env = env_params_from_meta(demo.meta);
        Tensor z(Shape::vec(0));
        if (!with_policy || !unconditional) {
            Rng er = eval_root.fork("eval-embed", i);
            z = encode(vae.specs, vae.params, demo, er).mean;
        }
        for (std::size_t r = 0; r < R; ++r) {
            Rng rr = eval_root.fork("eval-rollout", i * R + r);
            Trajectory traj;
            if (with_policy) {
                const Policy pol = [&](const Tensor& full, std::size_t) {
                    const Tensor obs = observe(cfg.kind, full);
                    if (stochastic)
                        return conditional_policy_sample(pspecs, theta, base, obs, z, rr)
                            .first;
                    return policy_forward(pspecs, theta, base, obs, z).mean;
                };
                traj = rollout(env, env_initial(env), pol, demo.horizon());
            } else {
                traj = imitate(vae.specs, vae.params, env, z, env_initial(env),
                               demo.horizon(), rr, !stochastic);
            }
            const double metric =
                walker ? speed_diff(demo, traj) : endpoint_error(demo, traj);
            EvalRecord rec;
            rec.id = records.size();
            rec.task = demo.meta.task.empty() ? 0.0 : demo.meta.task[0];
            rec.metric = metric;
            records.push_back(rec);
            rows.push_back({static_cast<double>(rec.id), rec.task, rec.metric});
            imitations.push_back(std::move(traj));
        }
    }

    const EvalReport report = make_eval_report(
        walker ? "speed_diff" : "endpoint_error", cfg.eval_tolerance, records);
    std::string text = format_eval_report(report);
    if (walker)
        text += "mode_coverage: " + format_real(mode_coverage(imitations)) + "\n";

    write_csv(c.out + "/eval_records.csv", "id,task,metric", rows);
    write_text(c.out + "/eval_report.txt", text);

    Manifest m("eval", c.out, cfg.seed);
    if (!c.config_path.empty()) m.input(c.config_path);
    m.input(data);
    if (need_vae) {
        m.input(vae_path);
        m.input(vae_path + ".f64");
    }
    if (with_policy) {
        m.input(policy_path);
        m.input(policy_path + ".f64");
    }
    m.output("eval_records.csv");
    m.output("eval_report.txt");
    echo_config(cfg, c.out, m);
    m.write();
    std::cout << text;
    return 0;
}

// ---------------------------------------------------------------------------
// interpolate
// ---------------------------------------------------------------------------

int cmd_interpolate(const Common& c, const std::string& data,
                    const std::string& vae_path, std::size_t n_pairs,
                    double min_separation) {
    const TrainConfig cfg = effective_config(c);
    fs::create_directories(c.out);
    if (cfg.kind != EnvKind::kReacher)
        throw UsageError("interpolate is defined for reacher trajectories only");
    const std::vector<Trajectory> demos = load_demos(data, cfg);
    const LoadedVae vae = load_vae(vae_path, cfg);

    const Rng eval_root(cfg.eval_seed);
    std::vector<Tensor> zs(demos.size(), Tensor(Shape::vec(0)));
    for (std::size_t i = 0; i < demos.size(); ++i) {
        Rng er = eval_root.fork("interp-embed", i);
        zs[i] = encode(vae.specs, vae.params, demos[i], er).mean;
    }

    // Pairs whose demonstrated endpoints are separated enough that deviation
    // relative to the connecting segment is well-conditioned.
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < demos.size() && pairs.size() < n_pairs; ++i)
        for (std::size_t j = i + 1; j < demos.size() && pairs.size() < n_pairs; ++j)
            if (std::hypot(final_x(demos[i]) - final_x(demos[j]),
                           final_y(demos[i]) - final_y(demos[j])) >= min_separation)
                pairs.emplace_back(i, j);
    if (pairs.empty())
        throw UsageError("interpolate: no demo pair with endpoint separation >= " +
                         format_real(min_separation));

    const std::vector<double> alphas = {0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<std::vector<double>> rows;
    std::size_t pairs_within = 0;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const auto [i, j] = pairs[p];
        const EnvParams env = env_params_from_meta(demos[i].meta);
        const double ax = final_x(demos[i]), ay = final_y(demos[i]);
        const double bx = final_x(demos[j]), by = final_y(demos[j]);
        const double seg_len = std::hypot(bx - ax, by - ay);
        const std::vector<Tensor> zgrid = interpolate_embeddings(zs[i], zs[j], alphas);
        Rng unused = eval_root.fork("interp-roll", p);
        double worst = 0.0;
        for (std::size_t k = 0; k < alphas.size(); ++k) {
            const Trajectory traj =
                imitate(vae.specs, vae.params, env, zgrid[k], env_initial(env),
                        demos[i].horizon(), unused, true);
            const double ex = final_x(traj), ey = final_y(traj);
            const double dev =
                point_segment_distance(ex, ey, ax, ay, bx, by) / seg_len;
            worst = std::max(worst, dev);
            rows.push_back({static_cast<double>(p), static_cast<double>(i),
                            static_cast<double>(j), alphas[k], ex, ey, dev});
        }
        if (worst <= 0.25) ++pairs_within;
    }
    write_csv(c.out + "/interp_records.csv",
              "pair,demo_a,demo_b,alpha,endpoint_x,endpoint_y,segment_deviation",
              rows);

    Manifest m("interpolate", c.out, cfg.seed);
    if (!c.config_path.empty()) m.input(c.config_path);
    m.input(data);
    m.input(vae_path);
    m.input(vae_path + ".f64");
    m.output("interp_records.csv");
    echo_config(cfg, c.out, m);
    m.write();
    std::cout << "interpolate: " << pairs.size() << " pairs, " << pairs_within
              << " within 25% of the demonstrated segment\n";
    return 0;
}

// ---------------------------------------------------------------------------
// blend
// ---------------------------------------------------------------------------

int cmd_blend(const Common& c, const std::string& data, const std::string& vae_path,
              std::size_t demo_a, std::size_t demo_b, std::size_t switch_t,
              const CLI::Option* switch_opt, std::size_t window) {
    const TrainConfig cfg = effective_config(c);
    fs::create_directories(c.out);
    const std::vector<Trajectory> demos = load_demos(data, cfg);
    if (demo_a >= demos.size() || demo_b >= demos.size())
        throw UsageError("blend: demo index out of range (dataset has " +
                         std::to_string(demos.size()) + " trajectories)");
    const LoadedVae vae = load_vae(vae_path, cfg);

    const std::size_t T = demos[demo_a].horizon();
    if (switch_opt == nullptr || switch_opt->count() == 0) switch_t = T / 2;
    if (switch_t + window > T)
        throw UsageError("blend: switch point " + std::to_string(switch_t) +
                         " plus window " + std::to_string(window) +
                         " exceeds horizon " + std::to_string(T));

    const Rng eval_root(cfg.eval_seed);
    Rng ra = eval_root.fork("blend-embed", 0);
    Rng rb = eval_root.fork("blend-embed", 1);
    const Tensor za = encode(vae.specs, vae.params, demos[demo_a], ra).mean;
    const Tensor zb = encode(vae.specs, vae.params, demos[demo_b], rb).mean;

    const EnvParams env = env_params_from_meta(demos[demo_a].meta);
    Rng rr = eval_root.fork("blend-rollout");
    const Trajectory traj =
        blend_rollout(vae.specs, vae.params, env, za, zb, switch_t, window, T, rr);
    save_trajectories(c.out + "/blended.trajs", {traj});

    Manifest m("blend", c.out, cfg.seed);
    if (!c.config_path.empty()) m.input(c.config_path);
    m.input(data);
    m.input(vae_path);
    m.input(vae_path + ".f64");
    m.output("blended.trajs");
    echo_config(cfg, c.out, m);
    m.write();
    std::cout << "blend: demo " << demo_a << " -> demo " << demo_b << ", switch at "
              << switch_t << " over " << window << " steps\n";
    return 0;
}

// ---------------------------------------------------------------------------
// verify-theorem
// ---------------------------------------------------------------------------

int cmd_verify_theorem(const Common& c) {
    const TrainConfig cfg = effective_config(c);
    fs::create_directories(c.out);

    Rng rng = Rng(cfg.seed).fork("theorem");
    const double tol = 1e-10;
    const std::size_t count = 100;
    bool ok = true;
    double worst = 0.0;
    std::vector<std::vector<double>> rows;
    rows.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const DiscreteGanInstance inst = random_instance(rng);
        const double r1 =
            std::abs(v_mixed(inst, true_posterior(inst)) - v_conditional(inst));
        DiscreteGanInstance opt = inst;
        opt.d = optimal_discriminator(inst);
        const double r2 = std::abs(v_conditional(opt) - c_of_g(inst));
        rows.push_back({static_cast<double>(i), r1, r2});
        worst = std::max({worst, r1, r2});
        ok = ok && r1 < tol && r2 < tol;
    }
    write_csv(c.out + "/theorem_residuals.csv",
              "instance,posterior_identity_residual,optimal_cost_residual", rows);

    Manifest m("verify-theorem", c.out, cfg.seed);
    if (!c.config_path.empty()) m.input(c.config_path);
    m.output("theorem_residuals.csv");
    echo_config(cfg, c.out, m);
    m.write();
    std::cout << "verify-theorem: " << count << " instances, worst residual "
              << format_real(worst) << (ok ? " (all < 1e-10)" : " (FAILED)") << "\n";
    return ok ? 0 : 2;
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

int cmd_gradcheck(const Common& c) {
    const TrainConfig cfg = effective_config(c);
    fs::create_directories(c.out);
    Rng root = Rng(cfg.seed).fork("gradcheck");

    struct Row {
        std::string name;
        double err;
    };
    std::vector<Row> results;
    const double tol = 1e-4;

    // Short expert trajectory at reduced net sizes: finite differences over
    // every coordinate stay fast while touching all three loss parts.
    DatasetConfig dc;
    dc.kind = EnvKind::kReacher;
    dc.reacher_train_targets = 1;
    dc.reacher_rollouts = 1;
    dc.reacher_test_targets = 0;
    dc.horizon = 3;
    dc.seed = 7;
    const Trajectory traj = generate_dataset(dc).train[0];

    const VaeSpecs specs = make_vae_specs(EnvKind::kReacher, 3, 2, {4}, 3, 2, 3);
    Rng vr = root.fork("vae");
    VaeParams params = init_vae_params(specs, vr);
    Tensor eps(Shape::vec(2));
    eps.data = {0.4, -0.7};
    const char* group_names[3] = {"vae_encoder", "vae_action_decoder",
                                  "vae_state_decoder"};
    for (int group = 0; group < 3; ++group) {
        const LossFn f = [&, group](Tape& t, const BoundParams& bp) {
            BoundParams enc_f(t, params.encoder, false);
            BoundParams act_f(t, params.action_decoder, false);
            BoundParams sd_f(t, params.state_decoder, false);
            const BoundParams& enc = group == 0 ? bp : enc_f;
            const BoundParams& act = group == 1 ? bp : act_f;
            const BoundParams& sd = group == 2 ? bp : sd_f;
            return vae_loss_vars(t, specs, enc, act, sd, traj, eps).total;
        };
        const ParamVector& pv = group == 0   ? params.encoder
                                : group == 1 ? params.action_decoder
                                             : params.state_decoder;
        results.push_back({group_names[group], check_gradient(f, pv, 1e-5)});
    }

    // Discriminator loss over one expert and one policy group.
    {
        const std::size_t od = obs_dim(EnvKind::kReacher);
        const std::size_t ad = action_dim(EnvKind::kReacher);
        const std::size_t hidden[] = {6};
        const DiscriminatorSpecs ds = make_discriminator_specs(od, ad, 2, hidden);
        Rng dr = root.fork("disc");
        const ParamVector psi = init_discriminator(ds, dr);
        auto random_vec = [&dr](std::size_t n) {
            Tensor v(Shape::vec(n));
            for (double& x : v.data) x = dr.normal();
            return v;
        };
        auto make_group = [&](std::size_t steps) {
            DiscGroup g;
            g.z = random_vec(2);
            for (std::size_t t = 0; t < steps; ++t) {
                g.obs.push_back(random_vec(od));
                g.act.push_back(random_vec(ad));
            }
            return g;
        };
        const std::vector<DiscGroup> expert = {make_group(3)};
        const std::vector<DiscGroup> policy = {make_group(3)};
        const LossFn f = [&](Tape&, const BoundParams& bp) {
            return discriminator_loss_vars(ds, bp, expert, policy);
        };
        results.push_back({"discriminator_loss", check_gradient(f, psi, 1e-5)});
    }

    // Trust-region surrogate and mean KL with a direct Gaussian head; the
    // behavior stats differ from theta so both objectives have live gradients.
    {
        Rng tr = root.fork("trpo");
        auto random_vec = [&tr](std::size_t n, double scale) {
            Tensor v(Shape::vec(n));
            for (double& x : v.data) x = scale * tr.normal();
            return v;
        };
        ParamVector theta;
        theta.add("mean", random_vec(2, 0.5));
        theta.add("log_std", random_vec(2, 0.3));
        const PolicyHeadFn head = [](const BoundParams& bp, const StepSample&) {
            return PolicyHead{bp.at("mean"), bp.at("log_std")};
        };
        RolloutBatch batch;
        for (std::size_t t = 0; t < 5; ++t) {
            StepSample s;
            s.obs = Tensor::vec({1.0});
            s.z = Tensor(Shape::vec(0));
            s.action = random_vec(2, 1.0);
            s.mean_old = random_vec(2, 0.5);
            s.log_std_old = random_vec(2, 0.3);
            s.log_prob_old = gaussian_log_prob(s.action, s.mean_old, s.log_std_old);
            s.advantage = tr.normal();
            batch.steps.push_back(std::move(s));
        }
        batch.episode_len = {5};
        const LossFn f_sur = [&](Tape&, const BoundParams& bp) {
            return surrogate_and_kl_vars(bp, head, batch).surrogate;
        };
        const LossFn f_kl = [&](Tape&, const BoundParams& bp) {
            return surrogate_and_kl_vars(bp, head, batch).mean_kl;
        };
        results.push_back({"trpo_surrogate", check_gradient(f_sur, theta, 1e-5)});
        results.push_back({"trpo_mean_kl", check_gradient(f_kl, theta, 1e-5)});
    }

    bool ok = true;
    std::string csv = "check,max_rel_err,tolerance,pass\n";
    for (const Row& r : results) {
        const bool pass = r.err <= tol;
        ok = ok && pass;
        csv += r.name + "," + format_real(r.err) + "," + format_real(tol) + "," +
               (pass ? "1" : "0") + "\n";
        std::cout << "gradcheck " << r.name << ": max relative error "
                  << format_real(r.err) << (pass ? "" : " (FAILED)") << "\n";
    }
    write_text(c.out + "/gradcheck.csv", csv);

    Manifest m("gradcheck", c.out, cfg.seed);
    if (!c.config_path.empty()) m.input(c.config_path);
    m.output("gradcheck.csv");
    echo_config(cfg, c.out, m);
    m.write();
    return ok ? 0 : 2;
}

}  // namespace

int run_command(int argc, const char* const* argv) {
    CLI::App app{"trajectory-embedding imitation learning toolkit"};
    app.require_subcommand(1);

    Common gen_c;
    CLI::App* gen = app.add_subcommand("gen-demos", "generate demonstration corpus");
    add_common(gen, gen_c);

    Common tv_c;
    std::string tv_data;
    CLI::App* tv = app.add_subcommand("train-vae", "train the trajectory model");
    add_common(tv, tv_c);
    tv->add_option("--data", tv_data, "training trajectories")->required();

    Common tg_c;
    std::string tg_data, tg_vae;
    bool tg_uncond = false;
    CLI::App* tg = app.add_subcommand("train-gail", "adversarial fine-tuning");
    add_common(tg, tg_c);
    tg->add_option("--data", tg_data, "training trajectories")->required();
    tg->add_option("--vae", tg_vae, "trajectory-model checkpoint");
    tg->add_flag("--unconditional", tg_uncond,
                 "train the baseline without embedding conditioning");

    Common ev_c;
    std::string ev_data, ev_vae, ev_policy;
    bool ev_uncond = false, ev_stochastic = false;
    CLI::App* ev = app.add_subcommand("eval", "imitation metrics on a dataset");
    add_common(ev, ev_c);
    ev->add_option("--data", ev_data, "evaluation trajectories")->required();
    ev->add_option("--vae", ev_vae, "trajectory-model checkpoint");
    ev->add_option("--policy", ev_policy, "fine-tuned policy checkpoint");
    ev->add_flag("--unconditional", ev_uncond, "the policy was trained unconditioned");
    ev->add_flag("--stochastic", ev_stochastic,
                 "sample actions instead of using the mean");

    Common in_c;
    std::string in_data, in_vae;
    std::size_t in_pairs = 10;
    double in_minsep = 0.5;
    CLI::App* in = app.add_subcommand("interpolate", "latent-space interpolation sweep");
    add_common(in, in_c);
    in->add_option("--data", in_data, "held-out trajectories")->required();
    in->add_option("--vae", in_vae, "trajectory-model checkpoint")->required();
    in->add_option("--pairs", in_pairs, "number of demo pairs (default 10)");
    in->add_option("--min-separation", in_minsep,
                   "minimum demonstrated endpoint separation (default 0.5)");

    Common bl_c;
    std::string bl_data, bl_vae;
    std::size_t bl_a = 0, bl_b = 1, bl_switch = 0, bl_window = 20;
    CLI::App* bl = app.add_subcommand("blend", "roll out a mid-episode embedding blend");
    add_common(bl, bl_c);
    bl->add_option("--data", bl_data, "trajectories to pick the two demos from")
        ->required();
    bl->add_option("--vae", bl_vae, "trajectory-model checkpoint")->required();
    bl->add_option("--demo-a", bl_a, "index of the first demo (default 0)");
    bl->add_option("--demo-b", bl_b, "index of the second demo (default 1)");
    CLI::Option* bl_switch_opt =
        bl->add_option("--switch-t", bl_switch, "blend start step (default T/2)");
    bl->add_option("--window", bl_window, "blend ramp length (default 20)");

    Common th_c;
    CLI::App* th = app.add_subcommand(
        "verify-theorem", "check the discrete-space value identities to 1e-10");
    add_common(th, th_c);

    Common gc_c;
    CLI::App* gc = app.add_subcommand(
        "gradcheck", "finite-difference checks of every training gradient");
    add_common(gc, gc_c);

    int rc = 0;
    gen->callback([&] { rc = cmd_gen_demos(gen_c); });
    tv->callback([&] { rc = cmd_train_vae(tv_c, tv_data); });
    tg->callback([&] { rc = cmd_train_gail(tg_c, tg_data, tg_vae, tg_uncond); });
    ev->callback(
        [&] { rc = cmd_eval(ev_c, ev_data, ev_vae, ev_policy, ev_uncond, ev_stochastic); });
    in->callback([&] { rc = cmd_interpolate(in_c, in_data, in_vae, in_pairs, in_minsep); });
    bl->callback([&] {
        rc = cmd_blend(bl_c, bl_data, bl_vae, bl_a, bl_b, bl_switch, bl_switch_opt,
                       bl_window);
    });
    th->callback([&] { rc = cmd_verify_theorem(th_c); });
    gc->callback([&] { rc = cmd_gradcheck(gc_c); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 2;
    }
    return rc;
}

}  // namespace imit
