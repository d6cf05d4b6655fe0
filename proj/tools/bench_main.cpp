// Benchmark for the batched-gradient kernel: the same per-trajectory model
// gradients run through the serial reference path and the OpenMP path, with
// wall times, speedup, and a bitwise cross-check of the reduced result.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>

#include "imit/core/parallel.hpp"
#include "imit/core/rng.hpp"
#include "imit/envs/dataset.hpp"
#include "imit/vae/vae.hpp"

using namespace imit;

namespace {

struct BenchResult {
    double seconds = 0.0;
    std::vector<double> reduced;
};

BenchResult run_mode(bool parallel, std::span<const Trajectory> demos,
                     const VaeSpecs& specs, const VaeParams& params, std::size_t reps) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> reduced;
    for (std::size_t rep = 0; rep < reps; ++rep) {
        std::vector<std::vector<double>> grads(demos.size());
        Rng rng(17);
        std::vector<Rng> noise;
        for (std::size_t i = 0; i < demos.size(); ++i)
            noise.push_back(rng.fork("bench-eps", rep * demos.size() + i));
        parallel_for(
            demos.size(),
            [&](std::size_t i) {
                Tape tape;
                BoundParams enc(tape, params.encoder);
                BoundParams act(tape, params.action_decoder);
                BoundParams sd(tape, params.state_decoder);
                Tensor eps(Shape::vec(specs.latent_dim()));
                for (double& v : eps.data) v = noise[i].normal();
                const VaeLossVars loss =
                    vae_loss_vars(tape, specs, enc, act, sd, demos[i], eps);
                std::vector<Var> wrt = enc.vars();
                for (const Var v : act.vars()) wrt.push_back(v);
                for (const Var v : sd.vars()) wrt.push_back(v);
                const std::vector<Tensor> g = tape.gradients(loss.total, wrt);
                for (const Tensor& t : g)
                    grads[i].insert(grads[i].end(), t.data.begin(), t.data.end());
            },
            parallel);
        reduced.assign(grads[0].size(), 0.0);
        for (const std::vector<double>& g : grads)
            for (std::size_t k = 0; k < g.size(); ++k) reduced[k] += g[k];
    }
    const auto t1 = std::chrono::steady_clock::now();
    BenchResult res;
    res.seconds = std::chrono::duration<double>(t1 - t0).count();
    res.reduced = std::move(reduced);
    return res;
}

}  // namespace

int main(int argc, char** argv) {
    std::size_t items = 16, reps = 3, horizon = 20;
    for (int i = 1; i + 1 < argc; i += 2) {
        if (std::strcmp(argv[i], "--items") == 0) items = std::strtoull(argv[i + 1], nullptr, 10);
        if (std::strcmp(argv[i], "--reps") == 0) reps = std::strtoull(argv[i + 1], nullptr, 10);
        if (std::strcmp(argv[i], "--horizon") == 0)
            horizon = std::strtoull(argv[i + 1], nullptr, 10);
    }

    DatasetConfig dcfg;
    dcfg.kind = EnvKind::kReacher;
    dcfg.reacher_train_targets = items;
    dcfg.reacher_rollouts = 1;
    dcfg.reacher_test_targets = 0;
    dcfg.horizon = horizon;
    dcfg.seed = 5;
    const Dataset data = generate_dataset(dcfg);

    const VaeSpecs specs = make_vae_specs(EnvKind::kReacher, 16, 4, {16, 16}, 8, 3, 2);
    Rng rng(11);
    const VaeParams params = init_vae_params(specs, rng);

    std::printf("batched trajectory-model gradients: %zu items x %zu reps, horizon %zu\n",
                data.train.size(), reps, horizon);
    std::printf("compiled with OpenMP: %s, workers: %zu\n",
                openmp_compiled() ? "yes" : "no", parallel_workers());

    const BenchResult serial = run_mode(false, data.train, specs, params, reps);
    const BenchResult parallel = run_mode(true, data.train, specs, params, reps);

    std::printf("serial reference : %8.3f s\n", serial.seconds);
    std::printf("openmp kernel    : %8.3f s\n", parallel.seconds);
    std::printf("speedup          : %8.2fx\n",
                parallel.seconds > 0.0 ? serial.seconds / parallel.seconds : 0.0);

    if (serial.reduced != parallel.reduced) {
        std::printf("FAIL: reduced gradients differ between modes\n");
        return 1;
    }
    std::printf("reduced gradients bitwise identical across modes\n");
    return 0;
}
