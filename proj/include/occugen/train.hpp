#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>
#include <vector>

#include "occugen/denoiser.hpp"
#include "occugen/diffusion.hpp"
#include "occugen/world.hpp"

namespace occugen {

struct TrainConfig {
    int batch_size = 16;
    int epochs = 20;
    int max_steps = 0; // 0 = epochs decide; otherwise caps total steps
    int warmup_steps = 500;
    double lr_min = 1e-6;
    double lr_max = 1e-4;
    int train_noise_steps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    uint64_t seed = 0;

    void validate() const {
        if (batch_size < 1 || epochs < 1 || warmup_steps < 0 || train_noise_steps < 1)
            throw std::invalid_argument("train config counts must be positive");
        if (!(lr_min > 0.0 && lr_min <= lr_max)) throw std::invalid_argument("require 0 < lr_min <= lr_max");
    }
};

struct LossPoint {
    int step = 0;
    double loss = 0.0;
    double lr = 0.0;
};

/// Linear warmup from lr_min to lr_max, then cosine decay back to lr_min.
inline double cosine_warmup_lr(int step, int total_steps, const TrainConfig& cfg) {
    if (cfg.warmup_steps > 0 && step < cfg.warmup_steps)
        return cfg.lr_min + (cfg.lr_max - cfg.lr_min) * double(step) / cfg.warmup_steps;
    const int decay_span = total_steps - cfg.warmup_steps;
    const double prog =
        decay_span > 0 ? std::min(1.0, double(step - cfg.warmup_steps) / decay_span) : 1.0;
    return cfg.lr_min + 0.5 * (cfg.lr_max - cfg.lr_min) * (1.0 + std::cos(3.14159265358979323846 * prog));
}

/// Noise-prediction training: per sample draw t uniform in [1,T] and a fresh
/// Gaussian field, corrupt the clean grid, and regress the injected noise
/// under squared error. Deterministic for a fixed config regardless of
/// max_threads. Returns the per-step loss curve.
inline std::vector<LossPoint> train(DenoiserModel& model, const std::vector<LocalGrid>& corpus,
                                    const TrainConfig& cfg, int max_threads = 1) {
    cfg.validate();
    if (corpus.empty()) throw std::invalid_argument("training corpus is empty");
    for (const LocalGrid& g : corpus)
        if (!g.same_shape(corpus.front())) throw std::invalid_argument("corpus grids must share shape");

    const int X = corpus.front().dim_x(), Y = corpus.front().dim_y(), Z = corpus.front().dim_z();
    const size_t n_vox = corpus.front().size();
    const NoiseSchedule schedule = linear_schedule(cfg.train_noise_steps, cfg.beta_start, cfg.beta_end);

    const int steps_per_epoch =
        static_cast<int>((corpus.size() + cfg.batch_size - 1) / cfg.batch_size);
    int total_steps = cfg.epochs * steps_per_epoch;
    if (cfg.max_steps > 0) total_steps = std::min(total_steps, cfg.max_steps);

    // Adam state.
    std::vector<float> m(model.param_count(), 0.0f), v(model.param_count(), 0.0f);
    const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;

    std::vector<size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);

    const int B = cfg.batch_size;
    std::vector<std::vector<float>> sample_grads(B);
    std::vector<double> sample_losses(B, 0.0);
    for (auto& gbuf : sample_grads) gbuf = model.make_grad_buffer();

    std::vector<LossPoint> curve;
    curve.reserve(total_steps);

    int cursor = 0;
    int epoch = -1;
    for (int step = 0; step < total_steps; ++step) {
        if (step % steps_per_epoch == 0) {
            ++epoch;
            std::mt19937_64 shuffler(Rng::derive(cfg.seed, 0x5348 + epoch));
            std::shuffle(order.begin(), order.end(), shuffler);
            cursor = 0;
        }

        std::vector<size_t> batch(B);
        for (int i = 0; i < B; ++i) batch[i] = order[(cursor + i) % order.size()];
        cursor = (cursor + B) % static_cast<int>(order.size());

        const auto run_sample = [&](int i) {
            Rng srng(Rng::derive(cfg.seed, 0xB000000ull + uint64_t(step) * B + i));
            const LocalGrid& x0 = corpus[batch[i]];
            const int t = srng.uniform_int(1, cfg.train_noise_steps);

            std::vector<float> eps(n_vox);
            for (float& e : eps) e = srng.normal_f();

            const float a = static_cast<float>(std::sqrt(schedule.alpha_bar(t)));
            const float bb = static_cast<float>(std::sqrt(1.0 - schedule.alpha_bar(t)));
            std::vector<float> xt(n_vox);
            for (size_t k = 0; k < n_vox; ++k)
                xt[k] = a * occupancy_to_signal(x0.values()[k]) + bb * eps[k];

            DenoiserModel::Workspace ws;
            model.forward(xt, X, Y, Z, t, ws);

            double loss = 0.0;
            std::vector<float> g_out(n_vox);
            const float inv_n = 1.0f / static_cast<float>(n_vox);
            for (size_t k = 0; k < n_vox; ++k) {
                const float diff = ws.out.v[k] - eps[k];
                loss += double(diff) * diff;
                g_out[k] = 2.0f * diff * inv_n;
            }
            sample_losses[i] = loss / double(n_vox);

            std::fill(sample_grads[i].begin(), sample_grads[i].end(), 0.0f);
            model.backward(ws, g_out, sample_grads[i]);
        };

        const int workers = std::max(1, std::min(max_threads, B));
        if (workers == 1) {
            for (int i = 0; i < B; ++i) run_sample(i);
        } else {
            std::atomic<int> next{0};
            std::vector<std::thread> pool;
            for (int w = 0; w < workers; ++w)
                pool.emplace_back([&]() {
                    for (int i = next.fetch_add(1); i < B; i = next.fetch_add(1)) run_sample(i);
                });
            for (auto& th : pool) th.join();
        }

        // Fixed-order reduction keeps results independent of thread count.
        const double lr = cosine_warmup_lr(step, total_steps, cfg);
        const float scale = 1.0f / B;
        const double bc1 = 1.0 - std::pow(beta1, step + 1);
        const double bc2 = 1.0 - std::pow(beta2, step + 1);
        auto& params = model.params();
        for (size_t k = 0; k < params.size(); ++k) {
            float grad = 0.0f;
            for (int i = 0; i < B; ++i) grad += sample_grads[i][k];
            grad *= scale;
            m[k] = static_cast<float>(beta1 * m[k] + (1.0 - beta1) * grad);
            v[k] = static_cast<float>(beta2 * v[k] + (1.0 - beta2) * double(grad) * grad);
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            params[k] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + adam_eps));
        }

        double batch_loss = 0.0;
        for (int i = 0; i < B; ++i) batch_loss += sample_losses[i];
        curve.push_back({step, batch_loss / B, lr});
    }
    return curve;
}

/// Pose augmentation for corpus building: xy offsets uniform in [-1,1] m and
/// yaw uniform in [0,2pi); offsets landing inside solid cells are resampled.
inline std::vector<Pose> augment_poses(const GroundTruthWorld& world, const Pose& base, int n,
                                       Rng& rng, int max_retries = 200) {
    std::vector<Pose> poses;
    poses.reserve(n);
    for (int i = 0; i < n; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < max_retries; ++attempt) {
            Pose p = base;
            p.x = base.x + rng.uniform(-1.0, 1.0);
            p.y = base.y + rng.uniform(-1.0, 1.0);
            p.yaw = rng.uniform(0.0, 6.283185307179586);
            const VoxelKey body =
                world_to_key({p.x, p.y, p.z + 0.5 * world.resolution()}, world.resolution());
            if (world.in_bounds(body) && world.material(body) == Material::kFree) {
                poses.push_back(p);
                placed = true;
                break;
            }
        }
        if (!placed) throw std::runtime_error("augment_poses: no free pose found after max retries");
    }
    return poses;
}

/// Builds the training corpus: complete (fully known) local grids cut from
/// ground truth at augmented poses. Occupied = 1, free = 0.
inline std::vector<LocalGrid> build_corpus(const std::vector<ScenarioWorld>& worlds,
                                           int poses_per_world, int augment_per_pose,
                                           const GridSpec& spec, Rng& rng) {
    spec.validate();
    std::vector<LocalGrid> corpus;
    corpus.reserve(static_cast<size_t>(worlds.size()) * poses_per_world * augment_per_pose);
    for (const ScenarioWorld& sw : worlds) {
        if (sw.start_poses.empty()) throw std::invalid_argument("world has no free poses for corpus");
        for (int pi = 0; pi < poses_per_world; ++pi) {
            const Pose& base = sw.start_poses[pi % sw.start_poses.size()];
            for (const Pose& aug : augment_poses(sw.world, base, augment_per_pose, rng)) {
                corpus.push_back(world_submap(sw.world, spec.window_center(aug), spec.dx, spec.dy,
                                              spec.dz, spec.resolution));
            }
        }
    }
    return corpus;
}

} // namespace occugen
