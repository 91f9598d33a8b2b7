#pragma once

#include <atomic>
#include <cmath>
#include <thread>
#include <vector>

#include "occugen/grid.hpp"
#include "occugen/rng.hpp"
#include "occugen/schedule.hpp"

namespace occugen {

// Diffusion runs on values rescaled from occupancy [0,1] to [-1,1]; unknown
// (0.5) maps to 0.

inline float occupancy_to_signal(float v) { return 2.0f * v - 1.0f; }
inline float signal_to_occupancy(float s) { return std::clamp(0.5f * (s + 1.0f), 0.0f, 1.0f); }

inline void fill_standard_normal(std::vector<float>& field, Rng& rng) {
    for (float& v : field) v = rng.normal_f();
}

/// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps, elementwise. The grid values
/// are expected in signal space ([-1,1] for clean maps).
inline LocalGrid forward_noise(const LocalGrid& x0, int t, const std::vector<float>& epsilon,
                               const NoiseSchedule& schedule) {
    if (t < 0 || t > schedule.train_steps())
        throw std::invalid_argument("forward_noise t out of range");
    if (epsilon.size() != x0.size())
        throw std::invalid_argument("forward_noise epsilon shape mismatch");
    const float a = static_cast<float>(std::sqrt(schedule.alpha_bar(t)));
    const float b = static_cast<float>(std::sqrt(1.0 - schedule.alpha_bar(t)));
    LocalGrid xt = x0;
    for (size_t i = 0; i < xt.size(); ++i) xt.values()[i] = a * x0.values()[i] + b * epsilon[i];
    return xt;
}

/// One reverse transition from level t_hi down to t_lo, with the schedule
/// terms bridged across the stride. Posterior variance is the fixed
/// (1 - abar_lo)/(1 - abar_hi) * beta_eff; no noise is injected when t_lo = 0
/// or when `noise` is null (deterministic rollout).
inline void reverse_step(LocalGrid& x, int t_hi, int t_lo, const std::vector<float>& eps_hat,
                         const NoiseSchedule& schedule, const std::vector<float>* noise) {
    if (t_lo >= t_hi || t_hi < 1 || t_hi > schedule.train_steps() || t_lo < 0)
        throw std::invalid_argument("reverse_step requires 0 <= t_lo < t_hi <= T");
    if (eps_hat.size() != x.size()) throw std::invalid_argument("reverse_step eps shape mismatch");

    const double abar_hi = schedule.alpha_bar(t_hi);
    const double abar_lo = schedule.alpha_bar(t_lo);
    const double alpha_eff = abar_hi / abar_lo;
    const double beta_eff = 1.0 - alpha_eff;
    const float mean_scale = static_cast<float>(1.0 / std::sqrt(alpha_eff));
    const float eps_coef = static_cast<float>(beta_eff / std::sqrt(1.0 - abar_hi));
    const double var = t_lo == 0 ? 0.0 : (1.0 - abar_lo) / (1.0 - abar_hi) * beta_eff;
    const float sigma = static_cast<float>(std::sqrt(std::max(0.0, var)));

    for (size_t i = 0; i < x.size(); ++i) {
        float v = mean_scale * (x.values()[i] - eps_coef * eps_hat[i]);
        if (noise != nullptr && sigma > 0.0f) v += sigma * (*noise)[i];
        x.values()[i] = v;
    }
}

/// Occupancy inpainting: reverse diffusion from pure noise where, at every
/// level, the observation (noised to that level) overwrites the state at all
/// observed voxels before the denoiser runs. After the final step observed
/// voxels are reinstated at level 0, i.e. exactly their observed values.
/// The denoiser is any callable (const LocalGrid& x_t, int t) -> vector<float>
/// returning the predicted noise field.
template <typename Denoiser>
inline LocalGrid inpaint_sample(Denoiser&& denoiser, const MaskedSubmap& submap,
                                const NoiseSchedule& schedule, const InferenceSchedule& inference,
                                uint64_t seed) {
    submap.validate();
    inference.validate(schedule.train_steps());
    const size_t n = submap.grid.size();
    Rng rng(seed);

    // Observation in signal space: +1 occupied, -1 free; unused elsewhere.
    std::vector<float> obs_signal(n, 0.0f);
    for (size_t i = 0; i < n; ++i) {
        if (submap.occupied_mask[i]) obs_signal[i] = 1.0f;
        else if (submap.unoccupied_mask[i]) obs_signal[i] = -1.0f;
    }

    LocalGrid x(submap.grid.dim_x(), submap.grid.dim_y(), submap.grid.dim_z(),
                submap.grid.resolution(), submap.grid.origin_pose(), 0.0f);
    for (float& v : x.values()) v = rng.normal_f();

    std::vector<float> obs_noise(n);
    std::vector<float> step_noise(n);

    const auto overwrite_observed = [&](int level) {
        const float a = static_cast<float>(std::sqrt(schedule.alpha_bar(level)));
        const float b = static_cast<float>(std::sqrt(1.0 - schedule.alpha_bar(level)));
        fill_standard_normal(obs_noise, rng);
        for (size_t i = 0; i < n; ++i)
            if (submap.observed(i)) x.values()[i] = a * obs_signal[i] + b * obs_noise[i];
    };

    for (size_t si = 0; si < inference.steps.size(); ++si) {
        const int t_hi = inference.steps[si];
        const int t_lo = si + 1 < inference.steps.size() ? inference.steps[si + 1] : 0;
        overwrite_observed(t_hi);
        const std::vector<float> eps_hat = denoiser(x, t_hi);
        fill_standard_normal(step_noise, rng);
        reverse_step(x, t_hi, t_lo, eps_hat, schedule, t_lo == 0 ? nullptr : &step_noise);
    }

    // Level-0 noising is the identity, so this pins observed voxels exactly.
    LocalGrid out = submap.grid;
    for (size_t i = 0; i < n; ++i)
        out.values()[i] = submap.observed(i) ? signal_to_occupancy(obs_signal[i])
                                             : signal_to_occupancy(x.values()[i]);
    return out;
}

/// k independent inpainting samples. Results depend only on (inputs, seeds),
/// not on thread count; seeds must be distinct and the denoiser callable must
/// tolerate concurrent invocation.
template <typename Denoiser>
inline std::vector<LocalGrid> sample_batch(Denoiser&& denoiser, const MaskedSubmap& submap,
                                           const NoiseSchedule& schedule,
                                           const InferenceSchedule& inference,
                                           const std::vector<uint64_t>& seeds, int max_threads = 1) {
    if (seeds.empty()) throw std::invalid_argument("sample_batch needs at least one seed");
    for (size_t a = 0; a < seeds.size(); ++a)
        for (size_t b = a + 1; b < seeds.size(); ++b)
            if (seeds[a] == seeds[b]) throw std::invalid_argument("sample_batch seeds must be distinct");

    std::vector<LocalGrid> results(seeds.size());
    const int workers = std::max(1, std::min<int>(max_threads, static_cast<int>(seeds.size())));
    if (workers == 1) {
        for (size_t i = 0; i < seeds.size(); ++i)
            results[i] = inpaint_sample(denoiser, submap, schedule, inference, seeds[i]);
        return results;
    }

    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&]() {
            for (size_t i = next.fetch_add(1); i < seeds.size(); i = next.fetch_add(1))
                results[i] = inpaint_sample(denoiser, submap, schedule, inference, seeds[i]);
        });
    for (auto& th : pool) th.join();
    return results;
}

} // namespace occugen
