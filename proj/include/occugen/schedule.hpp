#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace occugen {

/// Variance schedule tables for the forward/reverse processes. Index 0 is the
/// clean state: beta(0) = 0, alpha_bar(0) = 1.
class NoiseSchedule {
public:
    NoiseSchedule() = default;

    NoiseSchedule(std::vector<double> beta) : beta_(std::move(beta)) {
        alpha_.resize(beta_.size());
        alpha_bar_.resize(beta_.size());
        alpha_[0] = 1.0;
        alpha_bar_[0] = 1.0;
        for (size_t t = 1; t < beta_.size(); ++t) {
            if (!(beta_[t] > 0.0 && beta_[t] < 1.0))
                throw std::invalid_argument("beta values must be in (0,1)");
            alpha_[t] = 1.0 - beta_[t];
            alpha_bar_[t] = alpha_bar_[t - 1] * alpha_[t];
        }
    }

    int train_steps() const { return static_cast<int>(beta_.size()) - 1; }

    double beta(int t) const { return beta_.at(t); }
    double alpha(int t) const { return alpha_.at(t); }
    double alpha_bar(int t) const { return alpha_bar_.at(t); }

private:
    std::vector<double> beta_;      // beta_[0] == 0 sentinel
    std::vector<double> alpha_;
    std::vector<double> alpha_bar_;
};

/// Linear beta schedule over T training steps, endpoints inclusive.
inline NoiseSchedule linear_schedule(int T, double beta_start = 1e-4, double beta_end = 0.02) {
    if (T < 1) throw std::invalid_argument("schedule needs at least one step");
    if (!(beta_start > 0.0 && beta_start < beta_end && beta_end < 1.0))
        throw std::invalid_argument("require 0 < beta_start < beta_end < 1");
    std::vector<double> beta(static_cast<size_t>(T) + 1, 0.0);
    for (int t = 1; t <= T; ++t)
        beta[t] = T == 1 ? beta_start
                         : beta_start + (beta_end - beta_start) * (t - 1) / double(T - 1);
    return NoiseSchedule(std::move(beta));
}

/// Strided inference subsequence of [1, T], descending, ending at t = 1.
struct InferenceSchedule {
    std::vector<int> steps;

    static InferenceSchedule strided(int T, int n_steps) {
        if (n_steps < 1 || n_steps > T)
            throw std::invalid_argument("inference steps must be in [1, T]");
        InferenceSchedule s;
        s.steps.resize(n_steps);
        for (int i = 0; i < n_steps; ++i) {
            const double frac = n_steps == 1 ? 1.0 : double(n_steps - 1 - i) / (n_steps - 1);
            s.steps[i] = 1 + static_cast<int>(std::lround((T - 1) * frac));
        }
        s.validate(T);
        return s;
    }

    void validate(int T) const {
        if (steps.empty()) throw std::invalid_argument("empty inference schedule");
        if (steps.back() != 1) throw std::invalid_argument("inference schedule must end at t=1");
        int prev = T + 1;
        for (int t : steps) {
            if (t < 1 || t > T || t >= prev)
                throw std::invalid_argument("inference schedule must be strictly descending in [1,T]");
            prev = t;
        }
    }
};

} // namespace occugen
