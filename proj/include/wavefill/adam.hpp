#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "wavefill/tape.hpp"

namespace wavefill {

// Adam with bias correction. beta1 = 0 reduces the first moment to the raw
// gradient; beta2 = 0.9 follows the training setup used here.
struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.0;
    double beta2 = 0.9;
    double epsilon = 1e-8;
};

template <typename T>
class AdamOptimizer {
  public:
    AdamOptimizer(std::vector<Parameter<T>*> params, AdamConfig config)
        : params_(std::move(params)), config_(config) {
        slots_.reserve(params_.size());
        for (auto* p : params_) slots_.push_back({Tensor<T>(p->value.shape), Tensor<T>(p->value.shape)});
    }

    void step() {
        ++step_count_;
        const double b1 = config_.beta1;
        const double b2 = config_.beta2;
        const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
        const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));
        const double lr = config_.learning_rate;
        const double eps = config_.epsilon;
        for (size_t k = 0; k < params_.size(); ++k) {
            Parameter<T>& p = *params_[k];
            Slot& s = slots_[k];
            if (p.grad.shape != p.value.shape)
                throw ShapeMismatch("adam gradient shape for " + p.name);
            for (size_t i = 0; i < p.value.size(); ++i) {
                const double g = static_cast<double>(p.grad.data[i]);
                const double m = b1 * static_cast<double>(s.m.data[i]) + (1.0 - b1) * g;
                const double v = b2 * static_cast<double>(s.v.data[i]) + (1.0 - b2) * g * g;
                s.m.data[i] = static_cast<T>(m);
                s.v.data[i] = static_cast<T>(v);
                const double mhat = m / bc1;
                const double vhat = v / bc2;
                p.value.data[i] =
                    static_cast<T>(static_cast<double>(p.value.data[i]) -
                                   lr * mhat / (std::sqrt(vhat) + eps));
            }
        }
    }

    void zero_grad() {
        for (auto* p : params_) p->zero_grad();
    }

    int64_t step_count() const { return step_count_; }
    const AdamConfig& config() const { return config_; }
    const std::vector<Parameter<T>*>& params() const { return params_; }

    // Moment buffers in parameter order, exposed for checkpointing.
    Tensor<T>& first_moment(size_t i) { return slots_[i].m; }
    Tensor<T>& second_moment(size_t i) { return slots_[i].v; }
    void set_step_count(int64_t s) { step_count_ = s; }

  private:
    struct Slot {
        Tensor<T> m, v;
    };

    std::vector<Parameter<T>*> params_;
    std::vector<Slot> slots_;
    AdamConfig config_;
    int64_t step_count_ = 0;
};

}  // namespace wavefill
