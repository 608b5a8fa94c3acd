#pragma once

#include <cstdint>
#include <vector>

#include "tractokit/nn/graph.hpp"

namespace tractokit::nn {

enum class OptVariant { kAdam, kAdamW };

struct OptimizerConfig {
    OptVariant variant = OptVariant::kAdam;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    // Adam couples decay into the gradient; AdamW applies it decoupled.
    double weight_decay = 0.0;
};

// Adam/AdamW over a fixed parameter list. Moments are kept in f64 for both
// precisions; frozen parameters are skipped entirely.
template <typename T>
class Optimizer {
public:
    Optimizer(std::vector<Parameter<T>*> params, OptimizerConfig cfg);

    // Apply one update from the accumulated Parameter::grad buffers.
    void step();
    void zero_grad();

    void set_lr(double lr) { cfg_.lr = lr; }
    double lr() const { return cfg_.lr; }
    std::uint64_t steps() const { return t_; }
    const OptimizerConfig& config() const { return cfg_; }

private:
    std::vector<Parameter<T>*> params_;
    OptimizerConfig cfg_;
    std::vector<std::vector<double>> m_, v_;
    std::uint64_t t_ = 0;
};

extern template class Optimizer<float>;
extern template class Optimizer<double>;

// Learning-rate schedules, evaluated statelessly per step index. Steps are
// epochs for the warm-restart variant (matching its T_0/T_mult wiring into
// the trainer).
struct LrSchedule {
    enum class Kind { kConstant, kWarmRestarts, kWarmupCosine };

    Kind kind = Kind::kConstant;
    double base_lr = 1e-3;
    double lr_min = 0.0;
    // Warm restarts: cycle lengths T_0, T_0*T_mult, T_0*T_mult^2, ...
    std::size_t T_0 = 10;
    std::size_t T_mult = 2;
    // Warmup cosine (single-cycle unless cycle_limit raised): linear warmup
    // from warmup_lr_init over warmup_t steps, cosine over t_initial, peak
    // decaying by decay_rate per completed cycle, floor lr_min thereafter.
    std::size_t t_initial = 300;
    std::size_t warmup_t = 10;
    double warmup_lr_init = 1e-6;
    double decay_rate = 0.1;
    std::size_t cycle_limit = 1;

    static LrSchedule constant(double lr);
    static LrSchedule warm_restarts(double base, std::size_t t0, std::size_t t_mult,
                                    double lr_min = 0.0);
    static LrSchedule warmup_cosine(double base, std::size_t t_initial = 300,
                                    std::size_t warmup_t = 10, double lr_min = 1e-6,
                                    double warmup_lr_init = 1e-6, double decay_rate = 0.1,
                                    std::size_t cycle_limit = 1);

    double at(std::size_t step) const;
};

inline double lr_at(const LrSchedule& s, std::size_t step) { return s.at(step); }

}  // namespace tractokit::nn
