#include "tractokit/nn/optim.hpp"

#include <cmath>

#include "tractokit/util/error.hpp"

namespace tractokit::nn {

template <typename T>
Optimizer<T>::Optimizer(std::vector<Parameter<T>*> params, OptimizerConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Parameter<T>* p : params_) {
        m_.emplace_back(p->value.numel(), 0.0);
        v_.emplace_back(p->value.numel(), 0.0);
    }
}

template <typename T>
void Optimizer<T>::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        Parameter<T>& p = *params_[pi];
        if (p.frozen) continue;
        if (p.grad.numel() != p.value.numel())
            throw InvalidInputError("optimizer: gradient shape mismatch for " + p.name);
        std::vector<double>& m = m_[pi];
        std::vector<double>& v = v_[pi];
        for (std::size_t i = 0; i < p.value.numel(); ++i) {
            double g = static_cast<double>(p.grad.data[i]);
            const double w = static_cast<double>(p.value.data[i]);
            if (cfg_.variant == OptVariant::kAdam) g += cfg_.weight_decay * w;
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            double update = cfg_.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.eps);
            if (cfg_.variant == OptVariant::kAdamW)
                update += cfg_.lr * cfg_.weight_decay * w;
            p.value.data[i] = static_cast<T>(w - update);
        }
    }
}

template <typename T>
void Optimizer<T>::zero_grad() {
    for (Parameter<T>* p : params_) p->zero_grad();
}

template class Optimizer<float>;
template class Optimizer<double>;

LrSchedule LrSchedule::constant(double lr) {
    LrSchedule s;
    s.kind = Kind::kConstant;
    s.base_lr = lr;
    return s;
}

LrSchedule LrSchedule::warm_restarts(double base, std::size_t t0, std::size_t t_mult,
                                     double lr_min) {
    if (t0 == 0 || t_mult == 0) throw InvalidInputError("warm_restarts: T_0 and T_mult must be >= 1");
    LrSchedule s;
    s.kind = Kind::kWarmRestarts;
    s.base_lr = base;
    s.T_0 = t0;
    s.T_mult = t_mult;
    s.lr_min = lr_min;
    return s;
}

LrSchedule LrSchedule::warmup_cosine(double base, std::size_t t_initial, std::size_t warmup_t,
                                     double lr_min, double warmup_lr_init, double decay_rate,
                                     std::size_t cycle_limit) {
    if (t_initial == 0) throw InvalidInputError("warmup_cosine: t_initial must be >= 1");
    LrSchedule s;
    s.kind = Kind::kWarmupCosine;
    s.base_lr = base;
    s.t_initial = t_initial;
    s.warmup_t = warmup_t;
    s.lr_min = lr_min;
    s.warmup_lr_init = warmup_lr_init;
    s.decay_rate = decay_rate;
    s.cycle_limit = cycle_limit;
    return s;
}

double LrSchedule::at(std::size_t step) const {
    constexpr double kPi = 3.14159265358979323846;
    switch (kind) {
        case Kind::kConstant:
            return base_lr;
        case Kind::kWarmRestarts: {
            // Locate the cycle containing `step`.
            std::size_t t_i = T_0;
            std::size_t t_cur = step;
            while (t_cur >= t_i) {
                t_cur -= t_i;
                t_i = T_mult == 1 ? t_i : t_i * T_mult;
            }
            const double frac = static_cast<double>(t_cur) / static_cast<double>(t_i);
            return lr_min + 0.5 * (base_lr - lr_min) * (1.0 + std::cos(kPi * frac));
        }
        case Kind::kWarmupCosine: {
            if (step < warmup_t) {
                const double inc = (base_lr - warmup_lr_init) / static_cast<double>(warmup_t);
                return warmup_lr_init + static_cast<double>(step) * inc;
            }
            const std::size_t cycle = step / t_initial;
            if (cycle >= cycle_limit) return lr_min;
            const std::size_t t_cur = step - cycle * t_initial;
            const double peak = base_lr * std::pow(decay_rate, static_cast<double>(cycle));
            const double frac = static_cast<double>(t_cur) / static_cast<double>(t_initial);
            return lr_min + 0.5 * (peak - lr_min) * (1.0 + std::cos(kPi * frac));
        }
    }
    return base_lr;
}

}  // namespace tractokit::nn
