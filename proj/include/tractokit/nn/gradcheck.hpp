#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tractokit/nn/graph.hpp"

namespace tractokit::nn {

// Central finite-difference verification of analytic gradients at f64.
//
// `build` constructs the loss in a fresh graph from the current parameter
// values; it is re-invoked for every perturbed evaluation with an identically
// seeded graph, so stochastic ops (dropout, Gumbel noise) repeat their draws
// and the loss is a deterministic function of the parameters.
//
// Relative error uses denominator max(|analytic|, |numeric|, 1e-6): a pure
// ratio would amplify f64 difference noise on near-zero components. Elements
// where |analytic - numeric| <= atol are accepted outright: a central
// difference of an O(1) loss carries ~1e-9 cancellation noise, so directions
// with a structurally zero gradient (e.g. a bias feeding straight into a
// train-mode batch norm) cannot be resolved any finer. Elements that exceed
// 5e-5 at the base step are re-measured at step/4 and step/16 and the best
// relative error kept: truncation noise and kinks grazing the step interval
// shrink under refinement, while a wrong gradient is step-independent.
struct GradCheckReport {
    double max_rel_err = 0.0;
    double max_abs_grad = 0.0;  // largest analytic component seen (vacuity guard)
    std::size_t n_checked = 0;
    std::string worst;

    bool pass(double tol = 1e-4) const { return max_rel_err <= tol; }
};

using LossBuilder = std::function<NodeId(Graph<double>&)>;

GradCheckReport check_gradients(const std::vector<Parameter<double>*>& params,
                                const LossBuilder& build, Mode mode = Mode::kTrain,
                                std::uint64_t seed = 0, double step = 1e-5,
                                std::size_t max_checks_per_param = 256,
                                double atol = 1e-8);

}  // namespace tractokit::nn
