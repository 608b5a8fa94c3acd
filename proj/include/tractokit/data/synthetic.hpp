#pragma once

#include <cstdint>

#include "tractokit/data/dataset.hpp"

namespace tractokit {

// Desk-scale stand-in for a tractography pipeline: per class, a template 3-D
// curve (cubic Bezier, or a straight segment for the trailing "linear"
// classes); per subject, one rigid perturbation applied to every template;
// per streamline, Gaussian control-point jitter. The leading 2*mirrored_pairs
// classes form left/right pairs relating by x-negation. A configurable
// fraction of each subject's streamlines are random curves labeled "other".
struct SyntheticConfig {
    std::size_t n_classes = 8;               // named classes, excluding "other"
    std::size_t subjects = 20;
    std::size_t streamlines_per_subject = 500;
    double jitter_sigma = 1.0;               // mm, control-point jitter
    double outlier_fraction = 0.08;          // share of "other" per subject
    std::size_t mirrored_pairs = 2;          // leading classes come in L/R pairs
    std::size_t linear_classes = 1;          // trailing straight-fiber classes
    double subject_rotation_sigma = 0.05;    // radians
    double subject_translation_sigma = 2.0;  // mm
    std::size_t min_points = 15;
    std::size_t max_points = 60;
    bool random_flip = true;                 // reverse point order of half the output
    double extent = 60.0;                    // half-size of the coordinate box, mm
    double min_template_mdf = 25.0;          // separation between class templates
    std::uint64_t seed = 0;
};

Dataset generate_synthetic(const SyntheticConfig& cfg);

}  // namespace tractokit
