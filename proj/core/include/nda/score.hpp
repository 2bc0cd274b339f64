#pragma once

#include "nda/distance.hpp"
#include "nda/image.hpp"
#include "nda/noise.hpp"

#include <vector>

namespace nda {

enum class ScoreMode { global, local };

/// Gradient-of-log-density field evaluated on one noisy image.
struct ScoreField {
    ScoreMode mode = ScoreMode::global;
    int timestep = 0;
    int channels = 0;
    int side = 0;
    int patch_size = 0;              // local mode only
    std::vector<double> values;      // channels * side * side

    double at(int c, int row, int col) const {
        return values[(static_cast<std::size_t>(c) * side + row) * side + col];
    }
};

/// Whole-image Gaussian-mixture score: the posterior-weighted average of
/// (sqrt(abar) z - x_t) / (1 - abar) over the training set, with weights
/// computed in the log domain.
ScoreField global_score(const NoisyImage& x_t, const Dataset& trainset);

/// Patch-local score: per pixel, the same residual average taken over every
/// training patch, weighted by the patch softmax with no top-k truncation.
/// With the whole image as the patch this reduces to global_score.
ScoreField local_score(const NoisyImage& x_t, const Dataset& trainset, int patch_size,
                       DistanceBackend backend = DistanceBackend::naive);

} // namespace nda
