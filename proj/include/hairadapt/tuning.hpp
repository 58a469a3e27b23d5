#pragma once

#include "hairadapt/model_io.hpp"

namespace hairadapt {

/// Per-particle preservation weights after a root relocation.
struct ParticleWeights {
    /// Arc length from the root on the source geometry.
    std::vector<double> arc_length;
    std::vector<double> gamma;
    /// Root travel distance of every strand.
    std::vector<double> travel;
};

/// gamma = 1 - exp(-sigma (s / r)^2) along each strand. A strand whose root
/// did not move (r = 0) keeps weight 1 everywhere, root included.
ParticleWeights compute_weights(const Hairstyle& source, std::span<const double> travel, double sigma);

/// strand,particle,s,r,gamma
std::string weights_csv(const ParticleWeights& weights, const Hairstyle& source);

}  // namespace hairadapt
