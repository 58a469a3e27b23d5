#include "hairadapt/tuning.hpp"

#include <cassert>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace hairadapt {

ParticleWeights compute_weights(const Hairstyle& source, std::span<const double> travel, double sigma) {
    if (travel.size() != source.strand_count())
        throw ValidationError("travel distances do not match the strand count");
    ParticleWeights w;
    w.arc_length.assign(source.particle_count(), 0.0);
    w.gamma.assign(source.particle_count(), 1.0);
    w.travel.assign(travel.begin(), travel.end());
    const auto& p = source.positions();
    for (std::size_t s = 0; s < source.strand_count(); ++s) {
        const double r = travel[s];
        if (!(r >= 0.0) || !std::isfinite(r)) throw ValidationError("travel distance must be finite and non-negative");
        const auto b = source.strand_begin(s);
        for (auto i = b + 1; i < source.strand_end(s); ++i) w.arc_length[i] = w.arc_length[i - 1] + (p[i] - p[i - 1]).norm();
        if (r == 0.0) continue;
        for (auto i = b; i < source.strand_end(s); ++i) {
            const double ratio = w.arc_length[i] / r;
            assert(ratio >= 0.0);
            w.gamma[i] = 1.0 - std::exp(-sigma * ratio * ratio);
        }
    }
    return w;
}

std::string weights_csv(const ParticleWeights& w, const Hairstyle& source) {
    std::ostringstream os;
    os << std::setprecision(17) << "strand,particle,s,r,gamma\n";
    for (std::size_t s = 0; s < source.strand_count(); ++s)
        for (auto i = source.strand_begin(s); i < source.strand_end(s); ++i)
            os << s << ',' << i << ',' << w.arc_length[i] << ',' << w.travel[s] << ',' << w.gamma[i] << '\n';
    return os.str();
}

}  // namespace hairadapt
