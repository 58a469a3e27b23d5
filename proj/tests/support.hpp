#pragma once

#include "hairadapt/fixtures.hpp"
#include "hairadapt/pipeline.hpp"

#include <filesystem>
#include <random>

namespace testing {

using namespace hairadapt;

/// Source character, a second character and a hairstyle grown on the first.
struct Scene {
    CharacterShape source_shape;
    CharacterShape target_shape;
    BodyModel source;
    BodyModel target;
    Hairstyle hair;
};

inline Scene make_scene(std::size_t strands, int target_preset = 1, int particles = 12, double curl = 0.0) {
    Scene s;
    s.source_shape = character_preset(0);
    s.target_shape = character_preset(target_preset);
    s.source = make_character(s.source_shape);
    s.target = make_character(s.target_shape);
    HairParams hp;
    hp.strands = strands;
    hp.particles = particles;
    hp.curl = curl;
    s.hair = make_hairstyle(s.source, s.source_shape, hp);
    return s;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("hairadapt_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline double max_distance(const Points& a, const Points& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, (a[i] - b[i]).norm());
    return d;
}

inline Vec3 random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> n;
    Vec3 v(n(rng), n(rng), n(rng));
    return v.normalized();
}

/// Flat triangulated disk in the z = 0 plane: one centre vertex and `rings`
/// rings of 6 * r vertices.
inline Mesh flat_disk(int rings, double radius) {
    Mesh m;
    m.vertices.push_back(Vec3::Zero());
    std::vector<std::vector<int>> ring_ids{{0}};
    for (int r = 1; r <= rings; ++r) {
        std::vector<int> ids;
        const int n = 6 * r;
        for (int k = 0; k < n; ++k) {
            const double a = 2.0 * M_PI * k / n;
            ids.push_back(static_cast<int>(m.vertices.size()));
            m.vertices.emplace_back(radius * r / rings * std::cos(a), radius * r / rings * std::sin(a), 0.0);
        }
        ring_ids.push_back(ids);
    }
    for (int r = 1; r <= rings; ++r) {
        const auto& inner = ring_ids[r - 1];
        const auto& outer = ring_ids[r];
        const int n_out = static_cast<int>(outer.size());
        const int n_in = static_cast<int>(inner.size());
        int j = 0;
        for (int k = 0; k < n_out; ++k) {
            const int a = outer[k], b = outer[(k + 1) % n_out];
            const int c = inner[j % n_in];
            m.faces.emplace_back(a, b, c);
            // Advance the inner ring at every non-corner step.
            if (r > 1 && (k + 1) % r != 0) {
                const int d = inner[(j + 1) % n_in];
                m.faces.emplace_back(b, d, c);
                ++j;
            }
        }
    }
    return m;
}

/// Body made of a single mesh and one bone whose region covers every face.
inline BodyModel single_bone_body(Mesh mesh, const std::string& bone = "head") {
    Skeleton sk;
    sk.bones.push_back({bone, Vec3(0.0, 0.0, -1.0), Vec3(0.0, 0.0, 0.0)});
    sk.weights.assign(mesh.vertices.size(), {{0, 1.0}});
    return make_body(std::move(mesh), std::move(sk), 0.3);
}

}  // namespace testing
