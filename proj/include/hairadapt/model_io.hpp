#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hairadapt {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Points = std::vector<Vec3>;

/// Raised by the binary/text loaders. `offset` is the byte (or line) position
/// where parsing stopped.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at offset " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Raised when a file cannot be opened, read or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a model violates a structural invariant.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Strands stored back to back. Strand s owns particles
/// [offsets[s], offsets[s+1]); its root is the first of them.
class Hairstyle {
public:
    Hairstyle() : offsets_{0} {}
    Hairstyle(Points positions, std::vector<std::uint32_t> offsets);

    std::size_t particle_count() const { return positions_.size(); }
    std::size_t strand_count() const { return offsets_.size() - 1; }

    std::uint32_t strand_begin(std::size_t s) const { return offsets_[s]; }
    std::uint32_t strand_end(std::size_t s) const { return offsets_[s + 1]; }
    std::uint32_t strand_size(std::size_t s) const { return offsets_[s + 1] - offsets_[s]; }
    std::uint32_t root_of(std::size_t s) const { return offsets_[s]; }

    bool is_root(std::size_t particle) const;
    /// Strand index of every particle.
    std::vector<std::uint32_t> strand_ids() const;

    const Points& positions() const { return positions_; }
    Points& positions() { return positions_; }
    const std::vector<std::uint32_t>& offsets() const { return offsets_; }

    /// Append a strand (at least two particles).
    void add_strand(std::span<const Vec3> particles);

    /// Same topology, new positions.
    Hairstyle with_positions(Points positions) const;

    /// Sub-hairstyle made of the given strands (in the given order).
    Hairstyle subset(std::span<const std::uint32_t> strands) const;

    double bounding_box_diagonal() const;

    /// Throws ValidationError when an invariant does not hold.
    void validate() const;

private:
    Points positions_;
    std::vector<std::uint32_t> offsets_;
};

/// Point on a mesh: face index and barycentric weights of its three corners.
struct SurfacePoint {
    std::uint32_t face = 0;
    Vec3 bary = Vec3(1.0, 0.0, 0.0);

    bool valid() const;
};

struct Bone {
    std::string name;
    Vec3 head = Vec3::Zero();
    Vec3 tail = Vec3::Zero();

    Vec3 direction() const { return (tail - head).normalized(); }
    double length() const { return (tail - head).norm(); }
};

/// Triangle mesh with a skeleton and linear-blend skinning weights.
struct BodyModel {
    Points vertices;
    std::vector<Eigen::Vector3i> faces;
    std::vector<Bone> bones;
    /// Per vertex: bone index -> weight (normalized).
    std::vector<std::map<int, double>> skin_weights;
    /// Per bone: sorted face indices of its valid surface region.
    std::vector<std::vector<std::uint32_t>> valid_regions;

    Vec3 point(const SurfacePoint& sp) const;
    Vec3 face_normal(std::uint32_t f) const;
    double face_area(std::uint32_t f) const;
    int bone_index(const std::string& name) const;
    double bounding_box_diagonal() const;

    /// Recompute valid_regions: a face belongs to bone b's region when at
    /// least one of its vertices carries more than `threshold` weight for b.
    void compute_valid_regions(double threshold);
    bool in_region(std::size_t bone, std::uint32_t face) const;

    /// Faces with area <= 1e-12, weight rows not summing to one, and
    /// zero-length bones are reported as ValidationError.
    void validate() const;
};

struct PairReport {
    bool ok = true;
    std::string message;
    std::optional<std::size_t> face;
    std::optional<std::size_t> bone;
};

PairReport validate_pair(const BodyModel& source, const BodyModel& target);

struct AdaptationConfig {
    double alpha = 3e3;
    double beta = 1e3;
    int k = 5;
    double eps_c = 5e-4;
    double eps_s = 0.3;
    double sigma_bone = 100.0;
    double sigma_gamma = 0.2;
    int n_guides = 300;
    double region_threshold = 0.3;

    double tol_primal = 1e-6;
    double tol_dual = 1e-6;
    int max_admm_iters = 4000;
    int max_outer = 20;
    double tol_outer_rel = 1e-4;
    bool penetration_cutoff = false;

    double membrane_mu = 1.0;
    double membrane_lambda = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

// --- file I/O ---------------------------------------------------------------

Hairstyle load_hairstyle(const std::filesystem::path& path);
Hairstyle parse_hairstyle(std::span<const std::uint8_t> bytes);
void save_hairstyle(const Hairstyle& hair, const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_hairstyle(const Hairstyle& hair);

struct Mesh {
    Points vertices;
    std::vector<Eigen::Vector3i> faces;
};
Mesh load_obj(const std::filesystem::path& path);
Mesh parse_obj(const std::string& text);
void save_obj(const Mesh& mesh, const std::filesystem::path& path);

struct Skeleton {
    std::vector<Bone> bones;
    std::vector<std::map<int, double>> weights;
};
Skeleton parse_skeleton_json(const std::string& text);
std::string skeleton_to_json(const Skeleton& skeleton);

/// Non-fatal issues found while loading (e.g. renormalized weight rows).
struct LoadWarnings {
    std::vector<std::string> messages;
};

BodyModel make_body(Mesh mesh, Skeleton skeleton, double region_threshold = 0.3,
                    LoadWarnings* warnings = nullptr);
BodyModel load_body(const std::filesystem::path& mesh_path,
                    const std::filesystem::path& skeleton_path,
                    double region_threshold = 0.3, LoadWarnings* warnings = nullptr);
void save_body(const BodyModel& body, const std::filesystem::path& mesh_path,
               const std::filesystem::path& skeleton_path);

AdaptationConfig parse_config(const std::string& text);
AdaptationConfig load_config(const std::filesystem::path& path);
std::string config_to_text(const AdaptationConfig& config);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
std::string read_file_text(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_text(const std::filesystem::path& path, const std::string& text);

/// FNV-1a 64-bit hash, used to tag caches with the inputs they came from.
std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t seed = 1469598103934665603ull);

}  // namespace hairadapt
