#include "hairadapt/model_io.hpp"

#include "json.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

namespace hairadapt {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

// --- Hairstyle ----------------------------------------------------------------

Hairstyle::Hairstyle(Points positions, std::vector<std::uint32_t> offsets)
    : positions_(std::move(positions)), offsets_(std::move(offsets)) {
    if (offsets_.empty()) offsets_.push_back(0);
    validate();
}

bool Hairstyle::is_root(std::size_t particle) const {
    return std::binary_search(offsets_.begin(), offsets_.end() - 1, static_cast<std::uint32_t>(particle));
}

std::vector<std::uint32_t> Hairstyle::strand_ids() const {
    std::vector<std::uint32_t> ids(positions_.size());
    for (std::size_t s = 0; s < strand_count(); ++s)
        std::fill(ids.begin() + offsets_[s], ids.begin() + offsets_[s + 1], static_cast<std::uint32_t>(s));
    return ids;
}

void Hairstyle::add_strand(std::span<const Vec3> particles) {
    if (particles.size() < 2) throw ValidationError("a strand needs at least two particles");
    positions_.insert(positions_.end(), particles.begin(), particles.end());
    offsets_.push_back(static_cast<std::uint32_t>(positions_.size()));
}

Hairstyle Hairstyle::with_positions(Points positions) const {
    if (positions.size() != positions_.size())
        throw ValidationError("with_positions: particle count mismatch");
    Hairstyle out;
    out.positions_ = std::move(positions);
    out.offsets_ = offsets_;
    return out;
}

Hairstyle Hairstyle::subset(std::span<const std::uint32_t> strands) const {
    Hairstyle out;
    for (auto s : strands) {
        if (s >= strand_count()) throw std::out_of_range("subset: strand index out of range");
        out.add_strand(std::span<const Vec3>(positions_.data() + offsets_[s], strand_size(s)));
    }
    return out;
}

double Hairstyle::bounding_box_diagonal() const {
    if (positions_.empty()) return 0.0;
    Vec3 lo = positions_.front(), hi = positions_.front();
    for (const auto& p : positions_) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return (hi - lo).norm();
}

void Hairstyle::validate() const {
    if (offsets_.front() != 0) throw ValidationError("strand offsets must start at 0");
    if (offsets_.back() != positions_.size())
        throw ValidationError("strand offsets do not cover the particle array");
    for (std::size_t s = 0; s + 1 < offsets_.size(); ++s) {
        if (offsets_[s + 1] < offsets_[s] + 2)
            throw ValidationError("strand " + std::to_string(s) + " has fewer than two particles");
    }
    for (std::size_t i = 0; i < positions_.size(); ++i) {
        if (!positions_[i].allFinite())
            throw ValidationError("particle " + std::to_string(i) + " is not finite");
    }
}

// --- SurfacePoint / BodyModel -------------------------------------------------

bool SurfacePoint::valid() const {
    return (bary.array() >= -1e-12).all() && (bary.array() <= 1.0 + 1e-12).all() &&
           std::abs(bary.sum() - 1.0) <= 1e-9;
}

Vec3 BodyModel::point(const SurfacePoint& sp) const {
    const auto& f = faces[sp.face];
    return sp.bary[0] * vertices[f[0]] + sp.bary[1] * vertices[f[1]] + sp.bary[2] * vertices[f[2]];
}

Vec3 BodyModel::face_normal(std::uint32_t fi) const {
    const auto& f = faces[fi];
    return (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]).normalized();
}

double BodyModel::face_area(std::uint32_t fi) const {
    const auto& f = faces[fi];
    return 0.5 * (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]).norm();
}

int BodyModel::bone_index(const std::string& name) const {
    for (std::size_t b = 0; b < bones.size(); ++b)
        if (bones[b].name == name) return static_cast<int>(b);
    return -1;
}

double BodyModel::bounding_box_diagonal() const {
    if (vertices.empty()) return 0.0;
    Vec3 lo = vertices.front(), hi = vertices.front();
    for (const auto& v : vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    return (hi - lo).norm();
}

void BodyModel::compute_valid_regions(double threshold) {
    valid_regions.assign(bones.size(), {});
    for (std::size_t fi = 0; fi < faces.size(); ++fi) {
        std::set<int> owners;
        for (int c = 0; c < 3; ++c) {
            for (const auto& [bone, w] : skin_weights[faces[fi][c]])
                if (w > threshold) owners.insert(bone);
        }
        for (int b : owners) valid_regions[b].push_back(static_cast<std::uint32_t>(fi));
    }
}

bool BodyModel::in_region(std::size_t bone, std::uint32_t face) const {
    const auto& r = valid_regions[bone];
    return std::binary_search(r.begin(), r.end(), face);
}

void BodyModel::validate() const {
    if (bones.empty()) throw ValidationError("body has no bones");
    std::set<std::string> names;
    for (std::size_t b = 0; b < bones.size(); ++b) {
        if (!names.insert(bones[b].name).second)
            throw ValidationError("duplicate bone name '" + bones[b].name + "'");
        if (bones[b].length() <= 0.0)
            throw ValidationError("bone '" + bones[b].name + "' has zero length");
    }
    for (std::size_t fi = 0; fi < faces.size(); ++fi) {
        for (int c = 0; c < 3; ++c) {
            if (faces[fi][c] < 0 || static_cast<std::size_t>(faces[fi][c]) >= vertices.size())
                throw ValidationError("face " + std::to_string(fi) + " references a missing vertex");
        }
        if (face_area(static_cast<std::uint32_t>(fi)) <= 1e-12)
            throw ValidationError("face " + std::to_string(fi) + " is degenerate");
    }
    if (skin_weights.size() != vertices.size())
        throw ValidationError("skin weight rows do not match the vertex count");
    for (std::size_t v = 0; v < skin_weights.size(); ++v) {
        double sum = 0.0;
        for (const auto& [bone, w] : skin_weights[v]) {
            if (bone < 0 || static_cast<std::size_t>(bone) >= bones.size())
                throw ValidationError("vertex " + std::to_string(v) + " weights an unknown bone");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-6)
            throw ValidationError("skin weights of vertex " + std::to_string(v) + " do not sum to 1");
    }
}

PairReport validate_pair(const BodyModel& source, const BodyModel& target) {
    PairReport report;
    if (source.vertices.size() != target.vertices.size()) {
        report.ok = false;
        report.message = "vertex counts differ";
        return report;
    }
    if (source.faces.size() != target.faces.size()) {
        report.ok = false;
        report.message = "face counts differ";
        return report;
    }
    for (std::size_t f = 0; f < source.faces.size(); ++f) {
        if (source.faces[f] != target.faces[f]) {
            report.ok = false;
            report.face = f;
            report.message = "face " + std::to_string(f) + " differs";
            return report;
        }
    }
    if (source.bones.size() != target.bones.size()) {
        report.ok = false;
        report.message = "bone counts differ";
        return report;
    }
    for (std::size_t b = 0; b < source.bones.size(); ++b) {
        if (source.bones[b].name != target.bones[b].name) {
            report.ok = false;
            report.bone = b;
            report.message = "bone " + std::to_string(b) + " differs ('" + source.bones[b].name +
                             "' vs '" + target.bones[b].name + "')";
            return report;
        }
    }
    return report;
}

void AdaptationConfig::validate() const {
    if (!(alpha > 0.0)) throw ValidationError("alpha must be positive");
    if (!(beta > 0.0)) throw ValidationError("beta must be positive");
    if (k < 1) throw ValidationError("k must be at least 1");
    if (!(eps_c >= 0.0)) throw ValidationError("eps_c must be non-negative");
    if (!(eps_s > 0.0)) throw ValidationError("eps_s must be positive");
    if (n_guides < 1) throw ValidationError("n_guides must be at least 1");
    if (!(tol_primal > 0.0) || !(tol_dual > 0.0)) throw ValidationError("solver tolerances must be positive");
    if (max_admm_iters < 1 || max_outer < 1) throw ValidationError("iteration caps must be positive");
    if (!(tol_outer_rel > 0.0)) throw ValidationError("tol_outer_rel must be positive");
    if (!(membrane_mu > 0.0) || !(membrane_lambda >= 0.0))
        throw ValidationError("membrane material constants out of range");
}

// --- binary helpers -------------------------------------------------------------

namespace {

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    template <typename T>
    T read(const char* what) {
        if (pos_ + sizeof(T) > bytes_.size()) throw ParseError(std::string("truncated ") + what, pos_);
        T value;
        std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }
    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
    const auto* raw = reinterpret_cast<const std::uint8_t*>(&value);
    out.insert(out.end(), raw, raw + sizeof(T));
}

}  // namespace

Hairstyle parse_hairstyle(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes);
    char magic[4];
    for (char& c : magic) c = static_cast<char>(in.read<std::uint8_t>("magic"));
    if (std::memcmp(magic, "HAIR", 4) != 0) throw ParseError("bad magic, expected HAIR", 0);
    const auto version = in.read<std::uint32_t>("version");
    if (version != 1) throw ParseError("unsupported hair file version " + std::to_string(version), 4);
    const auto strands = in.read<std::uint32_t>("strand count");

    Points positions;
    std::vector<std::uint32_t> offsets{0};
    offsets.reserve(static_cast<std::size_t>(strands) + 1);
    // Every strand needs at least a count and two particles.
    if (static_cast<std::uint64_t>(strands) * 28 > in.remaining())
        throw ParseError("strand count exceeds payload", 8);
    positions.reserve(in.remaining() / 12);
    for (std::uint32_t s = 0; s < strands; ++s) {
        const std::size_t at = in.pos();
        const auto count = in.read<std::uint32_t>("vertex count");
        if (count < 2) throw ParseError("strand " + std::to_string(s) + " has fewer than two particles", at);
        if (static_cast<std::uint64_t>(count) * 12 > in.remaining())
            throw ParseError("truncated strand " + std::to_string(s), in.pos());
        for (std::uint32_t v = 0; v < count; ++v) {
            const std::size_t p_at = in.pos();
            Vec3 p;
            for (int c = 0; c < 3; ++c) {
                const float f = in.read<float>("coordinate");
                if (!std::isfinite(f)) throw ParseError("non-finite coordinate", p_at + 4 * c);
                p[c] = f;
            }
            positions.push_back(p);
        }
        offsets.push_back(static_cast<std::uint32_t>(positions.size()));
    }
    if (in.remaining() != 0) throw ParseError("trailing bytes after last strand", in.pos());
    return Hairstyle(std::move(positions), std::move(offsets));
}

std::vector<std::uint8_t> serialize_hairstyle(const Hairstyle& hair) {
    std::vector<std::uint8_t> out;
    out.reserve(12 + 4 * hair.strand_count() + 12 * hair.particle_count());
    out.insert(out.end(), {'H', 'A', 'I', 'R'});
    put<std::uint32_t>(out, 1);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(hair.strand_count()));
    for (std::size_t s = 0; s < hair.strand_count(); ++s) {
        put<std::uint32_t>(out, hair.strand_size(s));
        for (auto i = hair.strand_begin(s); i < hair.strand_end(s); ++i)
            for (int c = 0; c < 3; ++c) put<float>(out, static_cast<float>(hair.positions()[i][c]));
    }
    return out;
}

Hairstyle load_hairstyle(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return parse_hairstyle(bytes);
}

void save_hairstyle(const Hairstyle& hair, const std::filesystem::path& path) {
    write_file_bytes(path, serialize_hairstyle(hair));
}

// --- OBJ ------------------------------------------------------------------------

Mesh parse_obj(const std::string& text) {
    Mesh mesh;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    std::vector<Eigen::Vector3i> raw_faces;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag) || tag[0] == '#') continue;
        if (tag == "v") {
            Vec3 v;
            if (!(ls >> v[0] >> v[1] >> v[2]) || !v.allFinite())
                throw ParseError("malformed vertex line", line_no);
            mesh.vertices.push_back(v);
        } else if (tag == "f") {
            std::vector<long> idx;
            std::string token;
            while (ls >> token) {
                const auto slash = token.find('/');
                try {
                    idx.push_back(std::stol(token.substr(0, slash)));
                } catch (const std::exception&) {
                    throw ParseError("malformed face index '" + token + "'", line_no);
                }
            }
            if (idx.size() != 3) throw ParseError("non-triangle face", line_no);
            Eigen::Vector3i f;
            for (int c = 0; c < 3; ++c) {
                if (idx[c] < 1) throw ParseError("face index must be 1-based and positive", line_no);
                f[c] = static_cast<int>(idx[c] - 1);
            }
            raw_faces.push_back(f);
        }
        // other statements (vn, vt, o, g, s, ...) are ignored
    }
    for (const auto& f : raw_faces) {
        for (int c = 0; c < 3; ++c)
            if (static_cast<std::size_t>(f[c]) >= mesh.vertices.size())
                throw ParseError("face references vertex beyond the vertex list", line_no);
    }
    mesh.faces = std::move(raw_faces);
    return mesh;
}

Mesh load_obj(const std::filesystem::path& path) { return parse_obj(read_file_text(path)); }

void save_obj(const Mesh& mesh, const std::filesystem::path& path) {
    std::ostringstream out;
    out << std::setprecision(17);
    for (const auto& v : mesh.vertices) out << "v " << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
    for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
    write_file_text(path, out.str());
}

// --- skeleton JSON ----------------------------------------------------------------

Skeleton parse_skeleton_json(const std::string& text) {
    Skeleton sk;
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("skeleton JSON: ") + e.what(), e.byte);
    }
    try {
        for (const auto& b : doc.at("bones")) {
            Bone bone;
            bone.name = b.at("name").get<std::string>();
            for (int c = 0; c < 3; ++c) {
                bone.head[c] = b.at("head").at(c).get<double>();
                bone.tail[c] = b.at("tail").at(c).get<double>();
            }
            sk.bones.push_back(bone);
        }
        for (const auto& row : doc.at("weights")) {
            std::map<int, double> w;
            for (const auto& [key, value] : row.items()) w[std::stoi(key)] = value.get<double>();
            sk.weights.push_back(std::move(w));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("skeleton JSON: ") + e.what(), 0);
    } catch (const std::invalid_argument&) {
        throw ParseError("skeleton JSON: weight keys must be bone indices", 0);
    }
    return sk;
}

std::string skeleton_to_json(const Skeleton& sk) {
    nlohmann::json doc;
    doc["bones"] = nlohmann::json::array();
    for (const auto& b : sk.bones) {
        doc["bones"].push_back({{"name", b.name},
                                {"head", {b.head[0], b.head[1], b.head[2]}},
                                {"tail", {b.tail[0], b.tail[1], b.tail[2]}}});
    }
    doc["weights"] = nlohmann::json::array();
    for (const auto& row : sk.weights) {
        nlohmann::json r = nlohmann::json::object();
        for (const auto& [bone, w] : row) r[std::to_string(bone)] = w;
        doc["weights"].push_back(r);
    }
    return doc.dump();
}

BodyModel make_body(Mesh mesh, Skeleton skeleton, double region_threshold, LoadWarnings* warnings) {
    BodyModel body;
    body.vertices = std::move(mesh.vertices);
    body.faces = std::move(mesh.faces);
    body.bones = std::move(skeleton.bones);
    body.skin_weights = std::move(skeleton.weights);
    if (body.skin_weights.size() != body.vertices.size())
        throw ValidationError("weights has " + std::to_string(body.skin_weights.size()) +
                              " rows but the mesh has " + std::to_string(body.vertices.size()) + " vertices");
    for (std::size_t v = 0; v < body.skin_weights.size(); ++v) {
        auto& row = body.skin_weights[v];
        double sum = 0.0;
        for (const auto& [bone, w] : row) {
            if (w < 0.0 || !std::isfinite(w))
                throw ValidationError("vertex " + std::to_string(v) + " has an invalid weight");
            sum += w;
        }
        if (!(sum > 0.0)) throw ValidationError("weights of vertex " + std::to_string(v) + " cannot be normalized");
        if (std::abs(sum - 1.0) > 1e-6) {
            for (auto& [bone, w] : row) w /= sum;
            if (warnings)
                warnings->messages.push_back("renormalized weights of vertex " + std::to_string(v) +
                                             " (sum was " + std::to_string(sum) + ")");
        }
    }
    body.validate();
    body.compute_valid_regions(region_threshold);
    return body;
}

BodyModel load_body(const std::filesystem::path& mesh_path, const std::filesystem::path& skeleton_path,
                    double region_threshold, LoadWarnings* warnings) {
    return make_body(load_obj(mesh_path), parse_skeleton_json(read_file_text(skeleton_path)),
                     region_threshold, warnings);
}

void save_body(const BodyModel& body, const std::filesystem::path& mesh_path,
               const std::filesystem::path& skeleton_path) {
    save_obj(Mesh{body.vertices, body.faces}, mesh_path);
    write_file_text(skeleton_path, skeleton_to_json(Skeleton{body.bones, body.skin_weights}));
}

// --- config -----------------------------------------------------------------------

namespace {

template <typename F>
void for_each_config_field(AdaptationConfig& c, F&& f) {
    f("alpha", c.alpha);
    f("beta", c.beta);
    f("k", c.k);
    f("eps_c", c.eps_c);
    f("eps_s", c.eps_s);
    f("sigma_bone", c.sigma_bone);
    f("sigma_gamma", c.sigma_gamma);
    f("n_guides", c.n_guides);
    f("region_threshold", c.region_threshold);
    f("tol_primal", c.tol_primal);
    f("tol_dual", c.tol_dual);
    f("max_admm_iters", c.max_admm_iters);
    f("max_outer", c.max_outer);
    f("tol_outer_rel", c.tol_outer_rel);
    f("penetration_cutoff", c.penetration_cutoff);
    f("membrane_mu", c.membrane_mu);
    f("membrane_lambda", c.membrane_lambda);
    f("seed", c.seed);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

AdaptationConfig parse_config(const std::string& text) {
    AdaptationConfig config;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected key = value", line_no);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        bool known = false;
        for_each_config_field(config, [&](const char* name, auto& field) {
            if (key != name) return;
            known = true;
            using T = std::decay_t<decltype(field)>;
            try {
                std::size_t used = 0;
                if constexpr (std::is_same_v<T, bool>) {
                    if (value == "true" || value == "1") field = true;
                    else if (value == "false" || value == "0") field = false;
                    else throw std::invalid_argument("bool");
                    used = value.size();
                } else if constexpr (std::is_same_v<T, int>) {
                    field = std::stoi(value, &used);
                } else if constexpr (std::is_same_v<T, std::uint64_t>) {
                    field = std::stoull(value, &used);
                } else {
                    field = std::stod(value, &used);
                }
                if (used != value.size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw ParseError("invalid value '" + value + "' for " + key, line_no);
            }
        });
        if (!known) throw ParseError("unknown config key '" + key + "'", line_no);
    }
    config.validate();
    return config;
}

AdaptationConfig load_config(const std::filesystem::path& path) { return parse_config(read_file_text(path)); }

std::string config_to_text(const AdaptationConfig& config) {
    std::ostringstream out;
    out << std::setprecision(17);
    AdaptationConfig copy = config;
    for_each_config_field(copy, [&](const char* name, auto& field) {
        using T = std::decay_t<decltype(field)>;
        if constexpr (std::is_same_v<T, bool>) out << name << " = " << (field ? "true" : "false") << '\n';
        else out << name << " = " << field << '\n';
    });
    return out.str();
}

// --- files --------------------------------------------------------------------------

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    std::vector<std::uint8_t> bytes(size);
    if (size && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size)))
        throw IoError("cannot read " + path.string());
    return bytes;
}

std::string read_file_text(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return std::string(bytes.begin(), bytes.end());
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path.string());
}

void write_file_text(const std::filesystem::path& path, const std::string& text) {
    write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (auto b : bytes) {
        h ^= b;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace hairadapt
