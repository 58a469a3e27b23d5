#include "hairadapt/cache.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <sstream>

namespace hairadapt {

static_assert(std::endian::native == std::endian::little, "cache formats assume a little-endian host");

namespace {

constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kPadding = 0xFFFFFFFFu;

class Writer {
public:
    template <class T>
    void put(T v) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
        bytes.insert(bytes.end(), p, p + sizeof(T));
    }
    void magic(const char* m) { bytes.insert(bytes.end(), m, m + 4); }
    std::vector<std::uint8_t> bytes;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}
    template <class T>
    T get(const char* what) {
        if (pos_ + sizeof(T) > bytes_.size()) throw ParseError(std::string("truncated ") + what, pos_);
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    float finite(const char* what) {
        const std::size_t at = pos_;
        const float v = get<float>(what);
        if (!std::isfinite(v)) throw ParseError(std::string("non-finite ") + what, at);
        return v;
    }
    void magic(const char* m) {
        if (bytes_.size() < 4 || std::memcmp(bytes_.data(), m, 4) != 0)
            throw ParseError(std::string("bad magic, expected ") + m, 0);
        pos_ = 4;
    }
    void version() {
        const std::size_t at = pos_;
        if (get<std::uint32_t>("version") != kVersion) throw ParseError("unsupported version", at);
    }
    void finish() {
        if (pos_ != bytes_.size()) throw ParseError("trailing bytes", pos_);
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }
    std::size_t pos() const { return pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_anchors(const LocalAnchorSet& anchors) {
    Writer w;
    w.magic("ANCH");
    w.put(kVersion);
    w.put(static_cast<std::uint32_t>(anchors.size()));
    for (const auto& a : anchors) {
        w.put(a.bone);
        w.put(static_cast<float>(a.t));
        w.put(a.surface.face);
        w.put(static_cast<float>(a.surface.bary[1]));
        w.put(static_cast<float>(a.surface.bary[2]));
        w.put(static_cast<float>(a.eta));
    }
    return std::move(w.bytes);
}

LocalAnchorSet parse_anchors(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    r.magic("ANCH");
    r.version();
    const auto count = r.get<std::uint32_t>("count");
    constexpr std::size_t kRecord = 2 + 4 + 4 + 4 + 4 + 4;
    if (r.remaining() != std::size_t(count) * kRecord)
        throw ParseError("anchor payload size does not match count " + std::to_string(count), r.pos());
    LocalAnchorSet out(count);
    for (auto& a : out) {
        a.bone = r.get<std::uint16_t>("bone");
        a.t = r.finite("bone parameter");
        a.surface.face = r.get<std::uint32_t>("face");
        const std::size_t at = r.pos();
        const double b1 = r.finite("barycentric"), b2 = r.finite("barycentric");
        a.surface.bary = Vec3(1.0 - b1 - b2, b1, b2);
        if (!a.surface.valid()) throw ParseError("barycentrics outside the simplex", at);
        a.eta = r.finite("offset");
    }
    r.finish();
    return out;
}

std::vector<std::uint8_t> serialize_features(const LaplacianFeatureSet& f) {
    Writer w;
    w.magic("LAPF");
    w.put(kVersion);
    w.put(static_cast<std::uint32_t>(f.particle_count()));
    w.put(static_cast<std::uint32_t>(f.k));
    for (std::size_t i = 0; i < f.particle_count(); ++i) {
        const auto b = f.offsets[i], e = f.offsets[i + 1];
        if (e - b > static_cast<std::uint32_t>(f.k)) throw ValidationError("feature has more than k neighbours");
        for (int j = 0; j < f.k; ++j) {
            if (b + j < e) {
                w.put(f.neighbors[b + j]);
                w.put(static_cast<float>(f.weights[b + j]));
            } else {
                w.put(kPadding);
                w.put(0.0f);
            }
        }
        const Vec3 ref = f.has_feature(i) ? f.reference[i] : Vec3::Zero();
        for (int c = 0; c < 3; ++c) w.put(static_cast<float>(ref[c]));
    }
    return std::move(w.bytes);
}

LaplacianFeatureSet parse_features(std::span<const std::uint8_t> bytes, const Hairstyle* source) {
    Reader r(bytes);
    r.magic("LAPF");
    r.version();
    const auto count = r.get<std::uint32_t>("count");
    const auto k = r.get<std::uint32_t>("k");
    if (k < 1 || k > 1024) throw ParseError("implausible k " + std::to_string(k), r.pos() - 4);
    const std::size_t record = std::size_t(k) * 8 + 12;
    if (r.remaining() != std::size_t(count) * record)
        throw ParseError("feature payload size does not match count " + std::to_string(count), r.pos());
    if (source && source->particle_count() != count)
        throw ValidationError("feature cache covers " + std::to_string(count) + " particles, hairstyle has " +
                              std::to_string(source->particle_count()));
    LaplacianFeatureSet f;
    f.k = static_cast<int>(k);
    f.reference.resize(count, Vec3::Zero());
    std::vector<Vec3> stored(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::size_t start = f.neighbors.size();
        for (std::uint32_t j = 0; j < k; ++j) {
            const std::size_t at = r.pos();
            const auto idx = r.get<std::uint32_t>("neighbour");
            const float w = r.finite("weight");
            if (idx == kPadding) continue;
            if (idx >= count) throw ParseError("neighbour index out of range", at);
            f.neighbors.push_back(idx);
            f.weights.push_back(w);
        }
        double sum = 0.0;
        for (std::size_t e = start; e < f.weights.size(); ++e) sum += f.weights[e];
        if (f.weights.size() > start && !(sum > 0.0)) throw ParseError("feature weights sum to zero", r.pos());
        for (std::size_t e = start; e < f.weights.size(); ++e) f.weights[e] /= sum;
        f.offsets.push_back(static_cast<std::uint32_t>(f.neighbors.size()));
        const std::size_t n = f.neighbors.size() - start;
        if (n > 0 && n < k) f.sparse.push_back(i);
        for (int c = 0; c < 3; ++c) stored[i][c] = r.finite("reference");
        f.reference[i] = stored[i];
    }
    r.finish();
    if (source) {
        refresh_reference(f, source->positions());
        for (std::uint32_t i = 0; i < count; ++i) {
            if ((f.reference[i] - stored[i]).norm() > 1e-5 * (1.0 + stored[i].norm()))
                throw ValidationError("feature cache does not match the hairstyle at particle " + std::to_string(i));
        }
    }
    return f;
}

std::string hash_hex(std::uint64_t h) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

std::uint64_t parse_hash_hex(const std::string& s) {
    if (s.size() != 16 || s.find_first_not_of("0123456789abcdef") != std::string::npos)
        throw ValidationError("malformed hash '" + s + "'");
    return std::stoull(s, nullptr, 16);
}

std::string guides_to_json(const GuideSelection& sel) {
    nlohmann::ordered_json j;
    j["guides"] = sel.guides;
    j["descriptorHash"] = hash_hex(sel.hash);
    j["cost"] = sel.cost;
    return j.dump(1);
}

GuideSelection parse_guides(const std::string& text) {
    GuideSelection sel;
    try {
        const auto j = nlohmann::json::parse(text);
        sel.guides = j.at("guides").get<std::vector<std::uint32_t>>();
        sel.hash = parse_hash_hex(j.at("descriptorHash").get<std::string>());
        sel.cost = j.value("cost", 0.0);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed guide cache: ") + e.what());
    }
    if (!std::is_sorted(sel.guides.begin(), sel.guides.end()) ||
        std::adjacent_find(sel.guides.begin(), sel.guides.end()) != sel.guides.end())
        throw ValidationError("guide indices must be strictly increasing");
    return sel;
}

nlohmann::json to_json(const CacheManifest& m) {
    return {{"hairHash", hash_hex(m.hair_hash)},
            {"bodyHash", hash_hex(m.body_hash)},
            {"settingsHash", hash_hex(m.settings_hash)},
            {"strands", m.strands},
            {"particles", m.particles},
            {"nGuides", m.n_guides},
            {"k", m.k},
            {"seed", m.seed}};
}

CacheManifest parse_manifest(const std::string& text) {
    CacheManifest m;
    try {
        const auto j = nlohmann::json::parse(text);
        m.hair_hash = parse_hash_hex(j.at("hairHash").get<std::string>());
        m.body_hash = parse_hash_hex(j.at("bodyHash").get<std::string>());
        m.settings_hash = parse_hash_hex(j.at("settingsHash").get<std::string>());
        m.strands = j.at("strands").get<std::size_t>();
        m.particles = j.at("particles").get<std::size_t>();
        m.n_guides = j.at("nGuides").get<int>();
        m.k = j.at("k").get<int>();
        m.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed cache manifest: ") + e.what());
    }
    return m;
}

std::uint64_t preprocess_settings_hash(const AdaptationConfig& c) {
    std::ostringstream os;
    os << std::setprecision(17) << c.sigma_bone << ' ' << c.k << ' ' << c.n_guides << ' ' << c.seed << ' '
       << c.region_threshold;
    const std::string s = os.str();
    return fnv1a({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
}

}  // namespace hairadapt
