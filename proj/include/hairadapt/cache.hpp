#pragma once

#include "hairadapt/multiscale.hpp"
#include "hairadapt/positioning.hpp"

#include "json.hpp"

namespace hairadapt {

/// "ANCH", u32 version, u32 count, then per particle: u16 bone, f32 t,
/// u32 face, 2 x f32 barycentrics (corners 1 and 2), f32 offset.
std::vector<std::uint8_t> serialize_anchors(const LocalAnchorSet& anchors);
LocalAnchorSet parse_anchors(std::span<const std::uint8_t> bytes);

/// "LAPF", u32 version, u32 count, u32 k, then per particle k x (u32 index,
/// f32 weight) padded with index 0xFFFFFFFF, followed by 3 x f32 reference.
std::vector<std::uint8_t> serialize_features(const LaplacianFeatureSet& features);
/// Weights are renormalized to sum to one and, when `source` is given, the
/// reference features are recomputed from it and checked against the file.
LaplacianFeatureSet parse_features(std::span<const std::uint8_t> bytes, const Hairstyle* source = nullptr);

/// `{"guides": [...], "descriptorHash": "<16 hex digits>", "cost": c}`
std::string guides_to_json(const GuideSelection& selection);
GuideSelection parse_guides(const std::string& text);

std::string hash_hex(std::uint64_t h);
std::uint64_t parse_hash_hex(const std::string& s);

/// Inputs a preprocessing run was derived from.
struct CacheManifest {
    std::uint64_t hair_hash = 0;
    std::uint64_t body_hash = 0;
    std::uint64_t settings_hash = 0;
    std::size_t strands = 0;
    std::size_t particles = 0;
    int n_guides = 0;
    int k = 0;
    std::uint64_t seed = 0;
};

nlohmann::json to_json(const CacheManifest& m);
CacheManifest parse_manifest(const std::string& text);

/// Hash of the configuration values preprocessing depends on.
std::uint64_t preprocess_settings_hash(const AdaptationConfig& config);

}  // namespace hairadapt
