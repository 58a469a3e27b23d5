#include "hairadapt/pipeline.hpp"

#include <chrono>

namespace hairadapt {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::span<const std::uint8_t> as_bytes(const std::string& s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

}  // namespace

std::uint64_t hash_hairstyle(const Hairstyle& hair) { return fnv1a(serialize_hairstyle(hair)); }

std::uint64_t hash_body(const BodyModel& body) {
    std::uint64_t h = fnv1a({reinterpret_cast<const std::uint8_t*>(body.vertices.data()),
                             body.vertices.size() * sizeof(Vec3)});
    h = fnv1a({reinterpret_cast<const std::uint8_t*>(body.faces.data()), body.faces.size() * sizeof(Eigen::Vector3i)},
              h);
    return fnv1a(as_bytes(skeleton_to_json({body.bones, body.skin_weights})), h);
}

Preprocessed preprocess(const Hairstyle& hair, const BodyModel& body, const AdaptationConfig& config) {
    const auto t0 = std::chrono::steady_clock::now();
    Preprocessed pre;
    pre.anchors = compute_anchors(hair, body, config.sigma_bone);
    pre.features = build_knn_features(hair, config.k);
    pre.guides = select_guides(hair, config.n_guides, config.seed);
    pre.decoupled = build_decoupled_features(hair, pre.guides.guides, config.k);
    pre.manifest.hair_hash = hash_hairstyle(hair);
    pre.manifest.body_hash = hash_body(body);
    pre.manifest.settings_hash = preprocess_settings_hash(config);
    pre.manifest.strands = hair.strand_count();
    pre.manifest.particles = hair.particle_count();
    pre.manifest.n_guides = static_cast<int>(pre.guides.guides.size());
    pre.manifest.k = config.k;
    pre.manifest.seed = config.seed;
    pre.seconds = seconds_since(t0);
    return pre;
}

void save_preprocessed(const Preprocessed& pre, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create cache directory " + dir.string() + ": " + ec.message());
    write_file_bytes(dir / "anchors.anch", serialize_anchors(pre.anchors));
    write_file_bytes(dir / "features.lapf", serialize_features(pre.features));
    write_file_bytes(dir / "decoupled.lapf", serialize_features(pre.decoupled));
    write_file_text(dir / "guides.json", guides_to_json(pre.guides) + "\n");
    write_file_text(dir / "manifest.json", to_json(pre.manifest).dump(1) + "\n");
}

Preprocessed load_preprocessed(const std::filesystem::path& dir, const Hairstyle& hair,
                               const AdaptationConfig& config) {
    Preprocessed pre;
    pre.manifest = parse_manifest(read_file_text(dir / "manifest.json"));
    if (pre.manifest.hair_hash != hash_hairstyle(hair))
        throw ValidationError("cache in " + dir.string() + " was built from a different hairstyle");
    if (pre.manifest.settings_hash != preprocess_settings_hash(config))
        throw ValidationError("cache in " + dir.string() + " was built with different preprocessing settings");
    pre.anchors = parse_anchors(read_file_bytes(dir / "anchors.anch"));
    if (pre.anchors.size() != hair.particle_count())
        throw ValidationError("anchor cache does not cover every particle");
    pre.features = parse_features(read_file_bytes(dir / "features.lapf"), &hair);
    pre.decoupled = parse_features(read_file_bytes(dir / "decoupled.lapf"), &hair);
    pre.guides = parse_guides(read_file_text(dir / "guides.json"));
    for (auto g : pre.guides.guides)
        if (g >= hair.strand_count()) throw ValidationError("guide index out of range");
    if (pre.guides.hash != descriptor_hash(strand_descriptors(hair)))
        throw ValidationError("guide cache descriptor hash does not match the hairstyle");
    return pre;
}

RetargetOutcome retarget(const Hairstyle& source, const Preprocessed& pre, const BodyModel& target,
                         const AdaptationConfig& config, const RetargetOptions& options,
                         const HairlineTuning* tuning, const ProgressCallback& progress) {
    config.validate();
    if (pre.anchors.size() != source.particle_count())
        throw ValidationError("preprocessed data does not match the hairstyle");
    const auto t_total = std::chrono::steady_clock::now();
    RetargetOutcome out;
    out.runtime.preprocess = pre.seconds;

    auto t0 = std::chrono::steady_clock::now();
    out.transfer = transfer_from_anchors(pre.anchors, source, target, config.eps_s);
    out.runtime.initial_transfer = seconds_since(t0);
    const MeshQuery query(target);

    std::map<std::uint32_t, Vec3> roots;
    for (std::size_t s = 0; s < source.strand_count(); ++s) roots[source.root_of(s)] = out.transfer.p_hat[source.root_of(s)];
    ParticleWeightsView gamma;
    if (tuning) {
        for (const auto& [s, p] : tuning->moved_roots) {
            if (s >= source.strand_count()) throw ValidationError("moved root refers to a missing strand");
            roots[source.root_of(s)] = p;
        }
        if (tuning->weights.gamma.size() != source.particle_count())
            throw ValidationError("weights do not match the hairstyle");
        gamma = tuning->weights.gamma;
        out.runtime.relocation = tuning->relocation_seconds;
    }

    auto global_solve = [&]() {
        const auto problem = make_problem(source, out.transfer.p_hat, pre.features, query, config, gamma, &roots);
        return iterate_adaptation(problem, progress);
    };

    t0 = std::chrono::steady_clock::now();
    if (options.mode == SolveMode::Global) {
        auto result = global_solve();
        out.positions = std::move(result.positions);
        out.report = std::move(result.report);
        out.runtime.full_solve = seconds_since(t0);
        out.guide_count = source.strand_count();
    } else {
        auto result = multiscale_solve(source, pre.guides, pre.decoupled, out.transfer.p_hat, query, config, gamma,
                                       &roots, progress);
        out.runtime.multiscale = seconds_since(t0);
        out.positions = std::move(result.positions);
        out.report = std::move(result.coarse.report);
        out.fine = std::move(result.fine);
        out.guide_count = pre.guides.guides.size();
        if (options.compare_global) {
            t0 = std::chrono::steady_clock::now();
            const auto full = global_solve();
            out.runtime.full_solve = seconds_since(t0);
            out.global_discrepancy =
                regression_metrics(source.with_positions(out.positions), source.with_positions(full.positions));
        }
    }
    out.max_violation = max_penetration_violation(out.positions, source, query, config.eps_c);
    out.runtime.total = seconds_since(t_total) + out.runtime.relocation + pre.seconds;
    return out;
}

bool solver_failed(const RetargetOutcome& outcome) {
    if (outcome.report.diverged) return true;
    for (const auto& it : outcome.report.history)
        if (!it.qp_converged && !it.polished) return true;
    return outcome.fine && !outcome.fine->failures.empty();
}

nlohmann::json to_json(const RetargetOutcome& o) {
    nlohmann::json j;
    j["solver"] = to_json(o.report);
    j["runtime"] = to_json(o.runtime);
    j["maxViolation"] = o.max_violation;
    j["guides"] = o.guide_count;
    j["discrepant"] = o.transfer.discrepant.size();
    if (o.fine) {
        nlohmann::json failures = nlohmann::json::array();
        for (const auto& [s, why] : o.fine->failures) failures.push_back({{"strand", s}, {"reason", why}});
        j["fine"] = {{"strands", o.fine->strands},
                     {"converged", o.fine->converged},
                     {"maxOuterIterations", o.fine->max_outer_iterations},
                     {"failures", failures}};
    }
    if (o.global_discrepancy) j["globalDiscrepancy"] = to_json(*o.global_discrepancy);
    return j;
}

nlohmann::json to_json(const RelocationOutcome& r, bool with_density_entries) {
    nlohmann::json roots = nlohmann::json::array();
    for (const auto& root : r.roots)
        roots.push_back({{"face", root.where.face},
                         {"bary", {root.where.bary[1], root.where.bary[2]}},
                         {"position", {root.position.x(), root.position.y(), root.position.z()}},
                         {"travel", root.travel}});
    nlohmann::json j;
    j["method"] = to_string(r.method);
    j["roots"] = std::move(roots);
    j["densityChange"] = {{"deformedArea", to_json(r.density_deformed, with_density_entries)},
                          {"restArea", to_json(r.density_rest, with_density_entries)}};
    if (r.method == Relocator::Membrane)
        j["membrane"] = {{"iterations", r.membrane.iterations},
                         {"converged", r.membrane.converged},
                         {"lineSearchFailed", r.membrane.line_search_failed},
                         {"initialEnergy", r.membrane.initial_energy},
                         {"finalEnergy", r.membrane.final_energy},
                         {"gradientNorm", r.membrane.gradient_norm},
                         {"tolerance", r.membrane.tolerance},
                         {"diagnostic", r.membrane.diagnostic}};
    j["seconds"] = r.seconds;
    return j;
}

ScalpContext::ScalpContext(const BodyModel& target, const Hairstyle& topology, const Points& positions,
                           std::optional<std::array<std::uint32_t, 2>> ear_markers, ChartKind chart,
                           const std::string& head_bone)
    : body_(&target), head_(std::make_unique<HeadPatch>(extract_head_patch(target, head_bone))) {
    if (positions.size() != topology.particle_count()) throw ValidationError("positions do not match the hairstyle");
    std::vector<SurfacePoint> roots;
    roots.reserve(topology.strand_count());
    for (std::size_t s = 0; s < topology.strand_count(); ++s) roots.push_back(head_->project(positions[topology.root_of(s)]));
    scalp_ = extract_scalp(target, *head_, roots);
    chart_ = std::make_unique<ParamChart>(*head_, chart);
    markers_ = ear_markers ? *ear_markers : default_ear_markers(scalp_);
    split_ = split_hairline(scalp_, markers_);
}

std::vector<std::uint32_t> ScalpContext::turning_points() const { return detect_turning_points(scalp_, split_); }

HairlineEdit ScalpContext::identity() const { return identity_edit(*body_, scalp_, split_); }

RelocationOutcome ScalpContext::relocate(const HairlineEdit& edit, Relocator method,
                                         const MembraneMaterial& material) const {
    if (edit.ear_markers != markers_) throw ValidationError("edit ear markers do not match the session's hairline split");
    const auto t0 = std::chrono::steady_clock::now();
    RelocationOutcome out;
    out.method = method;
    const auto h = build_correspondence(*body_, *head_, scalp_, split_, edit);
    out.deformed = deform_scalp(method, scalp_, *head_, *chart_, h, material, &out.membrane);
    out.roots = relocate_roots(scalp_, *head_, out.deformed);
    out.density_deformed = density_change_deformed(scalp_, out.deformed);
    out.density_rest = density_change_rest(scalp_, out.roots);
    out.seconds = seconds_since(t0);
    return out;
}

nlohmann::json ScalpContext::to_json() const {
    const auto vec3 = [](const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); };
    const auto tri = [](const Eigen::Vector3i& f) { return nlohmann::json::array({f[0], f[1], f[2]}); };
    nlohmann::json j;
    nlohmann::json vertices = nlohmann::json::array(), faces = nlohmann::json::array();
    for (const auto& v : scalp_.rest) vertices.push_back(vec3(v));
    for (const auto& f : scalp_.local_faces) faces.push_back(tri(f));
    j["vertices"] = std::move(vertices);
    j["vertexIds"] = scalp_.vertices;
    j["faces"] = std::move(faces);
    j["faceIds"] = scalp_.faces;
    std::vector<std::uint32_t> loop, front;
    for (auto v : scalp_.boundary_loop) loop.push_back(scalp_.vertices[v]);
    for (auto v : split_.front) front.push_back(scalp_.vertices[v]);
    j["hairlineLoop"] = loop;
    j["frontSegment"] = front;
    j["turningPoints"] = turning_points();
    j["earMarkers"] = markers_;
    nlohmann::json head_vertices = nlohmann::json::array(), head_faces = nlohmann::json::array();
    for (const auto& v : head_->positions) head_vertices.push_back(vec3(v));
    for (const auto& f : head_->local_faces) head_faces.push_back(tri(f));
    j["head"] = {{"vertices", std::move(head_vertices)},
                 {"vertexIds", head_->vertices},
                 {"faces", std::move(head_faces)},
                 {"faceIds", head_->faces}};
    return j;
}

HairlineTuning make_tuning(const Hairstyle& source, const RelocationOutcome& relocation, double sigma_gamma) {
    if (relocation.roots.size() != source.strand_count())
        throw ValidationError("relocation covers " + std::to_string(relocation.roots.size()) + " roots, hairstyle has " +
                              std::to_string(source.strand_count()) + " strands");
    HairlineTuning t;
    std::vector<double> travel(source.strand_count());
    for (std::size_t s = 0; s < source.strand_count(); ++s) {
        travel[s] = relocation.roots[s].travel;
        if (travel[s] > 0.0) t.moved_roots[static_cast<std::uint32_t>(s)] = relocation.roots[s].position;
    }
    t.weights = compute_weights(source, travel, sigma_gamma);
    t.relocation_seconds = relocation.seconds;
    return t;
}

}  // namespace hairadapt
