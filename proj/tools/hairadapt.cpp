// Command-line driver: preprocess, retarget, relocate, metrics, serve and
// generate (synthetic fixtures).

#include "hairadapt/fixtures.hpp"
#include "hairadapt/service.hpp"

#include "CLI11.hpp"

#include <iostream>

using namespace hairadapt;

namespace {

enum ExitCode { kOk = 0, kValidation = 1, kSolver = 2, kIo = 3 };

struct BodyPaths {
    std::string mesh, skeleton;
};

void add_body(CLI::App* cmd, BodyPaths& paths, const std::string& prefix, bool required) {
    auto* m = cmd->add_option("--" + prefix + "-mesh", paths.mesh, prefix + " body mesh (OBJ)");
    auto* s = cmd->add_option("--" + prefix + "-skeleton", paths.skeleton, prefix + " skeleton (JSON)");
    if (required) {
        m->required();
        s->required();
    }
}

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> guides;
    std::optional<double> solver_tol;
    std::optional<int> max_outer;

    AdaptationConfig load() const {
        AdaptationConfig c = config_path.empty() ? AdaptationConfig{} : load_config(config_path);
        if (seed) c.seed = *seed;
        if (guides) c.n_guides = *guides;
        if (solver_tol) c.tol_primal = c.tol_dual = *solver_tol;
        if (max_outer) c.max_outer = *max_outer;
        c.validate();
        return c;
    }
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config_path, "key = value configuration file");
    cmd->add_option("--seed", c.seed, "seed for guide clustering (default 0)");
    cmd->add_option("--guides", c.guides, "number of guide strands");
}

BodyModel load(const BodyPaths& p, const AdaptationConfig& c) {
    LoadWarnings warnings;
    auto body = load_body(p.mesh, p.skeleton, c.region_threshold, &warnings);
    for (const auto& w : warnings.messages) std::cerr << "warning: " << p.skeleton << ": " << w << '\n';
    return body;
}

/// Preprocessed data from a cache directory, or computed from the source body.
Preprocessed obtain(const Hairstyle& hair, const std::string& cache, const BodyPaths& source,
                    const AdaptationConfig& c) {
    if (!cache.empty() && std::filesystem::exists(std::filesystem::path(cache) / "manifest.json"))
        return load_preprocessed(cache, hair, c);
    if (source.mesh.empty()) throw ValidationError("either --cache with a manifest or --source-mesh is required");
    auto pre = preprocess(hair, load(source, c), c);
    if (!cache.empty()) save_preprocessed(pre, cache);
    return pre;
}

std::optional<std::array<std::uint32_t, 2>> markers_from(const std::vector<std::uint32_t>& v) {
    if (v.empty()) return std::nullopt;
    if (v.size() != 2) throw ValidationError("--ear-markers takes two vertex indices");
    return std::array<std::uint32_t, 2>{v[0], v[1]};
}

ChartKind parse_chart(const std::string& name) {
    if (name == "harmonic") return ChartKind::Harmonic;
    if (name == "tutte") return ChartKind::Tutte;
    throw ValidationError("unknown chart '" + name + "' (harmonic, tutte)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Strand hairstyle retargeting between characters"};
    app.require_subcommand(1);

    // preprocess
    auto* pre_cmd = app.add_subcommand("preprocess", "compute target-agnostic caches for a hairstyle");
    std::string hair_path, out_path, cache_dir;
    BodyPaths source, target;
    Common common;
    pre_cmd->add_option("--hair", hair_path, "source hairstyle")->required();
    add_body(pre_cmd, source, "source", true);
    pre_cmd->add_option("--out", out_path, "cache directory")->required();
    add_common(pre_cmd, common);

    // retarget
    auto* ret_cmd = app.add_subcommand("retarget", "adapt a hairstyle to a target character");
    bool global = false, compare_global = false;
    std::string report_path, edit_path, maps_path, runtime_path, weights_path, relocation_path, chart_name = "harmonic";
    std::vector<std::uint32_t> ear_markers;
    ret_cmd->add_option("--hair", hair_path, "source hairstyle")->required();
    ret_cmd->add_option("--cache", cache_dir, "preprocessing cache directory (created when missing)");
    add_body(ret_cmd, source, "source", false);
    add_body(ret_cmd, target, "target", true);
    ret_cmd->add_option("--out", out_path, "adapted hairstyle")->required();
    ret_cmd->add_option("--report", report_path, "solver report (JSON)");
    ret_cmd->add_flag("--global", global, "solve all strands together instead of the multi-scale scheme");
    ret_cmd->add_flag("--compare-global", compare_global, "also run the global solve and report the discrepancy");
    ret_cmd->add_option("--hairline", edit_path, "hairline edit (JSON) for a tuned retarget");
    ret_cmd->add_option("--ear-markers", ear_markers, "two hairline vertices splitting front and back")->expected(2);
    ret_cmd->add_option("--chart", chart_name, "scalp chart: harmonic or tutte")->check(CLI::IsMember({"harmonic", "tutte"}));
    ret_cmd->add_option("--solver-tol", common.solver_tol, "ADMM primal/dual tolerance");
    ret_cmd->add_option("--max-outer", common.max_outer, "maximum outer iterations");
    ret_cmd->add_option("--objective-maps", maps_path, "per-particle objective terms (CSV)");
    ret_cmd->add_option("--runtime", runtime_path, "runtime table (CSV)");
    ret_cmd->add_option("--weights", weights_path, "per-particle tuning weights (CSV, with --hairline)");
    ret_cmd->add_option("--relocation", relocation_path, "relocated roots and densities (JSON, with --hairline)");
    add_common(ret_cmd, common);

    // relocate
    auto* rel_cmd = app.add_subcommand("relocate", "move hair roots to follow a hairline edit");
    std::string method_name = "membrane", density_path, scalp_path, identity_path;
    rel_cmd->add_option("--hair", hair_path, "source hairstyle")->required();
    rel_cmd->add_option("--cache", cache_dir, "preprocessing cache directory (created when missing)");
    add_body(rel_cmd, source, "source", false);
    add_body(rel_cmd, target, "target", true);
    rel_cmd->add_option("--edit", edit_path, "hairline edit (JSON)");
    rel_cmd->add_option("--out", out_path, "relocation result (JSON)");
    rel_cmd->add_option("--method", method_name, "relocation method")
        ->check(CLI::IsMember({"membrane", "rbf3d", "rbf2d", "harmonic2d"}));
    rel_cmd->add_option("--chart", chart_name, "scalp chart: harmonic or tutte")->check(CLI::IsMember({"harmonic", "tutte"}));
    rel_cmd->add_option("--ear-markers", ear_markers, "two hairline vertices splitting front and back")->expected(2);
    rel_cmd->add_option("--density", density_path, "per-triangle density change (CSV, deformed-area)");
    rel_cmd->add_option("--scalp", scalp_path, "scalp mesh and hairline (JSON)");
    rel_cmd->add_option("--write-identity", identity_path, "write the unedited hairline as an edit (JSON)");
    add_common(rel_cmd, common);

    // metrics
    auto* met_cmd = app.add_subcommand("metrics", "regression metrics between two hairstyles");
    std::string a_path, b_path;
    met_cmd->add_option("a", a_path, "first hairstyle")->required();
    met_cmd->add_option("b", b_path, "second hairstyle")->required();
    met_cmd->add_option("--out", out_path, "write the metrics (JSON) here instead of stdout");

    // serve
    auto* srv_cmd = app.add_subcommand("serve", "HTTP service for the hairline editor");
    std::string root = ".", host = "127.0.0.1";
    int port = 8080;
    srv_cmd->add_option("--root", root, "model directory session paths are relative to");
    srv_cmd->add_option("--host", host, "bind address");
    srv_cmd->add_option("--port", port, "port");
    add_common(srv_cmd, common);

    // generate
    auto* gen_cmd = app.add_subcommand("generate", "write synthetic characters and a hairstyle");
    int preset = 0, particles = 20;
    std::size_t strands = 500;
    double curl = 0.0;
    std::uint64_t hair_seed = 0;
    std::vector<int> bodies{0, 1};
    gen_cmd->add_option("--out", out_path, "output directory")->required();
    gen_cmd->add_option("--preset", preset, "character the hairstyle is grown on");
    gen_cmd->add_option("--bodies", bodies, "character presets to write")->delimiter(',');
    gen_cmd->add_option("--strands", strands, "strand count");
    gen_cmd->add_option("--particles", particles, "particles per strand");
    gen_cmd->add_option("--curl", curl, "curl amplitude");
    gen_cmd->add_option("--hair-seed", hair_seed, "seed of the hairstyle generator");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    try {
        if (*pre_cmd) {
            const auto cfg = common.load();
            const auto hair = load_hairstyle(hair_path);
            const auto pre = preprocess(hair, load(source, cfg), cfg);
            save_preprocessed(pre, out_path);
            std::cout << to_json(pre.manifest).dump(1) << '\n';
        } else if (*ret_cmd) {
            const auto cfg = common.load();
            const auto hair = load_hairstyle(hair_path);
            const auto pre = obtain(hair, cache_dir, source, cfg);
            const auto body = load(target, cfg);
            if (!source.mesh.empty()) {
                const auto pair = validate_pair(load(source, cfg), body);
                if (!pair.ok) throw ValidationError("source/target bodies are incompatible: " + pair.message);
            }
            std::optional<HairlineTuning> tuning;
            std::optional<RelocationOutcome> relocation;
            if (!edit_path.empty()) {
                const auto transfer = transfer_from_anchors(pre.anchors, hair, body, cfg.eps_s);
                const ScalpContext scalp(body, hair, transfer.p_hat, markers_from(ear_markers), parse_chart(chart_name));
                relocation = scalp.relocate(parse_hairline_edit(read_file_text(edit_path)), Relocator::Membrane,
                                            {cfg.membrane_mu, cfg.membrane_lambda});
                tuning = make_tuning(hair, *relocation, cfg.sigma_gamma);
                if (!relocation_path.empty()) write_file_text(relocation_path, to_json(*relocation).dump(1) + "\n");
                if (!weights_path.empty()) write_file_text(weights_path, weights_csv(tuning->weights, hair));
            }
            RetargetOptions options;
            options.mode = global ? SolveMode::Global : SolveMode::Multiscale;
            options.compare_global = compare_global;
            const auto out = retarget(hair, pre, body, cfg, options, tuning ? &*tuning : nullptr);
            const auto result = hair.with_positions(out.positions);
            save_hairstyle(result, out_path);
            auto report = to_json(out);
            if (relocation) report["relocation"] = to_json(*relocation, false);
            if (!report_path.empty()) write_file_text(report_path, report.dump(1) + "\n");
            if (!runtime_path.empty()) write_file_text(runtime_path, runtime_table(out.runtime));
            if (!maps_path.empty()) {
                const MeshQuery query(body);
                std::map<std::uint32_t, Vec3> roots;
                for (std::size_t s = 0; s < hair.strand_count(); ++s)
                    roots[hair.root_of(s)] = out.positions[hair.root_of(s)];
                const auto problem = make_problem(hair, out.transfer.p_hat, pre.features, query, cfg,
                                                  tuning ? ParticleWeightsView(tuning->weights.gamma)
                                                         : ParticleWeightsView{},
                                                  &roots);
                write_file_text(maps_path, objective_maps_csv(objective_maps(problem, out.positions), hair));
            }
            std::cerr << "outer iterations " << out.report.outer_iterations << ", max violation "
                      << out.max_violation << ", total " << out.runtime.total << " s\n";
            if (solver_failed(out)) {
                std::cerr << "error: solver did not converge: " << out.report.diagnostic << '\n';
                return kSolver;
            }
        } else if (*rel_cmd) {
            const auto cfg = common.load();
            const auto hair = load_hairstyle(hair_path);
            const auto pre = obtain(hair, cache_dir, source, cfg);
            const auto body = load(target, cfg);
            const auto transfer = transfer_from_anchors(pre.anchors, hair, body, cfg.eps_s);
            const ScalpContext scalp(body, hair, transfer.p_hat, markers_from(ear_markers), parse_chart(chart_name));
            if (!identity_path.empty()) write_file_text(identity_path, hairline_edit_to_json(scalp.identity()) + "\n");
            if (!scalp_path.empty()) write_file_text(scalp_path, scalp.to_json().dump() + "\n");
            if (!edit_path.empty()) {
                const auto r = scalp.relocate(parse_hairline_edit(read_file_text(edit_path)),
                                              parse_relocator(method_name), {cfg.membrane_mu, cfg.membrane_lambda});
                const auto text = to_json(r).dump(1) + "\n";
                if (out_path.empty()) std::cout << text;
                else write_file_text(out_path, text);
                if (!density_path.empty()) write_file_text(density_path, density_csv(r.density_deformed));
                std::cerr << "L-inf density change " << r.density_deformed.linf << " (deformed-area), "
                          << r.density_rest.linf << " (rest-area)\n";
            } else if (identity_path.empty() && scalp_path.empty()) {
                throw ValidationError("relocate needs --edit, --write-identity or --scalp");
            }
        } else if (*met_cmd) {
            const auto m = regression_metrics(load_hairstyle(a_path), load_hairstyle(b_path));
            const auto text = to_json(m).dump(1) + "\n";
            if (out_path.empty()) std::cout << text;
            else write_file_text(out_path, text);
        } else if (*srv_cmd) {
            ServiceConfig sc;
            sc.model_root = root;
            sc.adaptation = common.load();
            serve(sc, host, port);
        } else if (*gen_cmd) {
            std::filesystem::create_directories(out_path);
            const std::filesystem::path dir(out_path);
            for (int b : bodies) {
                const auto shape = character_preset(b);
                const auto body = make_character(shape);
                save_body(body, dir / ("body" + std::to_string(b) + ".obj"),
                          dir / ("body" + std::to_string(b) + ".skeleton.json"));
            }
            const auto shape = character_preset(preset);
            HairParams hp;
            hp.strands = strands;
            hp.particles = particles;
            hp.curl = curl;
            hp.seed = hair_seed;
            save_hairstyle(make_hairstyle(make_character(shape), shape, hp), dir / "hair.hair");
        }
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kIo;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kIo;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const DegenerateAnchorError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kSolver;
    }
    return kOk;
}
