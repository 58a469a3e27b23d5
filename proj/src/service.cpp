#include "hairadapt/service.hpp"

#include <iostream>

namespace hairadapt {

namespace {

class ApiError : public std::runtime_error {
public:
    ApiError(int status, std::string code, const std::string& message)
        : std::runtime_error(message), status(status), code(std::move(code)) {}
    int status;
    std::string code;
};

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
    send_json(res, status, {{"error", {{"code", code}, {"message", message}}}});
}

template <class Handler>
httplib::Server::Handler guarded(Handler handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
        try {
            handler(req, res);
        } catch (const ApiError& e) {
            send_error(res, e.status, e.code, e.what());
        } catch (const nlohmann::json::exception& e) {
            send_error(res, 400, "bad_request", e.what());
        } catch (const ParseError& e) {
            send_error(res, 422, "parse_error", e.what());
        } catch (const ValidationError& e) {
            send_error(res, 422, "validation_failed", e.what());
        } catch (const IoError& e) {
            send_error(res, 422, "io_error", e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "internal", e.what());
        }
    };
}

nlohmann::json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return nlohmann::json::object();
    auto j = nlohmann::json::parse(req.body);
    if (!j.is_object()) throw ApiError(400, "bad_request", "request body must be a JSON object");
    return j;
}

}  // namespace

std::string to_string(JobStatus s) {
    switch (s) {
        case JobStatus::Queued: return "queued";
        case JobStatus::Running: return "running";
        case JobStatus::Succeeded: return "succeeded";
        case JobStatus::Failed: return "failed";
    }
    return "unknown";
}

HairService::HairService(ServiceConfig config) : config_(std::move(config)) { config_.adaptation.validate(); }

HairService::~HairService() { wait_for_jobs(); }

void HairService::wait_for_jobs() {
    std::vector<std::thread> workers;
    {
        std::lock_guard lock(registry_mutex_);
        workers.swap(workers_);
    }
    for (auto& w : workers) w.join();
}

void HairService::mount(httplib::Server& server) {
    server.Post("/sessions", guarded([this](const auto& req, auto& res) { create_session(req, res); }));
    server.Get(R"(/sessions/([^/]+)/scalp)", guarded([this](const auto& req, auto& res) { get_scalp(req, res); }));
    server.Post(R"(/sessions/([^/]+)/hairline)",
                guarded([this](const auto& req, auto& res) { post_hairline(req, res); }));
    server.Post(R"(/sessions/([^/]+)/retarget)",
                guarded([this](const auto& req, auto& res) { post_retarget(req, res); }));
    server.Get(R"(/sessions/([^/]+)/result)", guarded([this](const auto& req, auto& res) { get_result(req, res); }));
    server.Get(R"(/jobs/([^/]+))", guarded([this](const auto& req, auto& res) { get_job(req, res); }));
}

std::shared_ptr<Session> HairService::find_session(const std::string& id) {
    std::lock_guard lock(registry_mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw ApiError(404, "session_not_found", "no session '" + id + "'");
    return it->second;
}

std::shared_ptr<Job> HairService::find_job(const std::string& id) {
    std::lock_guard lock(registry_mutex_);
    const auto it = jobs_.find(id);
    if (it == jobs_.end()) throw ApiError(404, "job_not_found", "no job '" + id + "'");
    return it->second;
}

std::filesystem::path HairService::resolve(const std::string& relative) const {
    namespace fs = std::filesystem;
    const fs::path rel(relative);
    if (relative.empty() || rel.is_absolute()) throw ApiError(400, "invalid_path", "paths must be relative: '" + relative + "'");
    const auto root = fs::weakly_canonical(config_.model_root);
    const auto full = fs::weakly_canonical(root / rel);
    const auto [r, f] = std::mismatch(root.begin(), root.end(), full.begin(), full.end());
    if (r != root.end()) throw ApiError(400, "invalid_path", "path leaves the model root: '" + relative + "'");
    return full;
}

void HairService::create_session(const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    const auto path = [&](const char* key) {
        if (!body.contains(key) || !body[key].is_string())
            throw ApiError(400, "bad_request", std::string("missing path '") + key + "'");
        return resolve(body[key].get<std::string>());
    };
    auto session = std::make_shared<Session>();
    const double threshold = config_.adaptation.region_threshold;
    session->source = load_hairstyle(path("hair"));
    session->source_body = load_body(path("sourceMesh"), path("sourceSkeleton"), threshold);
    session->target_body = load_body(path("targetMesh"), path("targetSkeleton"), threshold);
    const auto pair = validate_pair(session->source_body, session->target_body);
    if (!pair.ok) throw ValidationError("source/target bodies are incompatible: " + pair.message);
    if (body.contains("cache")) session->cache_dir = path("cache");
    {
        std::lock_guard lock(registry_mutex_);
        session->id = "s" + std::to_string(next_session_++);
        sessions_[session->id] = session;
    }
    send_json(res, 201,
              {{"id", session->id},
               {"strands", session->source.strand_count()},
               {"particles", session->source.particle_count()}});
}

const Preprocessed& HairService::ensure_preprocessed(Session& s) {
    if (s.preprocessed) return *s.preprocessed;
    const auto& cfg = config_.adaptation;
    if (s.cache_dir && std::filesystem::exists(*s.cache_dir / "manifest.json")) {
        s.preprocessed = std::make_shared<const Preprocessed>(load_preprocessed(*s.cache_dir, s.source, cfg));
    } else {
        auto pre = preprocess(s.source, s.source_body, cfg);
        if (s.cache_dir) save_preprocessed(pre, *s.cache_dir);
        s.preprocessed = std::make_shared<const Preprocessed>(std::move(pre));
    }
    return *s.preprocessed;
}

const InitialTransfer& HairService::ensure_transfer(Session& s) {
    if (!s.transfer)
        s.transfer = transfer_from_anchors(ensure_preprocessed(s).anchors, s.source, s.target_body,
                                           config_.adaptation.eps_s);
    return *s.transfer;
}

ScalpContext& HairService::ensure_scalp(Session& s) {
    if (!s.scalp) s.scalp = std::make_unique<ScalpContext>(s.target_body, s.source, ensure_transfer(s).p_hat);
    return *s.scalp;
}

void HairService::get_scalp(const httplib::Request& req, httplib::Response& res) {
    const auto session = find_session(req.matches[1]);
    std::lock_guard lock(session->mutex);
    send_json(res, 200, ensure_scalp(*session).to_json());
}

void HairService::post_hairline(const httplib::Request& req, httplib::Response& res) {
    const auto session = find_session(req.matches[1]);
    const auto edit = parse_hairline_edit(req.body);
    std::lock_guard lock(session->mutex);
    const auto& scalp = ensure_scalp(*session);
    const MembraneMaterial material{config_.adaptation.membrane_mu, config_.adaptation.membrane_lambda};
    auto relocation = std::make_shared<const RelocationOutcome>(scalp.relocate(edit, Relocator::Membrane, material));
    session->edit = edit;
    session->relocation = relocation;

    const auto& p_hat = session->transfer->p_hat;
    const auto& hair = session->source;
    nlohmann::json roots = nlohmann::json::array(), travel = nlohmann::json::array();
    for (std::size_t s = 0; s < relocation->roots.size(); ++s) {
        const auto& r = relocation->roots[s];
        roots.push_back({{"strand", s},
                         {"face", r.where.face},
                         {"bary", {r.where.bary[1], r.where.bary[2]}},
                         {"position", {r.position.x(), r.position.y(), r.position.z()}}});
        travel.push_back(r.travel);
    }
    nlohmann::json guides = nlohmann::json::array();
    for (auto g : session->preprocessed->guides.guides) {
        const Vec3 shift = relocation->roots[g].position - p_hat[hair.root_of(g)];
        nlohmann::json pts = nlohmann::json::array();
        for (auto i = hair.strand_begin(g); i < hair.strand_end(g); ++i) {
            const Vec3 p = p_hat[i] + shift;
            pts.push_back({p.x(), p.y(), p.z()});
        }
        guides.push_back({{"strand", g}, {"points", std::move(pts)}});
    }
    send_json(res, 200,
              {{"relocatedRoots", std::move(roots)},
               {"travelDistances", std::move(travel)},
               {"densityChange",
                {{"deformedArea", to_json(relocation->density_deformed)},
                 {"restArea", to_json(relocation->density_rest)}}},
               {"previewGuides", std::move(guides)},
               {"membrane",
                {{"converged", relocation->membrane.converged},
                 {"iterations", relocation->membrane.iterations},
                 {"diagnostic", relocation->membrane.diagnostic}}}});
}

void HairService::post_retarget(const httplib::Request& req, httplib::Response& res) {
    const auto session = find_session(req.matches[1]);
    const auto body = parse_body(req);
    const bool use_edit = body.value("useEdit", false);
    std::lock_guard lock(session->mutex);
    if (session->running) throw ApiError(409, "job_running", "session already has a running job " + session->running->id);
    std::optional<HairlineTuning> tuning;
    if (use_edit) {
        if (!session->relocation) throw ApiError(409, "no_edit", "post a hairline edit before a tuned retarget");
        tuning = make_tuning(session->source, *session->relocation, config_.adaptation.sigma_gamma);
    }
    ensure_preprocessed(*session);
    auto job = std::make_shared<Job>();
    job->session = session->id;
    {
        std::lock_guard reg(registry_mutex_);
        job->id = "j" + std::to_string(next_job_++);
        jobs_[job->id] = job;
        session->running = job;
        workers_.emplace_back(&HairService::run_job, this, session, job, session->preprocessed, std::move(tuning));
    }
    send_json(res, 202, {{"jobId", job->id}});
}

void HairService::run_job(std::shared_ptr<Session> session, std::shared_ptr<Job> job,
                          std::shared_ptr<const Preprocessed> pre, std::optional<HairlineTuning> tuning) {
    job->status = JobStatus::Running;
    const auto progress = [&job](int it, int max_outer) {
        const double p = 0.05 + 0.85 * std::min(1.0, double(it) / std::max(1, max_outer));
        double cur = job->progress.load();
        while (p > cur && !job->progress.compare_exchange_weak(cur, p)) {
        }
    };
    try {
        const auto out = retarget(session->source, *pre, session->target_body, config_.adaptation, {},
                                  tuning ? &*tuning : nullptr, progress);
        auto bytes = std::make_shared<const std::vector<std::uint8_t>>(
            serialize_hairstyle(session->source.with_positions(out.positions)));
        {
            std::lock_guard lock(job->mutex);
            job->report = to_json(out);
        }
        {
            std::lock_guard lock(session->mutex);
            session->result = std::move(bytes);
            session->running.reset();
        }
        job->progress = 1.0;
        job->status = JobStatus::Succeeded;
    } catch (const std::exception& e) {
        {
            std::lock_guard lock(job->mutex);
            job->error = e.what();
        }
        {
            std::lock_guard lock(session->mutex);
            session->running.reset();
        }
        job->status = JobStatus::Failed;
    }
}

void HairService::get_job(const httplib::Request& req, httplib::Response& res) {
    const auto job = find_job(req.matches[1]);
    nlohmann::json j = {{"id", job->id},
                        {"session", job->session},
                        {"status", to_string(job->status.load())},
                        {"progress", job->progress.load()}};
    std::lock_guard lock(job->mutex);
    if (!job->error.empty()) j["error"] = {{"code", "job_failed"}, {"message", job->error}};
    if (!job->report.is_null()) j["report"] = job->report;
    send_json(res, 200, j);
}

void HairService::get_result(const httplib::Request& req, httplib::Response& res) {
    const auto session = find_session(req.matches[1]);
    std::shared_ptr<const std::vector<std::uint8_t>> bytes;
    {
        std::lock_guard lock(session->mutex);
        bytes = session->result;
    }
    if (!bytes) throw ApiError(404, "no_result", "session has no finished retarget");
    res.status = 200;
    res.set_content(std::string(bytes->begin(), bytes->end()), "application/octet-stream");
}

void serve(const ServiceConfig& config, const std::string& host, int port) {
    HairService service(config);
    httplib::Server server;
    service.mount(server);
    std::cerr << "listening on " << host << ':' << port << '\n';
    if (!server.listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace hairadapt
