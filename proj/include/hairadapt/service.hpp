#pragma once

#include "hairadapt/pipeline.hpp"

#include "httplib.h"

#include <atomic>
#include <mutex>
#include <thread>

namespace hairadapt {

struct ServiceConfig {
    /// Session paths are resolved against this directory and may not leave it.
    std::filesystem::path model_root = ".";
    AdaptationConfig adaptation;
};

enum class JobStatus { Queued, Running, Succeeded, Failed };

std::string to_string(JobStatus s);

struct Job {
    std::string id;
    std::string session;
    std::atomic<JobStatus> status{JobStatus::Queued};
    std::atomic<double> progress{0.0};
    std::mutex mutex;
    std::string error;
    nlohmann::json report;
};

struct Session {
    std::string id;
    std::mutex mutex;
    Hairstyle source;
    BodyModel source_body;
    BodyModel target_body;
    std::optional<std::filesystem::path> cache_dir;

    std::shared_ptr<const Preprocessed> preprocessed;
    std::optional<InitialTransfer> transfer;
    std::unique_ptr<ScalpContext> scalp;
    std::optional<HairlineEdit> edit;
    std::shared_ptr<const RelocationOutcome> relocation;
    std::shared_ptr<Job> running;
    /// Bytes of the latest finished retarget; never modified once published.
    std::shared_ptr<const std::vector<std::uint8_t>> result;
};

/// Sessions and retarget jobs behind the editor's HTTP API.
class HairService {
public:
    explicit HairService(ServiceConfig config);
    ~HairService();
    HairService(const HairService&) = delete;
    HairService& operator=(const HairService&) = delete;

    void mount(httplib::Server& server);
    /// Block until every started job has finished.
    void wait_for_jobs();

private:
    std::shared_ptr<Session> find_session(const std::string& id);
    std::shared_ptr<Job> find_job(const std::string& id);
    std::filesystem::path resolve(const std::string& relative) const;

    void create_session(const httplib::Request& req, httplib::Response& res);
    void get_scalp(const httplib::Request& req, httplib::Response& res);
    void post_hairline(const httplib::Request& req, httplib::Response& res);
    void post_retarget(const httplib::Request& req, httplib::Response& res);
    void get_job(const httplib::Request& req, httplib::Response& res);
    void get_result(const httplib::Request& req, httplib::Response& res);

    // Callers hold the session mutex.
    const Preprocessed& ensure_preprocessed(Session& s);
    const InitialTransfer& ensure_transfer(Session& s);
    ScalpContext& ensure_scalp(Session& s);

    void run_job(std::shared_ptr<Session> session, std::shared_ptr<Job> job,
                 std::shared_ptr<const Preprocessed> pre, std::optional<HairlineTuning> tuning);

    ServiceConfig config_;
    std::mutex registry_mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::map<std::string, std::shared_ptr<Job>> jobs_;
    std::vector<std::thread> workers_;
    std::uint64_t next_session_ = 1;
    std::uint64_t next_job_ = 1;
};

/// Listen on host:port until the process is stopped.
void serve(const ServiceConfig& config, const std::string& host, int port);

}  // namespace hairadapt
