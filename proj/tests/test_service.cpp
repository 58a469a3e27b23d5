#include "doctest.h"
#include "support.hpp"

#include "hairadapt/service.hpp"

#include <chrono>
#include <thread>

using namespace testing;
using nlohmann::json;

namespace {

AdaptationConfig service_config() {
    AdaptationConfig cfg;
    cfg.n_guides = 20;
    return cfg;
}

/// Model files on disk, a running server on an ephemeral port and a client.
struct LiveService {
    std::filesystem::path root = scratch_dir("service");
    Scene scene = make_scene(300);
    HairService service{ServiceConfig{root, service_config()}};
    httplib::Server server;
    std::thread thread;
    int port = 0;

    LiveService() {
        save_body(scene.source, root / "a.obj", root / "a.skeleton.json");
        save_body(scene.target, root / "b.obj", root / "b.skeleton.json");
        save_hairstyle(scene.hair, root / "hair.hair");
        service.mount(server);
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~LiveService() {
        server.stop();
        thread.join();
        service.wait_for_jobs();
    }

    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(120, 0);
        return c;
    }

    static json session_body() {
        return {{"hair", "hair.hair"},
                {"sourceMesh", "a.obj"},
                {"sourceSkeleton", "a.skeleton.json"},
                {"targetMesh", "b.obj"},
                {"targetSkeleton", "b.skeleton.json"}};
    }

    std::string create_session() const {
        auto c = client();
        const auto r = c.Post("/sessions", session_body().dump(), "application/json");
        REQUIRE(r);
        REQUIRE(r->status == 201);
        return json::parse(r->body).at("id").get<std::string>();
    }
};

std::string error_code(const httplib::Result& r) { return json::parse(r->body).at("error").at("code").get<std::string>(); }

/// An edit that puts the front hairline back where it is, built only from the
/// scalp payload the way an editor would.
json identity_edit_from_scalp(const json& scalp) {
    const auto& faces = scalp.at("faces");
    const auto& face_ids = scalp.at("faceIds");
    const auto& vertex_ids = scalp.at("vertexIds");
    const auto& verts = scalp.at("vertices");
    std::map<std::uint32_t, std::size_t> local;
    for (std::size_t i = 0; i < vertex_ids.size(); ++i) local[vertex_ids[i].get<std::uint32_t>()] = i;

    json curve = json::array();
    std::vector<Vec3> pts;
    const auto front = scalp.at("frontSegment").get<std::vector<std::uint32_t>>();
    for (auto bv : front) {
        const std::size_t lv = local.at(bv);
        pts.emplace_back(verts[lv][0].get<double>(), verts[lv][1].get<double>(), verts[lv][2].get<double>());
        for (std::size_t f = 0; f < faces.size(); ++f) {
            int corner = -1;
            for (int k = 0; k < 3; ++k)
                if (faces[f][k].get<std::size_t>() == lv) corner = k;
            if (corner < 0) continue;
            // The wire bary holds the weights of corners 1 and 2 of the body face,
            // whose corner order matches the local face.
            curve.push_back({{"face", face_ids[f]}, {"bary", {corner == 1 ? 1.0 : 0.0, corner == 2 ? 1.0 : 0.0}}});
            break;
        }
    }
    std::vector<double> s{0.0};
    for (std::size_t i = 1; i < pts.size(); ++i) s.push_back(s.back() + (pts[i] - pts[i - 1]).norm());
    json turning = json::array();
    for (auto tv : scalp.at("turningPoints")) {
        const auto it = std::find(front.begin(), front.end(), tv.get<std::uint32_t>());
        turning.push_back({{"hairlineVertex", tv}, {"curveParam", s[it - front.begin()] / s.back()}});
    }
    return {{"curve", curve}, {"turningPoints", turning}, {"earMarkers", scalp.at("earMarkers")}};
}

json wait_for(LiveService& live, const std::string& job, std::vector<double>* progress) {
    auto c = live.client();
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::minutes(5);
    while (std::chrono::steady_clock::now() < deadline) {
        const auto r = c.Get("/jobs/" + job);
        REQUIRE(r);
        REQUIRE(r->status == 200);
        auto j = json::parse(r->body);
        if (progress) progress->push_back(j.at("progress").get<double>());
        const auto status = j.at("status").get<std::string>();
        if (status == "succeeded" || status == "failed") return j;
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    FAIL("job did not finish");
    return {};
}

}  // namespace

TEST_SUITE("service") {

TEST_CASE("session creation validates its paths") {
    LiveService live;
    auto c = live.client();

    auto body = LiveService::session_body();
    body["hair"] = "../outside.hair";
    auto r = c.Post("/sessions", body.dump(), "application/json");
    REQUIRE(r);
    CHECK(r->status == 400);
    CHECK(error_code(r) == "invalid_path");

    body["hair"] = (live.root / "hair.hair").string();
    r = c.Post("/sessions", body.dump(), "application/json");
    CHECK(r->status == 400);
    CHECK(error_code(r) == "invalid_path");

    body = LiveService::session_body();
    body.erase("targetMesh");
    r = c.Post("/sessions", body.dump(), "application/json");
    CHECK(r->status == 400);
    CHECK(error_code(r) == "bad_request");

    body = LiveService::session_body();
    body["hair"] = "missing.hair";
    r = c.Post("/sessions", body.dump(), "application/json");
    CHECK(r->status == 422);
    CHECK(error_code(r) == "io_error");

    r = c.Post("/sessions", "{not json", "application/json");
    CHECK(r->status == 400);

    r = c.Post("/sessions", LiveService::session_body().dump(), "application/json");
    REQUIRE(r->status == 201);
    const auto j = json::parse(r->body);
    CHECK(j.at("strands") == 300);
    CHECK(j.at("particles") == live.scene.hair.particle_count());
}

TEST_CASE("unknown sessions and jobs are 404") {
    LiveService live;
    auto c = live.client();
    auto r = c.Get("/sessions/s99/scalp");
    REQUIRE(r);
    CHECK(r->status == 404);
    CHECK(error_code(r) == "session_not_found");
    r = c.Get("/jobs/j99");
    CHECK(r->status == 404);
    CHECK(error_code(r) == "job_not_found");
    const auto id = live.create_session();
    r = c.Get("/sessions/" + id + "/result");
    CHECK(r->status == 404);
    CHECK(error_code(r) == "no_result");
    r = c.Post("/sessions/" + id + "/retarget", R"({"useEdit": true})", "application/json");
    CHECK(r->status == 409);
    CHECK(error_code(r) == "no_edit");
}

TEST_CASE("scalp, identity hairline, tuned retarget and result download") {
    LiveService live;
    auto c = live.client();
    const auto id = live.create_session();

    auto r = c.Get("/sessions/" + id + "/scalp");
    REQUIRE(r);
    REQUIRE(r->status == 200);
    const auto scalp = json::parse(r->body);
    for (const char* key : {"vertices", "vertexIds", "faces", "faceIds", "hairlineLoop", "frontSegment",
                            "turningPoints", "earMarkers", "head"})
        CHECK(scalp.contains(key));
    CHECK(scalp.at("frontSegment").front() == scalp.at("earMarkers")[0]);
    CHECK(scalp.at("frontSegment").back() == scalp.at("earMarkers")[1]);
    CHECK(scalp.at("vertices").size() == scalp.at("vertexIds").size());

    SUBCASE("malformed and mismatched edits are rejected") {
        r = c.Post("/sessions/" + id + "/hairline", R"({"curve": 3})", "application/json");
        CHECK(r->status == 422);
        auto edit = identity_edit_from_scalp(scalp);
        edit["earMarkers"] = {edit["earMarkers"][1], edit["earMarkers"][0]};
        r = c.Post("/sessions/" + id + "/hairline", edit.dump(), "application/json");
        CHECK(r->status == 422);
        CHECK(error_code(r) == "validation_failed");
    }

    SUBCASE("identity edit") {
        r = c.Post("/sessions/" + id + "/hairline", identity_edit_from_scalp(scalp).dump(), "application/json");
        REQUIRE(r);
        REQUIRE(r->status == 200);
        const auto h = json::parse(r->body);
        CHECK(h.at("relocatedRoots").size() == 300);
        for (const auto& t : h.at("travelDistances")) CHECK(t.get<double>() <= 1e-8);
        CHECK(h.at("previewGuides").size() == 20);
        CHECK(h.at("previewGuides")[0].at("points").size() > 1);
        CHECK(h.at("membrane").at("converged") == true);
        CHECK(h.at("densityChange").at("deformedArea").at("lInf").get<double>() <= 1e-8);
        CHECK(h.at("densityChange").at("restArea").at("lInf").get<double>() == 0.0);
        CHECK(h.at("relocatedRoots")[0].at("bary").size() == 2);

        r = c.Post("/sessions/" + id + "/retarget", R"({"useEdit": true})", "application/json");
        REQUIRE(r);
        REQUIRE(r->status == 202);
        const auto job = json::parse(r->body).at("jobId").get<std::string>();
        const auto again = c.Post("/sessions/" + id + "/retarget", "{}", "application/json");
        REQUIRE(again);
        CHECK(again->status == 409);
        CHECK(error_code(again) == "job_running");

        std::vector<double> progress;
        const auto done = wait_for(live, job, &progress);
        CHECK(done.at("status") == "succeeded");
        CHECK(done.at("progress") == 1.0);
        CHECK(done.at("session") == id);
        CHECK(done.at("report").contains("maxViolation"));
        CHECK(std::is_sorted(progress.begin(), progress.end()));

        r = c.Get("/sessions/" + id + "/result");
        REQUIRE(r);
        REQUIRE(r->status == 200);
        CHECK(r->get_header_value("Content-Type") == "application/octet-stream");
        const std::vector<std::uint8_t> bytes(r->body.begin(), r->body.end());
        const auto result = parse_hairstyle(bytes);
        CHECK(result.offsets() == live.scene.hair.offsets());

        // An identity edit must give the untuned library result on the same files exactly.
        const auto cfg = service_config();
        const auto source = load_body(live.root / "a.obj", live.root / "a.skeleton.json");
        const auto target = load_body(live.root / "b.obj", live.root / "b.skeleton.json");
        const auto pre = preprocess(live.scene.hair, source, cfg);
        const auto direct = retarget(live.scene.hair, pre, target, cfg);
        CHECK(bytes == serialize_hairstyle(live.scene.hair.with_positions(direct.positions)));
    }
}

}  // TEST_SUITE
