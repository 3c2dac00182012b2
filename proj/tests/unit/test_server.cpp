#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <set>
#include <thread>

#include "archive_fixture.hpp"
#include "recon/errors.hpp"
#include "recon/server.hpp"

using namespace recon;
using nlohmann::json;

namespace {

// Game server on an ephemeral loopback port with a settable clock.
struct LiveServer {
    std::shared_ptr<std::atomic<std::int64_t>> now = std::make_shared<std::atomic<std::int64_t>>(5'000'000);
    GameServer game;
    httplib::Server http;
    std::thread thread;
    int port = -1;

    explicit LiveServer(const std::filesystem::path& log_dir,
                        const std::filesystem::path& archive = test::archive_dir())
        : game(ServerConfig{archive, log_dir, "*", [c = now] { return c->load(); }}) {
        game.mount(http);
        port = http.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { http.listen_after_bind(); });
        http.wait_until_ready();
    }
    ~LiveServer() {
        http.stop();
        thread.join();
    }

    httplib::Client client() const { return httplib::Client("127.0.0.1", port); }
};

json post(httplib::Client& c, const std::string& path, const json& body, int expect) {
    const auto r = c.Post(path, body.dump(), "application/json");
    REQUIRE(r);
    CHECK(r->status == expect);
    return r->body.empty() ? json() : json::parse(r->body);
}

json get(httplib::Client& c, const std::string& path, int expect) {
    const auto r = c.Get(path);
    REQUIRE(r);
    CHECK(r->status == expect);
    return json::parse(r->body);
}

// Keys that would leak the hidden field to a player.
void scan_for_leaks(const json& j) {
    static const std::set<std::string> forbidden{"H_cond", "H_bar", "R_k", "level",    "critical_points",
                                                 "reeb",   "value", "chi", "H_M",      "critical_level_sets",
                                                 "lo_end", "hi_end", "endpoints", "info"};
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) {
            CHECK_MESSAGE(forbidden.count(k) == 0, "leaked key ", k);
            scan_for_leaks(v);
        }
    } else if (j.is_array()) {
        for (const auto& v : j) scan_for_leaks(v);
    }
}

}  // namespace

TEST_CASE("game over HTTP") {
    test::TempDir logs("server_logs");
    std::string id;
    json first_click;
    {
        LiveServer s(logs.path);
        auto c = s.client();

        const auto h = get(c, "/healthz", 200);
        CHECK(h["archive"] == true);

        post(c, "/sessions", json::object(), 400);
        post(c, "/sessions", {{"player", ""}}, 400);
        const auto created = post(c, "/sessions", {{"player", "ann"}}, 201);
        scan_for_leaks(created);
        id = created["session"].get<std::string>();
        CHECK(id.size() == 32);
        CHECK(created["field"]["id"] == 0);
        CHECK(created["field"]["d"] == 0.25);
        CHECK(created["remaining_s"] == 720.0);

        const auto other = post(c, "/sessions", {{"player", "bob"}}, 201);
        CHECK(other["session"] != id);

        post(c, "/sessions/0123abcd/clicks", {{"x", 0.5}, {"y", 0.5}}, 404);
        post(c, "/sessions/" + id + "/clicks", {{"x", 0.5}}, 400);
        post(c, "/sessions/" + id + "/clicks", {{"x", 1.5}, {"y", 0.5}}, 400);

        *s.now += 2000;
        first_click = post(c, "/sessions/" + id + "/clicks", {{"x", 0.4}, {"y", 0.45}, {"nonce", "n1"}}, 200);
        scan_for_leaks(first_click);
        CHECK(first_click["status"] == "gradient");
        CHECK(first_click["remaining_s"] == 718.0);
        const auto& pts = first_click["polyline"]["points"];
        REQUIRE(pts.size() > 4);

        // Retried request: same answer, no second program.
        const auto dup = post(c, "/sessions/" + id + "/clicks", {{"x", 0.4}, {"y", 0.45}, {"nonce", "n1"}}, 200);
        CHECK(dup["duplicate"] == true);
        CHECK(dup["polyline"]["id"] == first_click["polyline"]["id"]);

        *s.now += 1000;
        const auto mid = pts[pts.size() / 2];
        const auto iso = post(c, "/sessions/" + id + "/clicks", {{"x", mid[0]}, {"y", mid[1]}, {"nonce", "n2"}}, 200);
        scan_for_leaks(iso);
        CHECK(iso["status"] == "isoline");

        *s.now += 1000;
        const auto& ring = iso["polyline"]["points"];
        const auto on = ring[ring.size() / 2];
        const auto rej = post(c, "/sessions/" + id + "/clicks", {{"x", on[0]}, {"y", on[1]}}, 200);
        CHECK(rej["status"] == "rejected");
        CHECK(rej["reason"] == "on_isoline");

        get(c, "/sessions/" + id + "/reveal", 403);
        const auto log = get(c, "/sessions/" + id + "/log", 200);
        CHECK(log["events"].size() == 3);

        const auto next = post(c, "/sessions/" + id + "/next-area", json::object(), 200);
        CHECK(next["field"]["id"] == 1);
        CHECK(next["field"]["d"] == 0.5);
        scan_for_leaks(next);

        // A second session of the same player continues with unplayed fields.
        const auto again = post(c, "/sessions", {{"player", "ann"}}, 201);
        CHECK(again["field"]["id"] == 2);

        const auto opt = c.Options("/sessions");
        REQUIRE(opt);
        CHECK(opt->status == 204);
        CHECK(opt->get_header_value("Access-Control-Allow-Origin") == "*");

        *s.now += kGameDurationMs;
        post(c, "/sessions/" + id + "/clicks", {{"x", 0.2}, {"y", 0.2}}, 409);
        post(c, "/sessions/" + id + "/next-area", json::object(), 409);
        const auto rev = get(c, "/sessions/" + id + "/reveal", 200);
        REQUIRE(rev["areas"].size() == 2);
        CHECK(rev["areas"][0].contains("critical_points"));
        CHECK(rev["areas"][0].contains("critical_level_sets"));
        CHECK(rev["areas"][0].contains("reeb"));
        CHECK(rev["areas"][0]["reports"].size() == 3);
    }

    // Restart from the session files.
    LiveServer s(logs.path);
    CHECK(s.game.restored() == 3);
    auto c = s.client();
    const auto log = get(c, "/sessions/" + id + "/log", 200);
    CHECK(log["events"].size() == 4);
    CHECK(log["header"]["field_ids"] == json::array({0, 1}));
    const auto dup = post(c, "/sessions/" + id + "/clicks", {{"x", 0.4}, {"y", 0.45}, {"nonce", "n1"}}, 200);
    CHECK(dup["duplicate"] == true);
    CHECK(dup["polyline"]["id"] == first_click["polyline"]["id"]);
    const auto again = post(c, "/sessions", {{"player", "ann"}}, 201);
    CHECK(again["field"]["id"] == 3);
}

TEST_CASE("server without an archive") {
    test::TempDir logs("server_noarchive");
    LiveServer s(logs.path, logs.path / "nothing");
    auto c = s.client();
    CHECK(get(c, "/healthz", 200)["archive"] == false);
    post(c, "/sessions", {{"player", "ann"}}, 503);
}

TEST_CASE("session files restore to the same log") {
    test::TempDir logs("server_restore");
    std::string id;
    {
        GameServer g(ServerConfig{test::archive_dir(), logs.path, "*", [] { return std::int64_t{100}; }});
        id = g.create_session(R"({"player":"cy"})").body["session"];
        g.click(id, R"({"x":0.3,"y":0.6})");
        g.click(id, R"({"x":0.6,"y":0.3})");
        g.next_area(id);
    }
    const auto log = read_session_file(logs.path / (id + ".jsonl"));
    CHECK(log.events.size() == 3);
    const auto s = restore_session(log, test::archive());
    CHECK(log_to_json(s->log()) == log_to_json(log));

    auto bad = log;
    bad.events[1].origin.x += 0.1;
    CHECK_THROWS_AS(restore_session(bad, test::archive()), ConsistencyError);
    CHECK(new_session_id() != new_session_id());
}
