#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include <json.hpp>

#include "recon/game.hpp"

namespace httplib {
class Server;
}

namespace recon {

struct ServerConfig {
    std::filesystem::path archive_dir;
    std::filesystem::path log_dir;  // one append-only file per session
    std::string cors_origin = "*";
    std::function<std::int64_t()> clock;  // ms; defaults to the system clock
};

struct ApiResponse {
    int status = 200;
    nlohmann::json body;
};

// Game service. The handlers are transport-free so they can be driven
// directly; mount() binds them to HTTP routes.
class GameServer {
public:
    explicit GameServer(ServerConfig cfg);
    ~GameServer();

    ApiResponse create_session(const std::string& body);
    ApiResponse click(const std::string& id, const std::string& body);
    ApiResponse next_area(const std::string& id);
    ApiResponse log(const std::string& id);
    ApiResponse reveal(const std::string& id);
    ApiResponse health() const;

    void mount(httplib::Server& http);
    // Blocks until stop(). Returns false when the port cannot be bound.
    bool listen(const std::string& host, int port);
    void stop();

    bool archive_loaded() const { return archive_ != nullptr; }
    std::size_t session_count() const;
    // Sessions restored from the log directory at startup.
    int restored() const { return restored_; }

private:
    struct Entry;
    std::shared_ptr<Entry> find(const std::string& id) const;
    void restore_all();
    void append(Entry& e, std::size_t from);
    std::int64_t now() const { return cfg_.clock(); }

    ServerConfig cfg_;
    std::shared_ptr<FieldArchive> archive_;
    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
    std::map<std::string, int> next_field_;  // per player: next unplayed id
    int restored_ = 0;
    std::unique_ptr<httplib::Server> http_;
};

// 128 random bits as 32 hex digits.
std::string new_session_id();

// Append-only session file: header line, then one event per line.
SessionLog read_session_file(const std::filesystem::path& path);

// Rebuilds a live session by re-running its logged events. Throws
// ConsistencyError if the rebuilt log differs.
std::unique_ptr<GameSession> restore_session(const SessionLog& log, std::shared_ptr<const FieldArchive> archive);

}  // namespace recon
