#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "recon/mapping.hpp"

namespace recon {

constexpr std::int64_t kGameDurationMs = 720'000;

// Even ids are complex fields, odd ids simple ones.
double corr_length_for_field(int id);

// Directory of accepted fields, one archive file per id.
class FieldArchive {
public:
    // Writes fields 0..count-1 of size n; field id uses seed_base + id.
    static void generate(const std::filesystem::path& dir, int count, int n, std::uint64_t seed_base);
    static std::shared_ptr<FieldArchive> open(const std::filesystem::path& dir);

    int size() const { return count_; }
    int grid() const { return n_; }
    const std::filesystem::path& dir() const { return dir_; }
    // Loaded on first use; safe to call concurrently. Ids wrap around the
    // archive, whose size is even so parity is kept.
    std::shared_ptr<const MorseField> field(int id) const;

private:
    std::filesystem::path dir_;
    int count_ = 0;
    int n_ = 0;
    mutable std::mutex mu_;
    mutable std::map<int, std::shared_ptr<const MorseField>> cache_;
};

struct SessionEvent {
    std::int64_t t_ms = 0;
    int field_id = 0;
    std::string type;    // click | program | next_area
    Point point;         // click location, or program origin
    std::string action;  // gradient | isoline | rejected (clicks and programs)
    Point origin;        // where the traced program started
    int polyline = -1;   // index within the area
    std::string nonce;
};

struct SessionLog {
    std::string session_id;
    std::string player;
    std::int64_t start_ms = 0;
    std::int64_t duration_ms = kGameDurationMs;
    std::vector<int> field_ids;  // in play order
    std::vector<SessionEvent> events;
};

nlohmann::json event_to_json(const SessionEvent& e);
SessionEvent event_from_json(const nlohmann::json& j);
nlohmann::json log_to_json(const SessionLog& log);
SessionLog log_from_json(const nlohmann::json& j);

struct ClickResult {
    // Failed: the program could not be traced; logged as rejected.
    enum class Status { Gradient, Isoline, RejectedIsoline, Failed, Expired } status = Status::Expired;
    int polyline = -1;
    const Polyline* line = nullptr;  // valid until the next call
};

class GameSession {
public:
    GameSession(std::string id, std::string player, std::shared_ptr<const FieldArchive> archive, int first_field,
                std::int64_t start_ms);

    const std::string& id() const { return log_.session_id; }
    const std::string& player() const { return log_.player; }
    bool active(std::int64_t now_ms) const { return now_ms < log_.start_ms + log_.duration_ms; }
    double remaining_s(std::int64_t now_ms) const;
    int field_id() const { return log_.field_ids.back(); }
    const MapState& map() const { return *area_; }
    const SessionLog& log() const { return log_; }

    // Empty space maps a gradient; a hit on a gradient path maps the isoline
    // through the nearest path point; a hit on an isoline is refused.
    ClickResult handle_click(Point p, std::int64_t t_ms, const std::string& nonce = "");
    // Direct motion program, bypassing click resolution (synthetic players).
    ClickResult apply_program(PolyKind kind, Point origin, std::int64_t t_ms);
    // Seals the current area and loads the next field id. False if expired.
    bool next_area(std::int64_t t_ms);

private:
    std::int64_t stamp(std::int64_t t_ms) const;
    ClickResult map(PolyKind kind, Point point, Point origin, std::int64_t t, const std::string& type,
                    const std::string& nonce);

    std::shared_ptr<const FieldArchive> archive_;
    SessionLog log_;
    std::unique_ptr<MapState> area_;
};

// Replay of a session log against the archive.
struct AreaReplay {
    int field_id = 0;
    std::shared_ptr<const MorseField> field;
    std::unique_ptr<MapState> map;
    std::vector<std::size_t> events;  // log indices of the events applied here
};

struct SessionReplay {
    std::vector<AreaReplay> areas;
    std::vector<std::string> errors;      // verification failures
    std::vector<std::string> violations;  // free-play departures from the protocol
    bool ok() const { return errors.empty(); }
};

// Called before each applied motion program with the map state it acts on.
using ReplayObserver = std::function<void(std::size_t event, const MapState& before)>;
SessionReplay replay_session(const SessionLog& log, const FieldArchive& archive, const ReplayObserver& observe = {});

// Oracle-side V^o: cells holding at least one saddle, i.e. cells whose chi
// would be <= -1 once every extremum inside them is known.
std::vector<char> topological_cells(const DataPartition& part);
double topological_measure(const DataPartition& part);
// Cell of the level-set component through p.
int cell_at(const MapState& map, Point p);

enum class PlayerKind { UniformRandom, Beta };

struct SyntheticPlayerConfig {
    PlayerKind kind = PlayerKind::UniformRandom;
    double beta = 1.0;
    int areas = 1;
    int isoline_clicks = 100;  // per area
    double gradient_prob = 0.25;
    std::int64_t click_interval_ms = 2000;
    std::uint64_t seed = 1;
};

// Uniform-random players start isolines at uniform points of the domain.
// beta players pick V^o with probability (mu(V^o)/mu(X))^beta, else its
// complement, then an arc-length uniform point of the mapped gradient paths
// inside that region; when no mapped gradient reaches the region they first
// map a gradient from a uniform point inside it. Other gradients start at
// uniform points of the domain.
SessionLog synthetic_player(const SyntheticPlayerConfig& cfg, std::shared_ptr<const FieldArchive> archive,
                            int first_field, const std::string& player);

}  // namespace recon
