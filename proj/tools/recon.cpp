#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "recon/analysis.hpp"
#include "recon/errors.hpp"
#include "recon/mc.hpp"
#include "recon/server.hpp"
#include "recon/strategy.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace recon;

namespace {

constexpr int kExitVerify = 1;
constexpr int kExitUsage = 2;

struct VerificationFailed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw IoError("cannot read " + p.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream os(p, std::ios::binary);
    if (!os) throw IoError("cannot write " + p.string());
    os << text;
}

std::string csv_with_config(const json& config, const std::string& csv) {
    return "# config: " + config.dump() + "\n" + csv;
}

std::string svg_with_config(const json& config, std::string svg) {
    const auto at = svg.find('\n');
    std::string cfg = config.dump();
    // "--" may not appear inside an XML comment.
    for (std::size_t i; (i = cfg.find("--")) != std::string::npos;) cfg.replace(i, 2, "-\\-");
    return svg.insert(at + 1, "<!-- config: " + cfg + " -->\n");
}

std::vector<SessionLog> read_logs(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& de : fs::directory_iterator(dir))
        if (de.path().extension() == ".json" || de.path().extension() == ".jsonl") files.push_back(de.path());
    std::sort(files.begin(), files.end());
    std::vector<SessionLog> logs;
    for (const auto& f : files)
        logs.push_back(f.extension() == ".jsonl" ? read_session_file(f) : log_from_json(json::parse(read_file(f))));
    if (logs.empty()) throw IoError("no session logs in " + dir.string());
    return logs;
}

std::vector<double> beta_column(const fs::path& csv) {
    std::istringstream is(read_file(csv));
    std::string line;
    std::vector<double> out;
    bool header = true;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (header) {
            header = false;
            continue;
        }
        std::vector<std::string> f;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (f.size() >= 4 && !f[3].empty()) out.push_back(std::stod(f[3]));
    }
    return out;
}

MorseField regenerate(int n, double d, std::uint64_t seed) {
    MorseField mf;
    mf.field = make_field(n, d, seed);
    mf.topology = topology_partition(mf.field);
    return mf;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Topology-guided reconnaissance of random scalar fields"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "recon 1.0");
    std::function<void()> action;

    // field
    auto* field = app.add_subcommand("field", "Generate fields and field archives");
    field->require_subcommand(1);
    struct {
        int n = 256;
        double d = 0.25;
        std::uint64_t seed = 1;
        std::string out, json_out, reeb_out;
        int count = 20;
    } fo;
    auto* fgen = field->add_subcommand("gen", "Generate one Morse field");
    fgen->add_option("--n", fo.n, "Grid size")->check(CLI::Range(8, 4096));
    fgen->add_option("--d", fo.d, "Correlation length")->check(CLI::PositiveNumber);
    fgen->add_option("--seed", fo.seed, "Field seed");
    fgen->add_option("--out", fo.out, "Binary field file")->required();
    fgen->add_option("--json", fo.json_out, "Downsampled JSON view");
    fgen->add_option("--reeb", fo.reeb_out, "Reeb graph JSON");
    fgen->callback([&] {
        action = [&] {
            const MorseField mf = make_morse_field(fo.n, fo.d, fo.seed);
            save_field(mf.field, fo.out);
            if (!fo.json_out.empty()) write_file(fo.json_out, field_to_json(mf.field).dump());
            if (!fo.reeb_out.empty()) write_file(fo.reeb_out, reeb_to_json(mf.topology).dump(2));
            std::cout << "field seed " << mf.field.seed() << " (" << mf.reseeds << " reseeds), "
                      << mf.topology.extremum_count() << " extrema, " << mf.topology.saddle_count() << " saddles\n";
        };
    });
    auto* farch = field->add_subcommand("archive", "Generate a game field archive (even ids d=0.25, odd d=0.5)");
    farch->add_option("--dir", fo.out, "Archive directory")->required();
    farch->add_option("--count", fo.count, "Number of fields (even)")->check(CLI::Range(2, 100000));
    farch->add_option("--n", fo.n, "Grid size")->check(CLI::Range(8, 4096));
    farch->add_option("--seed", fo.seed, "Seed of field 0");
    farch->callback([&] {
        action = [&] {
            FieldArchive::generate(fo.out, fo.count, fo.n, fo.seed);
            std::cout << "wrote " << fo.count << " fields to " << fo.out << "\n";
        };
    });

    // run
    struct {
        std::string strategy = "topo";
        double T = 0.5, d = 0.25;
        int scan_n = 5, budget = 200, n = 256;
        std::uint64_t seed = 1, field_seed = 1;
        std::string trace, csv, field;
    } ro;
    auto* run = app.add_subcommand("run", "Run one strategy on one field");
    run->add_option("--strategy", ro.strategy, "topo | nscan")->check(CLI::IsMember({"topo", "nscan"}));
    run->add_option("--T", ro.T, "Exploration exponent")->check(CLI::NonNegativeNumber);
    run->add_option("--scan-n", ro.scan_n, "Isolines per n-scan gradient")->check(CLI::PositiveNumber);
    run->add_option("--budget", ro.budget, "Motion programs")->check(CLI::PositiveNumber);
    run->add_option("--seed", ro.seed, "Strategy seed");
    run->add_option("--n", ro.n, "Grid size")->check(CLI::Range(8, 4096));
    run->add_option("--d", ro.d, "Correlation length")->check(CLI::PositiveNumber);
    run->add_option("--field-seed", ro.field_seed, "Field seed");
    run->add_option("--field", ro.field, "Binary field file from 'field gen' (overrides --n/--d/--field-seed)");
    run->add_option("--trace,--out", ro.trace, "RunTrace JSONL output");
    run->add_option("--csv", ro.csv, "Per-step metrics CSV");
    run->callback([&] {
        action = [&] {
            const MorseField mf = ro.field.empty() ? make_morse_field(ro.n, ro.d, ro.field_seed) : [&] {
                MorseField m;
                m.field = load_field(ro.field);
                m.topology = topology_partition(m.field);
                return m;
            }();
            StrategyConfig cfg;
            cfg.kind = strategy_kind_from_string(ro.strategy);
            cfg.T = ro.T;
            cfg.n = ro.scan_n;
            cfg.budget = ro.budget;
            cfg.seed = ro.seed;
            const RunTrace t = run_strategy(mf, cfg);
            if (!ro.trace.empty()) write_file(ro.trace, trace_to_jsonl(t));
            const json config = {{"cmd", "run"},       {"strategy", ro.strategy}, {"T", ro.T},
                                 {"n_scan", ro.scan_n}, {"budget", ro.budget},     {"seed", ro.seed},
                                 {"n", mf.field.n()},    {"d", mf.field.corr_length()}, {"field_seed", mf.field.seed()}};
            if (!ro.csv.empty()) write_file(ro.csv, csv_with_config(config, reports_csv(t.reports, t.h_topology)));
            const auto& last = t.reports.back();
            std::cout << "H(M) " << t.h_topology << "  H(M|V_k) " << last.H_cond << " after " << last.k
                      << " programs\n";
            if (!t.error.empty()) std::cout << "stopped early: " << t.error << "\n";
        };
    });

    // mc
    auto* mc = app.add_subcommand("mc", "Monte-Carlo strategy experiments");
    mc->require_subcommand(1);
    struct {
        std::vector<std::string> strategies{"topo:T=0.5", "topo:T=2", "nscan:n=5"};
        Experiment exp;
        std::string out = "mc_out", a, b;
    } mo;
    auto* cmp = mc->add_subcommand("compare", "Paired comparison on shared random fields");
    cmp->add_option("--strategy", mo.strategies, "e.g. topo:T=0.5 or nscan:n=5 (repeatable)");
    cmp->add_option("--a", mo.a, "First strategy of a two-way comparison");
    cmp->add_option("--b", mo.b, "Second strategy of a two-way comparison");
    cmp->add_option("--trials", mo.exp.trials, "Paired trials")->check(CLI::PositiveNumber);
    cmp->add_option("--n", mo.exp.n, "Grid size")->check(CLI::Range(8, 4096));
    cmp->add_option("--d", mo.exp.d, "Correlation length")->check(CLI::PositiveNumber);
    cmp->add_option("--seed", mo.exp.seed_base, "Seed base");
    cmp->add_option("--budget", mo.exp.budget, "Programs per run")->check(CLI::PositiveNumber);
    cmp->add_option("--threads", mo.exp.threads, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
    cmp->add_option("--out", mo.out, "Output directory");
    cmp->callback([&] {
        action = [&] {
            if (!mo.a.empty() || !mo.b.empty()) {
                if (cmp->count("--strategy") == 0) mo.strategies.clear();
                for (const auto* s : {&mo.a, &mo.b})
                    if (!s->empty()) mo.strategies.push_back(*s);
            }
            for (const auto& s : mo.strategies) mo.exp.strategies.push_back(parse_strategy_spec(s));
            const ExperimentResult r = run_experiment(mo.exp);
            const json config = {{"cmd", "mc compare"}, {"strategies", mo.strategies}, {"trials", mo.exp.trials},
                                 {"n", mo.exp.n},        {"d", mo.exp.d},              {"seed", mo.exp.seed_base},
                                 {"budget", mo.exp.budget}};
            const fs::path out = mo.out;
            write_file(out / "raw.csv", csv_with_config(config, raw_csv(r)));
            write_file(out / "stats.csv", csv_with_config(config, stats_csv(r.stats)));
            write_file(out / "curves.svg", svg_with_config(config, curves_svg(r.stats, "H(M) - H(M|V_k)")));
            for (const auto& s : r.stats)
                std::cout << s.label << ": final mean " << s.mean.back() << " std " << s.stddev.back() << "\n";
            std::cout << r.reseeds << " reseeds, " << r.monotonicity_violations << " monotonicity violations\n";
            if (r.monotonicity_violations > 0) throw VerificationFailed("H(M|V_k) increased during a run");
        };
    });

    // synth
    struct {
        std::string archive, out, kind = "uniform";
        int players = 26, clicks = 100, areas = 1, first = 0;
        double beta = 1.0;
        std::uint64_t seed = 1;
    } so;
    auto* synth = app.add_subcommand("synth", "Synthetic game players");
    synth->add_option("--archive", so.archive, "Field archive")->required();
    synth->add_option("--out", so.out, "Directory for session logs")->required();
    synth->add_option("--kind", so.kind, "uniform | beta")->check(CLI::IsMember({"uniform", "beta"}));
    synth->add_option("--beta", so.beta, "Preference exponent of beta players")->check(CLI::NonNegativeNumber);
    synth->add_option("--players", so.players, "Number of players")->check(CLI::PositiveNumber);
    synth->add_option("--clicks", so.clicks, "Isoline clicks per area")->check(CLI::PositiveNumber);
    synth->add_option("--areas", so.areas, "Areas per player")->check(CLI::PositiveNumber);
    synth->add_option("--first-field", so.first, "Field id of the first player")->check(CLI::NonNegativeNumber);
    synth->add_option("--seed", so.seed, "Seed base");
    synth->callback([&] {
        action = [&] {
            auto archive = FieldArchive::open(so.archive);
            for (int i = 0; i < so.players; ++i) {
                SyntheticPlayerConfig c;
                c.kind = so.kind == "beta" ? PlayerKind::Beta : PlayerKind::UniformRandom;
                c.beta = so.beta;
                c.isoline_clicks = so.clicks;
                c.areas = so.areas;
                c.seed = Rng::mix(so.seed, static_cast<std::uint64_t>(i));
                char name[64];
                std::snprintf(name, sizeof name, "%s%03d", so.kind.c_str(), i);
                const SessionLog log = synthetic_player(c, archive, so.first + so.areas * i, name);
                write_file(fs::path(so.out) / (std::string(name) + ".json"), log_to_json(log).dump());
            }
            std::cout << "wrote " << so.players << " session logs to " << so.out << "\n";
        };
    });

    // analyze
    auto* analyze = app.add_subcommand("analyze", "Session log analysis");
    analyze->require_subcommand(1);
    struct {
        std::string logs, archive, out, hist, compare, groups = "terciles", a, b;
        bool one_sided = false;
    } ao;
    auto* betas = analyze->add_subcommand("betas", "Maximum-likelihood beta per player");
    betas->add_option("--logs", ao.logs, "Session log directory")->required();
    betas->add_option("--archive", ao.archive, "Field archive")->required();
    betas->add_option("--out", ao.out, "betas.csv")->required();
    betas->add_option("--hist", ao.hist, "Histogram SVG");
    betas->add_option("--compare", ao.compare, "Second log directory drawn in the histogram and K-S tested");
    betas->callback([&] {
        action = [&] {
            auto archive = FieldArchive::open(ao.archive);
            auto estimate_all = [&](const std::string& dir) {
                std::vector<BetaEstimate> est;
                for (const auto& log : read_logs(dir)) est.push_back(estimate_beta(log, *archive));
                return est;
            };
            auto defined = [](const std::vector<BetaEstimate>& est) {
                std::vector<double> v;
                for (const auto& e : est)
                    if (e.overall.defined) v.push_back(e.overall.beta);
                return v;
            };
            const auto est = estimate_all(ao.logs);
            const json config = {{"cmd", "analyze betas"}, {"logs", ao.logs}, {"archive", ao.archive}};
            write_file(ao.out, csv_with_config(config, betas_csv(est)));
            const auto a = defined(est);
            double mean = 0;
            for (double x : a) mean += x;
            std::cout << a.size() << "/" << est.size() << " players with an estimate, mean beta "
                      << (a.empty() ? 0.0 : mean / a.size()) << "\n";
            std::vector<std::pair<std::string, std::vector<double>>> pops{{fs::path(ao.logs).filename().string(), a}};
            if (!ao.compare.empty()) {
                const auto b = defined(estimate_all(ao.compare));
                const KsResult ks = ks_two_sample(a, b);
                std::cout << "K-S D " << ks.d << " p " << ks.p << "\n";
                pops.emplace_back(fs::path(ao.compare).filename().string(), b);
            }
            if (!ao.hist.empty()) write_file(ao.hist, svg_with_config(config, beta_histogram_svg(pops)));
        };
    });
    auto* curves = analyze->add_subcommand("curves", "Tercile metric curves");
    curves->add_option("--logs", ao.logs, "Session log directory")->required();
    curves->add_option("--archive", ao.archive, "Field archive")->required();
    curves->add_option("--groups", ao.groups, "Grouping")->check(CLI::IsMember({"terciles"}));
    curves->add_option("--out", ao.out, "Output directory")->required();
    curves->callback([&] {
        action = [&] {
            auto archive = FieldArchive::open(ao.archive);
            const auto logs = read_logs(ao.logs);
            std::vector<BetaEstimate> est;
            for (const auto& log : logs) est.push_back(estimate_beta(log, *archive));
            const auto groups = group_and_curve(est, logs, *archive);
            const json config = {{"cmd", "analyze curves"}, {"logs", ao.logs}, {"archive", ao.archive}};
            write_file(fs::path(ao.out) / "groups.csv", csv_with_config(config, group_curves_csv(groups)));
            std::vector<CurveStats> info;
            for (const auto& g : groups) {
                info.push_back({g.label, g.info_mean, g.info_std, static_cast<int>(g.players.size())});
                std::cout << g.label << ": beta " << g.beta_lo << ".." << g.beta_hi << ", duration " << g.duration
                          << ", info " << g.info_mean.back() << "\n";
            }
            write_file(fs::path(ao.out) / "info.svg",
                       svg_with_config(config, curves_svg(info, "(H(M) - H(M|V_k)) / H(M) by tercile")));
        };
    });
    auto* ks = analyze->add_subcommand("ks", "Two-sample K-S test on the beta columns of two betas.csv files");
    ks->add_option("--a", ao.a, "First betas.csv")->required();
    ks->add_option("--b", ao.b, "Second betas.csv")->required();
    ks->add_flag("--one-sided", ao.one_sided, "One-sided tail exp(-2 lambda^2)");
    ks->callback([&] {
        action = [&] {
            const KsResult r = ks_two_sample(beta_column(ao.a), beta_column(ao.b),
                                             ao.one_sided ? KsTail::OneSided : KsTail::TwoSided);
            std::cout << "D " << r.d << " p " << r.p << " effective n " << r.effective_n << "\n";
        };
    });

    // serve
    struct {
        int port = 8080;
        std::string host = "0.0.0.0", archive = "fields", log_dir = "sessions", cors = "*";
    } vo;
    auto* serve = app.add_subcommand("serve", "Game HTTP server");
    serve->add_option("--port", vo.port, "Port")->envname("PORT")->check(CLI::Range(1, 65535));
    serve->add_option("--host", vo.host, "Bind address");
    serve->add_option("--archive", vo.archive, "Field archive")->envname("ARCHIVE_DIR");
    serve->add_option("--log-dir", vo.log_dir, "Session log directory");
    serve->add_option("--cors", vo.cors, "Allowed web client origin");
    serve->callback([&] {
        action = [&] {
            GameServer server({vo.archive, vo.log_dir, vo.cors, {}});
            if (!server.archive_loaded()) std::cerr << "warning: no field archive at " << vo.archive << "\n";
            std::cout << "restored " << server.restored() << " sessions; listening on " << vo.host << ":" << vo.port
                      << std::endl;
            if (!server.listen(vo.host, vo.port)) throw IoError("cannot bind port " + std::to_string(vo.port));
        };
    });

    // replay
    struct {
        std::string trace, log, archive, out;
    } po;
    auto* replay = app.add_subcommand("replay", "Recompute metrics from a run trace or session log and verify them");
    auto* ptrace = replay->add_option("--trace", po.trace, "RunTrace JSONL");
    auto* plog = replay->add_option("--log", po.log, "Session log (.json or server .jsonl)");
    ptrace->excludes(plog);
    replay->add_option("--archive", po.archive, "Field archive (session logs)");
    replay->add_option("--out", po.out, "Metrics CSV");
    replay->callback([&] {
        if (po.trace.empty() == po.log.empty()) throw CLI::ValidationError("replay", "give exactly one of --trace, --log");
        if (!po.log.empty() && po.archive.empty()) throw CLI::ValidationError("replay", "--log needs --archive");
        action = [&] {
            if (!po.trace.empty()) {
                const RunTrace t = trace_from_jsonl(read_file(po.trace));
                const MorseField mf = regenerate(t.field_n, t.field_d, t.field_seed);
                const TraceVerification v = verify_trace(mf, t);
                const json config = {{"cmd", "replay"}, {"trace", po.trace}};
                if (!po.out.empty()) write_file(po.out, csv_with_config(config, reports_csv(v.reports, v.h_topology)));
                std::cout << t.programs.size() << " programs replayed, H(M|V_k) " << v.reports.back().H_cond << "\n";
                for (const auto& f : v.failures) std::cout << "FAIL " << f << "\n";
                if (!v.ok()) throw VerificationFailed("trace verification failed");
                std::cout << "verified\n";
                return;
            }
            auto archive = FieldArchive::open(po.archive);
            const fs::path lp = po.log;
            const SessionLog log =
                lp.extension() == ".jsonl" ? read_session_file(lp) : log_from_json(json::parse(read_file(lp)));
            const SessionReplay r = replay_session(log, *archive);
            std::string csv = "area,field,k,H_data,H_cond,H_bar,R_k,log2_cells,info\n";
            int mono = 0;
            for (std::size_t a = 0; a < r.areas.size(); ++a) {
                const auto& area = r.areas[a];
                std::istringstream rows(reports_csv(area.map->reports(), area.map->h_topology()));
                std::string row;
                std::getline(rows, row);
                while (std::getline(rows, row)) csv += std::to_string(a) + "," + std::to_string(area.field_id) + "," + row + "\n";
                const auto& reps = area.map->reports();
                for (std::size_t k = 1; k < reps.size(); ++k) mono += reps[k].H_cond > reps[k - 1].H_cond + 1e-9;
            }
            const json config = {{"cmd", "replay"}, {"log", po.log}, {"archive", po.archive}};
            if (!po.out.empty()) write_file(po.out, csv_with_config(config, csv));
            for (const auto& v : r.violations) std::cout << "protocol violation (free play) " << v << "\n";
            for (const auto& e : r.errors) std::cout << "FAIL " << e << "\n";
            if (mono) std::cout << "FAIL " << mono << " increases of H(M|V_k)\n";
            if (!r.ok() || mono) throw VerificationFailed("session verification failed");
            std::cout << log.events.size() << " events over " << r.areas.size() << " areas verified\n";
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }
    try {
        if (action) action();
    } catch (const VerificationFailed& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitVerify;
    } catch (const ConsistencyError& e) {
        std::cerr << "verification error: " << e.what() << "\n";
        return kExitVerify;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return 0;
}
