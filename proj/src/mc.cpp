#include "recon/mc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "recon/errors.hpp"

namespace recon {

StrategySpec parse_strategy_spec(const std::string& text) {
    StrategySpec s;
    s.label = text;
    const auto colon = text.find(':');
    s.cfg.kind = strategy_kind_from_string(text.substr(0, colon));
    if (colon == std::string::npos) return s;
    std::istringstream is(text.substr(colon + 1));
    std::string kv;
    while (std::getline(is, kv, ',')) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ParameterError("bad strategy parameter: " + kv);
        const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
        try {
            if (key == "T") s.cfg.T = std::stod(val);
            else if (key == "n") s.cfg.n = std::stoi(val);
            else throw ParameterError("unknown strategy parameter: " + key);
        } catch (const std::logic_error&) {
            throw ParameterError("bad strategy parameter value: " + kv);
        }
    }
    return s;
}

namespace {

TrialResult run_trial(const Experiment& exp, int trial) {
    TrialResult tr;
    tr.trial = trial;
    const MorseField mf = make_morse_field(exp.n, exp.d, exp.seed_base + static_cast<std::uint64_t>(trial));
    tr.field_seed = mf.field.seed();
    tr.reseeds = mf.reseeds;
    for (const auto& spec : exp.strategies) {
        StrategyConfig cfg = spec.cfg;
        cfg.budget = exp.budget;
        cfg.seed = Rng::mix(exp.seed_base, static_cast<std::uint64_t>(trial));
        const RunTrace run = run_strategy(mf, cfg);
        tr.h_topology = run.h_topology;
        std::vector<double> curve(static_cast<std::size_t>(exp.budget) + 1);
        for (std::size_t k = 0; k < curve.size(); ++k) {
            const auto& rep = run.reports[std::min(k, run.reports.size() - 1)];
            curve[k] = run.h_topology - rep.H_cond;
        }
        for (std::size_t k = 1; k < run.reports.size(); ++k)
            if (run.reports[k].H_cond > run.reports[k - 1].H_cond + 1e-9) ++tr.monotonicity_violations;
        tr.curves.push_back(std::move(curve));
        tr.errors.push_back(run.error);
    }
    return tr;
}

}  // namespace

std::vector<CurveStats> aggregate(const std::vector<TrialResult>& trials, const std::vector<StrategySpec>& strategies) {
    std::vector<CurveStats> out;
    for (std::size_t s = 0; s < strategies.size(); ++s) {
        CurveStats cs;
        cs.label = strategies[s].label;
        cs.trials = static_cast<int>(trials.size());
        if (trials.empty()) {
            out.push_back(cs);
            continue;
        }
        const std::size_t len = trials.front().curves[s].size();
        cs.mean.assign(len, 0.0);
        cs.stddev.assign(len, 0.0);
        for (std::size_t k = 0; k < len; ++k) {
            double sum = 0.0;
            for (const auto& t : trials) sum += t.curves[s][k];
            const double m = sum / static_cast<double>(trials.size());
            double ss = 0.0;
            for (const auto& t : trials) ss += (t.curves[s][k] - m) * (t.curves[s][k] - m);
            cs.mean[k] = m;
            cs.stddev[k] = std::sqrt(ss / static_cast<double>(trials.size()));
        }
        out.push_back(std::move(cs));
    }
    return out;
}

ExperimentResult run_experiment(const Experiment& exp) {
    if (exp.trials < 1) throw ParameterError("trials must be >= 1");
    if (exp.strategies.empty()) throw ParameterError("no strategies");
    for (const auto& s : exp.strategies) validate(s.cfg);
    if (exp.budget < 1) throw ParameterError("budget must be >= 1");

    ExperimentResult r;
    r.exp = exp;
    r.trials.resize(static_cast<std::size_t>(exp.trials));
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned workers = std::min<unsigned>(exp.threads > 0 ? static_cast<unsigned>(exp.threads) : hw,
                                                static_cast<unsigned>(exp.trials));
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto work = [&] {
        for (int t = next++; t < exp.trials; t = next++) {
            try {
                r.trials[static_cast<std::size_t>(t)] = run_trial(exp, t);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mu);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);

    for (const auto& t : r.trials) {
        r.reseeds += t.reseeds;
        r.monotonicity_violations += t.monotonicity_violations;
    }
    r.stats = aggregate(r.trials, exp.strategies);
    return r;
}

std::string raw_csv(const ExperimentResult& r) {
    std::string out = "trial,strategy,field_seed,k,H_M,info\n";
    char buf[256];
    for (const auto& t : r.trials)
        for (std::size_t s = 0; s < t.curves.size(); ++s)
            for (std::size_t k = 0; k < t.curves[s].size(); ++k) {
                std::snprintf(buf, sizeof buf, "%d,%s,%llu,%zu,%.17g,%.17g\n", t.trial, r.exp.strategies[s].label.c_str(),
                              static_cast<unsigned long long>(t.field_seed), k, t.h_topology, t.curves[s][k]);
                out += buf;
            }
    return out;
}

std::string stats_csv(const std::vector<CurveStats>& stats) {
    std::string out = "strategy,k,mean,std,trials\n";
    char buf[256];
    for (const auto& s : stats)
        for (std::size_t k = 0; k < s.mean.size(); ++k) {
            std::snprintf(buf, sizeof buf, "%s,%zu,%.17g,%.17g,%d\n", s.label.c_str(), k, s.mean[k], s.stddev[k], s.trials);
            out += buf;
        }
    return out;
}

std::vector<CurveStats> stats_from_raw_csv(const std::string& raw) {
    // strategy label -> trial -> curve
    std::vector<std::string> order;
    std::map<std::string, std::map<int, std::vector<double>>> curves;
    std::istringstream is(raw);
    std::string line;
    bool header = true;
    while (std::getline(is, line)) {
        // Comment lines carry the run configuration.
        if (line.empty() || line[0] == '#') continue;
        if (header) {
            header = false;
            continue;
        }
        std::vector<std::string> f;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (f.size() != 6) throw ParameterError("malformed raw csv row: " + line);
        if (!curves.count(f[1])) order.push_back(f[1]);
        curves[f[1]][std::stoi(f[0])].push_back(std::stod(f[5]));
    }
    std::vector<TrialResult> trials;
    std::vector<StrategySpec> specs;
    for (const auto& label : order) specs.push_back({label, {}});
    if (order.empty()) return {};
    for (const auto& [trial, unused] : curves[order.front()]) {
        TrialResult t;
        t.trial = trial;
        for (const auto& label : order) t.curves.push_back(curves[label].at(trial));
        trials.push_back(std::move(t));
    }
    return aggregate(trials, specs);
}

std::string curves_svg(const std::vector<CurveStats>& stats, const std::string& title) {
    if (stats.empty()) throw ParameterError("no curves to plot");
    for (const auto& s : stats)
        if (s.mean.empty()) throw ParameterError("empty curve: " + s.label);
    const double W = 720, H = 440, L = 60, R = 180, T = 40, B = 50;
    std::size_t len = 0;
    double ymax = 0.0;
    for (const auto& s : stats) {
        len = std::max(len, s.mean.size());
        for (std::size_t k = 0; k < s.mean.size(); ++k) ymax = std::max(ymax, s.mean[k] + s.stddev[k]);
    }
    if (!(ymax > 0)) ymax = 1.0;
    const double xmax = static_cast<double>(std::max<std::size_t>(len, 2) - 1);
    auto X = [&](double k) { return L + (W - L - R) * k / xmax; };
    auto Y = [&](double v) { return H - B - (H - T - B) * v / ymax; };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    std::string out;
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n", W, H, W, H);
    out += buf;
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\">%s</text>\n", L,
                  title.c_str());
    out += buf;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n"
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n",
                  L, H - B, W - R, H - B, L, T, L, H - B);
    out += buf;
    for (int t = 0; t <= 4; ++t) {
        const double v = ymax * t / 4.0, k = xmax * t / 4.0;
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">%.2f</text>\n"
                      "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">%.0f</text>\n",
                      L - 6, Y(v) + 4, v, X(k), H - B + 16, k);
        out += buf;
    }
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">step k</text>\n",
                  (L + W - R) / 2, H - 12);
    out += buf;
    for (std::size_t s = 0; s < stats.size(); ++s) {
        const char* c = colors[s % 6];
        const auto& cs = stats[s];
        std::string band, line;
        for (std::size_t k = 0; k < cs.mean.size(); ++k) {
            std::snprintf(buf, sizeof buf, "%.2f,%.2f ", X(static_cast<double>(k)), Y(cs.mean[k] + cs.stddev[k]));
            band += buf;
            std::snprintf(buf, sizeof buf, "%.2f,%.2f ", X(static_cast<double>(k)), Y(cs.mean[k]));
            line += buf;
        }
        for (std::size_t k = cs.mean.size(); k-- > 0;) {
            std::snprintf(buf, sizeof buf, "%.2f,%.2f ", X(static_cast<double>(k)), Y(std::max(0.0, cs.mean[k] - cs.stddev[k])));
            band += buf;
        }
        out += "<polygon fill=\"" + std::string(c) + "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"" + band + "\"/>\n";
        out += "<polyline fill=\"none\" stroke=\"" + std::string(c) + "\" stroke-width=\"2\" points=\"" + line + "\"/>\n";
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"%s\" stroke-width=\"3\"/>"
                      "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"12\">%s</text>\n",
                      W - R + 12, T + 20.0 * s, W - R + 36, T + 20.0 * s, c, W - R + 42, T + 20.0 * s + 4,
                      cs.label.c_str());
        out += buf;
    }
    out += "</svg>\n";
    return out;
}

double window_mean(const std::vector<double>& curve, int from, int to) {
    if (from < 0 || to >= static_cast<int>(curve.size()) || from > to) throw ParameterError("window out of range");
    double s = 0.0;
    for (int k = from; k <= to; ++k) s += curve[static_cast<std::size_t>(k)];
    return s / (to - from + 1);
}

SignTest sign_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ParameterError("paired samples differ in size");
    SignTest t;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (a[k] > b[k]) ++t.plus;
        else if (a[k] < b[k]) ++t.minus;
        else ++t.ties;
    }
    const int n = t.plus + t.minus;
    // P(X >= plus) for X ~ Binomial(n, 1/2).
    double p = 0.0;
    for (int i = t.plus; i <= n; ++i)
        p += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) - n * std::log(2.0));
    t.p = std::min(1.0, p);
    return t;
}

}  // namespace recon
