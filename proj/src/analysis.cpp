#include "recon/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "recon/errors.hpp"

namespace recon {

std::vector<IsolineClick> isoline_clicks(const SessionLog& log, const FieldArchive& archive) {
    std::vector<IsolineClick> out;
    const SessionReplay r = replay_session(log, archive, [&](std::size_t i, const MapState& map) {
        const auto& e = log.events[i];
        if (e.action != "isoline") return;
        const DataPartition& part = map.partition();
        const auto topo = topological_cells(part);
        double total = 0.0, subj = 0.0;
        for (const auto& c : part.cells()) {
            total += c.measure;
            if (c.chi <= -1) subj += c.measure;
        }
        const int cell = cell_at(map, e.origin);
        IsolineClick c;
        c.event = i;
        c.field_id = e.field_id;
        c.p = topological_measure(part);
        c.in = topo[static_cast<std::size_t>(cell)];
        c.p_subj = total > 0 ? subj / total : 0.0;
        c.in_subj = part.cell(cell).chi <= -1;
        out.push_back(c);
    });
    if (!r.ok()) throw ConsistencyError("session " + log.session_id + " does not replay: " + r.errors.front());
    return out;
}

double beta_log_likelihood(const std::vector<std::pair<double, bool>>& clicks, double beta) {
    double ll = 0.0;
    for (const auto& [p, in] : clicks) {
        if (!(p > 0.0 && p < 1.0)) continue;
        ll += in ? beta * std::log(p) : std::log1p(-std::pow(p, beta));
    }
    return ll;
}

BetaFit fit_beta(const std::vector<std::pair<double, bool>>& clicks) {
    BetaFit fit;
    for (const auto& c : clicks) fit.clicks += c.first > 0.0 && c.first < 1.0;
    if (fit.clicks < kMinBetaClicks) return fit;
    fit.defined = true;
    // The log-likelihood is concave in beta, so golden-section search finds
    // the maximum on the interval.
    auto ll = [&](double b) { return beta_log_likelihood(clicks, b); };
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = 0.0, b = kBetaMax;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = ll(c), fd = ll(d);
    while (b - a > 1e-4) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = ll(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = ll(d);
        }
    }
    fit.beta = (a + b) / 2.0;
    fit.loglik = ll(fit.beta);
    for (double end : {0.0, kBetaMax}) {
        if (std::abs(fit.beta - end) < 1e-3 && ll(end) >= fit.loglik) {
            fit.beta = end;
            fit.loglik = ll(end);
            fit.boundary = true;
        }
    }
    return fit;
}

BetaEstimate estimate_beta(const std::string& player, const std::string& session,
                           const std::vector<IsolineClick>& clicks) {
    if (clicks.empty()) throw ParameterError("no isoline clicks: beta undefined for " + player);
    std::vector<std::pair<double, bool>> all, cx, sm, subj;
    for (const auto& c : clicks) {
        all.emplace_back(c.p, c.in);
        (corr_length_for_field(c.field_id) < 0.375 ? cx : sm).emplace_back(c.p, c.in);
        subj.emplace_back(c.p_subj, c.in_subj);
    }
    BetaEstimate est;
    est.player = player;
    est.session = session;
    est.overall = fit_beta(all);
    est.complex = fit_beta(cx);
    est.simple = fit_beta(sm);
    est.subjective = fit_beta(subj);
    return est;
}

BetaEstimate estimate_beta(const SessionLog& log, const FieldArchive& archive) {
    return estimate_beta(log.player, log.session_id, isoline_clicks(log, archive));
}

std::string betas_csv(const std::vector<BetaEstimate>& estimates) {
    std::string out = "player,session,clicks,beta,loglik,boundary,beta_complex,beta_simple,beta_subjective\n";
    auto num = [](const BetaFit& f) {
        if (!f.defined) return std::string();
        char b[32];
        std::snprintf(b, sizeof b, "%.17g", f.beta);
        return std::string(b);
    };
    char buf[64];
    for (const auto& e : estimates) {
        std::snprintf(buf, sizeof buf, "%d,", e.overall.clicks);
        out += e.player + "," + e.session + "," + buf + num(e.overall) + ",";
        if (e.overall.defined) {
            std::snprintf(buf, sizeof buf, "%.17g", e.overall.loglik);
            out += buf;
        }
        out += std::string(",") + (e.overall.boundary ? "1" : "0") + "," + num(e.complex) + "," + num(e.simple) + "," +
               num(e.subjective) + "\n";
    }
    return out;
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b, KsTail tail) {
    if (a.empty() || b.empty()) throw ParameterError("K-S test needs two non-empty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == x) ++i;
        while (j < b.size() && b[j] == x) ++j;
        d = std::max(d, std::abs(i / na - j / nb));
    }
    KsResult r;
    r.d = d;
    r.effective_n = na * nb / (na + nb);
    const double sq = std::sqrt(r.effective_n);
    const double lambda = (sq + 0.12 + 0.11 / sq) * d;
    if (tail == KsTail::OneSided) {
        r.p = std::min(1.0, std::exp(-2.0 * lambda * lambda));
        return r;
    }
    if (lambda < 1e-3) {
        r.p = 1.0;
        return r;
    }
    double q = 0.0, sign = 1.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
        q += term;
        if (std::abs(term) < 1e-16 * std::abs(q) || std::abs(term) < 1e-300) break;
        sign = -sign;
    }
    r.p = std::clamp(2.0 * q, 0.0, 1.0);
    return r;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) throw ParameterError("correlation needs two equal samples of size >= 2");
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) throw ParameterError("correlation of a constant sample");
    return sab / std::sqrt(saa * sbb);
}

namespace {

struct AreaCurve {
    std::vector<double> info, h_data, gap;
};

std::vector<AreaCurve> area_curves(const SessionLog& log, const FieldArchive& archive) {
    const SessionReplay r = replay_session(log, archive);
    if (!r.ok()) throw ConsistencyError("session " + log.session_id + " does not replay: " + r.errors.front());
    std::vector<AreaCurve> out;
    for (const auto& a : r.areas) {
        const double hm = a.map->h_topology();
        if (!(hm > 0.0)) continue;
        AreaCurve c;
        for (const auto& rep : a.map->reports()) {
            c.info.push_back((hm - rep.H_cond) / hm);
            c.h_data.push_back(rep.H_data);
            c.gap.push_back(rep.log2_cells - rep.H_data);
        }
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace

std::vector<GroupCurves> group_and_curve(const std::vector<BetaEstimate>& estimates,
                                         const std::vector<SessionLog>& logs, const FieldArchive& archive) {
    if (estimates.size() != logs.size()) throw ParameterError("one estimate per session log expected");
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < estimates.size(); ++i)
        if (estimates[i].overall.defined) idx.push_back(i);
    if (idx.size() < 3) throw ParameterError("grouping needs at least three players with a beta estimate");
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t x, std::size_t y) { return estimates[x].overall.beta < estimates[y].overall.beta; });
    const std::size_t n = idx.size(), base = n / 3, rem = n % 3;
    const std::size_t sizes[3] = {base + (rem > 0), base + (rem > 1), base};
    static const char* labels[3] = {"bottom", "middle", "top"};
    std::vector<GroupCurves> groups;
    std::size_t at = 0;
    for (int g = 0; g < 3; ++g) {
        GroupCurves gc;
        gc.label = labels[g];
        std::vector<AreaCurve> curves;
        for (std::size_t m = 0; m < sizes[g]; ++m, ++at) {
            const std::size_t i = idx[at];
            gc.players.push_back(estimates[i].player);
            for (auto& c : area_curves(logs[i], archive)) curves.push_back(std::move(c));
        }
        gc.beta_lo = estimates[idx[at - sizes[g]]].overall.beta;
        gc.beta_hi = estimates[idx[at - 1]].overall.beta;
        if (curves.empty()) throw ParameterError("group " + gc.label + " has no playable area");
        // Standard length: the number of clicks that only 10% of the areas exceed.
        std::vector<int> lengths;
        for (const auto& c : curves) lengths.push_back(static_cast<int>(c.info.size()) - 1);
        std::sort(lengths.begin(), lengths.end());
        const auto rank = static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(lengths.size())));
        gc.duration = lengths[std::max<std::size_t>(rank, 1) - 1];
        for (int k = 0; k <= gc.duration; ++k) {
            double s = 0.0, s2 = 0.0, hd = 0.0, gp = 0.0;
            int cnt = 0;
            for (const auto& c : curves) {
                if (static_cast<std::size_t>(k) >= c.info.size()) continue;
                s += c.info[k];
                s2 += c.info[k] * c.info[k];
                hd += c.h_data[k];
                gp += c.gap[k];
                ++cnt;
            }
            const double mean = s / cnt;
            gc.info_mean.push_back(mean);
            gc.info_std.push_back(std::sqrt(std::max(0.0, s2 / cnt - mean * mean)));
            gc.h_data.push_back(hd / cnt);
            gc.gap.push_back(gp / cnt);
            gc.areas.push_back(cnt);
        }
        groups.push_back(std::move(gc));
    }
    return groups;
}

std::string group_curves_csv(const std::vector<GroupCurves>& groups) {
    std::string out = "group,k,info_mean,info_std,H_data,gap,areas\n";
    char buf[256];
    for (const auto& g : groups)
        for (std::size_t k = 0; k < g.info_mean.size(); ++k) {
            std::snprintf(buf, sizeof buf, "%s,%zu,%.17g,%.17g,%.17g,%.17g,%d\n", g.label.c_str(), k, g.info_mean[k],
                          g.info_std[k], g.h_data[k], g.gap[k], g.areas[k]);
            out += buf;
        }
    return out;
}

std::string beta_histogram_svg(const std::vector<std::pair<std::string, std::vector<double>>>& populations,
                               int bins) {
    if (populations.empty() || bins < 1) throw ParameterError("nothing to plot");
    double hi = 0.0;
    for (const auto& [label, v] : populations) {
        if (v.empty()) throw ParameterError("empty population: " + label);
        for (double x : v) hi = std::max(hi, x);
    }
    hi = hi > 0 ? std::ceil(hi * 10.0) / 10.0 : 1.0;
    std::vector<std::vector<int>> counts;
    int cmax = 1;
    for (const auto& [label, v] : populations) {
        std::vector<int> c(static_cast<std::size_t>(bins), 0);
        for (double x : v) {
            const int b = std::min(bins - 1, static_cast<int>(x / hi * bins));
            cmax = std::max(cmax, ++c[static_cast<std::size_t>(std::max(0, b))]);
        }
        counts.push_back(std::move(c));
    }
    const double W = 640, H = 380, L = 50, R = 150, T = 30, B = 45;
    const double bw = (W - L - R) / bins;
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
    std::string out;
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n"
                  "<rect width=\"100%%\" height=\"100%%\" fill=\"white\"/>\n"
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n",
                  W, H, W, H, L, H - B, W - R, H - B);
    out += buf;
    for (int t = 0; t <= 4; ++t) {
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">%.2f</text>\n",
                      L + (W - L - R) * t / 4.0, H - B + 16, hi * t / 4.0);
        out += buf;
    }
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">beta</text>\n",
                  (L + W - R) / 2, H - 10);
    out += buf;
    for (std::size_t s = 0; s < populations.size(); ++s) {
        const char* c = colors[s % 4];
        for (int b = 0; b < bins; ++b) {
            const int n = counts[s][static_cast<std::size_t>(b)];
            if (n == 0) continue;
            const double h = (H - T - B) * n / cmax;
            std::snprintf(buf, sizeof buf,
                          "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"%s\" fill-opacity=\"0.5\"/>\n",
                          L + b * bw, H - B - h, bw, h, c);
            out += buf;
        }
        std::snprintf(buf, sizeof buf,
                      "<rect x=\"%.1f\" y=\"%.1f\" width=\"14\" height=\"10\" fill=\"%s\" fill-opacity=\"0.5\"/>"
                      "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"12\">%s (n=%zu)</text>\n",
                      W - R + 12, T + 20.0 * s, c, W - R + 30, T + 20.0 * s + 9, populations[s].first.c_str(),
                      populations[s].second.size());
        out += buf;
    }
    out += "</svg>\n";
    return out;
}

}  // namespace recon
