#pragma once

#include <string>
#include <utility>
#include <vector>

#include "recon/game.hpp"

namespace recon {

// One isoline program of a session, seen against the map just before it.
struct IsolineClick {
    std::size_t event = 0;
    int field_id = 0;
    double p = 0.0;       // mu(V^o) / mu(X), V^o = cells holding a saddle
    bool in = false;      // origin inside V^o
    double p_subj = 0.0;  // same with the player-visible cells of chi <= -1
    bool in_subj = false;
};

std::vector<IsolineClick> isoline_clicks(const SessionLog& log, const FieldArchive& archive);

struct BetaFit {
    bool defined = false;  // needs kMinBetaClicks informative clicks
    double beta = 0.0;
    double loglik = 0.0;
    int clicks = 0;  // clicks with 0 < p < 1
    bool boundary = false;  // optimum on an end of [0, kBetaMax]
};

constexpr int kMinBetaClicks = 5;
constexpr double kBetaMax = 10.0;

// log P(r_1..r_m) = sum_i [in_i ? beta ln p_i : ln(1 - p_i^beta)]. Clicks with
// p in {0, 1} carry no information and are skipped.
double beta_log_likelihood(const std::vector<std::pair<double, bool>>& clicks, double beta);
// Golden-section maximum over [0, kBetaMax] with tolerance 1e-4.
BetaFit fit_beta(const std::vector<std::pair<double, bool>>& clicks);

struct BetaEstimate {
    std::string player;
    std::string session;
    BetaFit overall;
    BetaFit complex;  // even field ids, d = 0.25
    BetaFit simple;   // odd field ids, d = 0.5
    BetaFit subjective;
};

BetaEstimate estimate_beta(const SessionLog& log, const FieldArchive& archive);
BetaEstimate estimate_beta(const std::string& player, const std::string& session,
                           const std::vector<IsolineClick>& clicks);

// Columns: player,session,clicks,beta,loglik,boundary,beta_complex,beta_simple,beta_subjective
std::string betas_csv(const std::vector<BetaEstimate>& estimates);

enum class KsTail { TwoSided, OneSided };

struct KsResult {
    double d = 0.0;
    double p = 1.0;
    double effective_n = 0.0;
};

// Asymptotic distribution with effective size ne = nm/(n+m) and
// lambda = (sqrt(ne) + 0.12 + 0.11/sqrt(ne)) D.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b, KsTail tail = KsTail::TwoSided);

double pearson(const std::vector<double>& a, const std::vector<double>& b);

struct GroupCurves {
    std::string label;  // bottom | middle | top
    std::vector<std::string> players;
    double beta_lo = 0.0, beta_hi = 0.0;
    int duration = 0;  // 90th percentile of the group's area lengths, in clicks
    // Per click k = 0..duration, over the areas still being played at k.
    std::vector<double> info_mean, info_std;  // (H(M) - H(M|V_k)) / H(M)
    std::vector<double> h_data;               // H(V_k)
    std::vector<double> gap;                  // log2|V_k| - H(V_k)
    std::vector<int> areas;                   // areas contributing at k
};

// Tercile split by overall beta (ties keep player order). Players without a
// defined estimate are left out; needs three with one.
std::vector<GroupCurves> group_and_curve(const std::vector<BetaEstimate>& estimates,
                                         const std::vector<SessionLog>& logs, const FieldArchive& archive);

// Columns: group,k,info_mean,info_std,H_data,gap,areas
std::string group_curves_csv(const std::vector<GroupCurves>& groups);

// Overlaid histograms of beta estimates, one colour per population.
std::string beta_histogram_svg(const std::vector<std::pair<std::string, std::vector<double>>>& populations,
                               int bins = 20);

}  // namespace recon
