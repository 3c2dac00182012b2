#pragma once

#include <functional>
#include <vector>

#include <json.hpp>

#include "recon/partition.hpp"

namespace recon {

// Shannon entropy (bits) of cell measures, renormalized to sum to one.
double partition_entropy(const std::vector<double>& measures);

// H(A|B) from the joint measure table joint[a][b] = mu(A_a ∩ B_b).
double conditional_entropy(const std::vector<std::vector<double>>& joint);

// Pixel-label partition; label < 0 marks pixels outside every cell.
struct LabelPartition {
    std::vector<int> label;
};

// H(a|b) from pixel-label intersections. Throws ConsistencyError when the
// covered measures differ by more than 2%.
double conditional_entropy(const LabelPartition& a, const LabelPartition& b);
double partition_entropy(const LabelPartition& p);

// H(M) of the topology-induced partition.
double topology_entropy(const ContourTree& tree);

// H(M | V_k). Oracle side: needs the ground-truth tree.
double conditional_entropy_M_given_V(const DataPartition& part);

// Sum over cells of mu * log2 |1 - 2 chi|.
double h_bar(const DataPartition& part);

struct EntropyReport {
    int k = 0;
    double H_data = 0.0;
    double H_cond = 0.0;
    double H_bar = 0.0;
    double R_k = 0.0;
    double log2_cells = 0.0;
};

EntropyReport entropy_report(const DataPartition& part, const EntropyReport* prev);

double consumption_rate(const EntropyReport& prev, const EntropyReport& cur);

nlohmann::json report_to_json(const EntropyReport& r);

// Entropy of the domain partition into connected components of preimages of
// m uniform range bins [y_{j-1}, y_j) (the top bin closed).
double function_entropy(const ContourTree& tree, int m);

// Same for a function on [0, 1], resolved on `samples` points with bisection
// refinement of every bin crossing.
double function_entropy_1d(const std::function<double(double)>& f, int m, int samples = 1 << 14);

struct EntropyBoundGap {
    double lhs = 0.0;  // H(f, V_m) - log2 m
    double rhs = 0.0;  // H(M) + sum mu(M_i) log2 delta_i
};

EntropyBoundGap entropy_bound_gap(const ContourTree& tree, int m);

}  // namespace recon
