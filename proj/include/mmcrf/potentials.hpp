#pragma once

#include <span>
#include <vector>

#include "mmcrf/graph.hpp"
#include "mmcrf/params.hpp"

namespace mmcrf {

enum class GroundMode { Latent, NoLatent };

// Edge appearance probabilities: uniform (n-1)/m per connected component
// (a valid choice for random spanning trees; exactly 1 on trees), or 1
// everywhere (plain loopy BP).
enum class RhoPolicy { UniformTree, Unit };

enum class EdgeKind { Intra, NodeLatentA, NodeLatentB, Inter };

struct TableEdge {
    int a = -1; // grounded node indices; rows of cost index a's states
    int b = -1;
    EdgeKind kind = EdgeKind::Intra;
    int pair = -1;   // pair index for latent/inter edges
    int source = -1; // intra-edge index or correspondence index
    double rho = 1.0;
    std::vector<double> cost; // states(a) x states(b), row-major
};

// A grounded graph: per-node cost vectors, per-edge cost matrices, edge
// appearance probabilities. Nodes 0..num_regular-1 are modality nodes
// (state k encodes label k+1); the rest are latent (state s encodes
// label s, 0 = cut).
struct PotentialTables {
    std::vector<int> states;
    std::vector<std::vector<double>> node_cost;
    std::vector<TableEdge> edges;
    int num_regular = 0;

    int node_count() const { return static_cast<int>(states.size()); }
    bool is_latent(int n) const { return n >= num_regular; }
    int state_of_label(int n, int label) const {
        return is_latent(n) ? label : label - 1;
    }
    int label_of_state(int n, int state) const {
        return is_latent(n) ? state : state + 1;
    }
};

// Phi(l) = A_l . x
std::vector<double> unary_cost(std::span<const double> a, int rows, int cols,
                               std::span<const double> x);

// Psi(l,s) = B_(l,s) . v with row index (l-1)*L + (s-1); returns L*L values.
std::vector<double> intra_pairwise_cost(std::span<const double> b, int l,
                                        int edge_dim, std::span<const double> v);

// L x (L+1) node-latent table: (l,0) = cut[l] (or P when not cuttable),
// (l,l) = same[l], everything else the penalty P.
std::vector<double> latent_pairwise_cost(std::span<const double> same,
                                         std::span<const double> cut,
                                         double penalty, bool cuttable);

// Mapped-space generalization: compat_row[s-1] gives the node label
// compatible with latent label s (0 = none).
std::vector<double> latent_pairwise_cost_mapped(
    std::span<const double> same, std::span<const double> cut,
    const std::vector<int>& compat_row, int l_node, int l_latent,
    double penalty, bool cuttable);

// Psi(l,s) = B_(l,s) . v over the label product of two modalities.
std::vector<double> inter_pairwise_cost(std::span<const double> b, int l_a,
                                        int l_b, int edge_dim,
                                        std::span<const double> v);

// [ || x_j[subset] - x_k[subset] ||_2 ]
std::vector<double> edge_feature_intra(std::span<const double> x_j,
                                       std::span<const double> x_k,
                                       std::span<const int> subset);

// Direct inter-modality edge feature per the pair's policy.
std::vector<double> inter_edge_feature(const InterFeature& policy,
                                       std::span<const double> f_a,
                                       std::span<const double> f_b,
                                       double overlap);

PotentialTables ground(const MultimodalGraph& graph,
                       const ParameterBundle& params, GroundMode mode,
                       RhoPolicy rho = RhoPolicy::UniformTree);

// Per-edge appearance probability for the given policy.
std::vector<double> edge_rho(int node_count,
                             std::span<const std::pair<int, int>> endpoints,
                             RhoPolicy policy);

void apply_rho_policy(PotentialTables& tables, RhoPolicy policy);

} // namespace mmcrf
