#pragma once

#include <vector>

#include "mmcrf/potentials.hpp"
#include "mmcrf/tape.hpp"

namespace mmcrf {

struct TrwConfig {
    int iterations = 20;     // truncation depth K
    double damping = 0.0;    // [0, 1), applied to log messages
    double tolerance = 0.0;  // 0 = always run exactly K rounds
    // when non-empty, overrides the tables' per-edge appearance
    // probabilities (one value per edge, each in (0, 1])
    std::vector<double> edge_appearance;
};

// Node and edge pseudo-marginals plus the TRW free-energy estimate of
// log Z (exact on trees with rho = 1 after convergence).
struct Marginals {
    std::vector<std::vector<double>> node;
    std::vector<std::vector<double>> edge; // aligned with PotentialTables::edges
    double log_partition = 0.0;
};

// Reweighted sum-product in the log domain, synchronous rounds with fixed
// ordering; deterministic for fixed inputs and config.
Marginals trw_marginals(const PotentialTables& tables, const TrwConfig& config);

// Per-node argmax of the node marginal, ties toward the lowest label
// index. Returns labels: 1..L for modality nodes, 0..L for latent ones.
std::vector<int> map_decode(const Marginals& marginals,
                            const PotentialTables& tables);

// Exact marginals and log Z by enumeration; joint state count <= 10^7.
Marginals brute_force_marginals(const PotentialTables& tables);

// Sum of selected unary and pairwise costs for a complete labeling.
double brute_force_energy(const PotentialTables& tables,
                          const std::vector<int>& labeling);

// --- shared schedule -----------------------------------------------------
// The same unrolled schedule backs plain inference (constants on the tape)
// and learning (parameter-grounded tables on the tape).

struct TapeGraphView {
    std::vector<int> states;
    std::vector<Tape::Ref> node_cost;
    struct Edge {
        int a = -1, b = -1;
        Tape::Ref table;
        double rho = 1.0;
    };
    std::vector<Edge> edges;
};

struct TrwOutputs {
    std::vector<Tape::Ref> node_logits; // unnormalized log beliefs
    std::vector<Tape::Ref> edge_logits;
    int rounds = 0;
};

TrwOutputs run_trw_schedule(Tape& tape, const TapeGraphView& view,
                            const TrwConfig& config);

Marginals marginals_from_outputs(const Tape& tape, const TrwOutputs& out,
                                 const PotentialTables* tables_for_logz);

} // namespace mmcrf
