#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mmcrf/graph.hpp"
#include "mmcrf/inference.hpp"
#include "mmcrf/params.hpp"
#include "mmcrf/potentials.hpp"

namespace mmcrf {

// One scene: graph plus ground truth. Latent presets keep the augmented
// graph with derived latent labels; the no-latent preset keeps the base
// graph.
struct TrainSample {
    MultimodalGraph graph;
    std::string id;
};

struct TrainConfig {
    int outer_iterations = 5;
    int message_iterations = 10; // truncation depth during learning
    double damping = 0.0;
    double l2 = 1e-3;
    double step0 = 1.0;          // fixed step, or the initial line-search step
    bool fixed_step = false;     // skip the line search, always step step0
    int max_backtracks = 40;
    GroundMode mode = GroundMode::Latent;
    RhoPolicy rho = RhoPolicy::UniformTree;
    std::uint64_t seed = 0;
    int threads = 0;             // 0 = hardware concurrency
};

// Agreement rule for a shared label space: y_a when y_a == y_b, else the
// cut label 0. Non-cuttable links with disagreeing labels are a
// ground-truth contradiction.
int latent_gt(int y_a, int y_b, bool cuttable);

// Mapped-space generalization; compat_b[s-1] is the mod-b label compatible
// with designated label s. Returns the designated side's label.
int latent_gt_mapped(int y_a, int y_b, bool cuttable,
                     const std::vector<int>& compat_b);

// Fills latent gt labels from the endpoint gts wherever both are present.
void derive_latent_gt(MultimodalGraph& graph, const ModelSpec& spec);

// -sum over pairwise cliques of log of the joint marginal at the
// ground-truth label pair; entries floored at 1e-300 before the log.
double clique_marginal_loss(const Marginals& marginals,
                            const PotentialTables& tables,
                            const MultimodalGraph& graph);

struct GradientBundle {
    std::vector<double> values; // congruent with ParameterBundle::values
};

double empirical_risk(const ParameterBundle& params,
                      std::span<const TrainSample> samples,
                      const TrainConfig& config);

// Exact gradient of the risk as implemented: differentiated through the
// unrolled K-round schedule. Penalty cells contribute zero gradient.
GradientBundle risk_gradient(const ParameterBundle& params,
                             std::span<const TrainSample> samples,
                             const TrainConfig& config,
                             double* risk_out = nullptr);

struct TraceRow {
    int iteration = 0;
    double risk = 0.0;
    double step = 0.0;
    double grad_norm = 0.0;
};

struct TrainResult {
    ParameterBundle params; // bundle with the lowest recorded risk
    std::vector<TraceRow> trace;
    bool diverged = false;
};

// Full-batch gradient descent with Armijo backtracking; one outer
// iteration is one accepted step, at most outer_iterations of them.
TrainResult train(const ParameterBundle& init,
                  std::span<const TrainSample> samples,
                  const TrainConfig& config);

} // namespace mmcrf
