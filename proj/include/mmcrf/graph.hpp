#pragma once

#include <string>
#include <vector>

#include "mmcrf/labels.hpp"

namespace mmcrf {

struct GraphNode {
    int id = -1;       // dense, assigned in insertion order by build_graph
    int modality = -1; // index into MultimodalGraph::modalities
    int instance = 0;  // frame tag; same-modality correspondences need distinct tags
    int gt_label = 0;  // 1..L, 0 = absent
    std::vector<double> feature;
};

struct IntraEdge {
    int a = -1;
    int b = -1;
    std::vector<double> feature; // v_jk
};

// Cross-modality (or cross-instance) link. Endpoint a's modality is the
// designated side: it supplies the label space latent nodes draw from.
struct Correspondence {
    int a = -1;
    int b = -1;
    double overlap = 0.0; // [0, 1]
    bool cuttable = true;
};

struct LatentNode {
    int id = -1;       // continues the node id sequence
    int corr = -1;     // correspondence index
    int gt_label = -1; // 0..L of the designated side, -1 = absent
    std::vector<double> feature; // concat(feature_a, feature_b, overlap)
};

struct MultimodalGraph {
    std::vector<ModalitySpec> modalities;
    std::vector<GraphNode> nodes;
    std::vector<IntraEdge> intra_edges;
    std::vector<Correspondence> correspondences;
    std::vector<LatentNode> latent_nodes;
    bool augmented = false;

    int modality_index(const std::string& id) const {
        for (std::size_t i = 0; i < modalities.size(); ++i)
            if (modalities[i].id == id)
                return static_cast<int>(i);
        return -1;
    }

    const ModalitySpec& modality_of(int node_id) const {
        return modalities[nodes[node_id].modality];
    }

    int node_count() const { return static_cast<int>(nodes.size()); }
    int latent_count() const { return static_cast<int>(latent_nodes.size()); }
};

// Validates ids, dimensions and structural invariants; assigns dense node
// ids in insertion order. Throws DataError naming the offending ids.
MultimodalGraph build_graph(std::vector<ModalitySpec> modalities,
                            std::vector<GraphNode> nodes,
                            std::vector<IntraEdge> intra_edges,
                            std::vector<Correspondence> correspondences);

// One latent node per correspondence; latent features assembled as
// concat(feature_a, feature_b, overlap). Throws when called twice.
MultimodalGraph augment_with_latent(const MultimodalGraph& graph);

// Non-throwing invariant check; empty means well-formed.
std::vector<std::string> validate(const MultimodalGraph& graph);

// Copy of the structural skeleton with latent nodes stripped.
MultimodalGraph strip_latent(const MultimodalGraph& graph);

} // namespace mmcrf
