#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mmcrf/graph.hpp"
#include "mmcrf/labels.hpp"

namespace mmcrf {

// How the feature vector of a direct inter-modality edge (no-latent mode)
// is assembled from the endpoint features and the overlap scalar.
struct InterFeature {
    enum Mode { Absent, Constant, Full, Selected };
    Mode mode = Absent;
    std::vector<int> idx_a; // Selected: 0-based feature indices per side
    std::vector<int> idx_b;

    int dim(int d_a, int d_b) const {
        switch (mode) {
        case Absent: return 0;
        case Constant: return 1;
        case Full: return d_a + d_b + 1;
        case Selected:
            return static_cast<int>(idx_a.size() + idx_b.size()) + 1;
        }
        return 0;
    }
};

// One modality pair carrying correspondences. mod_a is the designated side:
// latent nodes take labels from its space (plus the cut label 0).
// compat_b maps each designated label s (1..L_a) to the compatible label in
// mod_b's space, 0 when none exists. Defaults to match-by-name.
struct PairSpec {
    int mod_a = -1;
    int mod_b = -1;
    std::vector<int> compat_b;
    InterFeature inter;
};

struct ModelSpec {
    std::vector<ModalitySpec> modalities;
    std::vector<int> intra_dim; // edge-feature dim per modality
    std::vector<PairSpec> pairs;
    double penalty = 1000.0;

    int pair_index(int a, int b) const {
        for (std::size_t i = 0; i < pairs.size(); ++i)
            if (pairs[i].mod_a == a && pairs[i].mod_b == b)
                return static_cast<int>(i);
        return -1;
    }
};

// Fills compat_b by name lookup for pairs that left it empty; validates dims.
void finalize_spec(ModelSpec& spec);

// Derives a ModelSpec from a graph: one pair per modality pair seen among
// the correspondences (designated side = endpoint a), match-by-name
// compatibility unless a mapping was attached via scene ingestion.
ModelSpec spec_from_graph(const MultimodalGraph& graph, const InterFeature& inter,
                          double penalty = 1000.0);

// All learnable parameters in one flat array, addressed through named
// blocks. Per modality m: unary A (L_m x D_m) and intra pairwise B
// (L_m^2 x E_m, row (l,s) at (l-1)*L_m + (s-1)). Per pair: latent unary
// (L_a+1 x D_a+D_b+1) and the four latent pairwise free-parameter vectors
// (same/cut per side); optionally the direct inter-modality B.
struct ParameterBundle {
    struct Block {
        std::string name;
        int rows = 0;
        int cols = 0;
        std::size_t offset = 0;
        std::size_t size() const { return std::size_t(rows) * cols; }
    };
    struct PairBlocks {
        int lat_unary = -1;
        int same_a = -1, cut_a = -1;
        int same_b = -1, cut_b = -1;
        int inter = -1;
    };

    ModelSpec spec;
    std::vector<Block> blocks;
    std::vector<double> values;
    std::vector<int> unary_block;  // per modality
    std::vector<int> intra_block;  // per modality
    std::vector<PairBlocks> pair_blocks;

    double penalty() const { return spec.penalty; }

    std::span<double> block_span(int b) {
        return {values.data() + blocks[b].offset, blocks[b].size()};
    }
    std::span<const double> block_span(int b) const {
        return {values.data() + blocks[b].offset, blocks[b].size()};
    }
    int block_by_name(const std::string& name) const {
        for (std::size_t i = 0; i < blocks.size(); ++i)
            if (blocks[i].name == name)
                return static_cast<int>(i);
        return -1;
    }
};

// Zero-initialized bundle; the seed only matters for the optional random
// init mode (randomize_parameters).
ParameterBundle init_parameters(const ModelSpec& spec, std::uint64_t seed = 0);

void randomize_parameters(ParameterBundle& bundle, std::uint64_t seed, double scale);

std::size_t learnable_count(const ParameterBundle& bundle);

// Storage blocks plus the assembled latent-pairwise matrix views
// (L_node * (L_a + 1) rows, 1 column), for shape conformance checks and
// model inspection.
struct NamedShape {
    std::string name;
    int rows = 0;
    int cols = 0;
};
std::vector<NamedShape> parameter_shapes(const ParameterBundle& bundle);

} // namespace mmcrf
