#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmcrf/scene_io.hpp"

namespace mmcrf {

// Semantic class -> geometric class, a total function on the semantic
// labels. The geometric label space is the codomain in first-appearance
// order.
struct LabelMapping {
    std::vector<std::pair<std::string, std::string>> rows;

    LabelSpace geometric_space() const;
    // geometric label name for a semantic label; throws on unmapped names
    const std::string& geometric_of(const std::string& semantic) const;
};

LabelMapping parse_label_mapping(std::istream& in, const std::string& name);
LabelMapping read_label_mapping(const std::string& path);

struct SemgeoOptions {
    // copy: geometric duplicates reuse the region's features (the default);
    // resample: redraw geometric features from per-geometric-class
    // prototypes, for benchmarks where geometric evidence is stronger.
    bool resample = false;
    double separation = 6.0;
    double noise = 1.0;
    std::uint64_t seed = 1;
};

// Duplicates every region as a geometric node (modality "<id>_geo",
// geometric gt = mapping(semantic gt)), copies the intra edges, and wires
// correspondences: the originals, their geometric mirror, non-cuttable
// same-region semantic<->geometric links, and the cross
// semantic<->geometric diagonals.
SceneData semgeo_expand(const SceneData& scene, const LabelMapping& mapping,
                        const SemgeoOptions& options = {});

} // namespace mmcrf
