#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mmcrf/graph.hpp"
#include "mmcrf/params.hpp"

namespace mmcrf {

// Raw scene file contents; field names and layout are documented in
// docs/formats.md. Node ids may be arbitrary unique integers on input and
// are rewritten densely in insertion order on output.
struct SceneNodeRow {
    int id = -1;
    std::string modality;
    int instance = 0;
    std::string gt; // label name, "-" = absent
    std::vector<double> feature;
};

struct SceneIntraRow {
    int a = -1, b = -1;
    std::vector<double> feature;
};

struct SceneCorrRow {
    int a = -1, b = -1;
    double overlap = 0.0;
    bool cuttable = true;
};

// Optional label compatibility for one modality pair: designated-side
// label name -> other-side label name.
struct SceneLabelMap {
    std::string mod_a, mod_b;
    std::vector<std::pair<std::string, std::string>> entries;
};

struct SceneData {
    std::vector<ModalitySpec> modalities;
    std::vector<SceneNodeRow> nodes;
    std::vector<SceneIntraRow> intra_edges;
    std::vector<SceneCorrRow> correspondences;
    std::vector<SceneLabelMap> label_maps;
};

SceneData parse_scene(std::istream& in, const std::string& name);
SceneData read_scene(const std::string& path);
void write_scene(const SceneData& scene, std::ostream& out);
std::string scene_to_string(const SceneData& scene);
void save_scene(const SceneData& scene, const std::string& path);

// Resolves names and ids; throws DataError with the offending line/field.
MultimodalGraph scene_to_graph(const SceneData& scene);
SceneData graph_to_scene(const MultimodalGraph& graph);

// ModelSpec for scenes of this shape: pairs derived from the
// correspondences, compatibility from the label_maps section (match by
// name when absent).
ModelSpec spec_from_scene(const SceneData& scene, const InterFeature& inter,
                          double penalty = 1000.0);

// Prediction file: one label name per node, one decision per
// correspondence ("cut" or a designated-side label name).
struct LabelingData {
    std::vector<std::string> node_labels;
    std::vector<std::string> latent_decisions;
};

LabelingData parse_labeling(std::istream& in, const std::string& name);
LabelingData read_labeling(const std::string& path);
void write_labeling(const LabelingData& labeling, std::ostream& out);
void save_labeling(const LabelingData& labeling, const std::string& path);

// Round-trip-safe decimal formatting used by every writer.
std::string format_double(double v);

} // namespace mmcrf
