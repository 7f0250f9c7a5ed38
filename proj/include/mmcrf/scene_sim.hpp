#pragma once

#include <cstdint>
#include <vector>

#include "mmcrf/learning.hpp"
#include "mmcrf/rng.hpp"
#include "mmcrf/scene_io.hpp"

namespace mmcrf {

// Synthetic multimodal scenes with controllable cross-modality
// misalignment. Features are class-conditional Gaussians around
// orthogonal prototypes at the requested separation; a Bernoulli(rate)
// subset of the correspondences gets one endpoint's label flipped and its
// features redrawn from the flipped label's prototype (the content is
// real, the link is inconsistent).
struct SceneConfig {
    std::vector<ModalitySpec> modalities; // feature_dim >= L per modality
    std::vector<int> nodes_per_modality;
    double intra_density = 0.25;        // same-label pair keep probability
    double cross_density_factor = 0.125; // different-label pairs: density * this
    int correspondences = 0;            // per adjacent modality pair
    double misalignment_rate = 0.0;
    double class_separation = 4.0;
    double feature_noise = 1.0;
    // optional per-modality override of feature_noise
    std::vector<double> feature_noise_per_modality;
    // flip the second endpoint of a misaligned link instead of a random
    // side (the lagging-sensor regime)
    bool flip_second_endpoint = false;
    std::uint64_t seed = 0;
    // Dataset-level seed: scenes sharing it draw features around the same
    // class prototypes, which is what makes cross-scene training coherent.
    std::uint64_t prototype_seed = 1;
};

struct GeneratedScene {
    SceneData scene;
    // [modality][label-1] -> prototype vector
    std::vector<std::vector<std::vector<double>>> prototypes;
    std::vector<int> flipped; // correspondence indices with an induced flip
};

GeneratedScene generate_scene_full(const SceneConfig& config);

// L orthogonal class prototypes in R^dim, pairwise `separation` apart.
std::vector<std::vector<double>> class_prototypes(Rng& rng, int l, int dim,
                                                  double separation);

// TrainSample with the augmented graph and derived latent ground truth.
TrainSample generate_scene(const SceneConfig& config);

// Augments (latent mode) and derives latent gt; require_gt insists on a
// label for every modality node.
TrainSample make_sample(const MultimodalGraph& base, GroundMode mode,
                        const ModelSpec& spec, bool require_gt);

// Flip procedure applied to an existing scene; flipped endpoint features
// are redrawn from the sample's own per-class feature statistics.
SceneData inject_misalignment(const SceneData& scene, double rate,
                              std::uint64_t seed);
TrainSample inject_misalignment(const TrainSample& sample, double rate,
                                std::uint64_t seed);

// Scene file -> TrainSample (latent mode, match-by-name pairs unless the
// file carries label maps).
TrainSample ingest_features(const std::string& path, bool require_gt = false);

} // namespace mmcrf
