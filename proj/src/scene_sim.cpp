#include "mmcrf/scene_sim.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mmcrf/errors.hpp"
#include "mmcrf/rng.hpp"

namespace mmcrf {

namespace {

void check_config(const SceneConfig& c) {
    if (c.modalities.size() < 1)
        throw DataError("scene config: need at least one modality");
    if (c.nodes_per_modality.size() != c.modalities.size())
        throw DataError("scene config: nodes_per_modality count mismatch");
    if (c.intra_density < 0.0 || c.intra_density > 1.0 ||
        c.misalignment_rate < 0.0 || c.misalignment_rate > 1.0)
        throw DataError("scene config: rates must lie in [0, 1]");
    if (c.class_separation <= 0.0 || c.feature_noise < 0.0)
        throw DataError("scene config: bad separation or noise");
    if (!c.feature_noise_per_modality.empty() &&
        c.feature_noise_per_modality.size() != c.modalities.size())
        throw DataError("scene config: per-modality noise count mismatch");
    for (std::size_t m = 0; m < c.modalities.size(); ++m) {
        if (c.modalities[m].feature_dim < c.modalities[m].labels.size())
            throw DataError("scene config: feature_dim must be >= L for "
                            "modality '" + c.modalities[m].id + "'");
        if (c.nodes_per_modality[m] < 0)
            throw DataError("scene config: negative node count");
    }
    for (std::size_t m = 0; m + 1 < c.modalities.size(); ++m) {
        const int cap = std::min(c.nodes_per_modality[m],
                                 c.nodes_per_modality[m + 1]);
        if (c.correspondences > cap)
            throw DataError("scene config: infeasible correspondence count " +
                            std::to_string(c.correspondences) + " > " +
                            std::to_string(cap));
        if (c.correspondences > 0 && c.misalignment_rate > 0.0 &&
            (c.modalities[m].labels.size() < 2 ||
             c.modalities[m + 1].labels.size() < 2))
            throw DataError("scene config: misalignment needs at least two "
                            "labels");
    }
}

} // namespace

std::vector<std::vector<double>> class_prototypes(Rng& rng, int l, int dim,
                                                  double separation) {
    std::vector<std::vector<double>> protos(l, std::vector<double>(dim));
    for (int c = 0; c < l; ++c) {
        auto& v = protos[c];
        for (int i = 0; i < dim; ++i)
            v[i] = rng.normal();
        for (int p = 0; p < c; ++p) {
            double d = 0.0;
            for (int i = 0; i < dim; ++i)
                d += v[i] * protos[p][i];
            for (int i = 0; i < dim; ++i)
                v[i] -= d * protos[p][i];
        }
        double norm = 0.0;
        for (int i = 0; i < dim; ++i)
            norm += v[i] * v[i];
        norm = std::sqrt(norm);
        if (norm < 1e-9)
            throw NumericalError("scene generator: degenerate prototype basis");
        for (int i = 0; i < dim; ++i)
            v[i] /= norm;
    }
    const double scale = separation / std::sqrt(2.0);
    for (auto& v : protos)
        for (double& x : v)
            x *= scale;
    return protos;
}

namespace {

std::vector<double> draw_feature(Rng& rng, const std::vector<double>& proto,
                                 double sigma) {
    std::vector<double> f(proto.size());
    for (std::size_t i = 0; i < f.size(); ++i)
        f[i] = proto[i] + sigma * rng.normal();
    return f;
}

// Balanced label assignment: every class appears floor(n/L) or one more
// time, shuffled.
std::vector<int> balanced_labels(Rng& rng, int n, int l) {
    std::vector<int> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i)
        out.push_back(1 + i % l);
    rng.shuffle(out);
    return out;
}

} // namespace

GeneratedScene generate_scene_full(const SceneConfig& config) {
    check_config(config);
    Rng proto_rng(config.prototype_seed);
    Rng rng(config.seed);
    auto noise_of = [&config](int m) {
        return config.feature_noise_per_modality.empty()
                   ? config.feature_noise
                   : config.feature_noise_per_modality[m];
    };

    GeneratedScene out;
    SceneData& s = out.scene;
    s.modalities = config.modalities;

    const int num_mod = static_cast<int>(config.modalities.size());
    std::vector<int> mod_offset(num_mod, 0);
    std::vector<std::vector<int>> gt(num_mod);

    for (int m = 0; m < num_mod; ++m) {
        const ModalitySpec& mod = config.modalities[m];
        const int n = config.nodes_per_modality[m];
        out.prototypes.push_back(class_prototypes(
            proto_rng, mod.labels.size(), mod.feature_dim,
            config.class_separation));
        mod_offset[m] = static_cast<int>(s.nodes.size());
        gt[m] = balanced_labels(rng, n, mod.labels.size());
        for (int i = 0; i < n; ++i) {
            SceneNodeRow row;
            row.id = static_cast<int>(s.nodes.size());
            row.modality = mod.id;
            row.instance = 0;
            row.gt = mod.labels.name(gt[m][i]);
            row.feature = draw_feature(rng, out.prototypes[m][gt[m][i] - 1],
                                        noise_of(m));
            s.nodes.push_back(std::move(row));
        }
    }

    // Intra edges, same-label pairs preferred.
    for (int m = 0; m < num_mod; ++m) {
        const int n = config.nodes_per_modality[m];
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                const double p = gt[m][i] == gt[m][j]
                                     ? config.intra_density
                                     : config.intra_density *
                                           config.cross_density_factor;
                if (!rng.bernoulli(p))
                    continue;
                const int a = mod_offset[m] + i;
                const int b = mod_offset[m] + j;
                double d2 = 0.0;
                for (std::size_t k = 0; k < s.nodes[a].feature.size(); ++k) {
                    const double d = s.nodes[a].feature[k] - s.nodes[b].feature[k];
                    d2 += d * d;
                }
                s.intra_edges.push_back({a, b, {std::sqrt(d2)}});
            }
    }

    // Correspondences between adjacent modality pairs, label-matched, each
    // node in at most one link per pair.
    for (int m = 0; m + 1 < num_mod; ++m) {
        std::vector<std::vector<int>> by_label_b(
            config.modalities[m + 1].labels.size() + 1);
        std::vector<int> order_b;
        for (int j = 0; j < config.nodes_per_modality[m + 1]; ++j)
            order_b.push_back(j);
        rng.shuffle(order_b);
        for (int j : order_b)
            by_label_b[gt[m + 1][j]].push_back(j);

        std::vector<int> order_a;
        for (int i = 0; i < config.nodes_per_modality[m]; ++i)
            order_a.push_back(i);
        rng.shuffle(order_a);

        int made = 0;
        for (int i : order_a) {
            if (made == config.correspondences)
                break;
            const std::string& name =
                config.modalities[m].labels.name(gt[m][i]);
            const int lb = config.modalities[m + 1].labels.index_of(name);
            if (lb == 0 || by_label_b[lb].empty())
                continue;
            const int j = by_label_b[lb].back();
            by_label_b[lb].pop_back();
            SceneCorrRow c;
            c.a = mod_offset[m] + i;
            c.b = mod_offset[m + 1] + j;
            c.overlap = rng.uniform(0.2, 1.0);
            c.cuttable = true;
            s.correspondences.push_back(c);
            ++made;
        }
        if (made < config.correspondences)
            throw DataError("scene generator: could not place " +
                            std::to_string(config.correspondences) +
                            " label-matched correspondences");
    }

    // Misalignment: flip one endpoint of a Bernoulli subset; the flipped
    // endpoint's features follow the new label.
    for (std::size_t ci = 0; ci < s.correspondences.size(); ++ci) {
        if (!rng.bernoulli(config.misalignment_rate))
            continue;
        const SceneCorrRow& c = s.correspondences[ci];
        const bool flip_b =
            config.flip_second_endpoint ? true : rng.bernoulli(0.5);
        const int node_id = flip_b ? c.b : c.a;
        const int other_id = flip_b ? c.a : c.b;
        SceneNodeRow& node = s.nodes[node_id];
        const int mi = [&]() {
            for (int m = 0; m < num_mod; ++m)
                if (config.modalities[m].id == node.modality)
                    return m;
            return -1;
        }();
        const LabelSpace& space = config.modalities[mi].labels;
        const int other_label = space.index_of(s.nodes[other_id].gt);
        // uniform over labels differing from the partner's
        int pick = 1 + static_cast<int>(rng.below(space.size() - 1));
        if (pick >= other_label)
            ++pick;
        node.gt = space.name(pick);
        node.feature = draw_feature(rng, out.prototypes[mi][pick - 1],
                                    noise_of(mi));
        out.flipped.push_back(static_cast<int>(ci));
    }

    // Flips replaced endpoint features; refresh the intra edge features.
    if (!out.flipped.empty())
        for (auto& e : s.intra_edges) {
            double d2 = 0.0;
            const auto& fa = s.nodes[e.a].feature;
            const auto& fb = s.nodes[e.b].feature;
            for (std::size_t k = 0; k < fa.size(); ++k) {
                const double d = fa[k] - fb[k];
                d2 += d * d;
            }
            e.feature = {std::sqrt(d2)};
        }
    return out;
}

TrainSample make_sample(const MultimodalGraph& base, GroundMode mode,
                        const ModelSpec& spec, bool require_gt) {
    if (require_gt)
        for (const auto& n : base.nodes)
            if (n.gt_label == 0)
                throw DataError("sample: missing ground truth at node " +
                                std::to_string(n.id));
    TrainSample sample;
    if (mode == GroundMode::Latent) {
        sample.graph = augment_with_latent(base);
        derive_latent_gt(sample.graph, spec);
    } else {
        sample.graph = base;
    }
    return sample;
}

TrainSample generate_scene(const SceneConfig& config) {
    const GeneratedScene gen = generate_scene_full(config);
    const MultimodalGraph base = scene_to_graph(gen.scene);
    const ModelSpec spec =
        spec_from_scene(gen.scene, InterFeature{}, 1000.0);
    TrainSample sample = make_sample(base, GroundMode::Latent, spec, true);
    sample.id = "seed-" + std::to_string(config.seed);
    return sample;
}

SceneData inject_misalignment(const SceneData& scene, double rate,
                              std::uint64_t seed) {
    if (rate < 0.0 || rate > 1.0)
        throw DataError("inject_misalignment: rate out of range");
    SceneData s = scene;
    if (rate == 0.0)
        return s;
    Rng rng(seed);

    // Per-modality class statistics estimated from the sample itself.
    std::map<std::string, int> mod_index;
    for (std::size_t m = 0; m < s.modalities.size(); ++m)
        mod_index[s.modalities[m].id] = static_cast<int>(m);
    struct Stats {
        std::vector<std::vector<double>> mean; // per label
        std::vector<int> count;
        double resid = 0.0;
        long resid_n = 0;
    };
    std::vector<Stats> stats(s.modalities.size());
    for (std::size_t m = 0; m < s.modalities.size(); ++m) {
        stats[m].mean.assign(s.modalities[m].labels.size(),
                             std::vector<double>(s.modalities[m].feature_dim, 0.0));
        stats[m].count.assign(s.modalities[m].labels.size(), 0);
    }
    for (const auto& n : s.nodes) {
        const int m = mod_index.at(n.modality);
        const int l = s.modalities[m].labels.index_of(n.gt);
        if (l == 0)
            continue;
        auto& mean = stats[m].mean[l - 1];
        for (std::size_t i = 0; i < n.feature.size(); ++i)
            mean[i] += n.feature[i];
        stats[m].count[l - 1]++;
    }
    for (auto& st : stats)
        for (std::size_t l = 0; l < st.mean.size(); ++l)
            if (st.count[l] > 0)
                for (double& v : st.mean[l])
                    v /= st.count[l];
    for (const auto& n : s.nodes) {
        const int m = mod_index.at(n.modality);
        const int l = s.modalities[m].labels.index_of(n.gt);
        if (l == 0 || stats[m].count[l - 1] == 0)
            continue;
        for (std::size_t i = 0; i < n.feature.size(); ++i) {
            const double d = n.feature[i] - stats[m].mean[l - 1][i];
            stats[m].resid += d * d;
            stats[m].resid_n++;
        }
    }
    for (auto& st : stats)
        st.resid = st.resid_n > 0 ? std::sqrt(st.resid / st.resid_n) : 0.0;

    for (std::size_t ci = 0; ci < s.correspondences.size(); ++ci) {
        if (!rng.bernoulli(rate))
            continue;
        const SceneCorrRow& c = s.correspondences[ci];
        const bool flip_b = rng.bernoulli(0.5);
        SceneNodeRow& node = s.nodes[flip_b ? c.b : c.a];
        const SceneNodeRow& other = s.nodes[flip_b ? c.a : c.b];
        const int m = mod_index.at(node.modality);
        const LabelSpace& space = s.modalities[m].labels;
        if (space.size() < 2)
            throw DataError("inject_misalignment: needs at least two labels");
        const int other_label = space.index_of(other.gt);
        int pick;
        if (other_label >= 1) {
            pick = 1 + static_cast<int>(rng.below(space.size() - 1));
            if (pick >= other_label)
                ++pick;
        } else {
            pick = 1 + static_cast<int>(rng.below(space.size()));
        }
        node.gt = space.name(pick);
        if (stats[m].count[pick - 1] > 0)
            node.feature = draw_feature(rng, stats[m].mean[pick - 1],
                                        stats[m].resid);
    }

    for (auto& e : s.intra_edges) {
        if (e.feature.size() != 1)
            continue;
        double d2 = 0.0;
        const auto& fa = s.nodes[e.a].feature;
        const auto& fb = s.nodes[e.b].feature;
        for (std::size_t k = 0; k < fa.size(); ++k) {
            const double d = fa[k] - fb[k];
            d2 += d * d;
        }
        e.feature = {std::sqrt(d2)};
    }
    return s;
}

TrainSample inject_misalignment(const TrainSample& sample, double rate,
                                std::uint64_t seed) {
    const MultimodalGraph base =
        sample.graph.augmented ? strip_latent(sample.graph) : sample.graph;
    SceneData scene = graph_to_scene(base);
    scene = inject_misalignment(scene, rate, seed);
    const MultimodalGraph flipped = scene_to_graph(scene);
    const ModelSpec spec = spec_from_scene(scene, InterFeature{}, 1000.0);
    TrainSample out = make_sample(
        flipped, sample.graph.augmented ? GroundMode::Latent : GroundMode::NoLatent,
        spec, false);
    out.id = sample.id;
    return out;
}

TrainSample ingest_features(const std::string& path, bool require_gt) {
    const SceneData scene = read_scene(path);
    const MultimodalGraph base = scene_to_graph(scene);
    const ModelSpec spec = spec_from_scene(scene, InterFeature{}, 1000.0);
    TrainSample sample = make_sample(base, GroundMode::Latent, spec, require_gt);
    sample.id = path;
    return sample;
}

} // namespace mmcrf
