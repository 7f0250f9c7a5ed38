#include "mmcrf/graph.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <utility>

#include "mmcrf/errors.hpp"

namespace mmcrf {

namespace {

std::string ids(int a, int b) {
    std::ostringstream os;
    os << "(" << a << ", " << b << ")";
    return os.str();
}

} // namespace

MultimodalGraph build_graph(std::vector<ModalitySpec> modalities,
                            std::vector<GraphNode> nodes,
                            std::vector<IntraEdge> intra_edges,
                            std::vector<Correspondence> correspondences) {
    MultimodalGraph g;
    if (modalities.empty())
        throw DataError("build_graph: no modalities");
    {
        std::set<std::string> seen;
        for (const auto& m : modalities) {
            if (m.feature_dim <= 0)
                throw DataError("build_graph: modality '" + m.id +
                                "' has non-positive feature dim");
            if (m.labels.size() < 1)
                throw DataError("build_graph: modality '" + m.id + "' has no labels");
            std::set<std::string> names(m.labels.names.begin(), m.labels.names.end());
            if (static_cast<int>(names.size()) != m.labels.size())
                throw DataError("build_graph: duplicate label name in modality '" +
                                m.id + "'");
            if (!seen.insert(m.id).second)
                throw DataError("build_graph: duplicate modality id '" + m.id + "'");
        }
    }
    g.modalities = std::move(modalities);

    const int num_mod = static_cast<int>(g.modalities.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        GraphNode n = nodes[i];
        n.id = static_cast<int>(i);
        if (n.modality < 0 || n.modality >= num_mod)
            throw DataError("build_graph: node " + std::to_string(i) +
                            " references unknown modality");
        const ModalitySpec& spec = g.modalities[n.modality];
        if (static_cast<int>(n.feature.size()) != spec.feature_dim)
            throw DataError("build_graph: dimension mismatch at node " +
                            std::to_string(i) + ": got " +
                            std::to_string(n.feature.size()) + ", modality '" +
                            spec.id + "' expects " +
                            std::to_string(spec.feature_dim));
        if (n.gt_label < 0 || n.gt_label > spec.labels.size())
            throw DataError("build_graph: node " + std::to_string(i) +
                            " gt label out of range");
        g.nodes.push_back(std::move(n));
    }

    const int n_nodes = g.node_count();
    std::set<std::pair<int, int>> edge_seen;
    for (const auto& e : intra_edges) {
        if (e.a < 0 || e.a >= n_nodes || e.b < 0 || e.b >= n_nodes)
            throw DataError("build_graph: dangling id in intra edge " + ids(e.a, e.b));
        if (e.a == e.b)
            throw DataError("build_graph: self-loop at node " + std::to_string(e.a));
        if (g.nodes[e.a].modality != g.nodes[e.b].modality)
            throw DataError("build_graph: cross-modality intra-edge " + ids(e.a, e.b));
        if (!edge_seen.insert({std::min(e.a, e.b), std::max(e.a, e.b)}).second)
            throw DataError("build_graph: duplicate edge " + ids(e.a, e.b));
        g.intra_edges.push_back(e);
    }

    std::set<std::pair<int, int>> corr_seen;
    for (const auto& c : correspondences) {
        if (c.a < 0 || c.a >= n_nodes || c.b < 0 || c.b >= n_nodes)
            throw DataError("build_graph: dangling id in correspondence " +
                            ids(c.a, c.b));
        const GraphNode& na = g.nodes[c.a];
        const GraphNode& nb = g.nodes[c.b];
        if (c.a == c.b)
            throw DataError("build_graph: self-loop correspondence at node " +
                            std::to_string(c.a));
        if (na.modality == nb.modality && na.instance == nb.instance)
            throw DataError("build_graph: correspondence " + ids(c.a, c.b) +
                            " links two nodes of one modality with equal "
                            "instance tags");
        if (c.overlap < 0.0 || c.overlap > 1.0)
            throw DataError("build_graph: correspondence " + ids(c.a, c.b) +
                            " overlap out of range");
        if (!corr_seen.insert({std::min(c.a, c.b), std::max(c.a, c.b)}).second)
            throw DataError("build_graph: duplicate correspondence " + ids(c.a, c.b));
        g.correspondences.push_back(c);
    }
    return g;
}

MultimodalGraph augment_with_latent(const MultimodalGraph& graph) {
    if (graph.augmented)
        throw DataError("augment_with_latent: already augmented");
    MultimodalGraph g = graph;
    g.latent_nodes.reserve(g.correspondences.size());
    int next_id = g.node_count();
    for (std::size_t t = 0; t < g.correspondences.size(); ++t) {
        const Correspondence& c = g.correspondences[t];
        LatentNode ln;
        ln.id = next_id++;
        ln.corr = static_cast<int>(t);
        const auto& fa = g.nodes[c.a].feature;
        const auto& fb = g.nodes[c.b].feature;
        ln.feature.reserve(fa.size() + fb.size() + 1);
        ln.feature.insert(ln.feature.end(), fa.begin(), fa.end());
        ln.feature.insert(ln.feature.end(), fb.begin(), fb.end());
        ln.feature.push_back(c.overlap);
        g.latent_nodes.push_back(std::move(ln));
    }
    g.augmented = true;
    return g;
}

std::vector<std::string> validate(const MultimodalGraph& g) {
    std::vector<std::string> diags;
    auto note = [&diags](const std::string& s) { diags.push_back(s); };

    for (const auto& n : g.nodes) {
        if (n.modality < 0 || n.modality >= static_cast<int>(g.modalities.size())) {
            note("node " + std::to_string(n.id) + ": unknown modality");
            continue;
        }
        const ModalitySpec& spec = g.modalities[n.modality];
        if (static_cast<int>(n.feature.size()) != spec.feature_dim)
            note("node " + std::to_string(n.id) + ": feature length " +
                 std::to_string(n.feature.size()) + " != modality dim " +
                 std::to_string(spec.feature_dim));
        if (n.gt_label < 0 || n.gt_label > spec.labels.size())
            note("node " + std::to_string(n.id) + ": gt label out of range");
    }
    for (const auto& e : g.intra_edges) {
        if (e.a == e.b)
            note("intra edge " + ids(e.a, e.b) + ": self-loop");
        else if (g.nodes[e.a].modality != g.nodes[e.b].modality)
            note("intra edge " + ids(e.a, e.b) + ": cross-modality");
    }
    for (std::size_t t = 0; t < g.correspondences.size(); ++t) {
        const Correspondence& c = g.correspondences[t];
        if (c.overlap < 0.0 || c.overlap > 1.0)
            note("correspondence " + std::to_string(t) + ": overlap out of range");
    }
    if (g.augmented) {
        if (g.latent_nodes.size() != g.correspondences.size())
            note("latent count " + std::to_string(g.latent_nodes.size()) +
                 " != correspondence count " +
                 std::to_string(g.correspondences.size()));
        for (const auto& ln : g.latent_nodes) {
            const Correspondence& c = g.correspondences[ln.corr];
            const std::size_t want = g.nodes[c.a].feature.size() +
                                     g.nodes[c.b].feature.size() + 1;
            if (ln.feature.size() != want)
                note("latent " + std::to_string(ln.id) + ": feature length " +
                     std::to_string(ln.feature.size()) + " != " +
                     std::to_string(want));
            if (!c.cuttable && ln.gt_label == 0)
                note("latent " + std::to_string(ln.id) +
                     ": cut gt label on a non-cuttable correspondence");
            const int l_max = g.modality_of(c.a).labels.size();
            if (ln.gt_label > l_max)
                note("latent " + std::to_string(ln.id) + ": gt label out of range");
        }
    } else if (!g.latent_nodes.empty()) {
        note("latent nodes present on an unaugmented graph");
    }
    return diags;
}

MultimodalGraph strip_latent(const MultimodalGraph& graph) {
    MultimodalGraph g = graph;
    g.latent_nodes.clear();
    g.augmented = false;
    return g;
}

} // namespace mmcrf
