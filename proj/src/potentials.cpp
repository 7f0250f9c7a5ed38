#include "mmcrf/potentials.hpp"

#include <cmath>
#include <string>

#include "mmcrf/errors.hpp"
#include "mmcrf/kernels.hpp"

namespace mmcrf {

std::vector<double> unary_cost(std::span<const double> a, int rows, int cols,
                               std::span<const double> x) {
    if (static_cast<int>(x.size()) != cols ||
        a.size() != std::size_t(rows) * cols)
        throw DataError("unary_cost: dimension mismatch (matrix " +
                        std::to_string(rows) + "x" + std::to_string(cols) +
                        ", feature " + std::to_string(x.size()) + ")");
    std::vector<double> out(rows);
    kernels::active().matvec(a.data(), x.data(), out.data(), rows, cols);
    return out;
}

std::vector<double> intra_pairwise_cost(std::span<const double> b, int l,
                                        int edge_dim,
                                        std::span<const double> v) {
    if (static_cast<int>(v.size()) != edge_dim ||
        b.size() != std::size_t(l) * l * edge_dim)
        throw DataError("intra_pairwise_cost: dimension mismatch");
    std::vector<double> out(std::size_t(l) * l);
    kernels::active().matvec(b.data(), v.data(), out.data(), l * l, edge_dim);
    return out;
}

std::vector<double> latent_pairwise_cost_mapped(
    std::span<const double> same, std::span<const double> cut,
    const std::vector<int>& compat_row, int l_node, int l_latent,
    double penalty, bool cuttable) {
    if (static_cast<int>(same.size()) != l_latent ||
        static_cast<int>(cut.size()) != l_node ||
        static_cast<int>(compat_row.size()) != l_latent)
        throw DataError("latent_pairwise_cost: dimension mismatch");
    const int cols = l_latent + 1;
    std::vector<double> out(std::size_t(l_node) * cols, penalty);
    for (int l = 1; l <= l_node; ++l)
        if (cuttable)
            out[std::size_t(l - 1) * cols] = cut[l - 1];
    for (int s = 1; s <= l_latent; ++s) {
        const int l = compat_row[s - 1];
        if (l > 0)
            out[std::size_t(l - 1) * cols + s] = same[s - 1];
    }
    return out;
}

std::vector<double> latent_pairwise_cost(std::span<const double> same,
                                         std::span<const double> cut,
                                         double penalty, bool cuttable) {
    const int l = static_cast<int>(same.size());
    std::vector<int> diag(l);
    for (int s = 1; s <= l; ++s)
        diag[s - 1] = s;
    return latent_pairwise_cost_mapped(same, cut, diag, l, l, penalty, cuttable);
}

std::vector<double> inter_pairwise_cost(std::span<const double> b, int l_a,
                                        int l_b, int edge_dim,
                                        std::span<const double> v) {
    if (static_cast<int>(v.size()) != edge_dim ||
        b.size() != std::size_t(l_a) * l_b * edge_dim)
        throw DataError("inter_pairwise_cost: dimension mismatch");
    std::vector<double> out(std::size_t(l_a) * l_b);
    kernels::active().matvec(b.data(), v.data(), out.data(), l_a * l_b, edge_dim);
    return out;
}

std::vector<double> edge_feature_intra(std::span<const double> x_j,
                                       std::span<const double> x_k,
                                       std::span<const int> subset) {
    double acc = 0.0;
    for (int i : subset) {
        if (i < 0 || i >= static_cast<int>(x_j.size()) ||
            i >= static_cast<int>(x_k.size()))
            throw DataError("edge_feature_intra: bad index " + std::to_string(i));
        const double d = x_j[i] - x_k[i];
        acc += d * d;
    }
    return {std::sqrt(acc)};
}

std::vector<double> inter_edge_feature(const InterFeature& policy,
                                       std::span<const double> f_a,
                                       std::span<const double> f_b,
                                       double overlap) {
    std::vector<double> v;
    switch (policy.mode) {
    case InterFeature::Absent:
        throw DataError("inter_edge_feature: pair has no inter-edge block");
    case InterFeature::Constant:
        v.push_back(1.0);
        return v;
    case InterFeature::Full:
        v.assign(f_a.begin(), f_a.end());
        v.insert(v.end(), f_b.begin(), f_b.end());
        v.push_back(overlap);
        return v;
    case InterFeature::Selected:
        for (int i : policy.idx_a)
            v.push_back(f_a[i]);
        for (int i : policy.idx_b)
            v.push_back(f_b[i]);
        v.push_back(overlap);
        return v;
    }
    return v;
}

namespace {

void check_graph_against_spec(const MultimodalGraph& g, const ModelSpec& spec) {
    if (g.modalities.size() != spec.modalities.size())
        throw DataError("ground: modality count mismatch");
    for (std::size_t m = 0; m < g.modalities.size(); ++m)
        if (!(g.modalities[m] == spec.modalities[m]))
            throw DataError("ground: modality '" + g.modalities[m].id +
                            "' does not match the parameter spec");
}

} // namespace

PotentialTables ground(const MultimodalGraph& graph,
                       const ParameterBundle& params, GroundMode mode,
                       RhoPolicy rho) {
    if ((mode == GroundMode::Latent) != graph.augmented)
        throw DataError(mode == GroundMode::Latent
                            ? "ground: latent mode needs an augmented graph"
                            : "ground: no-latent mode needs an unaugmented graph");
    check_graph_against_spec(graph, params.spec);
    const ModelSpec& spec = params.spec;

    PotentialTables t;
    t.num_regular = graph.node_count();
    const int total = graph.node_count() + graph.latent_count();
    t.states.resize(total);
    t.node_cost.resize(total);

    for (const auto& n : graph.nodes) {
        const ModalitySpec& mod = graph.modalities[n.modality];
        const auto& blk = params.blocks[params.unary_block[n.modality]];
        t.states[n.id] = mod.labels.size();
        t.node_cost[n.id] =
            unary_cost(params.block_span(params.unary_block[n.modality]),
                       blk.rows, blk.cols, n.feature);
    }
    for (const auto& ln : graph.latent_nodes) {
        const Correspondence& c = graph.correspondences[ln.corr];
        const int pi = spec.pair_index(graph.nodes[c.a].modality,
                                       graph.nodes[c.b].modality);
        if (pi < 0)
            throw DataError("ground: no pair spec for correspondence " +
                            std::to_string(ln.corr));
        const auto& pb = params.pair_blocks[pi];
        const auto& blk = params.blocks[pb.lat_unary];
        t.states[ln.id] = blk.rows; // L_a + 1
        t.node_cost[ln.id] = unary_cost(params.block_span(pb.lat_unary),
                                        blk.rows, blk.cols, ln.feature);
    }

    for (std::size_t ei = 0; ei < graph.intra_edges.size(); ++ei) {
        const IntraEdge& e = graph.intra_edges[ei];
        const int m = graph.nodes[e.a].modality;
        const int l = graph.modalities[m].labels.size();
        TableEdge te;
        te.a = e.a;
        te.b = e.b;
        te.kind = EdgeKind::Intra;
        te.source = static_cast<int>(ei);
        te.cost = intra_pairwise_cost(params.block_span(params.intra_block[m]),
                                      l, spec.intra_dim[m], e.feature);
        t.edges.push_back(std::move(te));
    }

    for (std::size_t ci = 0; ci < graph.correspondences.size(); ++ci) {
        const Correspondence& c = graph.correspondences[ci];
        const int ma = graph.nodes[c.a].modality;
        const int mb = graph.nodes[c.b].modality;
        const int pi = spec.pair_index(ma, mb);
        if (pi < 0)
            throw DataError("ground: no pair spec for correspondence " +
                            std::to_string(ci));
        const PairSpec& p = spec.pairs[pi];
        const auto& pb = params.pair_blocks[pi];
        const int la = graph.modalities[ma].labels.size();
        const int lb = graph.modalities[mb].labels.size();

        if (mode == GroundMode::Latent) {
            const int latent_id = graph.latent_nodes[ci].id;
            std::vector<int> diag(la);
            for (int s = 1; s <= la; ++s)
                diag[s - 1] = s;

            TableEdge side_a;
            side_a.a = c.a;
            side_a.b = latent_id;
            side_a.kind = EdgeKind::NodeLatentA;
            side_a.pair = pi;
            side_a.source = static_cast<int>(ci);
            side_a.cost = latent_pairwise_cost_mapped(
                params.block_span(pb.same_a), params.block_span(pb.cut_a),
                diag, la, la, spec.penalty, c.cuttable);
            t.edges.push_back(std::move(side_a));

            TableEdge side_b;
            side_b.a = c.b;
            side_b.b = latent_id;
            side_b.kind = EdgeKind::NodeLatentB;
            side_b.pair = pi;
            side_b.source = static_cast<int>(ci);
            side_b.cost = latent_pairwise_cost_mapped(
                params.block_span(pb.same_b), params.block_span(pb.cut_b),
                p.compat_b, lb, la, spec.penalty, c.cuttable);
            t.edges.push_back(std::move(side_b));
        } else {
            if (pb.inter < 0)
                throw DataError("ground: pair '" +
                                graph.modalities[ma].id + ":" +
                                graph.modalities[mb].id +
                                "' has no inter-edge parameters");
            const auto v = inter_edge_feature(p.inter, graph.nodes[c.a].feature,
                                              graph.nodes[c.b].feature, c.overlap);
            TableEdge te;
            te.a = c.a;
            te.b = c.b;
            te.kind = EdgeKind::Inter;
            te.pair = pi;
            te.source = static_cast<int>(ci);
            te.cost = inter_pairwise_cost(
                params.block_span(pb.inter), la, lb,
                p.inter.dim(graph.modalities[ma].feature_dim,
                            graph.modalities[mb].feature_dim),
                v);
            t.edges.push_back(std::move(te));
        }
    }

    apply_rho_policy(t, rho);

    // the penalty must dominate the learnable cells of the tables it
    // lives in: the node-latent pairwise tables
    double max_cost = 0.0;
    for (const auto& e : t.edges) {
        if (e.kind != EdgeKind::NodeLatentA && e.kind != EdgeKind::NodeLatentB)
            continue;
        for (double v : e.cost)
            if (v != spec.penalty)
                max_cost = std::max(max_cost, std::abs(v));
    }
    if (max_cost >= spec.penalty)
        throw DataError("ground: a latent pairwise cost (" +
                        std::to_string(max_cost) +
                        ") reaches the penalty constant " +
                        std::to_string(spec.penalty));
    return t;
}

std::vector<double> edge_rho(int node_count,
                             std::span<const std::pair<int, int>> endpoints,
                             RhoPolicy policy) {
    std::vector<double> rho(endpoints.size(), 1.0);
    if (policy == RhoPolicy::Unit)
        return rho;
    // Union-find over grounded nodes.
    std::vector<int> parent(node_count);
    for (int i = 0; i < node_count; ++i)
        parent[i] = i;
    auto find = [&parent](int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    for (const auto& [a, b] : endpoints) {
        const int ra = find(a);
        const int rb = find(b);
        if (ra != rb)
            parent[ra] = rb;
    }
    std::vector<int> comp_nodes(node_count, 0), comp_edges(node_count, 0);
    for (int i = 0; i < node_count; ++i)
        comp_nodes[find(i)]++;
    for (const auto& [a, b] : endpoints)
        comp_edges[find(a)]++;
    for (std::size_t e = 0; e < endpoints.size(); ++e) {
        const int root = find(endpoints[e].first);
        const double m = static_cast<double>(comp_edges[root]);
        const double nn = static_cast<double>(comp_nodes[root]);
        rho[e] = (m > 0.0) ? std::min(1.0, (nn - 1.0) / m) : 1.0;
    }
    return rho;
}

void apply_rho_policy(PotentialTables& tables, RhoPolicy policy) {
    std::vector<std::pair<int, int>> endpoints;
    endpoints.reserve(tables.edges.size());
    for (const auto& e : tables.edges)
        endpoints.push_back({e.a, e.b});
    const auto rho = edge_rho(tables.node_count(), endpoints, policy);
    for (std::size_t e = 0; e < tables.edges.size(); ++e)
        tables.edges[e].rho = rho[e];
}

} // namespace mmcrf
