#pragma once

#include <string>
#include <vector>

#include "mmcrf/graph.hpp"
#include "mmcrf/potentials.hpp"
#include "mmcrf/rng.hpp"

namespace test_helpers {

inline mmcrf::ModalitySpec make_modality(const std::string& id, int l, int dim) {
    mmcrf::ModalitySpec m;
    m.id = id;
    m.feature_dim = dim;
    for (int i = 1; i <= l; ++i)
        m.labels.names.push_back("c" + std::to_string(i));
    return m;
}

inline std::vector<double> rand_vec(mmcrf::Rng& rng, int n, double scale = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v)
        x = scale * (2.0 * rng.uniform() - 1.0);
    return v;
}

inline mmcrf::GraphNode make_node(int modality, std::vector<double> f,
                                  int gt = 0, int instance = 0) {
    mmcrf::GraphNode n;
    n.modality = modality;
    n.feature = std::move(f);
    n.gt_label = gt;
    n.instance = instance;
    return n;
}

// Hand-built potential tables with arbitrary structure (no latent nodes).
inline mmcrf::PotentialTables make_tables(const std::vector<int>& states,
                                          const std::vector<std::pair<int, int>>& edges,
                                          mmcrf::Rng& rng, double scale = 1.0) {
    mmcrf::PotentialTables t;
    t.states = states;
    t.num_regular = static_cast<int>(states.size());
    for (int s : states)
        t.node_cost.push_back(rand_vec(rng, s, scale));
    for (const auto& [a, b] : edges) {
        mmcrf::TableEdge e;
        e.a = a;
        e.b = b;
        e.cost = rand_vec(rng, states[a] * states[b], scale);
        t.edges.push_back(std::move(e));
    }
    return t;
}

// Longest shortest path over the edge list (graph assumed connected enough
// for BFS from every node).
inline int graph_diameter(int n, const std::vector<std::pair<int, int>>& edges) {
    std::vector<std::vector<int>> adj(n);
    for (const auto& [a, b] : edges) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    int diam = 0;
    for (int s = 0; s < n; ++s) {
        std::vector<int> dist(n, -1);
        std::vector<int> queue{s};
        dist[s] = 0;
        for (std::size_t qi = 0; qi < queue.size(); ++qi) {
            const int u = queue[qi];
            for (int v : adj[u])
                if (dist[v] < 0) {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
        }
        for (int d : dist)
            diam = std::max(diam, d);
    }
    return diam;
}

// Uniform random labeled tree on n nodes.
inline std::vector<std::pair<int, int>> random_tree(mmcrf::Rng& rng, int n) {
    std::vector<std::pair<int, int>> edges;
    for (int v = 1; v < n; ++v)
        edges.push_back({static_cast<int>(rng.below(v)), v});
    return edges;
}

} // namespace test_helpers
