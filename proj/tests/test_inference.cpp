#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mmcrf/errors.hpp"
#include "mmcrf/inference.hpp"
#include "mmcrf/learning.hpp"

using namespace mmcrf;
using test_helpers::graph_diameter;
using test_helpers::make_modality;
using test_helpers::make_node;
using test_helpers::make_tables;
using test_helpers::random_tree;

TEST_SUITE_BEGIN("inference");

TEST_CASE("brute force closed forms") {
    SUBCASE("two disconnected binary nodes, zero costs") {
        PotentialTables t;
        t.states = {2, 2};
        t.num_regular = 2;
        t.node_cost = {{0, 0}, {0, 0}};
        const Marginals m = brute_force_marginals(t);
        CHECK(m.node[0][0] == doctest::Approx(0.5));
        CHECK(m.node[1][1] == doctest::Approx(0.5));
        CHECK(m.log_partition == doctest::Approx(std::log(4.0)));
    }
    SUBCASE("single node, costs 0 and ln 3") {
        PotentialTables t;
        t.states = {2};
        t.num_regular = 1;
        t.node_cost = {{0.0, std::log(3.0)}};
        const Marginals m = brute_force_marginals(t);
        CHECK(m.node[0][0] == doctest::Approx(0.75));
        CHECK(m.node[0][1] == doctest::Approx(0.25));
        CHECK(m.log_partition == doctest::Approx(std::log(4.0 / 3.0)));
    }
    SUBCASE("state space guard") {
        PotentialTables t;
        t.states.assign(30, 10);
        t.num_regular = 30;
        t.node_cost.assign(30, std::vector<double>(10, 0.0));
        CHECK_THROWS_WITH_AS(brute_force_marginals(t),
                             doctest::Contains("state space too large"),
                             DataError);
    }
}

TEST_CASE("brute force edge marginals are self-consistent") {
    Rng rng(5);
    // random 4-node loop, 3 labels
    const std::vector<std::pair<int, int>> loop{{0, 1}, {1, 2}, {2, 3}, {3, 0}};
    PotentialTables t = make_tables({3, 3, 3, 3}, loop, rng);
    const Marginals m = brute_force_marginals(t);
    for (std::size_t e = 0; e < t.edges.size(); ++e) {
        const auto& te = t.edges[e];
        for (int sa = 0; sa < 3; ++sa) {
            double row = 0.0;
            for (int sb = 0; sb < 3; ++sb)
                row += m.edge[e][sa * 3 + sb];
            CHECK(row == doctest::Approx(m.node[te.a][sa]).epsilon(1e-12));
        }
        for (int sb = 0; sb < 3; ++sb) {
            double col = 0.0;
            for (int sa = 0; sa < 3; ++sa)
                col += m.edge[e][sa * 3 + sb];
            CHECK(col == doctest::Approx(m.node[te.b][sb]).epsilon(1e-12));
        }
    }
}

TEST_CASE("brute force energy") {
    Rng rng(6);
    PotentialTables t = make_tables({2, 3}, {{0, 1}}, rng);
    SUBCASE("zero tables give zero energy") {
        PotentialTables z = t;
        for (auto& c : z.node_cost)
            for (double& v : c)
                v = 0.0;
        for (auto& e : z.edges)
            for (double& v : e.cost)
                v = 0.0;
        CHECK(brute_force_energy(z, {1, 1}) == 0.0);
        CHECK(brute_force_energy(z, {2, 3}) == 0.0);
    }
    SUBCASE("probability reconstruction matches enumeration") {
        const Marginals m = brute_force_marginals(t);
        // the edge marginal of a two-node graph is the exact joint
        for (int a = 1; a <= 2; ++a)
            for (int b = 1; b <= 3; ++b) {
                const double e = brute_force_energy(t, {a, b});
                const double p = std::exp(-e - m.log_partition);
                CHECK(p == doctest::Approx(m.edge[0][(a - 1) * 3 + (b - 1)])
                               .epsilon(1e-12));
            }
    }
    SUBCASE("incomplete labeling is rejected") {
        CHECK_THROWS_AS(brute_force_energy(t, {1}), DataError);
        CHECK_THROWS_AS(brute_force_energy(t, {0, 1}), DataError);
    }
}

TEST_CASE("penalty cells dominate the energy") {
    // grounded zero-parameter latent edge: selected penalty cell costs P
    std::vector<ModalitySpec> mods{make_modality("a", 2, 2),
                                   make_modality("b", 2, 2)};
    std::vector<GraphNode> nodes{make_node(0, {1, 0}, 1), make_node(1, {0, 1}, 1)};
    std::vector<Correspondence> corr{{0, 1, 0.5, true}};
    MultimodalGraph g = augment_with_latent(build_graph(mods, nodes, {}, corr));
    const ModelSpec spec = spec_from_graph(g, InterFeature{});
    const PotentialTables t = ground(g, init_parameters(spec), GroundMode::Latent);
    // node a takes label 1, latent takes label 2: a penalty pair
    CHECK(brute_force_energy(t, {1, 1, 2}) >= 1000.0);
    CHECK(brute_force_energy(t, {1, 1, 1}) == 0.0);
}

TEST_CASE("trw on a single node is a softmax") {
    PotentialTables t;
    t.states = {2};
    t.num_regular = 1;
    t.node_cost = {{0.0, std::log(3.0)}};
    TrwConfig cfg;
    cfg.iterations = 1;
    const Marginals m = trw_marginals(t, cfg);
    CHECK(m.node[0][0] == doctest::Approx(0.75));
    CHECK(m.node[0][1] == doctest::Approx(0.25));
    CHECK(m.log_partition == doctest::Approx(std::log(4.0 / 3.0)));
}

TEST_CASE("all-zero tables give uniform marginals") {
    Rng rng(7);
    PotentialTables t = make_tables({2, 3, 2, 4}, {{0, 1}, {1, 2}, {2, 3}, {3, 0}},
                                    rng);
    for (auto& c : t.node_cost)
        for (double& v : c)
            v = 0.0;
    for (auto& e : t.edges)
        for (double& v : e.cost)
            v = 0.0;
    TrwConfig cfg;
    cfg.iterations = 5;
    const Marginals m = trw_marginals(t, cfg);
    for (int i = 0; i < 4; ++i)
        for (double p : m.node[i])
            CHECK(p == doctest::Approx(1.0 / t.states[i]).epsilon(1e-12));
    for (std::size_t e = 0; e < t.edges.size(); ++e)
        for (double p : m.edge[e])
            CHECK(p == doctest::Approx(1.0 / m.edge[e].size()).epsilon(1e-12));
}

TEST_CASE("tree exactness with rho 1 and K = diameter") {
    Rng rng(8);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 2 + static_cast<int>(rng.below(7));
        const auto edges = random_tree(rng, n);
        std::vector<int> states(n);
        for (int i = 0; i < n; ++i)
            states[i] = 2 + static_cast<int>(rng.below(3));
        PotentialTables t = make_tables(states, edges, rng, 2.0);
        const Marginals exact = brute_force_marginals(t);

        TrwConfig cfg;
        cfg.iterations = std::max(1, graph_diameter(n, edges));
        const Marginals approx = trw_marginals(t, cfg);

        double max_err = 0.0;
        for (int i = 0; i < n; ++i)
            for (int s = 0; s < states[i]; ++s)
                max_err = std::max(max_err,
                                   std::abs(exact.node[i][s] - approx.node[i][s]));
        for (std::size_t e = 0; e < t.edges.size(); ++e)
            for (std::size_t c = 0; c < exact.edge[e].size(); ++c)
                max_err = std::max(max_err,
                                   std::abs(exact.edge[e][c] - approx.edge[e][c]));
        CHECK(max_err <= 1e-6);
        CHECK(approx.log_partition ==
              doctest::Approx(exact.log_partition).epsilon(1e-9));
    }
}

TEST_CASE("edge marginals stay consistent with node marginals on trees") {
    Rng rng(9);
    const auto edges = random_tree(rng, 6);
    PotentialTables t = make_tables({2, 3, 2, 3, 2, 2}, edges, rng);
    TrwConfig cfg;
    cfg.iterations = graph_diameter(6, edges) + 2;
    const Marginals m = trw_marginals(t, cfg);
    for (std::size_t e = 0; e < t.edges.size(); ++e) {
        const auto& te = t.edges[e];
        for (int sa = 0; sa < t.states[te.a]; ++sa) {
            double row = 0.0;
            for (int sb = 0; sb < t.states[te.b]; ++sb)
                row += m.edge[e][sa * t.states[te.b] + sb];
            CHECK(std::abs(row - m.node[te.a][sa]) < 1e-6);
        }
    }
}

TEST_CASE("marginals normalize regardless of K") {
    Rng rng(10);
    PotentialTables t =
        make_tables({3, 3, 3, 3}, {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 2}}, rng,
                    3.0);
    for (const int k : {1, 2, 7}) {
        TrwConfig cfg;
        cfg.iterations = k;
        const Marginals m = trw_marginals(t, cfg);
        for (const auto& p : m.node) {
            double s = 0.0;
            for (double v : p)
                s += v;
            CHECK(std::abs(s - 1.0) <= 1e-9);
        }
        for (const auto& p : m.edge) {
            double s = 0.0;
            for (double v : p)
                s += v;
            CHECK(std::abs(s - 1.0) <= 1e-9);
        }
    }
}

TEST_CASE("label symmetry: permuting states permutes marginals") {
    Rng rng(11);
    PotentialTables t = make_tables({3, 3, 3}, {{0, 1}, {1, 2}, {2, 0}}, rng);
    TrwConfig cfg;
    cfg.iterations = 6;
    const Marginals base = trw_marginals(t, cfg);

    // independent permutation per node
    std::vector<std::vector<int>> perm(3, std::vector<int>{0, 1, 2});
    for (auto& p : perm)
        rng.shuffle(p);

    PotentialTables tp = t;
    for (int i = 0; i < 3; ++i)
        for (int s = 0; s < 3; ++s)
            tp.node_cost[i][perm[i][s]] = t.node_cost[i][s];
    for (std::size_t e = 0; e < t.edges.size(); ++e) {
        const auto& te = t.edges[e];
        for (int sa = 0; sa < 3; ++sa)
            for (int sb = 0; sb < 3; ++sb)
                tp.edges[e].cost[perm[te.a][sa] * 3 + perm[te.b][sb]] =
                    t.edges[e].cost[sa * 3 + sb];
    }
    const Marginals permuted = trw_marginals(tp, cfg);
    for (int i = 0; i < 3; ++i)
        for (int s = 0; s < 3; ++s)
            CHECK(permuted.node[i][perm[i][s]] ==
                  doctest::Approx(base.node[i][s]).epsilon(1e-12));
}

TEST_CASE("runs are bitwise deterministic") {
    Rng rng(12);
    PotentialTables t = make_tables({4, 4, 4}, {{0, 1}, {1, 2}, {2, 0}}, rng);
    TrwConfig cfg;
    cfg.iterations = 9;
    cfg.damping = 0.3;
    const Marginals a = trw_marginals(t, cfg);
    const Marginals b = trw_marginals(t, cfg);
    for (int i = 0; i < 3; ++i)
        for (int s = 0; s < 4; ++s)
            CHECK(a.node[i][s] == b.node[i][s]);
    for (std::size_t e = 0; e < t.edges.size(); ++e)
        for (std::size_t c = 0; c < a.edge[e].size(); ++c)
            CHECK(a.edge[e][c] == b.edge[e][c]);
    CHECK(a.log_partition == b.log_partition);
}

TEST_CASE("early stopping honors the tolerance") {
    Rng rng(13);
    const auto edges = random_tree(rng, 5);
    PotentialTables t = make_tables({2, 2, 2, 2, 2}, edges, rng);
    TrwConfig tight;
    tight.iterations = 50;
    tight.tolerance = 1e-12;
    TrwConfig full;
    full.iterations = 50;
    const Marginals a = trw_marginals(t, tight);
    const Marginals b = trw_marginals(t, full);
    for (int i = 0; i < 5; ++i)
        for (int s = 0; s < 2; ++s)
            CHECK(a.node[i][s] == doctest::Approx(b.node[i][s]).epsilon(1e-9));
}

TEST_CASE("map_decode follows the argmax with low-index ties") {
    PotentialTables t;
    t.states = {3, 2};
    t.num_regular = 2;
    t.node_cost = {{0, 0, 0}, {0, 0}};
    Marginals m;
    m.node = {{0.1, 0.7, 0.2}, {0.5, 0.5}};
    const auto labels = map_decode(m, t);
    CHECK(labels[0] == 2);
    CHECK(labels[1] == 1);

    PotentialTables tl;
    tl.states = {3};
    tl.num_regular = 0; // single latent node
    tl.node_cost = {{0, 0, 0}};
    Marginals ml;
    ml.node = {{0.8, 0.1, 0.1}};
    CHECK(map_decode(ml, tl)[0] == 0); // peaked at the cut state
}

TEST_CASE("zero-parameter latent graphs never decode into penalty states") {
    std::vector<ModalitySpec> mods{make_modality("a", 3, 2),
                                   make_modality("b", 3, 2)};
    std::vector<GraphNode> nodes{make_node(0, {1, 0}, 1), make_node(1, {0, 1}, 1),
                                 make_node(0, {1, 1}, 2), make_node(1, {2, 0}, 2)};
    std::vector<Correspondence> corr{{0, 1, 0.5, true}, {2, 3, 0.5, false}};
    MultimodalGraph g = augment_with_latent(build_graph(mods, nodes, {}, corr));
    const ModelSpec spec = spec_from_graph(g, InterFeature{});
    const PotentialTables t = ground(g, init_parameters(spec), GroundMode::Latent);
    TrwConfig cfg;
    cfg.iterations = 10;
    const auto labels = map_decode(trw_marginals(t, cfg), t);
    CHECK(labels[4] == 0);  // cuttable link: the cut state carries most mass
    CHECK(labels[5] != 0);  // non-cuttable: the cut state is penalty-only
}

TEST_CASE("config-level edge appearance overrides the tables") {
    Rng rng(14);
    PotentialTables t = make_tables({3, 3, 3, 3}, {{0, 1}, {1, 2}, {2, 3}, {3, 0}},
                                    rng);
    apply_rho_policy(t, RhoPolicy::UniformTree); // 3/4 on the loop
    TrwConfig base;
    base.iterations = 6;
    const Marginals tree_rho = trw_marginals(t, base);

    TrwConfig unit = base;
    unit.edge_appearance.assign(4, 1.0);
    const Marginals forced = trw_marginals(t, unit);

    apply_rho_policy(t, RhoPolicy::Unit);
    const Marginals native = trw_marginals(t, base);
    for (int i = 0; i < 4; ++i)
        for (int s = 0; s < 3; ++s) {
            CHECK(forced.node[i][s] == native.node[i][s]);
            CHECK(forced.node[i][s] != tree_rho.node[i][s]);
        }

    TrwConfig bad = base;
    bad.edge_appearance = {1.0, 1.0};
    CHECK_THROWS_AS(trw_marginals(t, bad), DataError);
    bad.edge_appearance = {1.0, 1.0, 0.0, 1.0};
    CHECK_THROWS_AS(trw_marginals(t, bad), DataError);
}

TEST_CASE("non-finite tables are rejected") {
    PotentialTables t;
    t.states = {2};
    t.num_regular = 1;
    t.node_cost = {{0.0, std::numeric_limits<double>::infinity()}};
    TrwConfig cfg;
    CHECK_THROWS_AS(trw_marginals(t, cfg), NumericalError);
}

TEST_SUITE_END();
