#include "mmcrf/inference.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "mmcrf/errors.hpp"
#include "mmcrf/kernels.hpp"

namespace mmcrf {

namespace {

void check_config(const TrwConfig& c) {
    if (c.iterations < 1)
        throw DataError("trw: iterations must be >= 1");
    if (c.damping < 0.0 || c.damping >= 1.0)
        throw DataError("trw: damping must lie in [0, 1)");
    if (c.tolerance < 0.0)
        throw DataError("trw: tolerance must be non-negative");
}

void check_tables(const PotentialTables& t) {
    for (const auto& c : t.node_cost)
        for (double v : c)
            if (!std::isfinite(v))
                throw NumericalError("trw: non-finite node cost");
    for (const auto& e : t.edges) {
        if (e.rho <= 0.0 || e.rho > 1.0)
            throw DataError("trw: edge appearance probability out of (0, 1]");
        for (double v : e.cost)
            if (!std::isfinite(v))
                throw NumericalError("trw: non-finite edge cost");
    }
}

double entropy(const std::vector<double>& p) {
    double h = 0.0;
    for (double v : p)
        if (v > 0.0)
            h -= v * std::log(v);
    return h;
}

double trw_free_energy(const PotentialTables& t, const Marginals& m) {
    double f = 0.0;
    for (int i = 0; i < t.node_count(); ++i) {
        f += entropy(m.node[i]);
        f -= kernels::active().dot(m.node[i].data(), t.node_cost[i].data(),
                                   m.node[i].size());
    }
    for (std::size_t e = 0; e < t.edges.size(); ++e) {
        const TableEdge& te = t.edges[e];
        f += te.rho * (entropy(m.edge[e]) - entropy(m.node[te.a]) -
                       entropy(m.node[te.b]));
        f -= kernels::active().dot(m.edge[e].data(), te.cost.data(),
                                   m.edge[e].size());
    }
    return f;
}

} // namespace

TrwOutputs run_trw_schedule(Tape& tape, const TapeGraphView& view,
                            const TrwConfig& config) {
    const int n = static_cast<int>(view.states.size());
    const int ne = static_cast<int>(view.edges.size());

    // Directed message 2e -> into b, 2e+1 -> into a.
    std::vector<std::vector<int>> incoming(n);
    std::vector<std::vector<double>> incoming_rho(n);
    for (int e = 0; e < ne; ++e) {
        incoming[view.edges[e].b].push_back(2 * e);
        incoming_rho[view.edges[e].b].push_back(view.edges[e].rho);
        incoming[view.edges[e].a].push_back(2 * e + 1);
        incoming_rho[view.edges[e].a].push_back(view.edges[e].rho);
    }

    std::vector<Tape::Ref> msg(2 * ne);
    for (int e = 0; e < ne; ++e) {
        msg[2 * e] = tape.zeros(view.states[view.edges[e].b]);
        msg[2 * e + 1] = tape.zeros(view.states[view.edges[e].a]);
    }

    auto aggregate = [&](const std::vector<Tape::Ref>& m_cur, int i) {
        std::vector<Tape::Ref> terms;
        for (int d : incoming[i])
            terms.push_back(m_cur[d]);
        return tape.weighted_sum(terms, incoming_rho[i]);
    };

    auto pre_vec = [&](const std::vector<Tape::Ref>& agg, int src,
                       Tape::Ref opposite) {
        const Tape::Ref terms[3] = {agg[src], view.node_cost[src], opposite};
        const double coefs[3] = {1.0, -1.0, -1.0};
        return tape.weighted_sum(terms, coefs);
    };

    TrwOutputs out;
    int rounds = 0;
    for (int round = 0; round < config.iterations; ++round) {
        std::vector<Tape::Ref> agg(n);
        for (int i = 0; i < n; ++i)
            if (!incoming[i].empty())
                agg[i] = aggregate(msg, i);

        std::vector<Tape::Ref> next(2 * ne);
        for (int e = 0; e < ne; ++e) {
            const auto& ed = view.edges[e];
            const double inv = -1.0 / ed.rho;
            {
                const Tape::Ref pre = pre_vec(agg, ed.a, msg[2 * e + 1]);
                Tape::Ref m = tape.sub_max(tape.edge_lse(
                    ed.table, pre, view.states[ed.a], view.states[ed.b], inv,
                    /*reduce_rows=*/true));
                if (config.damping > 0.0) {
                    const Tape::Ref terms[2] = {m, msg[2 * e]};
                    const double coefs[2] = {1.0 - config.damping, config.damping};
                    m = tape.weighted_sum(terms, coefs);
                }
                next[2 * e] = m;
            }
            {
                const Tape::Ref pre = pre_vec(agg, ed.b, msg[2 * e]);
                Tape::Ref m = tape.sub_max(tape.edge_lse(
                    ed.table, pre, view.states[ed.a], view.states[ed.b], inv,
                    /*reduce_rows=*/false));
                if (config.damping > 0.0) {
                    const Tape::Ref terms[2] = {m, msg[2 * e + 1]};
                    const double coefs[2] = {1.0 - config.damping, config.damping};
                    m = tape.weighted_sum(terms, coefs);
                }
                next[2 * e + 1] = m;
            }
        }
        ++rounds;

        double delta = 0.0;
        if (config.tolerance > 0.0) {
            for (int d = 0; d < 2 * ne; ++d) {
                const auto prev = tape.value(msg[d]);
                const auto cur = tape.value(next[d]);
                for (std::size_t j = 0; j < cur.size(); ++j)
                    delta = std::max(delta, std::abs(cur[j] - prev[j]));
            }
        }
        msg = std::move(next);
        if (config.tolerance > 0.0 && delta < config.tolerance)
            break;
    }
    out.rounds = rounds;

    std::vector<Tape::Ref> agg(n);
    for (int i = 0; i < n; ++i)
        if (!incoming[i].empty())
            agg[i] = aggregate(msg, i);

    out.node_logits.resize(n);
    for (int i = 0; i < n; ++i) {
        if (incoming[i].empty()) {
            const Tape::Ref terms[1] = {view.node_cost[i]};
            const double coefs[1] = {-1.0};
            out.node_logits[i] = tape.weighted_sum(terms, coefs);
        } else {
            const Tape::Ref terms[2] = {agg[i], view.node_cost[i]};
            const double coefs[2] = {1.0, -1.0};
            out.node_logits[i] = tape.weighted_sum(terms, coefs);
        }
    }

    out.edge_logits.resize(ne);
    for (int e = 0; e < ne; ++e) {
        const auto& ed = view.edges[e];
        const Tape::Ref u_a = pre_vec(agg, ed.a, msg[2 * e + 1]);
        const Tape::Ref u_b = pre_vec(agg, ed.b, msg[2 * e]);
        out.edge_logits[e] =
            tape.table_logits(ed.table, u_a, u_b, view.states[ed.a],
                              view.states[ed.b], -1.0 / ed.rho);
    }
    return out;
}

Marginals marginals_from_outputs(const Tape& tape, const TrwOutputs& out,
                                 const PotentialTables* tables_for_logz) {
    Marginals m;
    const auto& k = kernels::active();
    m.node.resize(out.node_logits.size());
    for (std::size_t i = 0; i < out.node_logits.size(); ++i) {
        const auto v = tape.value(out.node_logits[i]);
        m.node[i].resize(v.size());
        k.softmax(v.data(), m.node[i].data(), v.size());
    }
    m.edge.resize(out.edge_logits.size());
    for (std::size_t e = 0; e < out.edge_logits.size(); ++e) {
        const auto v = tape.value(out.edge_logits[e]);
        m.edge[e].resize(v.size());
        k.softmax(v.data(), m.edge[e].data(), v.size());
    }
    if (tables_for_logz)
        m.log_partition = trw_free_energy(*tables_for_logz, m);
    return m;
}

Marginals trw_marginals(const PotentialTables& tables, const TrwConfig& config) {
    check_config(config);
    check_tables(tables);
    if (!config.edge_appearance.empty()) {
        if (config.edge_appearance.size() != tables.edges.size())
            throw DataError("trw: edge appearance override count mismatch");
        for (double r : config.edge_appearance)
            if (r <= 0.0 || r > 1.0)
                throw DataError("trw: edge appearance probability out of (0, 1]");
    }

    Tape tape;
    TapeGraphView view;
    view.states = tables.states;
    view.node_cost.reserve(tables.node_count());
    for (const auto& c : tables.node_cost)
        view.node_cost.push_back(tape.constant(c));
    for (std::size_t e = 0; e < tables.edges.size(); ++e) {
        const auto& te = tables.edges[e];
        const double rho = config.edge_appearance.empty()
                               ? te.rho
                               : config.edge_appearance[e];
        view.edges.push_back({te.a, te.b, tape.constant(te.cost), rho});
    }

    const TrwOutputs out = run_trw_schedule(tape, view, config);
    return marginals_from_outputs(tape, out, &tables);
}

std::vector<int> map_decode(const Marginals& marginals,
                            const PotentialTables& tables) {
    std::vector<int> labels(tables.node_count());
    for (int i = 0; i < tables.node_count(); ++i) {
        const auto& p = marginals.node[i];
        int best = 0;
        for (int s = 1; s < static_cast<int>(p.size()); ++s)
            if (p[s] > p[best])
                best = s;
        labels[i] = tables.label_of_state(i, best);
    }
    return labels;
}

Marginals brute_force_marginals(const PotentialTables& tables) {
    check_tables(tables);
    const int n = tables.node_count();
    double total_states = 1.0;
    for (int s : tables.states)
        total_states *= s;
    if (total_states > 1e7)
        throw DataError("brute_force_marginals: state space too large (" +
                        std::to_string(total_states) + ")");

    std::vector<int> assign(n, 0);
    auto energy_of = [&]() {
        double e = 0.0;
        for (int i = 0; i < n; ++i)
            e += tables.node_cost[i][assign[i]];
        for (const auto& te : tables.edges)
            e += te.cost[std::size_t(assign[te.a]) * tables.states[te.b] +
                         assign[te.b]];
        return e;
    };
    auto advance = [&]() {
        for (int i = n - 1; i >= 0; --i) {
            if (++assign[i] < tables.states[i])
                return true;
            assign[i] = 0;
        }
        return false;
    };

    // Pass 1: max of -E for stable exponentials.
    double max_neg = -std::numeric_limits<double>::infinity();
    do {
        max_neg = std::max(max_neg, -energy_of());
    } while (advance());

    Marginals m;
    m.node.resize(n);
    for (int i = 0; i < n; ++i)
        m.node[i].assign(tables.states[i], 0.0);
    m.edge.resize(tables.edges.size());
    for (std::size_t e = 0; e < tables.edges.size(); ++e)
        m.edge[e].assign(tables.edges[e].cost.size(), 0.0);

    double z = 0.0;
    assign.assign(n, 0);
    do {
        const double w = std::exp(-energy_of() - max_neg);
        z += w;
        for (int i = 0; i < n; ++i)
            m.node[i][assign[i]] += w;
        for (std::size_t e = 0; e < tables.edges.size(); ++e) {
            const auto& te = tables.edges[e];
            m.edge[e][std::size_t(assign[te.a]) * tables.states[te.b] +
                      assign[te.b]] += w;
        }
    } while (advance());

    for (auto& v : m.node)
        for (double& p : v)
            p /= z;
    for (auto& v : m.edge)
        for (double& p : v)
            p /= z;
    m.log_partition = max_neg + std::log(z);
    return m;
}

double brute_force_energy(const PotentialTables& tables,
                          const std::vector<int>& labeling) {
    if (static_cast<int>(labeling.size()) != tables.node_count())
        throw DataError("brute_force_energy: incomplete labeling");
    std::vector<int> state(labeling.size());
    for (int i = 0; i < tables.node_count(); ++i) {
        const int s = tables.state_of_label(i, labeling[i]);
        if (s < 0 || s >= tables.states[i])
            throw DataError("brute_force_energy: label out of range at node " +
                            std::to_string(i));
        state[i] = s;
    }
    double e = 0.0;
    for (int i = 0; i < tables.node_count(); ++i)
        e += tables.node_cost[i][state[i]];
    for (const auto& te : tables.edges)
        e += te.cost[std::size_t(state[te.a]) * tables.states[te.b] + state[te.b]];
    return e;
}

} // namespace mmcrf
