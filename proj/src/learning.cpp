#include "mmcrf/learning.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <thread>

#include "mmcrf/errors.hpp"
#include "mmcrf/kernels.hpp"

namespace mmcrf {

int latent_gt(int y_a, int y_b, bool cuttable) {
    if (y_a < 1 || y_b < 1)
        throw DataError("latent_gt: endpoint labels must be in 1..L");
    if (y_a == y_b)
        return y_a;
    if (!cuttable)
        throw DataError("latent_gt: ground-truth contradiction on a "
                        "non-cuttable link");
    return 0;
}

int latent_gt_mapped(int y_a, int y_b, bool cuttable,
                     const std::vector<int>& compat_b) {
    if (y_a < 1 || y_a > static_cast<int>(compat_b.size()) || y_b < 1)
        throw DataError("latent_gt: endpoint labels out of range");
    if (compat_b[y_a - 1] == y_b)
        return y_a;
    if (!cuttable)
        throw DataError("latent_gt: ground-truth contradiction on a "
                        "non-cuttable link");
    return 0;
}

void derive_latent_gt(MultimodalGraph& graph, const ModelSpec& spec) {
    for (auto& ln : graph.latent_nodes) {
        const Correspondence& c = graph.correspondences[ln.corr];
        const int ga = graph.nodes[c.a].gt_label;
        const int gb = graph.nodes[c.b].gt_label;
        if (ga == 0 || gb == 0) {
            ln.gt_label = -1;
            continue;
        }
        const int pi = spec.pair_index(graph.nodes[c.a].modality,
                                       graph.nodes[c.b].modality);
        if (pi < 0)
            throw DataError("derive_latent_gt: no pair spec for correspondence " +
                            std::to_string(ln.corr));
        ln.gt_label = latent_gt_mapped(ga, gb, c.cuttable,
                                       spec.pairs[pi].compat_b);
    }
}

namespace {

int require_gt(const MultimodalGraph& g, int node_id) {
    const int gt = g.nodes[node_id].gt_label;
    if (gt == 0)
        throw DataError("missing ground truth at node " + std::to_string(node_id));
    return gt;
}

int require_latent_gt(const MultimodalGraph& g, int corr) {
    const int gt = g.latent_nodes[corr].gt_label;
    if (gt < 0)
        throw DataError("missing ground truth at latent node for correspondence " +
                        std::to_string(corr));
    return gt;
}

// Ground one sample into the tape, mirroring potentials::ground exactly
// (same node and edge order), and collect the gt cell of every pairwise
// clique.
struct TapedSample {
    TapeGraphView view;
    std::vector<int> gt_cell;
};

TapedSample ground_on_tape(Tape& tape, std::vector<Tape::Ref>& leaves,
                           const ParameterBundle& params,
                           const MultimodalGraph& g, const TrainConfig& cfg,
                           bool want_gt) {
    const ModelSpec& spec = params.spec;
    auto leaf = [&](int block) {
        if (!leaves[block].valid())
            leaves[block] = tape.param(block, params.block_span(block));
        return leaves[block];
    };

    TapedSample ts;
    const int total = g.node_count() + g.latent_count();
    ts.view.states.resize(total);
    ts.view.node_cost.resize(total);

    for (const auto& n : g.nodes) {
        const int blk = params.unary_block[n.modality];
        const auto& b = params.blocks[blk];
        ts.view.states[n.id] = b.rows;
        ts.view.node_cost[n.id] = tape.matvec(leaf(blk), b.rows, b.cols, n.feature);
    }
    for (const auto& ln : g.latent_nodes) {
        const Correspondence& c = g.correspondences[ln.corr];
        const int pi = spec.pair_index(g.nodes[c.a].modality,
                                       g.nodes[c.b].modality);
        if (pi < 0)
            throw DataError("ground: no pair spec for correspondence " +
                            std::to_string(ln.corr));
        const int blk = params.pair_blocks[pi].lat_unary;
        const auto& b = params.blocks[blk];
        ts.view.states[ln.id] = b.rows;
        ts.view.node_cost[ln.id] = tape.matvec(leaf(blk), b.rows, b.cols, ln.feature);
    }

    std::vector<std::pair<int, int>> endpoints;
    for (const auto& e : g.intra_edges) {
        const int m = g.nodes[e.a].modality;
        const int blk = params.intra_block[m];
        const auto& b = params.blocks[blk];
        TapeGraphView::Edge ed;
        ed.a = e.a;
        ed.b = e.b;
        ed.table = tape.matvec(leaf(blk), b.rows, b.cols, e.feature);
        ts.view.edges.push_back(ed);
        endpoints.push_back({e.a, e.b});
        if (want_gt) {
            const int la = ts.view.states[e.b];
            ts.gt_cell.push_back((require_gt(g, e.a) - 1) * la +
                                 (require_gt(g, e.b) - 1));
        }
    }

    for (std::size_t ci = 0; ci < g.correspondences.size(); ++ci) {
        const Correspondence& c = g.correspondences[ci];
        const int ma = g.nodes[c.a].modality;
        const int mb = g.nodes[c.b].modality;
        const int pi = spec.pair_index(ma, mb);
        if (pi < 0)
            throw DataError("ground: no pair spec for correspondence " +
                            std::to_string(ci));
        const PairSpec& p = spec.pairs[pi];
        const auto& pb = params.pair_blocks[pi];
        const int la = spec.modalities[ma].labels.size();
        const int lb = spec.modalities[mb].labels.size();

        if (cfg.mode == GroundMode::Latent) {
            const int latent_id = g.latent_nodes[ci].id;
            std::vector<int> diag(la);
            for (int s = 1; s <= la; ++s)
                diag[s - 1] = s;

            TapeGraphView::Edge side_a;
            side_a.a = c.a;
            side_a.b = latent_id;
            side_a.table = tape.latent_table(
                leaf(pb.same_a), leaf(pb.cut_a), diag, la, la, spec.penalty,
                c.cuttable);
            ts.view.edges.push_back(side_a);
            endpoints.push_back({c.a, latent_id});

            TapeGraphView::Edge side_b;
            side_b.a = c.b;
            side_b.b = latent_id;
            side_b.table = tape.latent_table(
                leaf(pb.same_b), leaf(pb.cut_b), p.compat_b, lb, la,
                spec.penalty, c.cuttable);
            ts.view.edges.push_back(side_b);
            endpoints.push_back({c.b, latent_id});

            if (want_gt) {
                const int s = require_latent_gt(g, static_cast<int>(ci));
                ts.gt_cell.push_back((require_gt(g, c.a) - 1) * (la + 1) + s);
                ts.gt_cell.push_back((require_gt(g, c.b) - 1) * (la + 1) + s);
            }
        } else {
            if (pb.inter < 0)
                throw DataError("ground: pair has no inter-edge parameters");
            const auto v = inter_edge_feature(p.inter, g.nodes[c.a].feature,
                                              g.nodes[c.b].feature, c.overlap);
            const auto& b = params.blocks[pb.inter];
            TapeGraphView::Edge ed;
            ed.a = c.a;
            ed.b = c.b;
            ed.table = tape.matvec(leaf(pb.inter), b.rows, b.cols, v);
            ts.view.edges.push_back(ed);
            endpoints.push_back({c.a, c.b});
            if (want_gt)
                ts.gt_cell.push_back((require_gt(g, c.a) - 1) * lb +
                                     (require_gt(g, c.b) - 1));
        }
    }

    const auto rho = edge_rho(total, endpoints, cfg.rho);
    for (std::size_t e = 0; e < ts.view.edges.size(); ++e)
        ts.view.edges[e].rho = rho[e];
    return ts;
}

double sample_risk(const ParameterBundle& params, const MultimodalGraph& g,
                   const TrainConfig& cfg, GradientBundle* grad) {
    if ((cfg.mode == GroundMode::Latent) != g.augmented)
        throw DataError(cfg.mode == GroundMode::Latent
                            ? "risk: latent mode needs augmented samples"
                            : "risk: no-latent mode needs unaugmented samples");
    Tape tape;
    std::vector<Tape::Ref> leaves(params.blocks.size());
    const TapedSample ts =
        ground_on_tape(tape, leaves, params, g, cfg, /*want_gt=*/true);

    TrwConfig tc;
    tc.iterations = cfg.message_iterations;
    tc.damping = cfg.damping;
    tc.tolerance = 0.0; // gradients differentiate a fixed-depth schedule
    const TrwOutputs out = run_trw_schedule(tape, ts.view, tc);

    for (std::size_t e = 0; e < ts.view.edges.size(); ++e) {
        const double term = tape.add_nll(out.edge_logits[e], ts.gt_cell[e]);
        if (!std::isfinite(term))
            throw NumericalError("risk: non-finite loss at clique " +
                                 std::to_string(e));
    }
    if (grad) {
        tape.backward();
        for (std::size_t b = 0; b < leaves.size(); ++b)
            if (leaves[b].valid()) {
                const auto gsp = tape.param_grad(static_cast<int>(b));
                kernels::active().axpy(
                    1.0, gsp.data(),
                    grad->values.data() + params.blocks[b].offset, gsp.size());
            }
    }
    return tape.loss();
}

// Deterministic parallel map over samples; the reduction always runs in
// sample order.
template <typename Fn>
void for_each_sample(std::size_t count, int threads, Fn&& fn) {
    int t = threads > 0 ? threads
                        : static_cast<int>(std::thread::hardware_concurrency());
    t = std::max(1, std::min<int>(t, static_cast<int>(count)));
    if (t <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(t);
    for (int w = 0; w < t; ++w)
        pool.emplace_back([&, w]() {
            for (std::size_t i = w; i < count; i += t)
                fn(i);
        });
    for (auto& th : pool)
        th.join();
}

} // namespace

double clique_marginal_loss(const Marginals& marginals,
                            const PotentialTables& tables,
                            const MultimodalGraph& graph) {
    if (marginals.edge.size() != tables.edges.size())
        throw DataError("clique_marginal_loss: marginals do not match tables");
    double loss = 0.0;
    for (std::size_t e = 0; e < tables.edges.size(); ++e) {
        const TableEdge& te = tables.edges[e];
        int ga, gb;
        if (te.kind == EdgeKind::NodeLatentA || te.kind == EdgeKind::NodeLatentB) {
            ga = require_gt(graph, te.a);
            gb = require_latent_gt(graph, te.source);
        } else {
            ga = require_gt(graph, te.a);
            gb = require_gt(graph, te.b);
        }
        const int sa = tables.state_of_label(te.a, ga);
        const int sb = te.kind == EdgeKind::Intra || te.kind == EdgeKind::Inter
                           ? gb - 1
                           : gb;
        const double p =
            marginals.edge[e][std::size_t(sa) * tables.states[te.b] + sb];
        loss -= std::log(std::max(p, 1e-300));
    }
    return loss;
}

double empirical_risk(const ParameterBundle& params,
                      std::span<const TrainSample> samples,
                      const TrainConfig& config) {
    kernels::active();
    std::vector<double> risks(samples.size(), 0.0);
    std::exception_ptr err;
    std::mutex err_mu;
    for_each_sample(samples.size(), config.threads, [&](std::size_t i) {
        try {
            risks[i] = sample_risk(params, samples[i].graph, config, nullptr);
        } catch (...) {
            std::lock_guard<std::mutex> lk(err_mu);
            if (!err)
                err = std::current_exception();
        }
    });
    if (err)
        std::rethrow_exception(err);
    double risk = 0.0;
    for (double r : risks)
        risk += r;
    const auto& th = params.values;
    risk += config.l2 * kernels::active().dot(th.data(), th.data(), th.size());
    return risk;
}

GradientBundle risk_gradient(const ParameterBundle& params,
                             std::span<const TrainSample> samples,
                             const TrainConfig& config, double* risk_out) {
    kernels::active();
    std::vector<double> risks(samples.size(), 0.0);
    std::vector<GradientBundle> grads(samples.size());
    std::exception_ptr err;
    std::mutex err_mu;
    for_each_sample(samples.size(), config.threads, [&](std::size_t i) {
        try {
            grads[i].values.assign(params.values.size(), 0.0);
            risks[i] = sample_risk(params, samples[i].graph, config, &grads[i]);
        } catch (...) {
            std::lock_guard<std::mutex> lk(err_mu);
            if (!err)
                err = std::current_exception();
        }
    });
    if (err)
        std::rethrow_exception(err);

    GradientBundle g;
    g.values.assign(params.values.size(), 0.0);
    double risk = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        risk += risks[i];
        kernels::active().axpy(1.0, grads[i].values.data(), g.values.data(),
                               g.values.size());
    }
    kernels::active().axpy(2.0 * config.l2, params.values.data(),
                           g.values.data(), g.values.size());
    const auto& th = params.values;
    risk += config.l2 * kernels::active().dot(th.data(), th.data(), th.size());
    if (risk_out)
        *risk_out = risk;
    return g;
}

TrainResult train(const ParameterBundle& init,
                  std::span<const TrainSample> samples,
                  const TrainConfig& config) {
    if (samples.empty())
        throw DataError("train: need at least one sample");

    TrainResult res;
    ParameterBundle cur = init;
    res.params = init;

    try {
        double cur_risk = empirical_risk(cur, samples, config);
        double best_risk = cur_risk;
        res.trace.push_back({0, cur_risk, 0.0, 0.0});

        const auto& kb = kernels::active();
        std::vector<double> prev_theta, prev_grad;

        for (int it = 1; it <= config.outer_iterations; ++it) {
            const GradientBundle g = risk_gradient(cur, samples, config);
            const double gsq =
                kb.dot(g.values.data(), g.values.data(), g.values.size());
            const double gnorm = std::sqrt(gsq);
            if (it == 1)
                res.trace[0].grad_norm = gnorm;
            if (gnorm == 0.0)
                break;

            // Barzilai-Borwein trial step after the first iteration.
            double step = config.step0;
            if (!config.fixed_step && !prev_theta.empty()) {
                double sy = 0.0, ss = 0.0;
                for (std::size_t i = 0; i < cur.values.size(); ++i) {
                    const double s = cur.values[i] - prev_theta[i];
                    const double y = g.values[i] - prev_grad[i];
                    sy += s * y;
                    ss += s * s;
                }
                if (std::isfinite(sy) && sy > 0.0)
                    step = std::min(std::max(ss / sy, 1e-12), 1e6);
            }
            prev_theta = cur.values;
            prev_grad = g.values;

            auto risk_at = [&](double s, ParameterBundle& out) {
                out.values = cur.values;
                kb.axpy(-s, g.values.data(), out.values.data(),
                        out.values.size());
                return empirical_risk(out, samples, config);
            };
            auto armijo = [&](double s, double r) {
                return std::isfinite(r) && r <= cur_risk - 1e-4 * s * gsq;
            };

            ParameterBundle cand = cur;
            bool accepted = false;
            double cand_risk = cur_risk;
            int backtracks = 0;
            if (config.fixed_step) {
                cand_risk = risk_at(step, cand);
                accepted = std::isfinite(cand_risk);
                if (!accepted)
                    res.diverged = true;
            } else {
                for (; backtracks <= config.max_backtracks; ++backtracks) {
                    cand_risk = risk_at(step, cand);
                    if (armijo(step, cand_risk)) {
                        accepted = true;
                        break;
                    }
                    step *= 0.5;
                }
            }
            if (!config.fixed_step && accepted && backtracks == 0) {
                // trial accepted outright: grow while it keeps helping
                ParameterBundle grown = cur;
                for (int grows = 0; grows < 30; ++grows) {
                    const double r2 = risk_at(2.0 * step, grown);
                    if (!armijo(2.0 * step, r2) || r2 >= cand_risk)
                        break;
                    step *= 2.0;
                    cand_risk = r2;
                    std::swap(cand.values, grown.values);
                }
            }
            if (!accepted) {
                res.trace.push_back({it, cur_risk, 0.0, gnorm});
                break;
            }
            cur = std::move(cand);
            cur_risk = cand_risk;
            res.trace.push_back({it, cur_risk, step, gnorm});
            if (cur_risk < best_risk) {
                best_risk = cur_risk;
                res.params = cur;
            }
            if (!std::isfinite(cur_risk)) {
                res.diverged = true;
                break;
            }
        }
    } catch (const NumericalError&) {
        res.diverged = true;
    }
    return res;
}

} // namespace mmcrf
