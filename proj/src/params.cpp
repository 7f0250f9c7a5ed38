#include "mmcrf/params.hpp"

#include <set>

#include "mmcrf/errors.hpp"
#include "mmcrf/rng.hpp"

namespace mmcrf {

void finalize_spec(ModelSpec& spec) {
    const int num_mod = static_cast<int>(spec.modalities.size());
    {
        std::set<std::string> ids;
        for (const auto& m : spec.modalities) {
            if (!ids.insert(m.id).second)
                throw DataError("model spec: duplicate modality id '" + m.id + "'");
            std::set<std::string> names(m.labels.names.begin(),
                                        m.labels.names.end());
            if (static_cast<int>(names.size()) != m.labels.size())
                throw DataError("model spec: duplicate label name in modality '" +
                                m.id + "'");
        }
    }
    if (spec.intra_dim.empty())
        spec.intra_dim.assign(num_mod, 1);
    if (static_cast<int>(spec.intra_dim.size()) != num_mod)
        throw DataError("model spec: intra_dim count != modality count");
    if (spec.penalty <= 0.0)
        throw DataError("model spec: penalty must be positive");
    for (auto& p : spec.pairs) {
        if (p.mod_a < 0 || p.mod_a >= num_mod || p.mod_b < 0 || p.mod_b >= num_mod)
            throw DataError("model spec: pair references unknown modality");
        const LabelSpace& la = spec.modalities[p.mod_a].labels;
        const LabelSpace& lb = spec.modalities[p.mod_b].labels;
        if (p.compat_b.empty()) {
            p.compat_b.resize(la.size());
            for (int s = 1; s <= la.size(); ++s)
                p.compat_b[s - 1] = lb.index_of(la.name(s));
        }
        if (static_cast<int>(p.compat_b.size()) != la.size())
            throw DataError("model spec: pair compatibility table has wrong length");
        for (int v : p.compat_b)
            if (v < 0 || v > lb.size())
                throw DataError("model spec: pair compatibility entry out of range");
        for (int i : p.inter.idx_a)
            if (i < 0 || i >= spec.modalities[p.mod_a].feature_dim)
                throw DataError("model spec: selected inter feature index out of range");
        for (int i : p.inter.idx_b)
            if (i < 0 || i >= spec.modalities[p.mod_b].feature_dim)
                throw DataError("model spec: selected inter feature index out of range");
    }
}

ModelSpec spec_from_graph(const MultimodalGraph& graph, const InterFeature& inter,
                          double penalty) {
    ModelSpec spec;
    spec.modalities = graph.modalities;
    spec.intra_dim.assign(spec.modalities.size(), 1);
    for (std::size_t m = 0; m < spec.modalities.size(); ++m) {
        for (const auto& e : graph.intra_edges)
            if (graph.nodes[e.a].modality == static_cast<int>(m)) {
                spec.intra_dim[m] = static_cast<int>(e.feature.size());
                break;
            }
    }
    spec.penalty = penalty;
    std::set<std::pair<int, int>> seen;
    for (const auto& c : graph.correspondences) {
        const int ma = graph.nodes[c.a].modality;
        const int mb = graph.nodes[c.b].modality;
        if (seen.insert({ma, mb}).second) {
            PairSpec p;
            p.mod_a = ma;
            p.mod_b = mb;
            p.inter = inter;
            spec.pairs.push_back(std::move(p));
        }
    }
    finalize_spec(spec);
    return spec;
}

namespace {

int add_block(ParameterBundle& b, const std::string& name, int rows, int cols) {
    ParameterBundle::Block blk;
    blk.name = name;
    blk.rows = rows;
    blk.cols = cols;
    blk.offset = b.values.size();
    b.values.resize(b.values.size() + blk.size(), 0.0);
    b.blocks.push_back(std::move(blk));
    return static_cast<int>(b.blocks.size()) - 1;
}

std::string pair_tag(const ModelSpec& spec, const PairSpec& p) {
    return spec.modalities[p.mod_a].id + ":" + spec.modalities[p.mod_b].id;
}

} // namespace

ParameterBundle init_parameters(const ModelSpec& spec, std::uint64_t) {
    ModelSpec s = spec;
    finalize_spec(s);
    ParameterBundle b;
    b.spec = std::move(s);

    const int num_mod = static_cast<int>(b.spec.modalities.size());
    for (int m = 0; m < num_mod; ++m) {
        const ModalitySpec& mod = b.spec.modalities[m];
        const int l = mod.labels.size();
        b.unary_block.push_back(add_block(b, "A:" + mod.id, l, mod.feature_dim));
        b.intra_block.push_back(add_block(b, "B:" + mod.id, l * l, b.spec.intra_dim[m]));
    }
    for (const auto& p : b.spec.pairs) {
        const ModalitySpec& ma = b.spec.modalities[p.mod_a];
        const ModalitySpec& mb = b.spec.modalities[p.mod_b];
        const int la = ma.labels.size();
        const int lb = mb.labels.size();
        const std::string tag = pair_tag(b.spec, p);
        ParameterBundle::PairBlocks pb;
        pb.lat_unary = add_block(b, "Alat:" + tag, la + 1,
                                 ma.feature_dim + mb.feature_dim + 1);
        pb.same_a = add_block(b, "same_a:" + tag, 1, la);
        pb.cut_a = add_block(b, "cut_a:" + tag, 1, la);
        pb.same_b = add_block(b, "same_b:" + tag, 1, la);
        pb.cut_b = add_block(b, "cut_b:" + tag, 1, lb);
        const int idim = p.inter.dim(ma.feature_dim, mb.feature_dim);
        if (idim > 0)
            pb.inter = add_block(b, "Binter:" + tag, la * lb, idim);
        b.pair_blocks.push_back(pb);
    }
    return b;
}

void randomize_parameters(ParameterBundle& bundle, std::uint64_t seed, double scale) {
    Rng rng(seed);
    for (double& v : bundle.values)
        v = scale * rng.normal();
}

std::size_t learnable_count(const ParameterBundle& bundle) {
    return bundle.values.size();
}

std::vector<NamedShape> parameter_shapes(const ParameterBundle& bundle) {
    std::vector<NamedShape> out;
    for (const auto& blk : bundle.blocks)
        out.push_back({blk.name, blk.rows, blk.cols});
    for (std::size_t i = 0; i < bundle.spec.pairs.size(); ++i) {
        const PairSpec& p = bundle.spec.pairs[i];
        const ModalitySpec& ma = bundle.spec.modalities[p.mod_a];
        const ModalitySpec& mb = bundle.spec.modalities[p.mod_b];
        const int states = ma.labels.size() + 1;
        const std::string tag = pair_tag(bundle.spec, p);
        out.push_back({"Blat:" + tag + "@" + ma.id, ma.labels.size() * states, 1});
        out.push_back({"Blat:" + tag + "@" + mb.id, mb.labels.size() * states, 1});
    }
    return out;
}

} // namespace mmcrf
