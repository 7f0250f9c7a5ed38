#include "mmcrf/semgeo.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "mmcrf/errors.hpp"
#include "mmcrf/rng.hpp"
#include "mmcrf/scene_sim.hpp"

namespace mmcrf {

LabelSpace LabelMapping::geometric_space() const {
    LabelSpace g;
    for (const auto& [sem, geo] : rows) {
        bool seen = false;
        for (const auto& n : g.names)
            if (n == geo)
                seen = true;
        if (!seen)
            g.names.push_back(geo);
    }
    return g;
}

const std::string& LabelMapping::geometric_of(const std::string& semantic) const {
    for (const auto& [sem, geo] : rows)
        if (sem == semantic)
            return geo;
    throw DataError("semgeo: unmapped semantic label '" + semantic + "'");
}

LabelMapping parse_label_mapping(std::istream& in, const std::string& name) {
    LabelMapping map;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ss(line);
        std::string sem, geo, extra;
        if (!(ss >> sem))
            continue;
        if (sem[0] == '#')
            continue;
        if (!(ss >> geo) || (ss >> extra))
            throw DataError(name + ":" + std::to_string(lineno) +
                            ": expected 'semantic geometric'");
        for (const auto& [s, g] : map.rows)
            if (s == sem)
                throw DataError(name + ":" + std::to_string(lineno) +
                                ": semantic label '" + sem + "' mapped twice");
        map.rows.push_back({sem, geo});
    }
    if (map.rows.empty())
        throw DataError(name + ": empty label mapping");
    return map;
}

LabelMapping read_label_mapping(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open mapping file '" + path + "'");
    return parse_label_mapping(in, path);
}

SceneData semgeo_expand(const SceneData& scene, const LabelMapping& mapping,
                        const SemgeoOptions& options) {
    const LabelSpace geo_space = mapping.geometric_space();

    // Every semantic label anywhere in the scene must be mapped.
    for (const auto& m : scene.modalities)
        for (const auto& n : m.labels.names)
            (void)mapping.geometric_of(n);

    SceneData out;
    out.modalities = scene.modalities;
    for (const auto& m : scene.modalities) {
        ModalitySpec geo;
        geo.id = m.id + "_geo";
        geo.labels = geo_space;
        geo.feature_dim = m.feature_dim;
        if (options.resample && geo.feature_dim < geo_space.size())
            throw DataError("semgeo: feature dim too small to resample "
                            "geometric prototypes");
        out.modalities.push_back(std::move(geo));
    }

    Rng rng(options.seed);
    std::vector<std::vector<std::vector<double>>> protos;
    if (options.resample)
        for (const auto& m : scene.modalities)
            protos.push_back(class_prototypes(rng, geo_space.size(),
                                              m.feature_dim, options.separation));

    const int n = static_cast<int>(scene.nodes.size());
    out.nodes = scene.nodes;
    for (int k = 0; k < n; ++k) {
        const SceneNodeRow& src = scene.nodes[k];
        SceneNodeRow geo = src;
        geo.id = n + k;
        geo.modality = src.modality + "_geo";
        if (src.gt == "-" || src.gt.empty()) {
            if (options.resample)
                throw DataError("semgeo: cannot resample features for node " +
                                std::to_string(src.id) + " without gt");
            geo.gt = "-";
        } else {
            geo.gt = mapping.geometric_of(src.gt);
            if (options.resample) {
                int mi = 0;
                for (std::size_t m = 0; m < scene.modalities.size(); ++m)
                    if (scene.modalities[m].id == src.modality)
                        mi = static_cast<int>(m);
                const int gl = geo_space.index_of(geo.gt);
                geo.feature.resize(scene.modalities[mi].feature_dim);
                for (std::size_t i = 0; i < geo.feature.size(); ++i)
                    geo.feature[i] = protos[mi][gl - 1][i] +
                                     options.noise * rng.normal();
            }
        }
        out.nodes.push_back(std::move(geo));
    }

    out.intra_edges = scene.intra_edges;
    for (const auto& e : scene.intra_edges) {
        SceneIntraRow ge;
        ge.a = e.a + n;
        ge.b = e.b + n;
        if (options.resample) {
            double d2 = 0.0;
            const auto& fa = out.nodes[ge.a].feature;
            const auto& fb = out.nodes[ge.b].feature;
            for (std::size_t i = 0; i < fa.size(); ++i) {
                const double d = fa[i] - fb[i];
                d2 += d * d;
            }
            ge.feature = {std::sqrt(d2)};
        } else {
            ge.feature = e.feature;
        }
        out.intra_edges.push_back(std::move(ge));
    }

    // Original links, their geometric mirror, the cross diagonals, and the
    // non-cuttable same-region links.
    out.correspondences = scene.correspondences;
    for (const auto& c : scene.correspondences)
        out.correspondences.push_back({c.a + n, c.b + n, c.overlap, c.cuttable});
    for (const auto& c : scene.correspondences) {
        out.correspondences.push_back({c.a, c.b + n, c.overlap, true});
        out.correspondences.push_back({c.b, c.a + n, c.overlap, true});
    }
    for (int k = 0; k < n; ++k)
        out.correspondences.push_back({k, n + k, 1.0, false});

    // Label maps for every semantic<->geometric pair in use.
    out.label_maps = scene.label_maps;
    auto add_map = [&](const std::string& sem_mod, const std::string& geo_mod,
                       const LabelSpace& sem_space) {
        SceneLabelMap lm;
        lm.mod_a = sem_mod;
        lm.mod_b = geo_mod;
        for (const auto& s : sem_space.names)
            lm.entries.push_back({s, mapping.geometric_of(s)});
        out.label_maps.push_back(std::move(lm));
    };
    // Pairs actually created above: (mod(a), mod(b)_geo), (mod(b), mod(a)_geo)
    // from the diagonals plus one same-region pair per modality.
    std::vector<std::pair<std::string, std::string>> seen;
    auto add_once = [&](const std::string& a, const std::string& b,
                        const LabelSpace& sp) {
        for (const auto& [x, y] : seen)
            if (x == a && y == b)
                return;
        seen.push_back({a, b});
        add_map(a, b, sp);
    };
    for (std::size_t m = 0; m < scene.modalities.size(); ++m)
        add_once(scene.modalities[m].id, scene.modalities[m].id + "_geo",
                 scene.modalities[m].labels);
    for (const auto& c : scene.correspondences) {
        const auto& ma = scene.nodes[c.a].modality;
        const auto& mb = scene.nodes[c.b].modality;
        const LabelSpace* sa = nullptr;
        const LabelSpace* sb = nullptr;
        for (const auto& m : scene.modalities) {
            if (m.id == ma)
                sa = &m.labels;
            if (m.id == mb)
                sb = &m.labels;
        }
        if (!sa || !sb)
            throw DataError("semgeo: correspondence references unknown modality");
        add_once(ma, mb + "_geo", *sa);
        add_once(mb, ma + "_geo", *sb);
    }
    return out;
}

} // namespace mmcrf
