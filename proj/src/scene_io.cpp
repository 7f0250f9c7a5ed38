#include "mmcrf/scene_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "mmcrf/errors.hpp"

namespace mmcrf {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

struct LineReader {
    std::istream& in;
    std::string name;
    int lineno = 0;

    bool next(std::vector<std::string>& tokens) {
        std::string line;
        while (std::getline(in, line)) {
            ++lineno;
            tokens.clear();
            std::istringstream ss(line);
            std::string tok;
            while (ss >> tok) {
                if (tok[0] == '#')
                    break;
                tokens.push_back(tok);
            }
            if (!tokens.empty())
                return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw DataError(name + ":" + std::to_string(lineno) + ": " + what);
    }
};

int to_int(const LineReader& r, const std::string& tok, const char* field) {
    char* end = nullptr;
    const long v = std::strtol(tok.c_str(), &end, 10);
    if (end == tok.c_str() || *end != '\0')
        r.fail(std::string("bad integer in field '") + field + "': " + tok);
    return static_cast<int>(v);
}

double to_double(const LineReader& r, const std::string& tok, const char* field) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0')
        r.fail(std::string("bad number in field '") + field + "': " + tok);
    return v;
}

} // namespace

SceneData parse_scene(std::istream& in, const std::string& name) {
    LineReader r{in, name};
    std::vector<std::string> t;
    if (!r.next(t) || t.size() != 2 || t[0] != "mmcrf-scene" || t[1] != "v1")
        r.fail("expected header 'mmcrf-scene v1'");

    SceneData s;
    std::string section;
    bool ended = false;
    while (r.next(t)) {
        if (t[0] == "section") {
            if (t.size() != 2)
                r.fail("section line needs a name");
            section = t[1];
            continue;
        }
        if (t[0] == "end") {
            ended = true;
            break;
        }
        if (section == "modalities") {
            if (t.size() < 3)
                r.fail("modality row: expected 'id L dim labels...'");
            ModalitySpec m;
            m.id = t[0];
            const int l = to_int(r, t[1], "L");
            m.feature_dim = to_int(r, t[2], "dim");
            if (static_cast<int>(t.size()) != 3 + l)
                r.fail("modality row: expected " + std::to_string(l) +
                       " label names");
            for (int i = 0; i < l; ++i)
                m.labels.names.push_back(t[3 + i]);
            s.modalities.push_back(std::move(m));
        } else if (section == "nodes") {
            if (t.size() < 4)
                r.fail("node row: expected 'id modality instance gt feature...'");
            SceneNodeRow n;
            n.id = to_int(r, t[0], "id");
            n.modality = t[1];
            n.instance = to_int(r, t[2], "instance");
            n.gt = t[3];
            for (std::size_t i = 4; i < t.size(); ++i)
                n.feature.push_back(to_double(r, t[i], "feature"));
            s.nodes.push_back(std::move(n));
        } else if (section == "intra_edges") {
            if (t.size() < 2)
                r.fail("intra edge row: expected 'a b feature...'");
            SceneIntraRow e;
            e.a = to_int(r, t[0], "a");
            e.b = to_int(r, t[1], "b");
            for (std::size_t i = 2; i < t.size(); ++i)
                e.feature.push_back(to_double(r, t[i], "feature"));
            s.intra_edges.push_back(std::move(e));
        } else if (section == "correspondences") {
            if (t.size() != 4)
                r.fail("correspondence row: expected 'a b overlap cuttable'");
            SceneCorrRow c;
            c.a = to_int(r, t[0], "a");
            c.b = to_int(r, t[1], "b");
            c.overlap = to_double(r, t[2], "overlap");
            const int cut = to_int(r, t[3], "cuttable");
            if (cut != 0 && cut != 1)
                r.fail("field 'cuttable' must be 0 or 1");
            c.cuttable = cut == 1;
            s.correspondences.push_back(c);
        } else if (section == "label_maps") {
            if (t.size() < 3)
                r.fail("label map row: expected 'mod_a mod_b name:name...'");
            SceneLabelMap lm;
            lm.mod_a = t[0];
            lm.mod_b = t[1];
            for (std::size_t i = 2; i < t.size(); ++i) {
                const auto pos = t[i].find(':');
                if (pos == std::string::npos || pos == 0 || pos + 1 == t[i].size())
                    r.fail("label map entry must be 'designated:other'");
                lm.entries.push_back({t[i].substr(0, pos), t[i].substr(pos + 1)});
            }
            s.label_maps.push_back(std::move(lm));
        } else {
            r.fail(section.empty() ? "row outside any section"
                                   : "unknown section '" + section + "'");
        }
    }
    if (!ended)
        r.fail("missing 'end'");
    return s;
}

SceneData read_scene(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open scene file '" + path + "'");
    return parse_scene(in, path);
}

void write_scene(const SceneData& s, std::ostream& out) {
    out << "mmcrf-scene v1\n";
    out << "section modalities\n";
    for (const auto& m : s.modalities) {
        out << m.id << " " << m.labels.size() << " " << m.feature_dim;
        for (const auto& n : m.labels.names)
            out << " " << n;
        out << "\n";
    }
    out << "section nodes\n";
    for (std::size_t i = 0; i < s.nodes.size(); ++i) {
        const auto& n = s.nodes[i];
        out << i << " " << n.modality << " " << n.instance << " "
            << (n.gt.empty() ? "-" : n.gt);
        for (double v : n.feature)
            out << " " << format_double(v);
        out << "\n";
    }
    out << "section intra_edges\n";
    for (const auto& e : s.intra_edges) {
        out << e.a << " " << e.b;
        for (double v : e.feature)
            out << " " << format_double(v);
        out << "\n";
    }
    out << "section correspondences\n";
    for (const auto& c : s.correspondences)
        out << c.a << " " << c.b << " " << format_double(c.overlap) << " "
            << (c.cuttable ? 1 : 0) << "\n";
    if (!s.label_maps.empty()) {
        out << "section label_maps\n";
        for (const auto& lm : s.label_maps) {
            out << lm.mod_a << " " << lm.mod_b;
            for (const auto& [a, b] : lm.entries)
                out << " " << a << ":" << b;
            out << "\n";
        }
    }
    out << "end\n";
}

std::string scene_to_string(const SceneData& scene) {
    std::ostringstream os;
    write_scene(scene, os);
    return os.str();
}

void save_scene(const SceneData& scene, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot write scene file '" + path + "'");
    write_scene(scene, out);
}

MultimodalGraph scene_to_graph(const SceneData& s) {
    std::map<std::string, int> mod_index;
    for (std::size_t i = 0; i < s.modalities.size(); ++i)
        mod_index[s.modalities[i].id] = static_cast<int>(i);

    std::map<int, int> id_map; // file id -> dense index
    std::vector<GraphNode> nodes;
    for (const auto& row : s.nodes) {
        GraphNode n;
        const auto mi = mod_index.find(row.modality);
        if (mi == mod_index.end())
            throw DataError("scene: node " + std::to_string(row.id) +
                            " references unknown modality '" + row.modality + "'");
        n.modality = mi->second;
        n.instance = row.instance;
        if (row.gt != "-" && !row.gt.empty()) {
            n.gt_label = s.modalities[n.modality].labels.index_of(row.gt);
            if (n.gt_label == 0)
                throw DataError("scene: node " + std::to_string(row.id) +
                                " has unknown gt label '" + row.gt + "'");
        }
        n.feature = row.feature;
        if (!id_map.insert({row.id, static_cast<int>(nodes.size())}).second)
            throw DataError("scene: duplicate node id " + std::to_string(row.id));
        nodes.push_back(std::move(n));
    }
    auto resolve = [&id_map](int id, const char* what) {
        const auto it = id_map.find(id);
        if (it == id_map.end())
            throw DataError(std::string("scene: dangling id ") +
                            std::to_string(id) + " in " + what);
        return it->second;
    };

    std::vector<IntraEdge> intra;
    for (const auto& row : s.intra_edges)
        intra.push_back({resolve(row.a, "intra edge"),
                         resolve(row.b, "intra edge"), row.feature});
    std::vector<Correspondence> corr;
    for (const auto& row : s.correspondences)
        corr.push_back({resolve(row.a, "correspondence"),
                        resolve(row.b, "correspondence"), row.overlap,
                        row.cuttable});
    return build_graph(s.modalities, std::move(nodes), std::move(intra),
                       std::move(corr));
}

SceneData graph_to_scene(const MultimodalGraph& g) {
    SceneData s;
    s.modalities = g.modalities;
    for (const auto& n : g.nodes) {
        SceneNodeRow row;
        row.id = n.id;
        row.modality = g.modalities[n.modality].id;
        row.instance = n.instance;
        row.gt = n.gt_label > 0 ? g.modalities[n.modality].labels.name(n.gt_label)
                                : "-";
        row.feature = n.feature;
        s.nodes.push_back(std::move(row));
    }
    for (const auto& e : g.intra_edges)
        s.intra_edges.push_back({e.a, e.b, e.feature});
    for (const auto& c : g.correspondences)
        s.correspondences.push_back({c.a, c.b, c.overlap, c.cuttable});
    return s;
}

ModelSpec spec_from_scene(const SceneData& scene, const InterFeature& inter,
                          double penalty) {
    const MultimodalGraph g = scene_to_graph(scene);
    ModelSpec spec = spec_from_graph(g, inter, penalty);
    for (const auto& lm : scene.label_maps) {
        const int ma = g.modality_index(lm.mod_a);
        const int mb = g.modality_index(lm.mod_b);
        if (ma < 0 || mb < 0)
            throw DataError("scene: label map references unknown modality");
        const int pi = spec.pair_index(ma, mb);
        if (pi < 0)
            continue; // map present but no correspondences of this pair
        const LabelSpace& la = spec.modalities[ma].labels;
        const LabelSpace& lb = spec.modalities[mb].labels;
        std::vector<int> compat(la.size(), 0);
        for (const auto& [from, to] : lm.entries) {
            const int s = la.index_of(from);
            const int o = lb.index_of(to);
            if (s == 0 || o == 0)
                throw DataError("scene: label map entry '" + from + ":" + to +
                                "' names an unknown label");
            compat[s - 1] = o;
        }
        spec.pairs[pi].compat_b = std::move(compat);
    }
    finalize_spec(spec);
    return spec;
}

LabelingData parse_labeling(std::istream& in, const std::string& name) {
    LineReader r{in, name};
    std::vector<std::string> t;
    if (!r.next(t) || t.size() != 2 || t[0] != "mmcrf-labels" || t[1] != "v1")
        r.fail("expected header 'mmcrf-labels v1'");
    LabelingData d;
    std::string section;
    bool ended = false;
    while (r.next(t)) {
        if (t[0] == "section") {
            if (t.size() != 2)
                r.fail("section line needs a name");
            section = t[1];
            continue;
        }
        if (t[0] == "end") {
            ended = true;
            break;
        }
        if (t.size() != 2)
            r.fail("labeling row: expected 'index value'");
        if (section == "nodes") {
            if (to_int(r, t[0], "index") != static_cast<int>(d.node_labels.size()))
                r.fail("node rows must be dense and in order");
            d.node_labels.push_back(t[1]);
        } else if (section == "latent") {
            if (to_int(r, t[0], "index") !=
                static_cast<int>(d.latent_decisions.size()))
                r.fail("latent rows must be dense and in order");
            d.latent_decisions.push_back(t[1]);
        } else {
            r.fail("unknown section '" + section + "'");
        }
    }
    if (!ended)
        r.fail("missing 'end'");
    return d;
}

LabelingData read_labeling(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open labeling file '" + path + "'");
    return parse_labeling(in, path);
}

void write_labeling(const LabelingData& d, std::ostream& out) {
    out << "mmcrf-labels v1\n";
    out << "section nodes\n";
    for (std::size_t i = 0; i < d.node_labels.size(); ++i)
        out << i << " " << d.node_labels[i] << "\n";
    if (!d.latent_decisions.empty()) {
        out << "section latent\n";
        for (std::size_t i = 0; i < d.latent_decisions.size(); ++i)
            out << i << " " << d.latent_decisions[i] << "\n";
    }
    out << "end\n";
}

void save_labeling(const LabelingData& d, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot write labeling file '" + path + "'");
    write_labeling(d, out);
}

} // namespace mmcrf
