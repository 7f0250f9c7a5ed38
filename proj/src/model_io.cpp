#include "mmcrf/model_io.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mmcrf/errors.hpp"
#include "mmcrf/scene_io.hpp"

namespace mmcrf {

namespace {

const char* inter_mode_name(InterFeature::Mode m) {
    switch (m) {
    case InterFeature::Absent: return "-";
    case InterFeature::Constant: return "constant";
    case InterFeature::Full: return "full";
    case InterFeature::Selected: return "selected";
    }
    return "-";
}

} // namespace

void write_model(const ParameterBundle& bundle, std::ostream& out) {
    const ModelSpec& spec = bundle.spec;
    out << "mmcrf-model v1\n";
    out << "penalty " << format_double(spec.penalty) << "\n";
    out << "row_order l_major\n"; // row (l,s) stored at (l-1)*L_cols + (s-1)
    out << "modalities " << spec.modalities.size() << "\n";
    for (std::size_t m = 0; m < spec.modalities.size(); ++m) {
        const ModalitySpec& mod = spec.modalities[m];
        out << "modality " << mod.id << " " << mod.labels.size() << " "
            << mod.feature_dim;
        for (const auto& n : mod.labels.names)
            out << " " << n;
        out << "\n";
        out << "intra_dim " << mod.id << " " << spec.intra_dim[m] << "\n";
    }
    out << "pairs " << spec.pairs.size() << "\n";
    for (const auto& p : spec.pairs) {
        const ModalitySpec& ma = spec.modalities[p.mod_a];
        const ModalitySpec& mb = spec.modalities[p.mod_b];
        out << "pair " << ma.id << " " << mb.id << " "
            << inter_mode_name(p.inter.mode);
        if (p.inter.mode == InterFeature::Selected) {
            out << " " << p.inter.idx_a.size();
            for (int i : p.inter.idx_a)
                out << " " << i;
            out << " " << p.inter.idx_b.size();
            for (int i : p.inter.idx_b)
                out << " " << i;
        }
        out << " map";
        for (int s = 1; s <= ma.labels.size(); ++s) {
            const int o = p.compat_b[s - 1];
            out << " " << (o == 0 ? std::string("-") : mb.labels.name(o));
        }
        out << "\n";
    }
    for (const auto& blk : bundle.blocks) {
        out << "matrix " << blk.name << " " << blk.rows << " " << blk.cols << "\n";
        for (int r = 0; r < blk.rows; ++r) {
            const double* row = bundle.values.data() + blk.offset +
                                std::size_t(r) * blk.cols;
            for (int c = 0; c < blk.cols; ++c)
                out << (c ? " " : "") << format_double(row[c]);
            out << "\n";
        }
    }
    out << "end\n";
}

ParameterBundle parse_model(std::istream& in, const std::string& name) {
    int lineno = 0;
    auto fail = [&](const std::string& what) -> void {
        throw DataError(name + ":" + std::to_string(lineno) + ": " + what);
    };
    auto next = [&](std::vector<std::string>& t) {
        std::string line;
        while (std::getline(in, line)) {
            ++lineno;
            t.clear();
            std::istringstream ss(line);
            std::string tok;
            while (ss >> tok)
                t.push_back(tok);
            if (!t.empty())
                return true;
        }
        return false;
    };
    auto to_i = [&](const std::string& s) {
        char* end = nullptr;
        const long v = std::strtol(s.c_str(), &end, 10);
        if (end == s.c_str() || *end != '\0')
            fail("bad integer '" + s + "'");
        return static_cast<int>(v);
    };
    auto to_d = [&](const std::string& s) {
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        if (end == s.c_str() || *end != '\0')
            fail("bad number '" + s + "'");
        return v;
    };

    std::vector<std::string> t;
    if (!next(t) || t.size() != 2 || t[0] != "mmcrf-model" || t[1] != "v1")
        fail("expected header 'mmcrf-model v1'");

    ModelSpec spec;
    if (!next(t) || t.size() != 2 || t[0] != "penalty")
        fail("expected 'penalty <value>'");
    spec.penalty = to_d(t[1]);
    if (!next(t) || t.size() != 2 || t[0] != "row_order" || t[1] != "l_major")
        fail("expected 'row_order l_major'");
    if (!next(t) || t.size() != 2 || t[0] != "modalities")
        fail("expected 'modalities <count>'");
    const int num_mod = to_i(t[1]);
    spec.intra_dim.assign(num_mod, 1);
    for (int m = 0; m < num_mod; ++m) {
        if (!next(t) || t.size() < 4 || t[0] != "modality")
            fail("expected a modality row");
        ModalitySpec mod;
        mod.id = t[1];
        const int l = to_i(t[2]);
        mod.feature_dim = to_i(t[3]);
        if (static_cast<int>(t.size()) != 4 + l)
            fail("modality row: expected " + std::to_string(l) + " label names");
        for (int i = 0; i < l; ++i)
            mod.labels.names.push_back(t[4 + i]);
        spec.modalities.push_back(std::move(mod));
        if (!next(t) || t.size() != 3 || t[0] != "intra_dim" ||
            t[1] != spec.modalities.back().id)
            fail("expected 'intra_dim " + spec.modalities.back().id + " <dim>'");
        spec.intra_dim[m] = to_i(t[2]);
    }
    if (!next(t) || t.size() != 2 || t[0] != "pairs")
        fail("expected 'pairs <count>'");
    const int num_pairs = to_i(t[1]);
    for (int p = 0; p < num_pairs; ++p) {
        if (!next(t) || t.size() < 4 || t[0] != "pair")
            fail("expected a pair row");
        PairSpec ps;
        std::size_t pos = 1;
        auto find_mod = [&](const std::string& id) {
            for (std::size_t m = 0; m < spec.modalities.size(); ++m)
                if (spec.modalities[m].id == id)
                    return static_cast<int>(m);
            fail("pair references unknown modality '" + id + "'");
            return -1;
        };
        ps.mod_a = find_mod(t[pos++]);
        ps.mod_b = find_mod(t[pos++]);
        const std::string mode = t[pos++];
        if (mode == "-") {
            ps.inter.mode = InterFeature::Absent;
        } else if (mode == "constant") {
            ps.inter.mode = InterFeature::Constant;
        } else if (mode == "full") {
            ps.inter.mode = InterFeature::Full;
        } else if (mode == "selected") {
            ps.inter.mode = InterFeature::Selected;
            const int na = to_i(t[pos++]);
            for (int i = 0; i < na; ++i)
                ps.inter.idx_a.push_back(to_i(t[pos++]));
            const int nb = to_i(t[pos++]);
            for (int i = 0; i < nb; ++i)
                ps.inter.idx_b.push_back(to_i(t[pos++]));
        } else {
            fail("unknown inter-feature mode '" + mode + "'");
        }
        if (pos >= t.size() || t[pos] != "map")
            fail("expected 'map' in pair row");
        ++pos;
        const LabelSpace& la = spec.modalities[ps.mod_a].labels;
        const LabelSpace& lb = spec.modalities[ps.mod_b].labels;
        if (static_cast<int>(t.size() - pos) != la.size())
            fail("pair map: expected " + std::to_string(la.size()) + " entries");
        for (int s = 1; s <= la.size(); ++s) {
            const std::string& nm = t[pos + s - 1];
            if (nm == "-") {
                ps.compat_b.push_back(0);
            } else {
                const int o = lb.index_of(nm);
                if (o == 0)
                    fail("pair map names unknown label '" + nm + "'");
                ps.compat_b.push_back(o);
            }
        }
        spec.pairs.push_back(std::move(ps));
    }

    ParameterBundle bundle = init_parameters(spec);
    bool ended = false;
    while (next(t)) {
        if (t[0] == "end") {
            ended = true;
            break;
        }
        if (t[0] != "matrix" || t.size() != 4)
            fail("expected 'matrix <name> <rows> <cols>'");
        const int blk = bundle.block_by_name(t[1]);
        if (blk < 0)
            fail("unknown matrix '" + t[1] + "'");
        const auto& b = bundle.blocks[blk];
        if (to_i(t[2]) != b.rows || to_i(t[3]) != b.cols)
            fail("matrix '" + t[1] + "' has unexpected shape");
        for (int r = 0; r < b.rows; ++r) {
            if (!next(t) || static_cast<int>(t.size()) != b.cols)
                fail("matrix '" + b.name + "': expected " +
                     std::to_string(b.cols) + " values per row");
            double* row = bundle.values.data() + b.offset + std::size_t(r) * b.cols;
            for (int c = 0; c < b.cols; ++c)
                row[c] = to_d(t[c]);
        }
    }
    if (!ended)
        fail("missing 'end'");
    return bundle;
}

void save_model(const ParameterBundle& bundle, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot write model file '" + path + "'");
    write_model(bundle, out);
}

ParameterBundle load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open model file '" + path + "'");
    return parse_model(in, path);
}

std::string model_to_string(const ParameterBundle& bundle) {
    std::ostringstream os;
    write_model(bundle, os);
    return os.str();
}

} // namespace mmcrf
