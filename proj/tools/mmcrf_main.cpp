#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mmcrf/errors.hpp"
#include "mmcrf/eval.hpp"
#include "mmcrf/inference.hpp"
#include "mmcrf/kernels.hpp"
#include "mmcrf/learning.hpp"
#include "mmcrf/model_io.hpp"
#include "mmcrf/scene_io.hpp"
#include "mmcrf/scene_sim.hpp"
#include "mmcrf/semgeo.hpp"

namespace {

using namespace mmcrf;

std::vector<ModalitySpec> parse_modalities(const std::string& spec) {
    std::vector<ModalitySpec> out;
    std::istringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::istringstream fs(item);
        std::string id, l_str, d_str;
        if (!std::getline(fs, id, ':') || !std::getline(fs, l_str, ':') ||
            !std::getline(fs, d_str, ':'))
            throw DataError("bad modality spec '" + item +
                            "' (expected id:L:dim)");
        ModalitySpec m;
        m.id = id;
        const int l = std::stoi(l_str);
        m.feature_dim = std::stoi(d_str);
        for (int i = 1; i <= l; ++i)
            m.labels.names.push_back("c" + std::to_string(i));
        out.push_back(std::move(m));
    }
    if (out.empty())
        throw DataError("empty modality spec");
    return out;
}

InterFeature parse_edge_features(const std::string& s) {
    InterFeature f;
    if (s == "none") {
        f.mode = InterFeature::Constant;
        return f;
    }
    if (s == "full") {
        f.mode = InterFeature::Full;
        return f;
    }
    if (s.rfind("selected:", 0) == 0) {
        f.mode = InterFeature::Selected;
        const auto rest = s.substr(9);
        const auto colon = rest.find(':');
        if (colon == std::string::npos)
            throw DataError("selected edge features need 'selected:a,..:b,..'");
        auto parse_list = [](const std::string& part, std::vector<int>& out) {
            std::istringstream ss(part);
            std::string tok;
            while (std::getline(ss, tok, ','))
                if (!tok.empty())
                    out.push_back(std::stoi(tok));
        };
        parse_list(rest.substr(0, colon), f.idx_a);
        parse_list(rest.substr(colon + 1), f.idx_b);
        return f;
    }
    throw DataError("unknown edge feature policy '" + s + "'");
}

SceneConfig load_scene_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open config file '" + path + "'");
    SceneConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ss(line);
        std::string key;
        if (!(ss >> key) || key[0] == '#')
            continue;
        std::string value;
        if (!(ss >> value))
            throw DataError(path + ":" + std::to_string(lineno) +
                            ": missing value for '" + key + "'");
        if (key == "modalities") {
            cfg.modalities = parse_modalities(value);
        } else if (key == "nodes") {
            cfg.nodes_per_modality.clear();
            std::istringstream vs(value);
            std::string tok;
            while (std::getline(vs, tok, ','))
                cfg.nodes_per_modality.push_back(std::stoi(tok));
        } else if (key == "correspondences") {
            cfg.correspondences = std::stoi(value);
        } else if (key == "rate") {
            cfg.misalignment_rate = std::stod(value);
        } else if (key == "separation") {
            cfg.class_separation = std::stod(value);
        } else if (key == "noise") {
            cfg.feature_noise = std::stod(value);
        } else if (key == "density") {
            cfg.intra_density = std::stod(value);
        } else if (key == "cross_density_factor") {
            cfg.cross_density_factor = std::stod(value);
        } else if (key == "seed") {
            cfg.seed = std::stoull(value);
        } else if (key == "prototype_seed") {
            cfg.prototype_seed = std::stoull(value);
        } else {
            throw DataError(path + ":" + std::to_string(lineno) +
                            ": unknown key '" + key + "'");
        }
    }
    return cfg;
}

SceneData restrict_to_domain(const SceneData& scene, const std::string& domain) {
    SceneData out;
    bool found = false;
    for (const auto& m : scene.modalities)
        if (m.id == domain) {
            out.modalities.push_back(m);
            found = true;
        }
    if (!found)
        throw DataError("unknown domain '" + domain + "'");
    std::vector<int> keep(scene.nodes.size(), -1);
    for (const auto& n : scene.nodes)
        if (n.modality == domain) {
            keep[&n - scene.nodes.data()] = static_cast<int>(out.nodes.size());
            out.nodes.push_back(n);
            out.nodes.back().id = static_cast<int>(out.nodes.size()) - 1;
        }
    for (const auto& e : scene.intra_edges)
        if (keep[e.a] >= 0 && keep[e.b] >= 0)
            out.intra_edges.push_back({keep[e.a], keep[e.b], e.feature});
    return out;
}

struct PresetInputs {
    GroundMode mode = GroundMode::Latent;
    std::vector<SceneData> scenes;
    ModelSpec spec;
    std::vector<TrainSample> samples;
};

ModelSpec spec_from_scenes(const std::vector<SceneData>& scenes,
                           const InterFeature& inter, double penalty) {
    ModelSpec spec = spec_from_scene(scenes[0], inter, penalty);
    for (std::size_t i = 1; i < scenes.size(); ++i) {
        const ModelSpec other = spec_from_scene(scenes[i], inter, penalty);
        if (other.modalities.size() != spec.modalities.size())
            throw DataError("scene " + std::to_string(i) +
                            ": modality set differs from the first scene");
        for (std::size_t m = 0; m < spec.modalities.size(); ++m)
            if (!(other.modalities[m] == spec.modalities[m]))
                throw DataError("scene " + std::to_string(i) +
                                ": modality '" + other.modalities[m].id +
                                "' differs from the first scene");
        for (const auto& p : other.pairs)
            if (spec.pair_index(p.mod_a, p.mod_b) < 0)
                spec.pairs.push_back(p);
    }
    finalize_spec(spec);
    return spec;
}

PresetInputs prepare(const std::vector<std::string>& paths,
                     const std::string& preset, const std::string& domain,
                     const InterFeature& inter, double penalty, bool require_gt) {
    PresetInputs in;
    for (const auto& p : paths) {
        SceneData s = read_scene(p);
        if (preset == "single-domain") {
            const std::string d =
                domain.empty() ? s.modalities.front().id : domain;
            s = restrict_to_domain(s, d);
        }
        in.scenes.push_back(std::move(s));
    }
    if (preset == "latent" || preset == "semgeo")
        in.mode = GroundMode::Latent;
    else if (preset == "no-latent" || preset == "single-domain")
        in.mode = GroundMode::NoLatent;
    else
        throw DataError("unknown preset '" + preset + "'");
    in.spec = spec_from_scenes(in.scenes, inter, penalty);
    for (std::size_t i = 0; i < in.scenes.size(); ++i) {
        TrainSample sample = make_sample(scene_to_graph(in.scenes[i]), in.mode,
                                         in.spec, require_gt);
        sample.id = paths[i];
        in.samples.push_back(std::move(sample));
    }
    return in;
}

int cmd_generate(const std::string& config_path, const std::string& out_dir,
                 int count, std::uint64_t seed_override, bool seed_set) {
    SceneConfig cfg;
    if (!config_path.empty()) {
        cfg = load_scene_config(config_path);
    } else {
        cfg.modalities = parse_modalities("2d:6:8,3d:6:8");
        cfg.nodes_per_modality = {60, 60};
        cfg.correspondences = 50;
        cfg.misalignment_rate = 0.17;
    }
    if (seed_set)
        cfg.seed = seed_override;
    const std::uint64_t base_seed = cfg.seed;
    for (int i = 0; i < count; ++i) {
        cfg.seed = base_seed + static_cast<std::uint64_t>(i);
        const GeneratedScene gen = generate_scene_full(cfg);
        char name[32];
        std::snprintf(name, sizeof(name), "scene_%04d.txt", i);
        save_scene(gen.scene, out_dir + "/" + name);
        std::cout << "wrote " << out_dir << "/" << name << "\n";
    }
    return 0;
}

int cmd_train(const std::vector<std::string>& paths, const std::string& preset,
              const std::string& domain, const std::string& edge_features,
              const std::string& model_out, const std::string& log_path,
              TrainConfig tcfg, double penalty) {
    const InterFeature inter = (preset == "no-latent" || preset == "single-domain")
                                   ? parse_edge_features(edge_features)
                                   : InterFeature{};
    PresetInputs in =
        prepare(paths, preset, domain, inter, penalty, /*require_gt=*/true);
    tcfg.mode = in.mode;

    ParameterBundle params = init_parameters(in.spec, tcfg.seed);

    std::ostringstream header;
    header << "config preset=" << preset << " scenes=" << paths.size()
           << " iterations=" << tcfg.outer_iterations
           << " k=" << tcfg.message_iterations << " lambda=" << tcfg.l2
           << " penalty=" << penalty << " step=" << tcfg.step0
           << " fixed_step=" << (tcfg.fixed_step ? 1 : 0)
           << " edge_features=" << edge_features
           << " domain=" << (domain.empty() ? "-" : domain)
           << " threads=" << tcfg.threads << " seed=" << tcfg.seed
           << " kernels=" << kernels::active().name;
    std::ofstream log;
    if (!log_path.empty()) {
        log.open(log_path);
        if (!log)
            throw DataError("cannot write log file '" + log_path + "'");
    }
    auto emit = [&](const std::string& line) {
        std::cout << line << "\n";
        if (log)
            log << line << "\n";
    };
    emit(header.str());

    const TrainResult res = train(params, in.samples, tcfg);
    for (const auto& row : res.trace) {
        std::ostringstream os;
        os << "train-iter " << row.iteration << " risk "
           << format_double(row.risk) << " step " << format_double(row.step)
           << " gnorm " << format_double(row.grad_norm);
        emit(os.str());
    }
    save_model(res.params, model_out);
    emit("model " + model_out);
    if (res.diverged) {
        std::cerr << "training diverged\n";
        return 3;
    }
    return 0;
}

int cmd_infer(const std::string& scene_path, const std::string& model_path,
              const std::string& preset, const std::string& domain,
              const std::string& out_path, int k_messages, double damping) {
    const ParameterBundle params = load_model(model_path);
    SceneData scene = read_scene(scene_path);
    SceneData working = scene;
    if (preset == "single-domain") {
        const std::string d = domain.empty() ? scene.modalities.front().id : domain;
        working = restrict_to_domain(scene, d);
    }
    const GroundMode mode = (preset == "latent" || preset == "semgeo")
                                ? GroundMode::Latent
                                : GroundMode::NoLatent;
    MultimodalGraph graph = scene_to_graph(working);
    if (mode == GroundMode::Latent)
        graph = augment_with_latent(graph);

    const PotentialTables tables = ground(graph, params, mode);
    TrwConfig cfg;
    cfg.iterations = k_messages;
    cfg.damping = damping;
    const Marginals marg = trw_marginals(tables, cfg);
    const std::vector<int> labels = map_decode(marg, tables);

    // One row per scene node ("-" outside the preset's graph), plus one
    // decision per correspondence in latent presets.
    LabelingData out;
    out.node_labels.assign(scene.nodes.size(), "-");
    std::size_t wi = 0;
    for (std::size_t i = 0; i < scene.nodes.size(); ++i) {
        if (preset == "single-domain" &&
            scene.nodes[i].modality != working.modalities.front().id)
            continue;
        const auto& mod = graph.modalities[graph.nodes[wi].modality];
        out.node_labels[i] = mod.labels.name(labels[wi]);
        ++wi;
    }
    if (mode == GroundMode::Latent) {
        for (std::size_t c = 0; c < graph.correspondences.size(); ++c) {
            const int latent_id = graph.latent_nodes[c].id;
            const int label = labels[latent_id];
            if (label == 0) {
                out.latent_decisions.push_back("cut");
            } else {
                const auto& mod =
                    graph.modalities[graph.nodes[graph.correspondences[c].a]
                                         .modality];
                out.latent_decisions.push_back(mod.labels.name(label));
            }
        }
    }
    save_labeling(out, out_path);
    return 0;
}

int cmd_eval(const std::vector<std::string>& pred_paths,
             const std::vector<std::string>& scene_paths,
             const std::string& machine_out) {
    if (pred_paths.size() != scene_paths.size())
        throw DataError("eval: prediction and scene lists differ in length");
    if (pred_paths.empty())
        throw DataError("eval: no predictions given");

    EvalReport total;
    for (std::size_t i = 0; i < pred_paths.size(); ++i) {
        const SceneData scene = read_scene(scene_paths[i]);
        const LabelingData pred = read_labeling(pred_paths[i]);
        if (pred.node_labels.size() != scene.nodes.size())
            throw DataError("eval: '" + pred_paths[i] + "' has " +
                            std::to_string(pred.node_labels.size()) +
                            " node rows, scene has " +
                            std::to_string(scene.nodes.size()));
        const ModelSpec spec = spec_from_scene(scene, InterFeature{}, 1000.0);

        EvalReport rep;
        for (const auto& mod : scene.modalities) {
            std::vector<int> p, g;
            for (std::size_t ni = 0; ni < scene.nodes.size(); ++ni) {
                const auto& n = scene.nodes[ni];
                if (n.modality != mod.id || n.gt == "-" || n.gt.empty())
                    continue;
                if (pred.node_labels[ni] == "-")
                    continue;
                const int pl = mod.labels.index_of(pred.node_labels[ni]);
                if (pl == 0)
                    throw DataError("eval: unknown predicted label '" +
                                    pred.node_labels[ni] + "'");
                p.push_back(pl);
                g.push_back(mod.labels.index_of(n.gt));
            }
            if (!p.empty())
                rep.per_modality.push_back(f1_scores(p, g, mod.labels, mod.id));
        }
        if (!pred.latent_decisions.empty()) {
            if (pred.latent_decisions.size() != scene.correspondences.size())
                throw DataError("eval: latent decision count mismatch in '" +
                                pred_paths[i] + "'");
            MultimodalGraph graph = augment_with_latent(scene_to_graph(scene));
            derive_latent_gt(graph, spec);
            std::vector<int> p, g;
            for (std::size_t c = 0; c < scene.correspondences.size(); ++c) {
                if (graph.latent_nodes[c].gt_label < 0)
                    continue;
                const auto& mod =
                    graph.modalities[graph.nodes[graph.correspondences[c].a]
                                         .modality];
                const std::string& dec = pred.latent_decisions[c];
                int pl = 0;
                if (dec != "cut") {
                    pl = mod.labels.index_of(dec);
                    if (pl == 0)
                        throw DataError("eval: unknown latent decision '" + dec +
                                        "'");
                }
                p.push_back(pl);
                g.push_back(graph.latent_nodes[c].gt_label);
            }
            rep.has_latent = true;
            rep.latent_total += static_cast<long>(p.size());
            for (std::size_t k = 0; k < p.size(); ++k) {
                rep.cut_tp += p[k] == 0 && g[k] == 0;
                rep.cut_fp += p[k] == 0 && g[k] != 0;
                rep.cut_fn += p[k] != 0 && g[k] == 0;
            }
        }
        total.merge(rep);
    }
    std::cout << report_text(total);
    if (!machine_out.empty()) {
        if (machine_out == "-") {
            std::cout << report_machine(total);
        } else {
            std::ofstream out(machine_out);
            if (!out)
                throw DataError("cannot write report '" + machine_out + "'");
            out << report_machine(total);
        }
    }
    return 0;
}

int cmd_semgeo_expand(const std::string& scene_path, const std::string& map_path,
                      const std::string& out_path, const std::string& features,
                      double separation, double noise, std::uint64_t seed) {
    const SceneData scene = read_scene(scene_path);
    const LabelMapping mapping = read_label_mapping(map_path);
    SemgeoOptions opt;
    if (features == "resample")
        opt.resample = true;
    else if (features != "copy")
        throw DataError("--geo-features must be 'copy' or 'resample'");
    opt.separation = separation;
    opt.noise = noise;
    opt.seed = seed;
    save_scene(semgeo_expand(scene, mapping, opt), out_path);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"multimodal CRF toolkit with latent soft correspondences"};
    app.require_subcommand(1);

    std::string kernels_choice = "auto";
    app.add_option("--kernels", kernels_choice,
                   "kernel backend: auto, scalar, avx2")
        ->default_str("auto");

    // generate
    auto* gen = app.add_subcommand("generate", "generate synthetic scenes");
    std::string g_config, g_out = ".";
    int g_count = 1;
    std::uint64_t g_seed = 0;
    bool g_seed_set = false;
    gen->add_option("--config", g_config, "scene config file (key value lines)");
    gen->add_option("--out-dir", g_out, "output directory")->default_str(".");
    gen->add_option("--count", g_count, "number of scenes")->default_str("1");
    gen->add_option("--seed", g_seed, "base seed (scene i uses seed+i)")
        ->each([&](const std::string&) { g_seed_set = true; });

    // train
    auto* tr = app.add_subcommand("train", "learn potentials from scenes");
    std::vector<std::string> t_scenes;
    std::string t_preset = "latent", t_domain, t_edge = "full";
    std::string t_model = "model.txt", t_log;
    TrainConfig tcfg;
    double t_penalty = 1000.0;
    tr->add_option("scenes", t_scenes, "scene files")->required();
    tr->add_option("--preset", t_preset,
                   "single-domain | no-latent | latent | semgeo")
        ->default_str("latent");
    tr->add_option("--domain", t_domain, "modality for single-domain preset");
    tr->add_option("--edge-features", t_edge,
                   "no-latent edge features: none | full | selected:a,..:b,..")
        ->default_str("full");
    tr->add_option("--model-out", t_model, "model output path")
        ->default_str("model.txt");
    tr->add_option("--log", t_log, "training log path");
    tr->add_option("--iterations", tcfg.outer_iterations,
                   "outer iterations (max accepted steps)")
        ->default_str("5");
    tr->add_option("--k-messages", tcfg.message_iterations,
                   "message rounds during learning")
        ->default_str("10");
    tr->add_option("--lambda", tcfg.l2, "l2 strength")->default_str("0.001");
    tr->add_option("--penalty", t_penalty, "penalty constant P")
        ->default_str("1000");
    tr->add_option("--step", tcfg.step0, "initial line-search step")
        ->default_str("1");
    tr->add_flag("--fixed-step", tcfg.fixed_step,
                 "always take --step instead of searching");
    tr->add_option("--seed", tcfg.seed, "seed")->default_str("0");
    tr->add_option("--threads", tcfg.threads, "worker threads (0 = auto)")
        ->default_str("0");

    // infer
    auto* inf = app.add_subcommand("infer", "label a scene with a model");
    std::string i_scene, i_model, i_preset = "latent", i_domain, i_out = "labels.txt";
    int i_k = 20;
    double i_damping = 0.0;
    inf->add_option("scene", i_scene, "scene file")->required();
    inf->add_option("--model", i_model, "model file")->required();
    inf->add_option("--preset", i_preset,
                    "single-domain | no-latent | latent | semgeo")
        ->default_str("latent");
    inf->add_option("--domain", i_domain, "modality for single-domain preset");
    inf->add_option("--out", i_out, "labeling output path")
        ->default_str("labels.txt");
    inf->add_option("--k-messages", i_k, "message rounds")->default_str("20");
    inf->add_option("--damping", i_damping, "message damping")->default_str("0");

    // eval
    auto* ev = app.add_subcommand("eval", "score predictions against scenes");
    std::vector<std::string> e_preds, e_scenes;
    std::string e_machine;
    ev->add_option("--pred", e_preds, "prediction files")->required();
    ev->add_option("--scenes", e_scenes, "scene files (aligned with --pred)")
        ->required();
    ev->add_option("--machine", e_machine,
                   "machine-readable report path ('-' = stdout)");

    // semgeo-expand
    auto* sg = app.add_subcommand("semgeo-expand",
                                  "expand a scene with geometric modalities");
    std::string s_scene, s_map, s_out = "expanded.txt", s_features = "copy";
    double s_sep = 6.0, s_noise = 1.0;
    std::uint64_t s_seed = 1;
    sg->add_option("scene", s_scene, "scene file")->required();
    sg->add_option("--map", s_map, "semantic->geometric mapping file")
        ->required();
    sg->add_option("--out", s_out, "output scene path")
        ->default_str("expanded.txt");
    sg->add_option("--geo-features", s_features, "copy | resample")
        ->default_str("copy");
    sg->add_option("--geo-separation", s_sep, "resampled class separation")
        ->default_str("6");
    sg->add_option("--geo-noise", s_noise, "resampled feature noise")
        ->default_str("1");
    sg->add_option("--seed", s_seed, "resampling seed")->default_str("1");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (!mmcrf::kernels::select(kernels_choice.c_str()))
            throw DataError("kernel backend '" + kernels_choice +
                            "' is not available");
        if (gen->parsed())
            return cmd_generate(g_config, g_out, g_count, g_seed, g_seed_set);
        if (tr->parsed())
            return cmd_train(t_scenes, t_preset, t_domain, t_edge, t_model,
                             t_log, tcfg, t_penalty);
        if (inf->parsed())
            return cmd_infer(i_scene, i_model, i_preset, i_domain, i_out, i_k,
                             i_damping);
        if (ev->parsed())
            return cmd_eval(e_preds, e_scenes, e_machine);
        if (sg->parsed())
            return cmd_semgeo_expand(s_scene, s_map, s_out, s_features, s_sep,
                                     s_noise, s_seed);
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
