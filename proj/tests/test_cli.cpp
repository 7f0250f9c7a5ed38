#include <doctest.h>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mmcrf/learning.hpp"
#include "mmcrf/model_io.hpp"
#include "mmcrf/scene_io.hpp"
#include "mmcrf/scene_sim.hpp"

using namespace mmcrf;
namespace fs = std::filesystem;

namespace {

const char* cli_path() {
    return MMCRF_CLI_PATH;
}

int run(const std::string& args) {
    const std::string cmd = std::string(cli_path()) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("mmcrf_cli_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int counter() {
        static int c = 0;
        return c++;
    }
    std::string operator/(const std::string& name) const {
        return (path / name).string();
    }
};

void write_config(const std::string& path, int nodes, int corr, double rate,
                  int l = 3, int dim = 4) {
    std::ofstream out(path);
    out << "modalities 2d:" << l << ":" << dim << ",3d:" << l << ":" << dim
        << "\n";
    out << "nodes " << nodes << "," << nodes << "\n";
    out << "correspondences " << corr << "\n";
    out << "rate " << rate << "\n";
    out << "separation 5\nnoise 0.8\ndensity 0.3\nseed 1\n";
}

} // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("generate writes deterministic scene files") {
    TempDir dir;
    write_config(dir / "cfg.txt", 8, 4, 0.2);
    REQUIRE(run("generate --config " + (dir / "cfg.txt") + " --out-dir " +
                dir.path.string() + " --count 4") == 0);
    for (int i = 0; i < 4; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "scene_%04d.txt", i);
        CHECK(fs::exists(dir.path / name));
    }
    const std::string first = slurp(dir.path / "scene_0002.txt");
    REQUIRE(run("generate --config " + (dir / "cfg.txt") + " --out-dir " +
                dir.path.string() + " --count 4") == 0);
    CHECK(slurp(dir.path / "scene_0002.txt") == first);

    // count 0: no files, still success
    TempDir empty;
    CHECK(run("generate --config " + (dir / "cfg.txt") + " --out-dir " +
              empty.path.string() + " --count 0") == 0);
    CHECK(fs::is_empty(empty.path));
}

TEST_CASE("exit codes distinguish usage, data, and success") {
    CHECK(run("no-such-command") == 1);
    CHECK(run("train --model-out /tmp/x.txt /nonexistent/scene.txt") == 2);
    CHECK(run("eval --pred /nope.txt --scenes /nope2.txt") == 2);
}

TEST_CASE("train, infer, and eval run end to end") {
    TempDir dir;
    write_config(dir / "cfg.txt", 10, 6, 0.25);
    REQUIRE(run("generate --config " + (dir / "cfg.txt") + " --out-dir " +
                dir.path.string() + " --count 3") == 0);
    const std::string s0 = dir / "scene_0000.txt";
    const std::string s1 = dir / "scene_0001.txt";
    const std::string s2 = dir / "scene_0002.txt";

    REQUIRE(run("train --preset latent --model-out " + (dir / "model.txt") +
                " --iterations 2 --k-messages 4 --log " + (dir / "log.txt") +
                " " + s0 + " " + s1) == 0);
    CHECK(fs::exists(dir.path / "model.txt"));
    const std::string log = slurp(dir.path / "log.txt");
    CHECK(log.find("train-iter 0") != std::string::npos);
    CHECK(log.find("risk") != std::string::npos);

    // reloading reproduces the best recorded risk
    const ParameterBundle model = load_model(dir / "model.txt");
    std::vector<TrainSample> samples{ingest_features(s0, true),
                                     ingest_features(s1, true)};
    TrainConfig cfg;
    cfg.mode = GroundMode::Latent;
    cfg.message_iterations = 4;
    cfg.l2 = 1e-3;
    const double risk = empirical_risk(model, samples, cfg);
    double best = 1e300;
    std::istringstream ls(log);
    std::string line;
    while (std::getline(ls, line)) {
        std::istringstream fs_(line);
        std::string tag, itv, risktag, riskval;
        if (fs_ >> tag >> itv >> risktag >> riskval && tag == "train-iter" &&
            risktag == "risk")
            best = std::min(best, std::stod(riskval));
    }
    CHECK(risk == doctest::Approx(best).epsilon(1e-12));

    // train twice: byte-identical model files
    REQUIRE(run("train --preset latent --model-out " + (dir / "model2.txt") +
                " --iterations 2 --k-messages 4 " + s0 + " " + s1) == 0);
    CHECK(slurp(dir.path / "model2.txt") == slurp(dir.path / "model.txt"));

    REQUIRE(run("infer " + s2 + " --model " + (dir / "model.txt") +
                " --preset latent --out " + (dir / "pred.txt")) == 0);
    const LabelingData pred = read_labeling(dir / "pred.txt");
    const SceneData scene2 = read_scene(s2);
    CHECK(pred.node_labels.size() == scene2.nodes.size());
    CHECK(pred.latent_decisions.size() == scene2.correspondences.size());

    REQUIRE(run("eval --pred " + (dir / "pred.txt") + " --scenes " + s2 +
                " --machine " + (dir / "report.txt")) == 0);
    const std::string report = slurp(dir.path / "report.txt");
    CHECK(report.find("accuracy 2d") != std::string::npos);
    CHECK(report.find("edge_cut_recall") != std::string::npos);

    // evaluating the ground truth against itself is all ones
    LabelingData gt_pred;
    for (const auto& n : scene2.nodes)
        gt_pred.node_labels.push_back(n.gt);
    const MultimodalGraph g = augment_with_latent(scene_to_graph(scene2));
    MultimodalGraph gg = g;
    derive_latent_gt(gg, spec_from_scene(scene2, InterFeature{}));
    for (const auto& ln : gg.latent_nodes)
        gt_pred.latent_decisions.push_back(
            ln.gt_label == 0
                ? "cut"
                : gg.modalities[gg.nodes[gg.correspondences[ln.corr].a].modality]
                      .labels.name(ln.gt_label));
    save_labeling(gt_pred, dir / "gt_pred.txt");
    REQUIRE(run("eval --pred " + (dir / "gt_pred.txt") + " --scenes " + s2 +
                " --machine " + (dir / "gt_report.txt")) == 0);
    const std::string gt_report = slurp(dir.path / "gt_report.txt");
    CHECK(gt_report.find("accuracy 2d 1\n") != std::string::npos);
    CHECK(gt_report.find("accuracy 3d 1\n") != std::string::npos);
    CHECK(gt_report.find("edge_cut_recall 1\n") != std::string::npos);
}

TEST_CASE("a separable scene pipeline reaches high accuracy") {
    TempDir dir;
    {
        std::ofstream cfg(dir / "cfg.txt");
        cfg << "modalities 2d:3:4,3d:3:4\nnodes 16,16\ncorrespondences 10\n"
               "rate 0\nseparation 8\nnoise 0.5\ndensity 0.2\nseed 5\n";
    }
    REQUIRE(run("generate --config " + (dir / "cfg.txt") + " --out-dir " +
                dir.path.string() + " --count 4") == 0);
    REQUIRE(run("train --preset latent --model-out " + (dir / "m.txt") +
                " --iterations 5 --k-messages 6 " + (dir / "scene_0000.txt") +
                " " + (dir / "scene_0001.txt") + " " +
                (dir / "scene_0002.txt")) == 0);
    REQUIRE(run("infer " + (dir / "scene_0003.txt") + " --model " +
                (dir / "m.txt") + " --preset latent --k-messages 6 --out " +
                (dir / "p.txt")) == 0);
    REQUIRE(run("eval --pred " + (dir / "p.txt") + " --scenes " +
                (dir / "scene_0003.txt") + " --machine " +
                (dir / "r.txt")) == 0);
    // pooled accuracy per modality from the machine report
    std::istringstream rep(slurp(dir.path / "r.txt"));
    std::string line;
    int seen = 0;
    while (std::getline(rep, line)) {
        std::istringstream fs_(line);
        std::string key, mod, val;
        if (fs_ >> key >> mod >> val && key == "accuracy") {
            CHECK(std::stod(val) >= 0.9);
            ++seen;
        }
    }
    CHECK(seen == 2);
}

TEST_CASE("zero model decodes to the first label everywhere") {
    TempDir dir;
    write_config(dir / "cfg.txt", 6, 3, 0.0);
    REQUIRE(run("generate --config " + (dir / "cfg.txt") + " --out-dir " +
                dir.path.string() + " --count 1") == 0);
    const std::string scene = dir / "scene_0000.txt";

    const SceneData sd = read_scene(scene);
    const ModelSpec spec = spec_from_scene(sd, InterFeature{});
    save_model(init_parameters(spec), dir / "zero.txt");

    REQUIRE(run("infer " + scene + " --model " + (dir / "zero.txt") +
                " --preset latent --out " + (dir / "pred.txt")) == 0);
    const LabelingData pred = read_labeling(dir / "pred.txt");
    for (const auto& l : pred.node_labels)
        CHECK(l == "c1");
    for (const auto& d : pred.latent_decisions)
        CHECK(d == "cut"); // cuttable links at zero parameters favor the cut
}

TEST_CASE("no-latent preset trains on the same scenes") {
    TempDir dir;
    write_config(dir / "cfg.txt", 8, 4, 0.2);
    REQUIRE(run("generate --config " + (dir / "cfg.txt") + " --out-dir " +
                dir.path.string() + " --count 2") == 0);
    REQUIRE(run("train --preset no-latent --edge-features full --model-out " +
                (dir / "nl.txt") + " --iterations 1 --k-messages 4 " +
                (dir / "scene_0000.txt") + " " + (dir / "scene_0001.txt")) == 0);
    REQUIRE(run("infer " + (dir / "scene_0001.txt") + " --model " +
                (dir / "nl.txt") + " --preset no-latent --out " +
                (dir / "pred.txt")) == 0);
    const LabelingData pred = read_labeling(dir / "pred.txt");
    CHECK(pred.latent_decisions.empty());
}

TEST_CASE("single-domain preset ignores the other modality") {
    TempDir dir;
    write_config(dir / "cfg.txt", 8, 4, 0.3);
    REQUIRE(run("generate --config " + (dir / "cfg.txt") + " --out-dir " +
                dir.path.string() + " --count 1") == 0);
    const std::string scene = dir / "scene_0000.txt";

    REQUIRE(run("train --preset single-domain --domain 2d --model-out " +
                (dir / "sd.txt") + " --iterations 1 --k-messages 4 " + scene) ==
            0);
    REQUIRE(run("infer " + scene + " --model " + (dir / "sd.txt") +
                " --preset single-domain --domain 2d --out " +
                (dir / "pred1.txt")) == 0);

    // permute the 3d modality's features and labels; 2d output unchanged
    SceneData perturbed = read_scene(scene);
    for (auto& n : perturbed.nodes)
        if (n.modality == "3d") {
            std::reverse(n.feature.begin(), n.feature.end());
            n.gt = perturbed.modalities[1].labels.names.back();
        }
    save_scene(perturbed, dir / "scene_perm.txt");
    REQUIRE(run("infer " + (dir / "scene_perm.txt") + " --model " +
                (dir / "sd.txt") + " --preset single-domain --domain 2d --out " +
                (dir / "pred2.txt")) == 0);
    CHECK(slurp(dir.path / "pred1.txt") == slurp(dir.path / "pred2.txt"));

    const LabelingData pred = read_labeling(dir / "pred1.txt");
    const SceneData orig = read_scene(scene);
    for (std::size_t i = 0; i < orig.nodes.size(); ++i) {
        if (orig.nodes[i].modality == "2d")
            CHECK(pred.node_labels[i] != "-");
        else
            CHECK(pred.node_labels[i] == "-");
    }
}

TEST_CASE("semgeo-expand emits a loadable 4-modality scene") {
    TempDir dir;
    write_config(dir / "cfg.txt", 6, 3, 0.2);
    REQUIRE(run("generate --config " + (dir / "cfg.txt") + " --out-dir " +
                dir.path.string() + " --count 1") == 0);
    {
        std::ofstream map(dir / "map.txt");
        map << "c1 g1\nc2 g1\nc3 g2\n";
    }
    REQUIRE(run("semgeo-expand " + (dir / "scene_0000.txt") + " --map " +
                (dir / "map.txt") + " --out " + (dir / "big.txt")) == 0);
    const SceneData big = read_scene(dir / "big.txt");
    CHECK(big.modalities.size() == 4);
    CHECK(!big.label_maps.empty());

    REQUIRE(run("train --preset semgeo --model-out " + (dir / "sg.txt") +
                " --iterations 1 --k-messages 3 " + (dir / "big.txt")) == 0);
    REQUIRE(run("infer " + (dir / "big.txt") + " --model " + (dir / "sg.txt") +
                " --preset semgeo --out " + (dir / "sgpred.txt")) == 0);
    const LabelingData pred = read_labeling(dir / "sgpred.txt");
    // non-cuttable same-region links are never reported cut
    for (std::size_t c = 0; c < big.correspondences.size(); ++c)
        if (!big.correspondences[c].cuttable)
            CHECK(pred.latent_decisions[c] != "cut");
}

TEST_SUITE_END();
