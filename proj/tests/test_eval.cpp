#include <doctest.h>

#include <map>

#include "helpers.hpp"
#include "mmcrf/eval.hpp"
#include "mmcrf/rng.hpp"

using namespace mmcrf;
using test_helpers::make_modality;

TEST_SUITE_BEGIN("eval");

TEST_CASE("perfect predictions score one everywhere") {
    const LabelSpace space = make_modality("m", 3, 1).labels;
    const std::vector<int> gt{1, 2, 3, 1, 2, 3};
    const ModalityEval m = f1_scores(gt, gt, space, "m");
    for (const auto& r : f1_rows(m)) {
        CHECK(r.precision == 1.0);
        CHECK(r.recall == 1.0);
        CHECK(r.f1 == 1.0);
    }
    CHECK(macro_f1(m) == 1.0);
    CHECK(accuracy(m) == 1.0);
}

TEST_CASE("the 2/3 textbook case") {
    // class 1: TP=1, FP=1, FN=0 -> P=0.5, R=1, F1=2/3
    const LabelSpace space = make_modality("m", 2, 1).labels;
    const std::vector<int> gt{1, 2};
    const std::vector<int> pred{1, 1};
    const auto rows = f1_rows(f1_scores(pred, gt, space, "m"));
    CHECK(rows[0].precision == doctest::Approx(0.5));
    CHECK(rows[0].recall == doctest::Approx(1.0));
    CHECK(rows[0].f1 == doctest::Approx(2.0 / 3.0));
    CHECK(rows[1].f1 == 0.0); // class 2: TP=0 -> 0/0 convention
}

TEST_CASE("random instance matches an independent confusion computation") {
    const LabelSpace space = make_modality("m", 5, 1).labels;
    Rng rng(4);
    std::vector<int> gt, pred;
    for (int i = 0; i < 200; ++i) {
        gt.push_back(1 + static_cast<int>(rng.below(5)));
        pred.push_back(1 + static_cast<int>(rng.below(5)));
    }
    const ModalityEval m = f1_scores(pred, gt, space, "m");
    const auto rows = f1_rows(m);
    for (int c = 1; c <= 5; ++c) {
        long tp = 0, fp = 0, fn = 0;
        for (int i = 0; i < 200; ++i) {
            tp += pred[i] == c && gt[i] == c;
            fp += pred[i] == c && gt[i] != c;
            fn += pred[i] != c && gt[i] == c;
        }
        const double p = tp + fp > 0 ? double(tp) / (tp + fp) : 0.0;
        const double r = tp + fn > 0 ? double(tp) / (tp + fn) : 0.0;
        const double f = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
        CHECK(rows[c - 1].precision == doctest::Approx(p));
        CHECK(rows[c - 1].recall == doctest::Approx(r));
        CHECK(rows[c - 1].f1 == doctest::Approx(f));
    }
}

TEST_CASE("macro average excludes classes absent everywhere") {
    const LabelSpace space = make_modality("m", 3, 1).labels;
    const std::vector<int> gt{1, 1, 2};
    const std::vector<int> pred{1, 1, 2};
    const ModalityEval m = f1_scores(pred, gt, space, "m");
    CHECK(macro_f1(m) == 1.0); // class 3 never appears, excluded

    const std::vector<int> pred2{1, 3, 2};
    const ModalityEval m2 = f1_scores(pred2, gt, space, "m");
    // class 3 now predicted -> included with F1 = 0
    CHECK(macro_f1(m2) < 1.0);
}

TEST_CASE("macro F1 does not drop when one error is fixed") {
    const LabelSpace space = make_modality("m", 4, 1).labels;
    Rng rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<int> gt, pred;
        for (int i = 0; i < 60; ++i) {
            gt.push_back(1 + static_cast<int>(rng.below(4)));
            pred.push_back(1 + static_cast<int>(rng.below(4)));
        }
        // find one error and fix it
        int fix = -1;
        for (int i = 0; i < 60; ++i)
            if (pred[i] != gt[i]) {
                fix = i;
                break;
            }
        if (fix < 0)
            continue;
        const double before = macro_f1(f1_scores(pred, gt, space, "m"));
        pred[fix] = gt[fix];
        const double after = macro_f1(f1_scores(pred, gt, space, "m"));
        CHECK(after >= before - 1e-12);
        CHECK(after <= 1.0);
        CHECK(after >= 0.0);
    }
}

TEST_CASE("edge cut metrics") {
    SUBCASE("exact match with cuts present") {
        const std::vector<int> gt{0, 2, 0, 3};
        const auto [p, r] = edge_cut_metrics(gt, gt);
        CHECK(p == 1.0);
        CHECK(r == 1.0);
    }
    SUBCASE("vacuously perfect when no cuts exist") {
        const std::vector<int> gt{1, 2, 3};
        const auto [p, r] = edge_cut_metrics(gt, gt);
        CHECK(p == 1.0);
        CHECK(r == 1.0);
    }
    SUBCASE("half right") {
        // gt cuts {0, 1}, predicted cuts {1, 2}
        const std::vector<int> gt{0, 0, 5, 5};
        const std::vector<int> pred{4, 0, 0, 5};
        const auto [p, r] = edge_cut_metrics(pred, gt);
        CHECK(p == doctest::Approx(0.5));
        CHECK(r == doctest::Approx(0.5));
    }
}

TEST_CASE("merging reports sums confusions") {
    const LabelSpace space = make_modality("m", 2, 1).labels;
    const std::vector<int> gt1{1, 2}, pred1{1, 1};
    const std::vector<int> gt2{2, 2}, pred2{2, 1};

    EvalReport a;
    a.per_modality.push_back(f1_scores(pred1, gt1, space, "m"));
    EvalReport b;
    b.per_modality.push_back(f1_scores(pred2, gt2, space, "m"));
    a.merge(b);

    std::vector<int> gt_all{1, 2, 2, 2}, pred_all{1, 1, 2, 1};
    const ModalityEval whole = f1_scores(pred_all, gt_all, space, "m");
    REQUIRE(a.per_modality.size() == 1);
    CHECK(a.per_modality[0].confusion == whole.confusion);
    CHECK(macro_f1(a.per_modality[0]) == doctest::Approx(macro_f1(whole)));
}

TEST_CASE("report text and machine formats mention every modality") {
    const LabelSpace space = make_modality("m", 2, 1).labels;
    EvalReport rep;
    rep.per_modality.push_back(
        f1_scores(std::vector<int>{1, 2}, std::vector<int>{1, 2}, space, "x"));
    rep.has_latent = true;
    rep.cut_tp = 3;
    rep.cut_fn = 1;
    rep.latent_total = 8;
    const std::string text = report_text(rep);
    CHECK(text.find("modality x") != std::string::npos);
    CHECK(text.find("edge-cut") != std::string::npos);
    const std::string machine = report_machine(rep);
    CHECK(machine.find("macro_f1 x 1") != std::string::npos);
    CHECK(machine.find("edge_cut_recall 0.75") != std::string::npos);
}

TEST_SUITE_END();
