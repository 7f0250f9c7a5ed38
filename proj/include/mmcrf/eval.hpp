#pragma once

#include <span>
#include <string>
#include <vector>

#include "mmcrf/labels.hpp"

namespace mmcrf {

// Confusion counts for one modality; derived scores are computed on
// demand so scene-level reports aggregate by summation.
struct ModalityEval {
    std::string modality;
    LabelSpace labels;
    std::vector<long> confusion; // L x L, row = gt, col = predicted
    long total = 0;
    long correct = 0;

    long at(int gt, int pred) const {
        return confusion[std::size_t(gt - 1) * labels.size() + (pred - 1)];
    }
};

struct F1Row {
    std::string label;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    long support_gt = 0;
    long support_pred = 0;
};

struct EvalReport {
    std::vector<ModalityEval> per_modality;
    long cut_tp = 0, cut_fp = 0, cut_fn = 0;
    long latent_total = 0;
    bool has_latent = false;

    void merge(const EvalReport& other);
};

// Per-class confusion from aligned prediction/gt label vectors (1..L).
ModalityEval f1_scores(std::span<const int> pred, std::span<const int> gt,
                       const LabelSpace& labels, const std::string& modality);

// F1 = 2PR/(P+R) with 0/0 -> 0 per class.
std::vector<F1Row> f1_rows(const ModalityEval& m);

// Classes absent from both gt and predictions are excluded.
double macro_f1(const ModalityEval& m);

double accuracy(const ModalityEval& m);

// Precision/recall of predicting the cut label 0; vacuous cases (no cuts
// anywhere on that side) count as perfect.
std::pair<double, double> edge_cut_metrics(std::span<const int> pred,
                                           std::span<const int> gt);

std::string report_text(const EvalReport& report);
std::string report_machine(const EvalReport& report);

} // namespace mmcrf
