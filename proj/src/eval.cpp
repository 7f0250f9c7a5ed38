#include "mmcrf/eval.hpp"

#include <iomanip>
#include <sstream>

#include "mmcrf/errors.hpp"

namespace mmcrf {

void EvalReport::merge(const EvalReport& other) {
    for (const auto& om : other.per_modality) {
        ModalityEval* mine = nullptr;
        for (auto& m : per_modality)
            if (m.modality == om.modality) {
                mine = &m;
                break;
            }
        if (!mine) {
            per_modality.push_back(om);
            continue;
        }
        if (!(mine->labels == om.labels))
            throw DataError("eval merge: label space mismatch for modality '" +
                            om.modality + "'");
        for (std::size_t i = 0; i < om.confusion.size(); ++i)
            mine->confusion[i] += om.confusion[i];
        mine->total += om.total;
        mine->correct += om.correct;
    }
    cut_tp += other.cut_tp;
    cut_fp += other.cut_fp;
    cut_fn += other.cut_fn;
    latent_total += other.latent_total;
    has_latent = has_latent || other.has_latent;
}

ModalityEval f1_scores(std::span<const int> pred, std::span<const int> gt,
                       const LabelSpace& labels, const std::string& modality) {
    if (pred.size() != gt.size())
        throw DataError("f1_scores: prediction/gt length mismatch");
    ModalityEval m;
    m.modality = modality;
    m.labels = labels;
    m.confusion.assign(std::size_t(labels.size()) * labels.size(), 0);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (gt[i] < 1 || gt[i] > labels.size() || pred[i] < 1 ||
            pred[i] > labels.size())
            throw DataError("f1_scores: label out of range at position " +
                            std::to_string(i));
        m.confusion[std::size_t(gt[i] - 1) * labels.size() + (pred[i] - 1)]++;
        m.total++;
        if (gt[i] == pred[i])
            m.correct++;
    }
    return m;
}

std::vector<F1Row> f1_rows(const ModalityEval& m) {
    const int l = m.labels.size();
    std::vector<F1Row> rows(l);
    for (int c = 1; c <= l; ++c) {
        F1Row& r = rows[c - 1];
        r.label = m.labels.name(c);
        long tp = m.at(c, c);
        long row_sum = 0, col_sum = 0;
        for (int k = 1; k <= l; ++k) {
            row_sum += m.at(c, k);
            col_sum += m.at(k, c);
        }
        r.support_gt = row_sum;
        r.support_pred = col_sum;
        const long fp = col_sum - tp;
        const long fn = row_sum - tp;
        r.precision = (tp + fp) > 0 ? double(tp) / double(tp + fp) : 0.0;
        r.recall = (tp + fn) > 0 ? double(tp) / double(tp + fn) : 0.0;
        r.f1 = (r.precision + r.recall) > 0.0
                   ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
                   : 0.0;
    }
    return rows;
}

double macro_f1(const ModalityEval& m) {
    const auto rows = f1_rows(m);
    double sum = 0.0;
    int counted = 0;
    for (const auto& r : rows) {
        if (r.support_gt == 0 && r.support_pred == 0)
            continue;
        sum += r.f1;
        ++counted;
    }
    return counted > 0 ? sum / counted : 0.0;
}

double accuracy(const ModalityEval& m) {
    return m.total > 0 ? double(m.correct) / double(m.total) : 0.0;
}

std::pair<double, double> edge_cut_metrics(std::span<const int> pred,
                                           std::span<const int> gt) {
    if (pred.size() != gt.size())
        throw DataError("edge_cut_metrics: length mismatch");
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] == 0;
        const bool g = gt[i] == 0;
        tp += p && g;
        fp += p && !g;
        fn += !p && g;
    }
    const double precision = (tp + fp) > 0 ? double(tp) / double(tp + fp) : 1.0;
    const double recall = (tp + fn) > 0 ? double(tp) / double(tp + fn) : 1.0;
    return {precision, recall};
}

std::string report_text(const EvalReport& report) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    for (const auto& m : report.per_modality) {
        os << "modality " << m.modality << "  accuracy " << accuracy(m)
           << "  macro-f1 " << macro_f1(m) << "\n";
        for (const auto& r : f1_rows(m)) {
            if (r.support_gt == 0 && r.support_pred == 0)
                continue;
            os << "  " << std::setw(16) << std::left << r.label << std::right
               << "  P " << r.precision << "  R " << r.recall << "  F1 " << r.f1
               << "  (gt " << r.support_gt << ", pred " << r.support_pred
               << ")\n";
        }
    }
    if (report.has_latent) {
        const double p =
            (report.cut_tp + report.cut_fp) > 0
                ? double(report.cut_tp) / double(report.cut_tp + report.cut_fp)
                : 1.0;
        const double r =
            (report.cut_tp + report.cut_fn) > 0
                ? double(report.cut_tp) / double(report.cut_tp + report.cut_fn)
                : 1.0;
        os << "edge-cut  precision " << p << "  recall " << r << "  ("
           << report.latent_total << " links)\n";
    }
    return os.str();
}

std::string report_machine(const EvalReport& report) {
    std::ostringstream os;
    os << std::setprecision(17);
    for (const auto& m : report.per_modality) {
        for (const auto& r : f1_rows(m)) {
            if (r.support_gt == 0 && r.support_pred == 0)
                continue;
            os << "f1 " << m.modality << " " << r.label << " " << r.precision
               << " " << r.recall << " " << r.f1 << " " << r.support_gt << " "
               << r.support_pred << "\n";
        }
        os << "macro_f1 " << m.modality << " " << macro_f1(m) << "\n";
        os << "accuracy " << m.modality << " " << accuracy(m) << "\n";
    }
    if (report.has_latent) {
        const double p =
            (report.cut_tp + report.cut_fp) > 0
                ? double(report.cut_tp) / double(report.cut_tp + report.cut_fp)
                : 1.0;
        const double r =
            (report.cut_tp + report.cut_fn) > 0
                ? double(report.cut_tp) / double(report.cut_tp + report.cut_fn)
                : 1.0;
        os << "edge_cut_precision " << p << "\n";
        os << "edge_cut_recall " << r << "\n";
    }
    return os.str();
}

} // namespace mmcrf
