#include "qrs/eval.hpp"

#include <algorithm>
#include <cmath>

#include "qrs/errors.hpp"

namespace qrs::eval {

namespace {

void check_sorted(std::span<const int64_t> v, const char* what) {
    for (size_t i = 1; i < v.size(); ++i)
        if (v[i] <= v[i - 1])
            throw ArgumentError(std::string("match_beats: ") + what +
                                " indices must be strictly increasing");
}

double safe_div(int64_t num, int64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

} // namespace

MatchResult match_beats(std::span<const int64_t> predicted, std::span<const int64_t> annotated,
                        int64_t tol) {
    if (tol < 0) throw ArgumentError("match_beats: tolerance must be non-negative");
    check_sorted(predicted, "predicted");
    check_sorted(annotated, "annotated");

    MatchResult res;
    size_t i = 0, j = 0;
    const size_t P = predicted.size(), A = annotated.size();
    auto dist = [](int64_t a, int64_t b) { return a > b ? a - b : b - a; };

    while (i < P && j < A) {
        const int64_t p = predicted[i], a = annotated[j];
        if (p < a - tol) {
            ++res.fp;
            ++i;
        } else if (a < p - tol) {
            ++res.fn;
            ++j;
        } else {
            // Within the window. Peek one step each way: skipping the current
            // partner for a strictly nearer one is safe exactly when nothing
            // later could still use that nearer candidate.
            const bool ann_steal = j + 1 < A && dist(annotated[j + 1], p) < dist(a, p) &&
                                   (i + 1 >= P || dist(predicted[i + 1], annotated[j + 1]) > tol);
            const bool pred_steal = !ann_steal && i + 1 < P &&
                                    dist(predicted[i + 1], a) < dist(p, a) &&
                                    (j + 1 >= A || dist(annotated[j + 1], predicted[i + 1]) > tol);
            if (ann_steal) {
                ++res.fn; // a goes unmatched; p pairs with the nearer next annotation
                res.pairs.emplace_back(p, annotated[j + 1]);
                ++res.tp;
                ++i;
                j += 2;
            } else if (pred_steal) {
                ++res.fp;
                res.pairs.emplace_back(predicted[i + 1], a);
                ++res.tp;
                i += 2;
                ++j;
            } else {
                res.pairs.emplace_back(p, a);
                ++res.tp;
                ++i;
                ++j;
            }
        }
    }
    res.fp += static_cast<int64_t>(P - i);
    res.fn += static_cast<int64_t>(A - j);
    return res;
}

double f1(double ppv, double sensitivity) {
    if (ppv < 0 || ppv > 1 || sensitivity < 0 || sensitivity > 1)
        throw ArgumentError("f1: arguments must lie in [0, 1]");
    const double den = ppv + sensitivity;
    return den == 0 ? 0.0 : 2.0 * ppv * sensitivity / den;
}

RecordReport evaluate_record(const EcgRecord& record, std::span<const uint8_t> prediction,
                             post::Path path, int64_t tol, const gru::GruParams* gru_params,
                             const gru::GruConfig* gru_cfg, bool strict_support) {
    if (static_cast<int64_t>(prediction.size()) != record.n_samples())
        throw ArgumentError("evaluate_record: prediction length does not match record");

    std::vector<uint8_t> repaired;
    std::span<const uint8_t> bits = prediction;
    if (path == post::Path::Gru) {
        if (!gru_params || !gru_cfg)
            throw ArgumentError("evaluate_record: path=gru requires GRU parameters");
        repaired = gru::repair_stream(*gru_params, *gru_cfg, prediction);
        bits = repaired;
    }

    const auto derivative = post::first_derivative(record.signal);
    const auto nodes = post::apply_rules(path, bits, derivative, strict_support);
    const auto peaks = post::localize(nodes);

    std::vector<int64_t> truth;
    truth.reserve(record.annotations.size());
    for (const auto& a : record.annotations) truth.push_back(a.sample_index);

    RecordReport rep;
    rep.record = record.name;
    rep.match = match_beats(peaks, truth, tol);
    rep.ppv = safe_div(rep.match.tp, rep.match.tp + rep.match.fp);
    rep.sensitivity = safe_div(rep.match.tp, rep.match.tp + rep.match.fn);
    rep.f1 = f1(rep.ppv, rep.sensitivity);
    return rep;
}

EvalReport cross_validate(std::vector<nn::FoldModel>& models, const nn::ConvNetConfig& net_cfg,
                          const std::vector<Database>& databases, const EvalOptions& options,
                          const gru::GruParams* gru_params, const gru::GruConfig* gru_cfg) {
    if (models.empty()) throw ArgumentError("cross_validate: no models");
    if (options.path == post::Path::Gru && (!gru_params || !gru_cfg))
        throw ArgumentError("cross_validate: path=gru requires GRU parameters");

    EvalReport report;
    report.tol = options.tol;
    report.macro = options.macro;

    for (const auto& db : databases) {
        DatabaseRow row;
        row.database = db.name;
        row.depth = net_cfg.depth;
        row.path = post::path_name(options.path);

        std::vector<double> f1s;
        for (size_t m = 0; m < models.size(); ++m) {
            ModelScore score;
            score.fold = static_cast<int>(m);
            double f1_sum = 0;
            std::vector<RecordReport> reports;
            for (const auto& rec : db.records) {
                const auto stream = nn::predict_stream(models[m].params, net_cfg, rec);
                auto rep = evaluate_record(rec, stream, options.path, options.tol, gru_params,
                                           gru_cfg, options.strict_support);
                score.tp += rep.match.tp;
                score.fp += rep.match.fp;
                score.fn += rep.match.fn;
                f1_sum += rep.f1;
                reports.push_back(std::move(rep));
            }
            score.ppv = safe_div(score.tp, score.tp + score.fp);
            score.sensitivity = safe_div(score.tp, score.tp + score.fn);
            if (options.macro)
                score.f1 = db.records.empty() ? 0.0
                                              : f1_sum / static_cast<double>(db.records.size());
            else
                score.f1 = f1(score.ppv, score.sensitivity);
            f1s.push_back(score.f1);
            row.tp += score.tp;
            row.fp += score.fp;
            row.fn += score.fn;
            row.per_model.push_back(score);
            row.records = std::move(reports);
        }

        double mean = 0;
        for (double v : f1s) mean += v;
        mean /= static_cast<double>(f1s.size());
        double var = 0;
        for (double v : f1s) var += (v - mean) * (v - mean);
        var /= static_cast<double>(f1s.size());
        row.mean_f1 = mean;
        row.std_f1 = std::sqrt(var);
        report.rows.push_back(std::move(row));
    }
    return report;
}

} // namespace qrs::eval
