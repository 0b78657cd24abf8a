#include "pulseforge/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

namespace pulseforge {

namespace {

using nlohmann::json;

void check_lengths(const std::vector<double>& t, const std::vector<double>& p) {
    if (t.size() != p.size()) throw Error("LengthMismatch", "targets/predictions length differ");
    if (t.empty()) throw Error("EmptyInput", "no samples to evaluate");
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::string to_string(BhsGrade grade) {
    switch (grade) {
        case BhsGrade::kA: return "A";
        case BhsGrade::kB: return "B";
        case BhsGrade::kC: return "C";
        default: return "Fail";
    }
}

Metrics metrics(const std::vector<double>& targets, const std::vector<double>& predictions) {
    check_lengths(targets, predictions);
    const double n = static_cast<double>(targets.size());
    double t_mean = 0.0;
    for (double t : targets) t_mean += t;
    t_mean /= n;

    Metrics m;
    double ss_res = 0.0, ss_tot = 0.0, abs_sum = 0.0, err_sum = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double e = targets[i] - predictions[i];
        err_sum += e;
        abs_sum += std::abs(e);
        ss_res += e * e;
        ss_tot += (targets[i] - t_mean) * (targets[i] - t_mean);
    }
    if (ss_tot == 0.0)
        throw Error("ZeroVarianceTargets", "R^2 undefined for constant targets");
    m.me = err_sum / n;
    m.mae = abs_sum / n;
    m.rmse = std::sqrt(ss_res / n);
    m.r2 = 1.0 - ss_res / ss_tot;
    double var = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double d = (targets[i] - predictions[i]) - m.me;
        var += d * d;
    }
    m.std = std::sqrt(var / n);
    return m;
}

std::array<double, 3> cumulative_error_pct(const std::vector<double>& targets,
                                           const std::vector<double>& predictions,
                                           std::array<double, 3> thresholds) {
    check_lengths(targets, predictions);
    std::array<double, 3> pct{};
    for (std::size_t k = 0; k < 3; ++k) {
        std::size_t count = 0;
        for (std::size_t i = 0; i < targets.size(); ++i)
            if (std::abs(targets[i] - predictions[i]) < thresholds[k]) ++count;
        pct[k] = 100.0 * static_cast<double>(count) / static_cast<double>(targets.size());
    }
    return pct;
}

AamiResult aami_check(std::size_t records, double me, double std_mmHg) {
    AamiResult r;
    r.records = records;
    if (records <= 85) r.reasons.push_back("records");
    if (!(std::abs(me) < 5.0)) r.reasons.push_back("ME");
    if (!(std_mmHg < 8.0)) r.reasons.push_back("STD");
    r.pass = r.reasons.empty();
    return r;
}

BhsGrade bhs_grade(double cum5, double cum10, double cum15) {
    for (double v : {cum5, cum10, cum15})
        if (v < 0.0 || v > 100.0)
            throw Error("InvalidPercentages", "cumulative percentages must be in [0, 100]");
    if (!(cum5 <= cum10 && cum10 <= cum15))
        throw Error("InvalidPercentages", "cumulative percentages must be non-decreasing");
    if (cum5 >= 60.0 && cum10 >= 85.0 && cum15 >= 95.0) return BhsGrade::kA;
    if (cum5 >= 50.0 && cum10 >= 75.0 && cum15 >= 90.0) return BhsGrade::kB;
    if (cum5 >= 40.0 && cum10 >= 65.0 && cum15 >= 85.0) return BhsGrade::kC;
    return BhsGrade::kFail;
}

BlandAltman bland_altman(const std::vector<double>& targets,
                         const std::vector<double>& predictions) {
    check_lengths(targets, predictions);
    if (targets.size() < 2) throw Error("TooFewSamples", "bland_altman needs >= 2 pairs");
    BlandAltman r;
    const double n = static_cast<double>(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double d = predictions[i] - targets[i];
        r.mean_diff += d;
        r.pairs.emplace_back(0.5 * (targets[i] + predictions[i]), d);
    }
    r.mean_diff /= n;
    double var = 0.0;
    for (const auto& [mean, d] : r.pairs) var += (d - r.mean_diff) * (d - r.mean_diff);
    const double sd = std::sqrt(var / (n - 1.0));  // sample SD, the method's convention
    r.loa_low = r.mean_diff - 1.96 * sd;
    r.loa_high = r.mean_diff + 1.96 * sd;
    return r;
}

ChannelReport evaluate_channel(const std::vector<double>& targets,
                               const std::vector<double>& predictions, std::size_t records) {
    ChannelReport c;
    c.metrics = metrics(targets, predictions);
    c.cum_pct = cumulative_error_pct(targets, predictions);
    c.aami = aami_check(records, c.metrics.me, c.metrics.std);
    c.bhs_grade = bhs_grade(c.cum_pct[0], c.cum_pct[1], c.cum_pct[2]);
    c.bland_altman = bland_altman(targets, predictions);
    c.targets = targets;
    c.predictions = predictions;
    return c;
}

namespace {

json channel_json(const ChannelReport& c) {
    json j;
    j["r2"] = c.metrics.r2;
    j["me_mmHg"] = c.metrics.me;
    j["mae_mmHg"] = c.metrics.mae;
    j["rmse_mmHg"] = c.metrics.rmse;
    j["std_mmHg"] = c.metrics.std;
    j["cum_pct_5"] = c.cum_pct[0];
    j["cum_pct_10"] = c.cum_pct[1];
    j["cum_pct_15"] = c.cum_pct[2];
    j["aami"] = {{"records", c.aami.records}, {"pass", c.aami.pass}, {"reasons", c.aami.reasons}};
    j["bhs_grade"] = to_string(c.bhs_grade);
    j["bland_altman"] = {{"mean_diff", c.bland_altman.mean_diff},
                         {"loa_low", c.bland_altman.loa_low},
                         {"loa_high", c.bland_altman.loa_high}};
    return j;
}

void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("IoFailure", "cannot open " + path + " for writing");
    out << header << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << fmt(row[i]);
        }
        out << '\n';
    }
    if (!out) throw Error("IoFailure", "write failed for " + path);
}

void emit_channel_files(const ChannelReport& c, const std::string& out_dir,
                        const std::string& name) {
    // error histogram, 0.5 mmHg bins
    std::map<long long, std::size_t> bins;
    for (std::size_t i = 0; i < c.targets.size(); ++i) {
        const double err = c.predictions[i] - c.targets[i];
        bins[static_cast<long long>(std::floor(err / 0.5))]++;
    }
    std::vector<std::vector<double>> hist_rows;
    for (const auto& [bin, count] : bins)
        hist_rows.push_back({static_cast<double>(bin) * 0.5, static_cast<double>(bin) * 0.5 + 0.5,
                             static_cast<double>(count)});
    write_csv(out_dir + "/error_hist_" + name + ".csv", "bin_low,bin_high,count", hist_rows);

    std::vector<std::vector<double>> scatter, residuals, ba;
    for (std::size_t i = 0; i < c.targets.size(); ++i) {
        scatter.push_back({c.targets[i], c.predictions[i]});
        residuals.push_back({c.targets[i], c.predictions[i] - c.targets[i]});
    }
    for (const auto& [mean, diff] : c.bland_altman.pairs) ba.push_back({mean, diff});
    write_csv(out_dir + "/scatter_" + name + ".csv", "true,predicted", scatter);
    write_csv(out_dir + "/residuals_" + name + ".csv", "true,residual", residuals);
    write_csv(out_dir + "/bland_altman_" + name + ".csv", "mean,diff", ba);
}

}  // namespace

void emit_report(const EvalReport& report, const std::string& out_dir) {
    if (report.sbp.targets.empty() || report.dbp.targets.empty())
        throw Error("EmptyInput", "report has no samples");
    std::filesystem::create_directories(out_dir);
    json j;
    j["schema"] = "pf-report-v1";
    j["sbp"] = channel_json(report.sbp);
    j["dbp"] = channel_json(report.dbp);
    std::ofstream out(out_dir + "/report.json", std::ios::binary);
    if (!out) throw Error("IoFailure", "cannot open report.json for writing");
    out << j.dump(2) << '\n';
    if (!out) throw Error("IoFailure", "write failed for report.json");
    emit_channel_files(report.sbp, out_dir, "sbp");
    emit_channel_files(report.dbp, out_dir, "dbp");
}

}  // namespace pulseforge
