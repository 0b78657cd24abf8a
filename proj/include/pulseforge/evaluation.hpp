#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "pulseforge/error.hpp"

namespace pulseforge {

struct Metrics {
    double r2 = 0;
    double me = 0;    // mean(T - P), mmHg
    double mae = 0;   // mmHg
    double rmse = 0;  // mmHg
    double std = 0;   // population SD of (T - P), mmHg
};

struct AamiResult {
    std::size_t records = 0;
    bool pass = false;
    std::vector<std::string> reasons;  // violated clauses
};

enum class BhsGrade { kA, kB, kC, kFail };
std::string to_string(BhsGrade grade);

struct BlandAltman {
    double mean_diff = 0;  // mean(P - T)
    double loa_low = 0;
    double loa_high = 0;
    std::vector<std::pair<double, double>> pairs;  // ((T+P)/2, P-T)
};

struct ChannelReport {
    Metrics metrics;
    std::array<double, 3> cum_pct{};  // < 5, 10, 15 mmHg
    AamiResult aami;
    BhsGrade bhs_grade = BhsGrade::kFail;
    BlandAltman bland_altman;
    std::vector<double> targets;
    std::vector<double> predictions;
};

struct EvalReport {
    ChannelReport sbp;
    ChannelReport dbp;
};

Metrics metrics(const std::vector<double>& targets, const std::vector<double>& predictions);

std::array<double, 3> cumulative_error_pct(const std::vector<double>& targets,
                                           const std::vector<double>& predictions,
                                           std::array<double, 3> thresholds = {5.0, 10.0, 15.0});

AamiResult aami_check(std::size_t records, double me, double std_mmHg);

BhsGrade bhs_grade(double cum5, double cum10, double cum15);

BlandAltman bland_altman(const std::vector<double>& targets,
                         const std::vector<double>& predictions);

// Full per-channel evaluation; `records` is the AAMI sample-size input.
ChannelReport evaluate_channel(const std::vector<double>& targets,
                               const std::vector<double>& predictions, std::size_t records);

// Writes report.json (schema "pf-report-v1") plus the plot-data CSVs.
void emit_report(const EvalReport& report, const std::string& out_dir);

}  // namespace pulseforge
