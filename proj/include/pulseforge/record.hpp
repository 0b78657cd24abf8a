#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pulseforge/error.hpp"

namespace pulseforge {

// Raw ingestion unit: a PPG waveform with optional time-aligned invasive
// ABP channel in mmHg.
struct Record {
    std::string record_id;
    std::string subject_id;
    double fs = 62.4;
    std::vector<double> ppg;
    std::optional<std::vector<double>> abp;
    std::optional<std::string> start_time;  // ISO-8601

    void validate() const;
};

struct SynthConfig {
    double duration_s = 30.0;
    double heart_rate_bpm = 60.0;
    double sbp_mmHg = 120.0;
    double dbp_mmHg = 80.0;
    double notch_depth = 0.4;       // dicrotic lobe amplitude relative to systolic
    double noise_std = 0.0;
    double baseline_drift_amp = 0.0;
    std::uint64_t seed = 0;
    double fs = 62.4;

    void validate() const;
};

// Continuous-time shape of the synthetic pulse, exposed so tests can
// derive landmark positions analytically. One cardiac period consists of
// a systolic lobe (piecewise Gaussian, faster rise than fall) at 30% of
// the period and a symmetric dicrotic lobe riding the falling shoulder at
// 55%. The dicrotic bump is deliberately low-prominence (a notch, not a
// second peak) so systolic peak detection sees one peak per beat.
struct PulseShape {
    double period_s;
    double systolic_center;   // 0.30 * period
    double sigma_rise;        // 0.07 * period
    double sigma_fall;        // 0.11 * period
    double dicrotic_center;   // 0.55 * period
    double dicrotic_sigma;    // 0.05 * period
    double dicrotic_amp;      // notch_depth

    // Synthesized records start at this phase (late diastole) so the
    // first samples descend into a genuine foot instead of a cut pulse.
    static constexpr double kStartPhase = 0.75;

    static PulseShape from(double heart_rate_bpm, double notch_depth);
    // Periodic pulse value at time t (seconds), unit systolic amplitude.
    double value(double t) const;
    // Analytic second derivative of value().
    double second_derivative(double t) const;
};

Record read_record(const std::string& csv_path);
void write_record(const Record& record, const std::string& csv_path);
Record synthesize(const SynthConfig& config);

// Sidecar path for a record CSV: replaces the .csv suffix with .meta.json.
std::string meta_path_for(const std::string& csv_path);

}  // namespace pulseforge
