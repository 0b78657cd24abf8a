#include "pulseforge/record.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "pulseforge/rng.hpp"

namespace pulseforge {

namespace {

using nlohmann::json;

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& s, const std::string& path) {
    double v = 0.0;
    const auto* begin = s.data();
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end)
        throw Error("MalformedFile", path + ": bad numeric field '" + s + "'");
    return v;
}

}  // namespace

void Record::validate() const {
    if (fs <= 0.0) throw Error("InvalidConfig", "record fs must be positive");
    if (ppg.empty()) throw Error("InvalidConfig", "record has empty ppg");
    if (abp && abp->size() != ppg.size())
        throw Error("LengthMismatch", "abp length differs from ppg length");
    for (double v : ppg)
        if (!std::isfinite(v)) throw Error("NonFiniteSample", "non-finite ppg sample");
    if (abp)
        for (double v : *abp)
            if (!std::isfinite(v)) throw Error("NonFiniteSample", "non-finite abp sample");
}

void SynthConfig::validate() const {
    if (!(sbp_mmHg > dbp_mmHg && dbp_mmHg > 0.0))
        throw Error("InvalidConfig", "require sbp > dbp > 0");
    if (heart_rate_bpm < 30.0 || heart_rate_bpm > 200.0)
        throw Error("InvalidConfig", "heart rate must be in [30, 200] bpm");
    if (notch_depth < 0.0 || notch_depth > 1.0)
        throw Error("InvalidConfig", "notch_depth must be in [0, 1]");
    if (noise_std < 0.0 || baseline_drift_amp < 0.0)
        throw Error("InvalidConfig", "noise/drift amplitudes must be >= 0");
    if (fs <= 0.0) throw Error("InvalidConfig", "fs must be positive");
    if (duration_s < 2.0 * 60.0 / heart_rate_bpm)
        throw Error("InvalidConfig", "duration must cover at least 2 cardiac cycles");
}

std::string meta_path_for(const std::string& csv_path) {
    if (csv_path.size() >= 4 && csv_path.ends_with(".csv"))
        return csv_path.substr(0, csv_path.size() - 4) + ".meta.json";
    return csv_path + ".meta.json";
}

Record read_record(const std::string& csv_path) {
    std::ifstream meta_in(meta_path_for(csv_path));
    if (!meta_in)
        throw Error("MalformedFile", "missing sidecar " + meta_path_for(csv_path));
    json meta;
    try {
        meta = json::parse(meta_in);
    } catch (const json::exception& e) {
        throw Error("MalformedFile", meta_path_for(csv_path) + ": " + e.what());
    }

    Record rec;
    rec.record_id = meta.value("record_id", "");
    rec.subject_id = meta.value("subject_id", "");
    if (!meta.contains("fs"))
        throw Error("MalformedFile", "sidecar missing fs");
    rec.fs = meta["fs"].get<double>();
    if (meta.contains("start_time") && !meta["start_time"].is_null())
        rec.start_time = meta["start_time"].get<std::string>();

    std::ifstream in(csv_path);
    if (!in) throw Error("MalformedFile", "cannot open " + csv_path);
    std::string line;
    if (!std::getline(in, line)) throw Error("MalformedFile", csv_path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    bool has_abp = false;
    if (line == "t,ppg")
        has_abp = false;
    else if (line == "t,ppg,abp")
        has_abp = true;
    else
        throw Error("MalformedFile", csv_path + ": unexpected header '" + line + "'");

    if (has_abp) rec.abp.emplace();
    const double dt = 1.0 / rec.fs;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        const std::size_t expected = has_abp ? 3u : 2u;
        if (fields.size() != expected)
            throw Error("MalformedFile", csv_path + ": wrong column count on data row");
        const double t = parse_double(fields[0], csv_path);
        if (std::abs(t - static_cast<double>(row) * dt) > 1e-9 + 1e-12 * t)
            throw Error("MalformedFile", csv_path + ": t column is not an fs-spaced ramp");
        rec.ppg.push_back(parse_double(fields[1], csv_path));
        if (has_abp) rec.abp->push_back(parse_double(fields[2], csv_path));
        ++row;
    }
    rec.validate();
    return rec;
}

void write_record(const Record& record, const std::string& csv_path) {
    record.validate();
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw Error("IoFailure", "cannot open " + csv_path + " for writing");
    const bool has_abp = record.abp.has_value();
    out << (has_abp ? "t,ppg,abp\n" : "t,ppg\n");
    const double dt = 1.0 / record.fs;
    for (std::size_t i = 0; i < record.ppg.size(); ++i) {
        out << format_double(static_cast<double>(i) * dt) << ',' << format_double(record.ppg[i]);
        if (has_abp) out << ',' << format_double((*record.abp)[i]);
        out << '\n';
    }
    if (!out) throw Error("IoFailure", "write failed for " + csv_path);

    json meta;
    meta["record_id"] = record.record_id;
    meta["subject_id"] = record.subject_id;
    meta["fs"] = record.fs;
    if (record.start_time)
        meta["start_time"] = *record.start_time;
    else
        meta["start_time"] = nullptr;
    std::ofstream meta_out(meta_path_for(csv_path), std::ios::binary);
    if (!meta_out) throw Error("IoFailure", "cannot write sidecar for " + csv_path);
    meta_out << meta.dump(2) << '\n';
    if (!meta_out) throw Error("IoFailure", "write failed for sidecar of " + csv_path);
}

PulseShape PulseShape::from(double heart_rate_bpm, double notch_depth) {
    PulseShape s;
    s.period_s = 60.0 / heart_rate_bpm;
    s.systolic_center = 0.30 * s.period_s;
    s.sigma_rise = 0.07 * s.period_s;
    s.sigma_fall = 0.11 * s.period_s;
    s.dicrotic_center = 0.55 * s.period_s;
    s.dicrotic_sigma = 0.05 * s.period_s;
    s.dicrotic_amp = notch_depth;
    return s;
}

namespace {

double lobe(double t, double center, double sigma_l, double sigma_r, double amp) {
    const double s = t < center ? sigma_l : sigma_r;
    const double u = (t - center) / s;
    return amp * std::exp(-0.5 * u * u);
}

double lobe_sd(double t, double center, double sigma_l, double sigma_r, double amp) {
    const double s = t < center ? sigma_l : sigma_r;
    const double u = (t - center) / s;
    return amp * (u * u - 1.0) / (s * s) * std::exp(-0.5 * u * u);
}

}  // namespace

double PulseShape::value(double t) const {
    const double base = std::floor(t / period_s);
    double acc = 0.0;
    for (int k = -1; k <= 1; ++k) {
        const double t0 = (base + k) * period_s;
        acc += lobe(t - t0, systolic_center, sigma_rise, sigma_fall, 1.0);
        acc += lobe(t - t0, dicrotic_center, dicrotic_sigma, dicrotic_sigma, dicrotic_amp);
    }
    return acc;
}

double PulseShape::second_derivative(double t) const {
    const double base = std::floor(t / period_s);
    double acc = 0.0;
    for (int k = -1; k <= 1; ++k) {
        const double t0 = (base + k) * period_s;
        acc += lobe_sd(t - t0, systolic_center, sigma_rise, sigma_fall, 1.0);
        acc += lobe_sd(t - t0, dicrotic_center, dicrotic_sigma, dicrotic_sigma, dicrotic_amp);
    }
    return acc;
}

Record synthesize(const SynthConfig& config) {
    config.validate();
    const PulseShape shape = PulseShape::from(config.heart_rate_bpm, config.notch_depth);
    const std::size_t n = static_cast<std::size_t>(std::llround(config.duration_s * config.fs));

    Record rec;
    rec.fs = config.fs;
    rec.record_id = "synth";
    rec.subject_id = "synth";
    rec.ppg.resize(n);
    rec.abp.emplace(n);

    const double peak = shape.value(shape.systolic_center);
    const double bp_span = config.sbp_mmHg - config.dbp_mmHg;
    constexpr double kDriftHz = 0.05;  // well below the 0.7 Hz passband edge
    Rng rng(config.seed);
    const double phase = PulseShape::kStartPhase * shape.period_s;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / config.fs;
        const double p = shape.value(t + phase);
        double v = p;
        if (config.baseline_drift_amp > 0.0)
            v += config.baseline_drift_amp * std::sin(2.0 * std::numbers::pi * kDriftHz * t);
        if (config.noise_std > 0.0) v += config.noise_std * rng.normal();
        rec.ppg[i] = v;
        // ABP stays noiseless so per-cycle extrema are exact ground truth
        (*rec.abp)[i] = config.dbp_mmHg + bp_span * p / peak;
    }
    rec.validate();
    return rec;
}

}  // namespace pulseforge
