#include "pulseforge/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace pulseforge {

namespace {

using nlohmann::json;

// First crossing of `level` between samples, scanning [from, to] in the
// given direction; returns the fractional sample position or -1.
double first_crossing_down(const std::vector<double>& x, std::size_t from, std::size_t to,
                           double level) {
    for (std::size_t i = from; i < to; ++i) {
        if (x[i] >= level && x[i + 1] < level) {
            const double frac = (x[i] - level) / (x[i] - x[i + 1]);
            return static_cast<double>(i) + frac;
        }
    }
    return -1.0;
}

double first_crossing_up(const std::vector<double>& x, std::size_t from, std::size_t to,
                         double level) {
    for (std::size_t i = from; i < to; ++i) {
        if (x[i] < level && x[i + 1] >= level) {
            const double frac = (level - x[i]) / (x[i + 1] - x[i]);
            return static_cast<double>(i) + frac;
        }
    }
    return -1.0;
}

double trapezoid(const std::vector<double>& y, std::size_t lo, std::size_t hi, double fs,
                 double baseline, bool positive_part) {
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
        double a = y[i] - baseline;
        double b = y[i + 1] - baseline;
        if (positive_part) {
            a = std::max(a, 0.0);
            b = std::max(b, 0.0);
        }
        acc += 0.5 * (a + b);
    }
    return acc / fs;
}

void write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ofstream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
std::uint32_t read_u32(std::ifstream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}
std::uint64_t read_u64(std::ifstream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

}  // namespace

void FrameSample::validate() const {
    if (features.size() != T * kFeatureCount)
        throw Error("ShapeMismatch", "frame sample feature matrix has wrong size");
    for (double v : features)
        if (!std::isfinite(v)) throw Error("NonFiniteSample", "non-finite feature value");
    if (!(sbp > dbp && dbp > 0.0))
        throw Error("InvalidConfig", "frame sample requires sbp > dbp > 0");
}

FeatureVector compute_features(const Cycle& cycle, const std::vector<double>& ppg,
                               const std::vector<double>& sdppg, double fs,
                               std::size_t cycles_in_frame) {
    if (cycle.end_idx >= ppg.size() || ppg.size() != sdppg.size())
        throw Error("LengthMismatch", "cycle indices out of range");
    const std::size_t s = cycle.start_idx, p = cycle.peak_idx, e = cycle.end_idx;

    FeatureVector f;
    f.td1 = static_cast<double>(e - s) / fs;
    f.tp = static_cast<double>(p - s) / fs;
    f.td3 = static_cast<double>(e - p) / fs;
    f.td2 = cycle.notch_idx ? static_cast<double>(*cycle.notch_idx - p) / fs : 0.0;

    const double foot = ppg[s];
    const double amp = ppg[p] - foot;
    if (amp <= 0.0)
        throw Error("DegenerateCycle", "peak amplitude does not exceed the foot");
    const double half = foot + 0.5 * amp;

    const double rise = first_crossing_up(ppg, s, p, half);
    f.trhp = rise >= 0.0 ? (rise - static_cast<double>(s)) / fs : f.tp;
    const double fall = first_crossing_down(ppg, p, e, half);
    f.tfh = fall >= 0.0 ? (fall - static_cast<double>(p)) / fs : f.td3;

    f.pbf = static_cast<double>(cycles_in_frame);
    f.ppgi = trapezoid(ppg, s, e, fs, foot, false);

    f.sd_amp = sdppg[cycle.sd_peak_idx];
    const double sd_half = 0.5 * f.sd_amp;
    const double sd_fall = first_crossing_down(sdppg, cycle.sd_peak_idx, e, sd_half);
    f.sd_tfhf = sd_fall >= 0.0 ? (sd_fall - static_cast<double>(s)) / fs
                               : static_cast<double>(cycle.sd_peak_idx - s) / fs;
    f.sdppgi = trapezoid(sdppg, s, e, fs, 0.0, true);
    f.td4 = std::abs(static_cast<double>(cycle.sd_peak_idx) -
                     static_cast<double>(cycle.sd_foot_idx)) /
            fs;
    return f;
}

std::vector<FrameSample> assemble_samples(const std::vector<Cycle>& cycles,
                                          const std::vector<FeatureVector>& feature_vectors,
                                          const std::vector<std::pair<double, double>>& targets,
                                          std::size_t T, const std::set<int>& rejected_frames,
                                          std::size_t contiguity_tol_samples,
                                          const std::string& source_record) {
    if (cycles.size() != feature_vectors.size() || cycles.size() != targets.size())
        throw Error("LengthMismatch", "cycles, features and targets must be aligned");

    // 0 = usable, 1 = rejected frame (skip the cycle), 2 = contiguity break
    // before the cycle (the cycle itself can still start a window)
    auto bad_at = [&](std::size_t k, std::size_t i) -> int {
        // i is an absolute cycle index inside the window starting at k
        if (rejected_frames.count(cycles[i].frame_id)) return 1;
        if (i > k) {
            const std::size_t gap = cycles[i].start_idx >= cycles[i - 1].end_idx
                                        ? cycles[i].start_idx - cycles[i - 1].end_idx
                                        : 0;
            if (gap > contiguity_tol_samples) return 2;
        }
        return 0;
    };

    std::vector<FrameSample> samples;
    std::uint64_t next_id = 0;
    std::size_t k = 0;
    while (k + T <= cycles.size()) {
        std::size_t first_bad = cycles.size();
        int kind = 0;
        for (std::size_t i = k; i < k + T; ++i)
            if ((kind = bad_at(k, i)) != 0) {
                first_bad = i;
                break;
            }
        if (first_bad != cycles.size()) {
            k = kind == 2 ? first_bad : first_bad + 1;
            continue;
        }
        FrameSample sample;
        sample.T = T;
        sample.features.reserve(T * kFeatureCount);
        double sbp = 0.0, dbp = 0.0;
        for (std::size_t i = k; i < k + T; ++i) {
            const auto row = feature_vectors[i].as_array();
            sample.features.insert(sample.features.end(), row.begin(), row.end());
            sbp += targets[i].first;
            dbp += targets[i].second;
        }
        sample.sbp = sbp / static_cast<double>(T);
        sample.dbp = dbp / static_cast<double>(T);
        sample.sample_id = next_id++;
        sample.source_record = source_record;
        sample.validate();
        samples.push_back(std::move(sample));
        k += T;
    }
    return samples;
}

NormStats fit_norm_stats(const std::vector<FrameSample>& fit) {
    if (fit.size() < 2) throw Error("TooFewSamples", "normalization needs >= 2 samples");
    NormStats stats;
    std::size_t rows = 0;
    for (const auto& s : fit) rows += s.T;
    for (std::size_t c = 0; c < kFeatureCount; ++c) {
        double mean = 0.0;
        for (const auto& s : fit)
            for (std::size_t t = 0; t < s.T; ++t) mean += s.features[t * kFeatureCount + c];
        mean /= static_cast<double>(rows);
        double var = 0.0;
        for (const auto& s : fit)
            for (std::size_t t = 0; t < s.T; ++t) {
                const double d = s.features[t * kFeatureCount + c] - mean;
                var += d * d;
            }
        var /= static_cast<double>(rows);
        stats.means[c] = mean;
        const double sd = std::sqrt(var);
        if (sd == 0.0) {
            stats.stds[c] = 1.0;
            stats.flagged.push_back(c);
        } else {
            stats.stds[c] = sd;
        }
    }
    return stats;
}

std::vector<FrameSample> apply_norm_stats(const std::vector<FrameSample>& samples,
                                          const NormStats& stats) {
    std::vector<FrameSample> out = samples;
    for (auto& s : out)
        for (std::size_t t = 0; t < s.T; ++t)
            for (std::size_t c = 0; c < kFeatureCount; ++c) {
                double& v = s.features[t * kFeatureCount + c];
                v = (v - stats.means[c]) / stats.stds[c];
            }
    return out;
}

void save_dataset(const std::vector<FrameSample>& samples, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("IoFailure", "cannot open " + path + " for writing");
    out.write("PFDS", 4);
    write_u32(out, 1u);
    write_u64(out, samples.size());
    const std::uint32_t T = samples.empty() ? static_cast<std::uint32_t>(kFrameSeqLen)
                                            : static_cast<std::uint32_t>(samples[0].T);
    write_u32(out, T);
    write_u32(out, static_cast<std::uint32_t>(kFeatureCount));
    for (const auto& s : samples) {
        if (s.T != T) throw Error("ShapeMismatch", "mixed sequence lengths in dataset");
        out.write(reinterpret_cast<const char*>(s.features.data()),
                  static_cast<std::streamsize>(s.features.size() * sizeof(double)));
        out.write(reinterpret_cast<const char*>(&s.sbp), sizeof(double));
        out.write(reinterpret_cast<const char*>(&s.dbp), sizeof(double));
        write_u64(out, s.sample_id);
    }
    if (!out) throw Error("IoFailure", "write failed for " + path);
}

std::vector<FrameSample> load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("IoFailure", "cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "PFDS")
        throw Error("MalformedFile", path + ": bad dataset magic");
    const std::uint32_t version = read_u32(in);
    if (version != 1u) throw Error("VersionMismatch", path + ": unsupported dataset version");
    const std::uint64_t n = read_u64(in);
    const std::uint32_t T = read_u32(in);
    const std::uint32_t L = read_u32(in);
    if (L != kFeatureCount) throw Error("MalformedFile", path + ": unexpected feature count");
    std::vector<FrameSample> samples(n);
    for (auto& s : samples) {
        s.T = T;
        s.features.resize(static_cast<std::size_t>(T) * L);
        in.read(reinterpret_cast<char*>(s.features.data()),
                static_cast<std::streamsize>(s.features.size() * sizeof(double)));
        in.read(reinterpret_cast<char*>(&s.sbp), sizeof(double));
        in.read(reinterpret_cast<char*>(&s.dbp), sizeof(double));
        s.sample_id = read_u64(in);
        if (!in) throw Error("MalformedFile", path + ": truncated dataset");
    }
    return samples;
}

void save_dataset_csv(const std::vector<FrameSample>& samples, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("IoFailure", "cannot open " + path + " for writing");
    for (std::size_t t = 0; t < kFrameSeqLen; ++t)
        for (std::size_t c = 0; c < kFeatureCount; ++c) out << 'f' << t << '_' << c << ',';
    out << "sbp,dbp\n";
    char buf[32];
    for (const auto& s : samples) {
        for (double v : s.features) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            out << buf << ',';
        }
        std::snprintf(buf, sizeof(buf), "%.17g", s.sbp);
        out << buf << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", s.dbp);
        out << buf << '\n';
    }
    if (!out) throw Error("IoFailure", "write failed for " + path);
}

void save_norm_stats(const NormStats& stats, const std::string& path) {
    json j;
    j["means"] = stats.means;
    j["stds"] = stats.stds;
    j["flagged"] = stats.flagged;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("IoFailure", "cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
}

NormStats load_norm_stats(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("IoFailure", "cannot open " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw Error("MalformedFile", path + ": " + e.what());
    }
    NormStats stats;
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        stats.means[i] = j.at("means").at(i).get<double>();
        stats.stds[i] = j.at("stds").at(i).get<double>();
    }
    stats.flagged = j.value("flagged", std::vector<std::size_t>{});
    return stats;
}

}  // namespace pulseforge
