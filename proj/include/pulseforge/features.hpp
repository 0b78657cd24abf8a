#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "pulseforge/segmentation.hpp"

namespace pulseforge {

inline constexpr std::size_t kFeatureCount = 12;
inline constexpr std::size_t kFrameSeqLen = 48;

// The 12 per-cycle morphological features, in dataset column order.
struct FeatureVector {
    double td1 = 0;      // cycle duration, s
    double trhp = 0;     // start -> rising half-amplitude crossing, s
    double td2 = 0;      // peak -> dicrotic notch, s (0 when no notch)
    double tp = 0;       // start -> peak, s
    double tfh = 0;      // peak -> falling half-amplitude crossing, s
    double td3 = 0;      // peak -> foot, s
    double pbf = 0;      // cycles per frame
    double ppgi = 0;     // under-curve area above the foot baseline
    double sd_tfhf = 0;  // start -> SDPPG falling half-amplitude crossing, s
    double sd_amp = 0;   // SDPPG maximum amplitude
    double sdppgi = 0;   // area of the positive part of the SDPPG
    double td4 = 0;      // |SDPPG peak - SDPPG foot| duration, s

    std::array<double, kFeatureCount> as_array() const {
        return {td1, trhp, td2, tp, tfh, td3, pbf, ppgi, sd_tfhf, sd_amp, sdppgi, td4};
    }
};

// One model input: T consecutive cycles' feature vectors plus targets.
struct FrameSample {
    std::vector<double> features;  // T x L row-major
    std::size_t T = kFrameSeqLen;
    double sbp = 0;
    double dbp = 0;
    std::uint64_t sample_id = 0;
    std::string source_record;

    void validate() const;
};

struct NormStats {
    std::array<double, kFeatureCount> means{};
    std::array<double, kFeatureCount> stds{};
    std::vector<std::size_t> flagged;  // zero-variance columns
};

FeatureVector compute_features(const Cycle& cycle, const std::vector<double>& ppg,
                               const std::vector<double>& sdppg, double fs,
                               std::size_t cycles_in_frame);

// Non-overlapping windows of T consecutive, contiguous cycles. Windows
// touching a rejected frame or a contiguity break are discarded.
std::vector<FrameSample> assemble_samples(const std::vector<Cycle>& cycles,
                                          const std::vector<FeatureVector>& feature_vectors,
                                          const std::vector<std::pair<double, double>>& targets,
                                          std::size_t T = kFrameSeqLen,
                                          const std::set<int>& rejected_frames = {},
                                          std::size_t contiguity_tol_samples = 2,
                                          const std::string& source_record = "");

// Per-feature z-scoring with statistics from `fit` only.
NormStats fit_norm_stats(const std::vector<FrameSample>& fit);
std::vector<FrameSample> apply_norm_stats(const std::vector<FrameSample>& samples,
                                          const NormStats& stats);

// dataset.bin: magic "PFDS", version u32, n_samples u64, T u32, L u32,
// then per sample T*L float64 row-major + sbp, dbp float64 + sample_id u64.
void save_dataset(const std::vector<FrameSample>& samples, const std::string& path);
std::vector<FrameSample> load_dataset(const std::string& path);
void save_dataset_csv(const std::vector<FrameSample>& samples, const std::string& path);

void save_norm_stats(const NormStats& stats, const std::string& path);
NormStats load_norm_stats(const std::string& path);

}  // namespace pulseforge
