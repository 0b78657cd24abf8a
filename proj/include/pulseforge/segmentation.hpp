#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "pulseforge/error.hpp"

namespace pulseforge {

// One foot-to-foot PPG pulse with its landmark sample indices.
struct Cycle {
    std::size_t start_idx = 0;
    std::size_t peak_idx = 0;
    std::optional<std::size_t> notch_idx;
    std::size_t end_idx = 0;
    std::size_t sd_peak_idx = 0;  // argmax of the SDPPG within the cycle
    std::size_t sd_foot_idx = 0;  // argmin of the SDPPG within the cycle
    int frame_id = 0;
};

struct FrameQualityPolicy {
    double frame_len_s = 10.0;
    double amp_mean_low = 0.0;
    double amp_mean_high = 10.0;

    void validate() const;
};

// Central-difference second derivative scaled by fs^2; one-sided at edges.
std::vector<double> second_derivative(const std::vector<double>& x, double fs);

// Local maxima with prominence >= min_prominence; when two candidates are
// closer than min_distance_s the higher one wins (ties to the earlier index).
std::vector<std::size_t> detect_peaks(const std::vector<double>& x, double fs,
                                      double min_distance_s, double min_prominence);

// Foot-to-foot cycle extraction. min_prominence < 0 selects the default of
// 10% of the signal's peak-to-peak range. frame_len_s assigns frame ids.
std::vector<Cycle> extract_cycles(const std::vector<double>& ppg,
                                  const std::vector<double>& sdppg, double fs,
                                  double min_distance_s = 0.3, double min_prominence = -1.0,
                                  double frame_len_s = 10.0);

std::vector<std::pair<int, bool>> frame_quality_gate(const std::vector<double>& ppg, double fs,
                                                     const FrameQualityPolicy& policy);

// Per-cycle (sbp, dbp) from the ABP extrema over the cycle span.
std::vector<std::pair<double, double>> label_targets(const std::vector<double>& abp,
                                                     const std::vector<Cycle>& cycles);

}  // namespace pulseforge
