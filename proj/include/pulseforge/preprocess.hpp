#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pulseforge/record.hpp"

namespace pulseforge {

struct CleaningPolicy {
    double min_duration_s = 900.0;
    // Amplitude bounds; when unset they default to mean +/- 5 sigma of the record.
    std::optional<double> amp_low;
    std::optional<double> amp_high;
    double flatline_var_threshold = 1e-6;
    double flatline_window_s = 2.0;
    double max_outrange_fraction = 0.05;

    void validate() const;
};

struct BandpassSpec {
    int order = 5;
    double f_low = 0.7;
    double f_high = 10.0;
    double fs = 62.4;

    void validate() const;
};

struct IirFilter {
    std::vector<double> b;  // feed-forward
    std::vector<double> a;  // feedback, a[0] == 1
};

// Half-open kept index range [start, end).
struct Segment {
    std::size_t start = 0;
    std::size_t end = 0;
};

struct CleanResult {
    bool rejected = false;
    std::string reason;  // "TooShort" | "NoCleanSegments" when rejected
    std::vector<Segment> segments;
};

CleanResult clean_record(const Record& record, const CleaningPolicy& policy);

// Order-n Butterworth bandpass via analog prototype, lowpass-to-bandpass
// transform and bilinear transform with frequency pre-warping. The
// discrete filter has 2*order+1 coefficients on each side.
IirFilter design_butterworth_bandpass(const BandpassSpec& spec);

// Zero-phase forward-backward application with symmetric-odd edge
// extension of 3 * max(len(a), len(b)) samples and steady-state initial
// conditions.
std::vector<double> filtfilt(const IirFilter& filter, const std::vector<double>& x);

// Centered moving average with symmetric (edge-including) padding,
// applied `passes` times.
std::vector<double> moving_average(const std::vector<double>& x, std::size_t window,
                                   std::size_t passes = 1);

struct PreprocessResult {
    CleanResult clean;
    Record record;  // concatenation of the processed kept segments
};

// clean -> filtfilt(butterworth) -> moving average, per kept segment.
// The ABP channel is segment-cropped but never bandpass-filtered so the
// absolute mmHg levels survive for target labeling.
PreprocessResult preprocess_chain(const Record& record, const CleaningPolicy& policy,
                                  const BandpassSpec& spec, std::size_t maf_window = 5,
                                  std::size_t maf_passes = 1);

// |H(e^{j 2 pi f / fs})| of the expanded transfer function.
double filter_gain_at(const IirFilter& filter, double f_hz, double fs);

}  // namespace pulseforge
