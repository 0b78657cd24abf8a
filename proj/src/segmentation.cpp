#include "pulseforge/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pulseforge {

void FrameQualityPolicy::validate() const {
    if (frame_len_s <= 0.0) throw Error("InvalidConfig", "frame_len_s must be positive");
    if (!(amp_mean_low < amp_mean_high))
        throw Error("InvalidConfig", "amp_mean_low must be below amp_mean_high");
}

std::vector<double> second_derivative(const std::vector<double>& x, double fs) {
    if (x.size() < 5) throw Error("SignalTooShort", "second_derivative needs >= 5 samples");
    const std::size_t n = x.size();
    std::vector<double> d(n);
    const double fs2 = fs * fs;
    for (std::size_t i = 1; i + 1 < n; ++i)
        d[i] = (x[i - 1] - 2.0 * x[i] + x[i + 1]) * fs2;
    // one-sided second differences at the edges
    d[0] = (x[0] - 2.0 * x[1] + x[2]) * fs2;
    d[n - 1] = (x[n - 3] - 2.0 * x[n - 2] + x[n - 1]) * fs2;
    return d;
}

namespace {

double prominence_of(const std::vector<double>& x, std::size_t peak) {
    const double h = x[peak];
    double left_min = h;
    for (std::size_t i = peak; i-- > 0;) {
        if (x[i] > h) break;
        left_min = std::min(left_min, x[i]);
    }
    double right_min = h;
    for (std::size_t i = peak + 1; i < x.size(); ++i) {
        if (x[i] > h) break;
        right_min = std::min(right_min, x[i]);
    }
    return h - std::max(left_min, right_min);
}

std::size_t argmin_range(const std::vector<double>& x, std::size_t lo, std::size_t hi) {
    std::size_t best = lo;
    for (std::size_t i = lo + 1; i <= hi; ++i)
        if (x[i] < x[best]) best = i;
    return best;
}

std::size_t argmax_range(const std::vector<double>& x, std::size_t lo, std::size_t hi) {
    std::size_t best = lo;
    for (std::size_t i = lo + 1; i <= hi; ++i)
        if (x[i] > x[best]) best = i;
    return best;
}

}  // namespace

std::vector<std::size_t> detect_peaks(const std::vector<double>& x, double fs,
                                      double min_distance_s, double min_prominence) {
    if (min_distance_s <= 0.0) throw Error("InvalidConfig", "min_distance_s must be positive");
    std::vector<std::size_t> candidates;
    for (std::size_t i = 1; i + 1 < x.size(); ++i)
        if (x[i] > x[i - 1] && x[i] > x[i + 1]) candidates.push_back(i);

    std::vector<std::size_t> filtered;
    for (std::size_t i : candidates)
        if (prominence_of(x, i) >= min_prominence) filtered.push_back(i);

    // greedy distance pruning, highest peak first, ties to the earlier index
    std::vector<std::size_t> order(filtered.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (x[filtered[a]] != x[filtered[b]]) return x[filtered[a]] > x[filtered[b]];
        return filtered[a] < filtered[b];
    });
    const double min_dist = min_distance_s * fs;
    std::vector<std::size_t> kept;
    for (std::size_t oi : order) {
        const std::size_t idx = filtered[oi];
        bool ok = true;
        for (std::size_t k : kept)
            if (std::abs(static_cast<double>(idx) - static_cast<double>(k)) < min_dist) {
                ok = false;
                break;
            }
        if (ok) kept.push_back(idx);
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

std::vector<Cycle> extract_cycles(const std::vector<double>& ppg,
                                  const std::vector<double>& sdppg, double fs,
                                  double min_distance_s, double min_prominence,
                                  double frame_len_s) {
    if (ppg.size() != sdppg.size())
        throw Error("LengthMismatch", "ppg and sdppg must have equal length");
    if (ppg.empty()) return {};

    if (min_prominence < 0.0) {
        const auto [mn, mx] = std::minmax_element(ppg.begin(), ppg.end());
        min_prominence = 0.1 * (*mx - *mn);
    }
    const auto peaks = detect_peaks(ppg, fs, min_distance_s, min_prominence);
    if (peaks.size() < 2) return {};

    // feet: trough between each pair of consecutive peaks, plus a leading
    // foot before the first peak when the record captures one
    std::vector<std::size_t> feet;
    if (peaks.front() > 1) {
        const std::size_t lead = argmin_range(ppg, 0, peaks.front());
        if (lead > 0 && lead < peaks.front()) feet.push_back(lead);
    }
    for (std::size_t k = 0; k + 1 < peaks.size(); ++k)
        feet.push_back(argmin_range(ppg, peaks[k], peaks[k + 1]));

    std::vector<Cycle> cycles;
    const std::size_t frame_samples =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(frame_len_s * fs)));
    for (std::size_t k = 0; k + 1 < feet.size(); ++k) {
        const std::size_t start = feet[k];
        const std::size_t end = feet[k + 1];
        // exactly one systolic peak inside the span
        std::size_t peak = 0;
        bool found = false;
        for (std::size_t p : peaks)
            if (p > start && p < end) {
                if (found) {
                    found = false;
                    break;
                }
                peak = p;
                found = true;
            }
        if (!found) continue;
        const double duration = static_cast<double>(end - start) / fs;
        if (duration < 0.3 || duration > 2.0) continue;

        Cycle c;
        c.start_idx = start;
        c.peak_idx = peak;
        c.end_idx = end;
        // dicrotic notch: deepest interior local minimum after the peak
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = peak + 1; j + 1 < end; ++j)
            if (ppg[j] <= ppg[j - 1] && ppg[j] <= ppg[j + 1] && ppg[j] < best) {
                best = ppg[j];
                c.notch_idx = j;
            }
        c.sd_peak_idx = argmax_range(sdppg, start, end);
        c.sd_foot_idx = argmin_range(sdppg, start, end);
        c.frame_id = static_cast<int>(start / frame_samples);
        cycles.push_back(c);
    }
    return cycles;
}

std::vector<std::pair<int, bool>> frame_quality_gate(const std::vector<double>& ppg, double fs,
                                                     const FrameQualityPolicy& policy) {
    policy.validate();
    const std::size_t n = ppg.size();
    const std::size_t win =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(policy.frame_len_s * fs)));
    std::vector<std::pair<int, bool>> out;
    int frame_id = 0;
    for (std::size_t w0 = 0; w0 < n; w0 += win, ++frame_id) {
        const std::size_t w1 = std::min(n, w0 + win);
        double mean_abs = 0.0;
        for (std::size_t i = w0; i < w1; ++i) mean_abs += std::abs(ppg[i]);
        mean_abs /= static_cast<double>(w1 - w0);
        const bool keep = mean_abs >= policy.amp_mean_low && mean_abs <= policy.amp_mean_high;
        out.emplace_back(frame_id, keep);
    }
    return out;
}

std::vector<std::pair<double, double>> label_targets(const std::vector<double>& abp,
                                                     const std::vector<Cycle>& cycles) {
    std::vector<std::pair<double, double>> targets;
    targets.reserve(cycles.size());
    for (const Cycle& c : cycles) {
        if (c.end_idx >= abp.size())
            throw Error("LengthMismatch", "cycle extends past the abp channel");
        double sbp = abp[c.start_idx], dbp = abp[c.start_idx];
        for (std::size_t i = c.start_idx; i <= c.end_idx; ++i) {
            sbp = std::max(sbp, abp[i]);
            dbp = std::min(dbp, abp[i]);
        }
        if (!(sbp > dbp))
            throw Error("DegenerateCycle", "flat abp over a cycle; sbp == dbp");
        targets.emplace_back(sbp, dbp);
    }
    return targets;
}

}  // namespace pulseforge
