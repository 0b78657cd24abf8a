#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <vector>

#include "pulseforge/features.hpp"
#include "pulseforge/record.hpp"
#include "pulseforge/segmentation.hpp"

using namespace pulseforge;
namespace fs = std::filesystem;

namespace {

constexpr double kFs = 62.4;

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "pf_features_test";
    fs::create_directories(dir);
    return dir;
}

double grid_arg(const std::function<double(double)>& f, double lo, double hi, bool want_max) {
    double bt = lo, bv = f(lo);
    for (double t = lo; t <= hi; t += 1e-6) {
        const double v = f(t);
        if (want_max ? v > bv : v < bv) {
            bv = v;
            bt = t;
        }
    }
    return bt;
}

double bisect_cross(const std::function<double(double)>& f, double lo, double hi, double level) {
    for (int i = 0; i < 100; ++i) {
        const double mid = 0.5 * (lo + hi);
        if ((f(lo) - level) * (f(mid) - level) <= 0.0)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

// Hand-built cycle: triangular ppg pulse plus a tent-shaped sdppg channel,
// so every feature value follows from elementary geometry.
struct HandCycle {
    std::vector<double> ppg;
    std::vector<double> sd;
    Cycle cycle;
};

HandCycle make_hand_cycle() {
    HandCycle h;
    // foot at 0, linear rise over 4 samples to 1, linear fall over 8 samples
    h.ppg = {0.0, 0.25, 0.5, 0.75, 1.0, 0.875, 0.75, 0.625, 0.5, 0.375, 0.25, 0.125, 0.0};
    // tent: max 6 at index 2, min -4 at index 9, positive on [0, 5]
    h.sd = {2.0, 4.0, 6.0, 4.0, 2.0, 0.0, -2.0, -3.0, -3.5, -4.0, -2.0, -1.0, 0.0};
    h.cycle.start_idx = 0;
    h.cycle.peak_idx = 4;
    h.cycle.end_idx = 12;
    h.cycle.sd_peak_idx = 2;
    h.cycle.sd_foot_idx = 9;
    return h;
}

}  // namespace

TEST_CASE("compute_features matches elementary geometry on a hand-built cycle") {
    const HandCycle h = make_hand_cycle();
    const double fs = 10.0;  // 0.1 s per sample keeps the arithmetic readable
    const FeatureVector f = compute_features(h.cycle, h.ppg, h.sd, fs, 7);

    CHECK(f.td1 == doctest::Approx(1.2));   // 12 samples
    CHECK(f.tp == doctest::Approx(0.4));    // 4 samples to the peak
    CHECK(f.td3 == doctest::Approx(0.8));   // 8 samples down
    CHECK(f.td2 == doctest::Approx(0.0));   // strictly falling: no notch
    CHECK(f.trhp == doctest::Approx(0.2));  // linear rise crosses 0.5 at sample 2
    CHECK(f.tfh == doctest::Approx(0.4));   // linear fall crosses 0.5 at sample 8
    CHECK(f.pbf == doctest::Approx(7.0));
    // triangle area: 0.5 * base * height = 0.5 * 1.2 * 1.0
    CHECK(f.ppgi == doctest::Approx(0.6));
    CHECK(f.sd_amp == doctest::Approx(6.0));
    // sd falls through 3.0 halfway between samples 3 (4.0) and 4 (2.0)
    CHECK(f.sd_tfhf == doctest::Approx(0.35));
    // positive part: trapezoids over samples 0..5: (3+5+5+3+1)*0.1
    CHECK(f.sdppgi == doctest::Approx(1.7));
    CHECK(f.td4 == doctest::Approx(0.7));  // |2 - 9| samples
}

TEST_CASE("compute_features edge semantics") {
    SUBCASE("flat cycle is degenerate") {
        std::vector<double> flat(20, 1.0);
        Cycle c;
        c.start_idx = 0;
        c.peak_idx = 10;
        c.end_idx = 19;
        CHECK_THROWS_WITH_AS(compute_features(c, flat, flat, kFs, 1),
                             doctest::Contains("DegenerateCycle"), Error);
    }
    SUBCASE("missing falling half crossing falls back to td3") {
        std::vector<double> ppg{0.0, 1.0, 0.8, 0.6};  // never drops below half = 0.5
        std::vector<double> sd{1.0, 2.0, 1.0, 0.0};
        Cycle c;
        c.start_idx = 0;
        c.peak_idx = 1;
        c.end_idx = 3;
        c.sd_peak_idx = 1;
        c.sd_foot_idx = 3;
        const FeatureVector f = compute_features(c, ppg, sd, 10.0, 1);
        CHECK(f.tfh == doctest::Approx(f.td3));
    }
    SUBCASE("out-of-range cycle is rejected") {
        std::vector<double> ppg(10, 0.0);
        Cycle c;
        c.end_idx = 10;
        CHECK_THROWS_WITH_AS(compute_features(c, ppg, ppg, kFs, 1),
                             doctest::Contains("LengthMismatch"), Error);
    }
}

TEST_CASE("features on 100+ noiseless cycles match the analytic pulse") {
    SynthConfig cfg;
    cfg.duration_s = 120.0;
    cfg.heart_rate_bpm = 60.0;
    cfg.notch_depth = 0.4;
    const Record rec = synthesize(cfg);
    const PulseShape sh = PulseShape::from(60.0, 0.4);
    const double phase = PulseShape::kStartPhase * sh.period_s;
    auto val = [&](double t) { return sh.value(t); };
    auto curv = [&](double t) { return sh.second_derivative(t); };

    const auto sd = second_derivative(rec.ppg, kFs);
    const auto cycles = extract_cycles(rec.ppg, sd, kFs);
    REQUIRE(cycles.size() >= 100);

    // continuous-shape landmarks (identical for every cycle)
    const double P = sh.period_s;
    const double t_sys = sh.systolic_center + P;
    const double t_foot = grid_arg(val, sh.dicrotic_center, t_sys, false);
    const double t_notch = grid_arg(val, t_sys, sh.dicrotic_center + P, false);
    const double v_foot = val(t_foot);
    const double v_peak = val(t_sys);
    const double half = v_foot + 0.5 * (v_peak - v_foot);
    const double t_rise = bisect_cross(val, t_foot, t_sys, half);
    const double t_fall = bisect_cross(val, t_sys, t_notch, half);
    const double t_cmax = grid_arg(curv, t_foot, t_foot + P, true);
    const double t_cmin = grid_arg(curv, t_foot, t_foot + P, false);
    const double c_half = bisect_cross(curv, t_cmax, t_cmax + 0.2 * P, 0.5 * curv(t_cmax));
    double ppgi_a = 0.0, sdppgi_a = 0.0;
    for (double t = t_foot; t < t_foot + P; t += 1e-6) {
        ppgi_a += 0.5e-6 * ((val(t) - v_foot) + (val(t + 1e-6) - v_foot));
        sdppgi_a += 0.5e-6 * (std::max(curv(t), 0.0) + std::max(curv(t + 1e-6), 0.0));
    }

    const double one_sample = 1.0 / kFs;
    std::size_t checked = 0;
    for (const Cycle& c : cycles) {
        if (checked == 100) break;
        ++checked;
        const FeatureVector f = compute_features(c, rec.ppg, sd, kFs, 10);

        // durations against the continuous shape: within one sample period
        CHECK(std::abs(f.td1 - P) <= one_sample);
        CHECK(std::abs(f.tp - (t_sys - t_foot)) <= one_sample);
        CHECK(std::abs(f.td3 - (t_foot + P - t_sys)) <= one_sample);
        CHECK(std::abs(f.td2 - (t_notch - t_sys)) <= one_sample);
        CHECK(std::abs(f.trhp - (t_rise - t_foot)) <= one_sample);
        CHECK(std::abs(f.tfh - (t_fall - t_sys)) <= one_sample);
        CHECK(std::abs(f.sd_tfhf - (c_half - t_foot)) <= one_sample);

        // integrals: within 2%
        CHECK(f.ppgi == doctest::Approx(ppgi_a).epsilon(0.02));
        CHECK(f.sdppgi == doctest::Approx(sdppgi_a).epsilon(0.02));

        // the SDPPG estimator is a central difference, so amplitude/landmark
        // features are compared against the analytic pulse pushed through the
        // same stencil on this cycle's sample grid...
        std::size_t jmax = c.start_idx, jmin = c.start_idx;
        double smax = -1e300, smin = 1e300;
        auto stencil = [&](std::size_t j) {
            const double t = static_cast<double>(j) / kFs + phase;
            return (val(t - one_sample) - 2.0 * val(t) + val(t + one_sample)) * kFs * kFs;
        };
        for (std::size_t j = c.start_idx; j <= c.end_idx; ++j) {
            const double v = stencil(j);
            if (v > smax) {
                smax = v;
                jmax = j;
            }
            if (v < smin) {
                smin = v;
                jmin = j;
            }
        }
        CHECK(f.sd_amp == doctest::Approx(smax).epsilon(1e-9));
        CHECK(f.td4 ==
              doctest::Approx(std::abs(static_cast<double>(jmax) - static_cast<double>(jmin)) /
                              kFs)
                  .epsilon(1e-12));
        // ...and loosely against the true curvature as a sanity cross-check
        CHECK(f.sd_amp == doctest::Approx(curv(t_cmax)).epsilon(0.06));
        CHECK(std::abs(f.td4 - std::abs(t_cmax - t_cmin)) <= 2.5 * one_sample);
    }
    CHECK(checked == 100);
}

TEST_CASE("assemble_samples windows contiguous accepted cycles") {
    // 10 synthetic cycles, 20 samples each, with recognizable feature values
    std::vector<Cycle> cycles(10);
    std::vector<FeatureVector> fvs(10);
    std::vector<std::pair<double, double>> targets(10);
    for (std::size_t i = 0; i < 10; ++i) {
        cycles[i].start_idx = i * 20;
        cycles[i].peak_idx = i * 20 + 8;
        cycles[i].end_idx = (i + 1) * 20;
        cycles[i].frame_id = static_cast<int>(i / 5);
        fvs[i].td1 = static_cast<double>(i);
        targets[i] = {120.0 + static_cast<double>(i), 80.0 + static_cast<double>(i)};
    }

    SUBCASE("non-overlapping windows with mean targets and sequential ids") {
        const auto samples = assemble_samples(cycles, fvs, targets, 4);
        REQUIRE(samples.size() == 2);
        CHECK(samples[0].sample_id == 0);
        CHECK(samples[1].sample_id == 1);
        CHECK(samples[0].features[0] == 0.0);                     // td1 of cycle 0
        CHECK(samples[1].features[0] == 4.0);                     // window starts at cycle 4
        CHECK(samples[0].sbp == doctest::Approx(121.5));          // mean of 120..123
        CHECK(samples[0].dbp == doctest::Approx(81.5));
        CHECK(samples[1].sbp == doctest::Approx(125.5));          // mean of 124..127
        CHECK(samples[0].features.size() == 4 * kFeatureCount);
    }
    SUBCASE("windows touching a rejected frame are skipped") {
        // frame 0 covers cycles 0..4; only cycles 5..9 remain usable
        const auto samples = assemble_samples(cycles, fvs, targets, 4, {0});
        REQUIRE(samples.size() == 1);
        CHECK(samples[0].features[0] == 5.0);
    }
    SUBCASE("a contiguity break restarts the window") {
        auto gappy = cycles;
        for (std::size_t i = 3; i < 10; ++i) {  // 10-sample gap before cycle 3
            gappy[i].start_idx += 10;
            gappy[i].peak_idx += 10;
            gappy[i].end_idx += 10;
        }
        gappy[2].end_idx = cycles[2].end_idx;  // keep end < next start
        const auto samples = assemble_samples(gappy, fvs, targets, 4);
        REQUIRE(samples.size() == 1);
        CHECK(samples[0].features[0] == 3.0);  // window starts after the break
    }
    SUBCASE("misaligned inputs are rejected") {
        CHECK_THROWS_WITH_AS(assemble_samples(cycles, fvs, {}, 4),
                             doctest::Contains("LengthMismatch"), Error);
    }
    SUBCASE("too few cycles yields no samples") {
        CHECK(assemble_samples(cycles, fvs, targets, 11).empty());
    }
}

TEST_CASE("normalization statistics are fit on the fit split only") {
    auto make_sample = [](double base) {
        FrameSample s;
        s.T = 2;
        s.features.assign(2 * kFeatureCount, base);
        for (std::size_t c = 0; c < kFeatureCount; ++c) s.features[kFeatureCount + c] = base + 2.0;
        s.features[3] = 7.0;  // column 3 constant 7 in every row of every sample
        s.features[kFeatureCount + 3] = 7.0;
        s.sbp = 120.0;
        s.dbp = 80.0;
        return s;
    };
    const std::vector<FrameSample> fit{make_sample(1.0), make_sample(3.0)};
    const NormStats stats = fit_norm_stats(fit);
    // column 0 values: {1, 3, 3, 5} -> mean 3, population sd sqrt(2)
    CHECK(stats.means[0] == doctest::Approx(3.0));
    CHECK(stats.stds[0] == doctest::Approx(std::sqrt(2.0)));
    // constant column: flagged, sd forced to 1
    CHECK(stats.means[3] == doctest::Approx(7.0));
    CHECK(stats.stds[3] == 1.0);
    REQUIRE(stats.flagged.size() == 1);
    CHECK(stats.flagged[0] == 3);

    const auto normed = apply_norm_stats(fit, stats);
    CHECK(normed[0].features[0] == doctest::Approx((1.0 - 3.0) / std::sqrt(2.0)));
    CHECK(normed[0].features[3] == doctest::Approx(0.0));  // (7 - 7) / 1

    CHECK_THROWS_WITH_AS(fit_norm_stats({fit[0]}), doctest::Contains("TooFewSamples"), Error);
}

TEST_CASE("dataset and norm-stats files round-trip") {
    const fs::path dir = temp_dir();
    std::vector<FrameSample> samples(3);
    std::uint64_t id = 0;
    for (auto& s : samples) {
        s.T = 4;
        s.features.resize(4 * kFeatureCount);
        for (std::size_t i = 0; i < s.features.size(); ++i)
            s.features[i] = std::sin(static_cast<double>(i + id));
        s.sbp = 121.25 + static_cast<double>(id);
        s.dbp = 79.5;
        s.sample_id = id++;
    }

    SUBCASE("binary dataset round-trips bit-exactly") {
        const fs::path p = dir / "ds.bin";
        save_dataset(samples, p.string());
        const auto back = load_dataset(p.string());
        REQUIRE(back.size() == samples.size());
        for (std::size_t i = 0; i < back.size(); ++i) {
            CHECK(back[i].T == 4);
            CHECK(back[i].features == samples[i].features);
            CHECK(back[i].sbp == samples[i].sbp);
            CHECK(back[i].dbp == samples[i].dbp);
            CHECK(back[i].sample_id == samples[i].sample_id);
        }
    }
    SUBCASE("corrupted headers are diagnosed") {
        const fs::path p = dir / "bad.bin";
        save_dataset(samples, p.string());

        auto patch = [&](std::streamoff off, const char* bytes, std::size_t n) {
            std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
            f.seekp(off);
            f.write(bytes, static_cast<std::streamsize>(n));
        };
        SUBCASE("bad magic") {
            patch(0, "XXXX", 4);
            CHECK_THROWS_WITH_AS(load_dataset(p.string()), doctest::Contains("MalformedFile"),
                                 Error);
        }
        SUBCASE("unsupported version") {
            const std::uint32_t v2 = 2;
            patch(4, reinterpret_cast<const char*>(&v2), 4);
            CHECK_THROWS_WITH_AS(load_dataset(p.string()), doctest::Contains("VersionMismatch"),
                                 Error);
        }
        SUBCASE("truncated payload") {
            fs::resize_file(p, fs::file_size(p) - 16);
            CHECK_THROWS_WITH_AS(load_dataset(p.string()), doctest::Contains("MalformedFile"),
                                 Error);
        }
        SUBCASE("missing file") {
            CHECK_THROWS_WITH_AS(load_dataset((dir / "nope.bin").string()),
                                 doctest::Contains("IoFailure"), Error);
        }
    }
    SUBCASE("csv export has one row per sample") {
        const fs::path p = dir / "ds.csv";
        save_dataset_csv(samples, p.string());
        std::ifstream in(p);
        std::string line;
        std::size_t rows = 0;
        while (std::getline(in, line)) ++rows;
        CHECK(rows == samples.size() + 1);  // header + data
    }
    SUBCASE("norm stats json round-trips") {
        NormStats stats;
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            stats.means[i] = 0.25 * static_cast<double>(i);
            stats.stds[i] = 1.0 + 0.125 * static_cast<double>(i);
        }
        stats.flagged = {2, 6};
        const fs::path p = dir / "norm.json";
        save_norm_stats(stats, p.string());
        const NormStats back = load_norm_stats(p.string());
        CHECK(back.means == stats.means);
        CHECK(back.stds == stats.stds);
        CHECK(back.flagged == stats.flagged);
    }
}

TEST_CASE("frame sample validation") {
    FrameSample s;
    s.T = 2;
    s.features.assign(2 * kFeatureCount, 0.5);
    s.sbp = 120.0;
    s.dbp = 80.0;
    s.validate();
    s.features.pop_back();
    CHECK_THROWS_WITH_AS(s.validate(), doctest::Contains("ShapeMismatch"), Error);
    s.features.push_back(std::nan(""));
    CHECK_THROWS_WITH_AS(s.validate(), doctest::Contains("NonFiniteSample"), Error);
    s.features.back() = 0.5;
    s.dbp = 130.0;
    CHECK_THROWS_WITH_AS(s.validate(), doctest::Contains("InvalidConfig"), Error);
}
