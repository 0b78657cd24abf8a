#include "pulseforge/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

namespace pulseforge {

namespace {

using cplx = std::complex<double>;

// Expands a monic polynomial from its roots; coefficients are returned
// highest order first, c[0] == 1.
std::vector<cplx> poly_from_roots(const std::vector<cplx>& roots) {
    std::vector<cplx> c{1.0};
    for (const cplx& r : roots) {
        std::vector<cplx> next(c.size() + 1, 0.0);
        for (std::size_t i = 0; i < c.size(); ++i) {
            next[i] += c[i];
            next[i + 1] -= c[i] * r;
        }
        c = std::move(next);
    }
    return c;
}

// Solves M x = rhs in place (partial pivoting); M is n x n row-major.
std::vector<double> solve_dense(std::vector<double> M, std::vector<double> rhs) {
    const std::size_t n = rhs.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(M[r * n + col]) > std::abs(M[piv * n + col])) piv = r;
        if (piv != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(M[col * n + j], M[piv * n + j]);
            std::swap(rhs[col], rhs[piv]);
        }
        const double d = M[col * n + col];
        if (d == 0.0) throw Error("InvalidSpec", "singular system in filter state solve");
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = M[r * n + col] / d;
            if (f == 0.0) continue;
            for (std::size_t j = col; j < n; ++j) M[r * n + j] -= f * M[col * n + j];
            rhs[r] -= f * rhs[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t ri = n; ri-- > 0;) {
        double acc = rhs[ri];
        for (std::size_t j = ri + 1; j < n; ++j) acc -= M[ri * n + j] * x[j];
        x[ri] = acc / M[ri * n + ri];
    }
    return x;
}

// Steady-state initial filter state for a unit-step input (direct form
// II transposed), so filtfilt startup transients vanish.
std::vector<double> lfilter_zi(const IirFilter& f) {
    const std::size_t n = std::max(f.a.size(), f.b.size());
    std::vector<double> b = f.b, a = f.a;
    b.resize(n, 0.0);
    a.resize(n, 0.0);
    const std::size_t m = n - 1;
    // M = I - companion(a)^T
    std::vector<double> M(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i) M[i * m + i] = 1.0;
    for (std::size_t i = 0; i < m; ++i) M[i * m + 0] += a[i + 1];
    for (std::size_t i = 0; i + 1 < m; ++i) M[i * m + (i + 1)] -= 1.0;
    std::vector<double> rhs(m);
    for (std::size_t i = 0; i < m; ++i) rhs[i] = b[i + 1] - a[i + 1] * b[0];
    return solve_dense(std::move(M), std::move(rhs));
}

std::vector<double> lfilter(const IirFilter& f, const std::vector<double>& x,
                            std::vector<double> z) {
    const std::size_t n = std::max(f.a.size(), f.b.size());
    std::vector<double> b = f.b, a = f.a;
    b.resize(n, 0.0);
    a.resize(n, 0.0);
    z.resize(n - 1, 0.0);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        const double yi = b[0] * xi + z[0];
        for (std::size_t j = 0; j + 1 < n - 1; ++j)
            z[j] = b[j + 1] * xi + z[j + 1] - a[j + 1] * yi;
        z[n - 2] = b[n - 1] * xi - a[n - 1] * yi;
        y[i] = yi;
    }
    return y;
}

}  // namespace

void CleaningPolicy::validate() const {
    if (min_duration_s <= 0.0) throw Error("InvalidConfig", "min_duration_s must be positive");
    if (amp_low && amp_high && !(*amp_low < *amp_high))
        throw Error("InvalidConfig", "amp_low must be below amp_high");
    if (flatline_var_threshold < 0.0 || flatline_window_s <= 0.0)
        throw Error("InvalidConfig", "flatline thresholds must be non-negative");
    if (max_outrange_fraction < 0.0 || max_outrange_fraction > 1.0)
        throw Error("InvalidConfig", "max_outrange_fraction must be in [0, 1]");
}

void BandpassSpec::validate() const {
    if (order <= 0) throw Error("InvalidSpec", "filter order must be positive");
    if (!(0.0 < f_low && f_low < f_high && f_high < fs / 2.0))
        throw Error("InvalidSpec", "require 0 < f_low < f_high < fs/2");
}

CleanResult clean_record(const Record& record, const CleaningPolicy& policy) {
    record.validate();
    policy.validate();
    CleanResult result;
    const std::size_t n = record.ppg.size();
    if (static_cast<double>(n) / record.fs < policy.min_duration_s) {
        result.rejected = true;
        result.reason = "TooShort";
        return result;
    }

    double lo, hi;
    if (policy.amp_low && policy.amp_high) {
        lo = *policy.amp_low;
        hi = *policy.amp_high;
    } else {
        const double mean = std::accumulate(record.ppg.begin(), record.ppg.end(), 0.0) /
                            static_cast<double>(n);
        double var = 0.0;
        for (double v : record.ppg) var += (v - mean) * (v - mean);
        var /= static_cast<double>(n);
        const double sd = std::sqrt(var);
        lo = mean - 5.0 * sd;
        hi = mean + 5.0 * sd;
    }

    const std::size_t win =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(policy.flatline_window_s * record.fs)));
    std::size_t seg_start = 0;
    bool in_segment = false;
    for (std::size_t w0 = 0; w0 < n; w0 += win) {
        const std::size_t w1 = std::min(n, w0 + win);
        const std::size_t m = w1 - w0;
        double mean = 0.0;
        std::size_t outrange = 0;
        for (std::size_t i = w0; i < w1; ++i) {
            mean += record.ppg[i];
            if (record.ppg[i] < lo || record.ppg[i] > hi) ++outrange;
        }
        mean /= static_cast<double>(m);
        double var = 0.0;
        for (std::size_t i = w0; i < w1; ++i)
            var += (record.ppg[i] - mean) * (record.ppg[i] - mean);
        var /= static_cast<double>(m);
        const bool keep = var >= policy.flatline_var_threshold &&
                          static_cast<double>(outrange) / static_cast<double>(m) <=
                              policy.max_outrange_fraction;
        if (keep && !in_segment) {
            seg_start = w0;
            in_segment = true;
        } else if (!keep && in_segment) {
            result.segments.push_back({seg_start, w0});
            in_segment = false;
        }
    }
    if (in_segment) result.segments.push_back({seg_start, n});
    if (result.segments.empty()) {
        result.rejected = true;
        result.reason = "NoCleanSegments";
    }
    return result;
}

IirFilter design_butterworth_bandpass(const BandpassSpec& spec) {
    spec.validate();
    const int n = spec.order;
    const double fs2 = 2.0 * spec.fs;
    // pre-warped analog band edges
    const double wl = fs2 * std::tan(std::numbers::pi * spec.f_low / spec.fs);
    const double wh = fs2 * std::tan(std::numbers::pi * spec.f_high / spec.fs);
    const double bw = wh - wl;
    const double w0 = std::sqrt(wl * wh);

    // analog Butterworth prototype poles on the unit circle, left half-plane
    std::vector<cplx> proto;
    for (int k = 0; k < n; ++k) {
        const double theta = std::numbers::pi * (2.0 * k + 1.0 + n) / (2.0 * n);
        proto.emplace_back(std::cos(theta), std::sin(theta));
    }

    // lowpass -> bandpass: each prototype pole splits into two
    std::vector<cplx> poles;
    for (const cplx& p : proto) {
        const cplx ps = p * (bw / 2.0);
        const cplx disc = std::sqrt(ps * ps - cplx(w0 * w0, 0.0));
        poles.push_back(ps + disc);
        poles.push_back(ps - disc);
    }
    std::vector<cplx> zeros(static_cast<std::size_t>(n), cplx(0.0, 0.0));  // n zeros at s = 0
    double gain = std::pow(bw, n);

    // bilinear transform of each pole/zero; infinite zeros map to z = -1
    cplx num(1.0, 0.0), den(1.0, 0.0);
    std::vector<cplx> zd, pd;
    for (const cplx& z : zeros) {
        zd.push_back((cplx(fs2, 0.0) + z) / (cplx(fs2, 0.0) - z));
        num *= cplx(fs2, 0.0) - z;
    }
    for (const cplx& p : poles) {
        pd.push_back((cplx(fs2, 0.0) + p) / (cplx(fs2, 0.0) - p));
        den *= cplx(fs2, 0.0) - p;
    }
    while (zd.size() < pd.size()) zd.emplace_back(-1.0, 0.0);
    gain *= (num / den).real();

    const auto bc = poly_from_roots(zd);
    const auto ac = poly_from_roots(pd);
    IirFilter f;
    for (const cplx& c : bc) f.b.push_back(gain * c.real());
    for (const cplx& c : ac) f.a.push_back(c.real());

    for (const cplx& p : pd)
        if (std::abs(p) >= 1.0) throw Error("InvalidSpec", "designed filter is unstable");
    for (double c : f.b)
        if (!std::isfinite(c)) throw Error("InvalidSpec", "non-finite filter coefficient");
    for (double c : f.a)
        if (!std::isfinite(c)) throw Error("InvalidSpec", "non-finite filter coefficient");
    return f;
}

double filter_gain_at(const IirFilter& filter, double f_hz, double fs) {
    const double w = 2.0 * std::numbers::pi * f_hz / fs;
    const cplx zinv = std::exp(cplx(0.0, -w));
    cplx num(0.0, 0.0), den(0.0, 0.0);
    cplx zp(1.0, 0.0);
    for (std::size_t i = 0; i < std::max(filter.b.size(), filter.a.size()); ++i) {
        if (i < filter.b.size()) num += filter.b[i] * zp;
        if (i < filter.a.size()) den += filter.a[i] * zp;
        zp *= zinv;
    }
    return std::abs(num / den);
}

std::vector<double> filtfilt(const IirFilter& filter, const std::vector<double>& x) {
    const std::size_t ntaps = std::max(filter.a.size(), filter.b.size());
    const std::size_t padlen = 3 * ntaps;
    if (x.size() <= padlen)
        throw Error("SignalTooShort", "filtfilt needs more than 3x the filter length");

    // odd (anti-symmetric) extension about the endpoints
    std::vector<double> ext;
    ext.reserve(x.size() + 2 * padlen);
    for (std::size_t i = padlen; i >= 1; --i) ext.push_back(2.0 * x.front() - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 1; i <= padlen; ++i) ext.push_back(2.0 * x.back() - x[x.size() - 1 - i]);

    const std::vector<double> zi = lfilter_zi(filter);
    auto scaled = [&zi](double x0) {
        std::vector<double> z = zi;
        for (double& v : z) v *= x0;
        return z;
    };
    std::vector<double> y = lfilter(filter, ext, scaled(ext.front()));
    std::reverse(y.begin(), y.end());
    y = lfilter(filter, y, scaled(y.front()));
    std::reverse(y.begin(), y.end());
    return {y.begin() + static_cast<std::ptrdiff_t>(padlen),
            y.begin() + static_cast<std::ptrdiff_t>(padlen + x.size())};
}

std::vector<double> moving_average(const std::vector<double>& x, std::size_t window,
                                   std::size_t passes) {
    if (window == 0 || passes == 0)
        throw Error("InvalidConfig", "window and passes must be positive");
    if (window > x.size()) throw Error("WindowTooLarge", "window exceeds signal length");
    const std::size_t left = (window - 1) / 2;
    const std::size_t right = window / 2;
    std::vector<double> cur = x;
    const std::size_t n = x.size();
    auto sym = [n](std::ptrdiff_t i) -> std::size_t {
        // symmetric (edge-including) index: ... x1 x0 | x0 x1 ... xn-1 | xn-1 ...
        while (i < 0 || i >= static_cast<std::ptrdiff_t>(n)) {
            if (i < 0) i = -i - 1;
            if (i >= static_cast<std::ptrdiff_t>(n)) i = 2 * static_cast<std::ptrdiff_t>(n) - 1 - i;
        }
        return static_cast<std::size_t>(i);
    };
    for (std::size_t pass = 0; pass < passes; ++pass) {
        std::vector<double> next(n);
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(left);
                 j <= static_cast<std::ptrdiff_t>(i + right); ++j)
                acc += cur[sym(j)];
            next[i] = acc / static_cast<double>(window);
        }
        cur = std::move(next);
    }
    return cur;
}

PreprocessResult preprocess_chain(const Record& record, const CleaningPolicy& policy,
                                  const BandpassSpec& spec, std::size_t maf_window,
                                  std::size_t maf_passes) {
    PreprocessResult result;
    result.clean = clean_record(record, policy);
    if (result.clean.rejected) return result;

    const IirFilter filter = design_butterworth_bandpass(spec);
    Record out;
    out.record_id = record.record_id;
    out.subject_id = record.subject_id;
    out.fs = record.fs;
    out.start_time = record.start_time;
    if (record.abp) out.abp.emplace();
    for (const Segment& seg : result.clean.segments) {
        std::vector<double> ppg(record.ppg.begin() + static_cast<std::ptrdiff_t>(seg.start),
                                record.ppg.begin() + static_cast<std::ptrdiff_t>(seg.end));
        ppg = filtfilt(filter, ppg);
        ppg = moving_average(ppg, maf_window, maf_passes);
        out.ppg.insert(out.ppg.end(), ppg.begin(), ppg.end());
        if (record.abp)
            out.abp->insert(out.abp->end(),
                            record.abp->begin() + static_cast<std::ptrdiff_t>(seg.start),
                            record.abp->begin() + static_cast<std::ptrdiff_t>(seg.end));
    }
    result.record = std::move(out);
    return result;
}

}  // namespace pulseforge
