#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pulseforge/evaluation.hpp"
#include "pulseforge/features.hpp"
#include "pulseforge/model.hpp"
#include "pulseforge/preprocess.hpp"
#include "pulseforge/record.hpp"
#include "pulseforge/segmentation.hpp"
#include "pulseforge/training.hpp"

namespace py = pybind11;
using namespace pulseforge;

namespace {

py::dict cycle_to_dict(const Cycle& c) {
    py::dict d;
    d["frame_id"] = c.frame_id;
    d["start"] = c.start_idx;
    d["peak"] = c.peak_idx;
    d["notch"] = c.notch_idx ? py::object(py::cast(*c.notch_idx)) : py::object(py::none());
    d["end"] = c.end_idx;
    d["sd_peak"] = c.sd_peak_idx;
    d["sd_foot"] = c.sd_foot_idx;
    return d;
}

}  // namespace

PYBIND11_MODULE(_pulseforge, m) {
    m.doc() = "PPG-to-blood-pressure estimation toolkit (native core)";

    py::register_exception<Error>(m, "PulseforgeError");

    m.def(
        "design_bandpass",
        [](int order, double f_low, double f_high, double fs) {
            BandpassSpec spec{order, f_low, f_high, fs};
            IirFilter f = design_butterworth_bandpass(spec);
            return py::make_tuple(f.b, f.a);
        },
        py::arg("order") = 5, py::arg("f_low") = 0.7, py::arg("f_high") = 10.0,
        py::arg("fs") = 62.4, "Butterworth bandpass coefficients (b, a)");

    m.def(
        "filtfilt",
        [](const std::vector<double>& b, const std::vector<double>& a,
           const std::vector<double>& x) { return filtfilt(IirFilter{b, a}, x); },
        py::arg("b"), py::arg("a"), py::arg("x"), "Zero-phase forward-backward filtering");

    m.def("moving_average", &moving_average, py::arg("x"), py::arg("window"),
          py::arg("passes") = 1);

    m.def(
        "synthesize",
        [](double duration_s, double heart_rate_bpm, double sbp, double dbp, double notch_depth,
           double noise_std, double baseline_drift_amp, std::uint64_t seed, double fs) {
            SynthConfig c{duration_s, heart_rate_bpm, sbp,  dbp, notch_depth,
                          noise_std,  baseline_drift_amp, seed, fs};
            Record r = synthesize(c);
            py::dict d;
            d["fs"] = r.fs;
            d["ppg"] = r.ppg;
            d["abp"] = *r.abp;
            return d;
        },
        py::arg("duration_s") = 30.0, py::arg("heart_rate_bpm") = 60.0, py::arg("sbp") = 120.0,
        py::arg("dbp") = 80.0, py::arg("notch_depth") = 0.4, py::arg("noise_std") = 0.0,
        py::arg("baseline_drift_amp") = 0.0, py::arg("seed") = 0, py::arg("fs") = 62.4,
        "Synthetic PPG/ABP record as {fs, ppg, abp}");

    m.def("second_derivative", &second_derivative, py::arg("x"), py::arg("fs"));

    m.def(
        "extract_cycles",
        [](const std::vector<double>& ppg, const std::vector<double>& sdppg, double fs,
           double min_distance_s, double min_prominence, double frame_len_s) {
            py::list out;
            for (const Cycle& c : extract_cycles(ppg, sdppg, fs, min_distance_s, min_prominence,
                                                 frame_len_s))
                out.append(cycle_to_dict(c));
            return out;
        },
        py::arg("ppg"), py::arg("sdppg"), py::arg("fs"), py::arg("min_distance_s") = 0.3,
        py::arg("min_prominence") = -1.0, py::arg("frame_len_s") = 10.0);

    m.def(
        "metrics",
        [](const std::vector<double>& targets, const std::vector<double>& predictions) {
            Metrics v = metrics(targets, predictions);
            py::dict d;
            d["r2"] = v.r2;
            d["me"] = v.me;
            d["mae"] = v.mae;
            d["rmse"] = v.rmse;
            d["std"] = v.std;
            return d;
        },
        py::arg("targets"), py::arg("predictions"));

    m.def(
        "aami_check",
        [](std::size_t records, double me, double std_mmHg) {
            AamiResult r = aami_check(records, me, std_mmHg);
            py::dict d;
            d["records"] = r.records;
            d["pass"] = r.pass;
            d["reasons"] = r.reasons;
            return d;
        },
        py::arg("records"), py::arg("me"), py::arg("std_mmHg"));

    m.def(
        "bhs_grade",
        [](double cum5, double cum10, double cum15) {
            return to_string(bhs_grade(cum5, cum10, cum15));
        },
        py::arg("cum5"), py::arg("cum10"), py::arg("cum15"));

    m.def(
        "bland_altman",
        [](const std::vector<double>& targets, const std::vector<double>& predictions) {
            BlandAltman r = bland_altman(targets, predictions);
            py::dict d;
            d["mean_diff"] = r.mean_diff;
            d["loa_low"] = r.loa_low;
            d["loa_high"] = r.loa_high;
            return d;
        },
        py::arg("targets"), py::arg("predictions"));

    m.def(
        "predict",
        [](const std::string& checkpoint, const std::string& dataset, const std::string& norm) {
            ModelParams params = load_params(checkpoint);
            std::vector<FrameSample> samples = load_dataset(dataset);
            std::vector<FrameSample> normalized = apply_norm_stats(samples, load_norm_stats(norm));
            return predict(params, normalized);
        },
        py::arg("checkpoint"), py::arg("dataset"), py::arg("norm"),
        "Run a saved checkpoint over a dataset.bin; returns [(sbp, dbp), ...]");

    m.def(
        "dataset_summary",
        [](const std::string& path) {
            std::vector<FrameSample> samples = load_dataset(path);
            py::dict d;
            d["n_samples"] = samples.size();
            d["T"] = samples.empty() ? kFrameSeqLen : samples[0].T;
            d["L"] = kFeatureCount;
            return d;
        },
        py::arg("path"));
}
