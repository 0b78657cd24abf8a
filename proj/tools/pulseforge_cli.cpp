// pulseforge command-line interface: composable pipeline stages for
// PPG-based blood-pressure estimation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pulseforge/evaluation.hpp"
#include "pulseforge/features.hpp"
#include "pulseforge/model.hpp"
#include "pulseforge/preprocess.hpp"
#include "pulseforge/record.hpp"
#include "pulseforge/segmentation.hpp"
#include "pulseforge/training.hpp"

namespace pf = pulseforge;
using nlohmann::json;

namespace {

// ---- error plumbing ----------------------------------------------------

const std::set<std::string> kNumericCodes = {"NumericDivergence", "NonFiniteDetected",
                                             "NonFiniteGradient"};
const std::set<std::string> kDataCodes = {
    "FileNotFound", "IoFailure",      "MalformedFile",  "CorruptFile",
    "VersionMismatch", "EmptyInput",  "TooFewSamples",  "InsufficientData",
    "SignalTooShort",  "RecordRejected", "MissingChannel", "NonFiniteSample"};

int exit_class(const std::string& code) {
    if (kNumericCodes.count(code)) return 5;
    if (kDataCodes.count(code)) return 4;
    return 3;
}

const char* class_name(int exit_code) {
    switch (exit_code) {
        case 2: return "usage";
        case 4: return "data";
        case 5: return "numeric";
        default: return "validation";
    }
}

int emit_error(int exit_code, const std::string& code, const std::string& message,
               const std::string& path = "") {
    json j;
    j["error"] = class_name(exit_code);
    j["code"] = code;
    j["message"] = message;
    if (!path.empty()) j["path"] = path;
    std::cerr << j.dump() << std::endl;
    return exit_code;
}

void require_file(const std::string& path) {
    if (!std::filesystem::exists(path)) throw pf::Error("FileNotFound", path);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// ---- shared configuration ----------------------------------------------

struct PipelineConfig {
    std::uint64_t seed = 0;
    pf::CleaningPolicy cleaning;
    pf::BandpassSpec bandpass;
    double min_distance_s = 0.3;
    double min_prominence = -1.0;
    double frame_len_s = 10.0;
    std::size_t maf_window = 5;
    pf::ModelConfig model;
    pf::TrainConfig train;
};

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key))
            throw pf::Error("InvalidConfig", "unknown key '" + key + "' in " + where);
}

PipelineConfig load_config(const std::string& path) {
    PipelineConfig cfg;
    if (path.empty()) return cfg;
    require_file(path);
    std::ifstream in(path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw pf::Error("MalformedFile", std::string("config parse: ") + e.what());
    }
    reject_unknown(j, {"seed", "cleaning", "bandpass", "segmentation", "model", "train"},
                   "config");
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("cleaning")) {
        const json& c = j["cleaning"];
        reject_unknown(c,
                       {"min_duration_s", "amp_low", "amp_high", "flatline_var_threshold",
                        "flatline_window_s", "max_outrange_fraction"},
                       "config.cleaning");
        if (c.contains("min_duration_s")) cfg.cleaning.min_duration_s = c["min_duration_s"];
        if (c.contains("amp_low")) cfg.cleaning.amp_low = c["amp_low"].get<double>();
        if (c.contains("amp_high")) cfg.cleaning.amp_high = c["amp_high"].get<double>();
        if (c.contains("flatline_var_threshold"))
            cfg.cleaning.flatline_var_threshold = c["flatline_var_threshold"];
        if (c.contains("flatline_window_s")) cfg.cleaning.flatline_window_s = c["flatline_window_s"];
        if (c.contains("max_outrange_fraction"))
            cfg.cleaning.max_outrange_fraction = c["max_outrange_fraction"];
    }
    if (j.contains("bandpass")) {
        const json& b = j["bandpass"];
        reject_unknown(b, {"order", "f_low", "f_high", "fs", "maf_window"}, "config.bandpass");
        if (b.contains("order")) cfg.bandpass.order = b["order"];
        if (b.contains("f_low")) cfg.bandpass.f_low = b["f_low"];
        if (b.contains("f_high")) cfg.bandpass.f_high = b["f_high"];
        if (b.contains("fs")) cfg.bandpass.fs = b["fs"];
        if (b.contains("maf_window")) cfg.maf_window = b["maf_window"].get<std::size_t>();
    }
    if (j.contains("segmentation")) {
        const json& s = j["segmentation"];
        reject_unknown(s, {"min_distance_s", "min_prominence", "frame_len_s"},
                       "config.segmentation");
        if (s.contains("min_distance_s")) cfg.min_distance_s = s["min_distance_s"];
        if (s.contains("min_prominence")) cfg.min_prominence = s["min_prominence"];
        if (s.contains("frame_len_s")) cfg.frame_len_s = s["frame_len_s"];
    }
    if (j.contains("model")) {
        const json& m = j["model"];
        reject_unknown(m,
                       {"l_in", "d_model", "T", "n_heads", "d_head", "n_blocks", "d_ff",
                        "dropout_p", "pool_factor"},
                       "config.model");
        if (m.contains("l_in")) cfg.model.l_in = m["l_in"].get<std::size_t>();
        if (m.contains("d_model")) cfg.model.d_model = m["d_model"].get<std::size_t>();
        if (m.contains("T")) cfg.model.T = m["T"].get<std::size_t>();
        if (m.contains("n_heads")) cfg.model.n_heads = m["n_heads"].get<std::size_t>();
        if (m.contains("d_head")) cfg.model.d_head = m["d_head"].get<std::size_t>();
        if (m.contains("n_blocks")) cfg.model.n_blocks = m["n_blocks"].get<std::size_t>();
        if (m.contains("d_ff")) cfg.model.d_ff = m["d_ff"].get<std::size_t>();
        if (m.contains("dropout_p")) cfg.model.dropout_p = m["dropout_p"];
        if (m.contains("pool_factor")) cfg.model.pool_factor = m["pool_factor"].get<std::size_t>();
    }
    if (j.contains("train")) {
        const json& t = j["train"];
        reject_unknown(
            t, {"batch_size", "epochs", "lr", "dropout_p", "seed", "folds", "wd_max",
                "early_stop_patience"},
            "config.train");
        if (t.contains("batch_size")) cfg.train.batch_size = t["batch_size"].get<std::size_t>();
        if (t.contains("epochs")) cfg.train.epochs = t["epochs"].get<std::size_t>();
        if (t.contains("lr")) cfg.train.lr = t["lr"];
        if (t.contains("dropout_p")) cfg.train.dropout_p = t["dropout_p"];
        if (t.contains("seed")) cfg.train.seed = t["seed"].get<std::uint64_t>();
        if (t.contains("folds")) cfg.train.folds = t["folds"].get<std::size_t>();
        if (t.contains("wd_max")) cfg.train.wd_max = t["wd_max"];
        if (t.contains("early_stop_patience"))
            cfg.train.early_stop_patience = t["early_stop_patience"].get<std::size_t>();
    }
    cfg.cleaning.validate();
    cfg.bandpass.validate();
    cfg.model.validate();
    cfg.train.validate();
    return cfg;
}

// ---- cycles.json <-> Cycle ----------------------------------------------

void write_cycles(const std::vector<pf::Cycle>& cycles,
                  const std::vector<std::pair<double, double>>& targets,
                  const std::string& path) {
    json arr = json::array();
    for (std::size_t i = 0; i < cycles.size(); ++i) {
        const pf::Cycle& c = cycles[i];
        json o;
        o["frame_id"] = c.frame_id;
        o["start"] = c.start_idx;
        o["peak"] = c.peak_idx;
        o["notch"] = c.notch_idx ? json(*c.notch_idx) : json(nullptr);
        o["end"] = c.end_idx;
        o["sd_peak"] = c.sd_peak_idx;
        o["sd_foot"] = c.sd_foot_idx;
        o["sbp"] = targets.empty() ? json(nullptr) : json(targets[i].first);
        o["dbp"] = targets.empty() ? json(nullptr) : json(targets[i].second);
        arr.push_back(o);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw pf::Error("IoFailure", "cannot open " + path + " for writing");
    out << arr.dump(2) << '\n';
    if (!out) throw pf::Error("IoFailure", "write failed for " + path);
}

std::pair<std::vector<pf::Cycle>, std::vector<std::pair<double, double>>> read_cycles(
    const std::string& path) {
    require_file(path);
    std::ifstream in(path);
    json arr;
    try {
        in >> arr;
    } catch (const json::exception& e) {
        throw pf::Error("MalformedFile", std::string("cycles parse: ") + e.what());
    }
    if (!arr.is_array()) throw pf::Error("MalformedFile", "cycles.json must be an array");
    std::vector<pf::Cycle> cycles;
    std::vector<std::pair<double, double>> targets;
    for (const json& o : arr) {
        pf::Cycle c;
        c.frame_id = o.at("frame_id").get<int>();
        c.start_idx = o.at("start").get<std::size_t>();
        c.peak_idx = o.at("peak").get<std::size_t>();
        if (!o.at("notch").is_null()) c.notch_idx = o.at("notch").get<std::size_t>();
        c.end_idx = o.at("end").get<std::size_t>();
        c.sd_peak_idx = o.at("sd_peak").get<std::size_t>();
        c.sd_foot_idx = o.at("sd_foot").get<std::size_t>();
        cycles.push_back(c);
        if (o.at("sbp").is_null() || o.at("dbp").is_null())
            throw pf::Error("MissingChannel", "cycle lacks sbp/dbp targets (record had no ABP)");
        targets.emplace_back(o.at("sbp").get<double>(), o.at("dbp").get<double>());
    }
    return {std::move(cycles), std::move(targets)};
}

// ---- shared stage helpers ----------------------------------------------

std::vector<pf::FrameSample> samples_from_record(const pf::Record& record,
                                                 const std::vector<pf::Cycle>& cycles,
                                                 const std::vector<std::pair<double, double>>& targets,
                                                 double frame_len_s, std::size_t T) {
    const std::vector<double> sdppg = pf::second_derivative(record.ppg, record.fs);
    std::map<int, std::size_t> per_frame;
    for (const pf::Cycle& c : cycles) ++per_frame[c.frame_id];
    std::vector<pf::FeatureVector> fvs;
    fvs.reserve(cycles.size());
    for (const pf::Cycle& c : cycles)
        fvs.push_back(pf::compute_features(c, record.ppg, sdppg, record.fs, per_frame[c.frame_id]));

    pf::FrameQualityPolicy quality;
    quality.frame_len_s = frame_len_s;
    std::set<int> rejected;
    for (const auto& [frame, ok] : pf::frame_quality_gate(record.ppg, record.fs, quality))
        if (!ok) rejected.insert(frame);
    return pf::assemble_samples(cycles, fvs, targets, T, rejected, 2, record.record_id);
}

void write_predictions_csv(const std::string& path, const std::vector<std::uint64_t>& ids,
                           const std::vector<double>& true_sbp, const std::vector<double>& true_dbp,
                           const std::vector<double>& pred_sbp,
                           const std::vector<double>& pred_dbp) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw pf::Error("IoFailure", "cannot open " + path + " for writing");
    out << "sample_id,true_sbp,true_dbp,pred_sbp,pred_dbp\n";
    for (std::size_t i = 0; i < ids.size(); ++i)
        out << ids[i] << ',' << fmt(true_sbp[i]) << ',' << fmt(true_dbp[i]) << ','
            << fmt(pred_sbp[i]) << ',' << fmt(pred_dbp[i]) << '\n';
    if (!out) throw pf::Error("IoFailure", "write failed for " + path);
}

// ---- subcommand bodies --------------------------------------------------

struct SynthArgs {
    double duration = 30.0, hr = 60.0, sbp = 120.0, dbp = 80.0;
    double notch = 0.4, noise = 0.0, drift = 0.0;
    std::string out;
};

void run_synth(const SynthArgs& a, std::uint64_t seed) {
    pf::SynthConfig sc;
    sc.duration_s = a.duration;
    sc.heart_rate_bpm = a.hr;
    sc.sbp_mmHg = a.sbp;
    sc.dbp_mmHg = a.dbp;
    sc.notch_depth = a.notch;
    sc.noise_std = a.noise;
    sc.baseline_drift_amp = a.drift;
    sc.seed = seed;
    pf::Record rec = pf::synthesize(sc);
    rec.record_id = std::filesystem::path(a.out).stem().string();
    pf::write_record(rec, a.out);
}

struct PreprocessArgs {
    std::string in, out, report;
    double min_duration = 900.0;
    double f_low = 0.7, f_high = 10.0;
    int order = 5;
    std::size_t maf_window = 5;
};

void run_preprocess(const PreprocessArgs& a, PipelineConfig cfg) {
    require_file(a.in);
    pf::Record rec = pf::read_record(a.in);
    cfg.cleaning.min_duration_s = a.min_duration;
    cfg.bandpass.order = a.order;
    cfg.bandpass.f_low = a.f_low;
    cfg.bandpass.f_high = a.f_high;
    cfg.bandpass.fs = rec.fs;
    pf::PreprocessResult result = pf::preprocess_chain(rec, cfg.cleaning, cfg.bandpass,
                                                       a.maf_window);
    json report;
    report["record_id"] = rec.record_id;
    report["rejected"] = result.clean.rejected;
    report["reason"] = result.clean.reason;
    json segs = json::array();
    for (const pf::Segment& s : result.clean.segments) segs.push_back({s.start, s.end});
    report["kept_segments"] = segs;
    const std::string report_path = a.report.empty() ? a.out + ".clean.json" : a.report;
    std::ofstream rout(report_path, std::ios::binary);
    rout << report.dump(2) << '\n';
    if (!rout) throw pf::Error("IoFailure", "write failed for " + report_path);
    if (result.clean.rejected)
        throw pf::Error("RecordRejected",
                        "record " + rec.record_id + " rejected: " + result.clean.reason);
    pf::write_record(result.record, a.out);
}

struct SegmentArgs {
    std::string in, out;
    double min_distance = 0.3, frame_len = 10.0, min_prominence = -1.0;
};

void run_segment(const SegmentArgs& a) {
    require_file(a.in);
    pf::Record rec = pf::read_record(a.in);
    const std::vector<double> sdppg = pf::second_derivative(rec.ppg, rec.fs);
    std::vector<pf::Cycle> cycles = pf::extract_cycles(rec.ppg, sdppg, rec.fs, a.min_distance,
                                                       a.min_prominence, a.frame_len);
    std::vector<std::pair<double, double>> targets;
    if (rec.abp) targets = pf::label_targets(*rec.abp, cycles);
    write_cycles(cycles, targets, a.out);
}

struct FeaturesArgs {
    std::string cycles, record, out, norm_out, format = "bin";
    double frame_len = 10.0;
    std::size_t T = pf::kFrameSeqLen;
};

void run_features(const FeaturesArgs& a) {
    require_file(a.record);
    pf::Record rec = pf::read_record(a.record);
    auto [cycles, targets] = read_cycles(a.cycles);
    std::vector<pf::FrameSample> samples =
        samples_from_record(rec, cycles, targets, a.frame_len, a.T);
    if (samples.empty())
        throw pf::Error("InsufficientData", "no complete frame windows in " + a.record);
    if (a.format == "csv")
        pf::save_dataset_csv(samples, a.out);
    else
        pf::save_dataset(samples, a.out);
    if (!a.norm_out.empty()) pf::save_norm_stats(pf::fit_norm_stats(samples), a.norm_out);
}

struct TrainArgs {
    std::string dataset, out_dir;
};

void run_train(const TrainArgs& a, const PipelineConfig& cfg) {
    require_file(a.dataset);
    std::vector<pf::FrameSample> samples = pf::load_dataset(a.dataset);
    std::vector<std::size_t> all(samples.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    pf::train_fold(samples, all, {}, cfg.model, cfg.train, 0, a.out_dir);
}

struct CvArgs {
    std::string dataset, out_dir;
};

void run_cv(const CvArgs& a, const PipelineConfig& cfg) {
    require_file(a.dataset);
    std::vector<pf::FrameSample> samples = pf::load_dataset(a.dataset);
    std::filesystem::create_directories(a.out_dir);
    pf::CvResult cv = pf::cross_validate(samples, cfg.model, cfg.train, a.out_dir);
    std::vector<std::uint64_t> ids;
    std::vector<double> ts, td, ps, pd;
    for (const pf::FoldResult& f : cv.folds)
        for (std::size_t i = 0; i < f.test_indices.size(); ++i) {
            const pf::FrameSample& s = samples[f.test_indices[i]];
            ids.push_back(s.sample_id);
            ts.push_back(s.sbp);
            td.push_back(s.dbp);
            ps.push_back(f.predictions[i][0]);
            pd.push_back(f.predictions[i][1]);
        }
    write_predictions_csv(a.out_dir + "/predictions.csv", ids, ts, td, ps, pd);
}

struct PredictArgs {
    std::string checkpoint, dataset, norm, out;
};

void run_predict(const PredictArgs& a) {
    require_file(a.checkpoint);
    require_file(a.dataset);
    require_file(a.norm);
    pf::ModelParams params = pf::load_params(a.checkpoint);
    std::vector<pf::FrameSample> samples = pf::load_dataset(a.dataset);
    const pf::NormStats stats = pf::load_norm_stats(a.norm);
    std::vector<pf::FrameSample> normalized = pf::apply_norm_stats(samples, stats);
    std::vector<std::array<double, 2>> preds = pf::predict(params, normalized);
    std::vector<std::uint64_t> ids;
    std::vector<double> ts, td, ps, pd;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        ids.push_back(samples[i].sample_id);
        ts.push_back(samples[i].sbp);
        td.push_back(samples[i].dbp);
        ps.push_back(preds[i][0]);
        pd.push_back(preds[i][1]);
    }
    write_predictions_csv(a.out, ids, ts, td, ps, pd);
}

struct EvaluateArgs {
    std::string predictions, out_dir;
};

void run_evaluate(const EvaluateArgs& a) {
    require_file(a.predictions);
    std::ifstream in(a.predictions);
    std::string line;
    if (!std::getline(in, line) || line != "sample_id,true_sbp,true_dbp,pred_sbp,pred_dbp")
        throw pf::Error("MalformedFile", "bad predictions header in " + a.predictions);
    std::vector<double> ts, td, ps, pd;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::array<std::string, 5> cols;
        std::size_t start = 0, col = 0;
        for (; col < 5; ++col) {
            const std::size_t comma = line.find(',', start);
            if (comma == std::string::npos && col < 4) break;
            cols[col] = line.substr(start, comma == std::string::npos ? std::string::npos
                                                                      : comma - start);
            start = comma + 1;
        }
        if (col != 5) throw pf::Error("MalformedFile", "bad predictions row: " + line);
        try {
            ts.push_back(std::stod(cols[1]));
            td.push_back(std::stod(cols[2]));
            ps.push_back(std::stod(cols[3]));
            pd.push_back(std::stod(cols[4]));
        } catch (const std::exception&) {
            throw pf::Error("MalformedFile", "non-numeric predictions row: " + line);
        }
    }
    if (ts.empty()) throw pf::Error("EmptyInput", "no prediction rows in " + a.predictions);
    pf::EvalReport report;
    report.sbp = pf::evaluate_channel(ts, ps, ts.size());
    report.dbp = pf::evaluate_channel(td, pd, td.size());
    pf::emit_report(report, a.out_dir);
}

struct PipelineArgs {
    bool synthetic = false;
    std::string in_dir, out_dir;
    std::size_t n_records = 20;
    double duration = 120.0;
};

void run_pipeline(const PipelineArgs& a, PipelineConfig cfg) {
    if (!a.synthetic && a.in_dir.empty())
        throw pf::Error("InvalidConfig", "pipeline needs --synthetic or --in-dir");
    std::filesystem::create_directories(a.out_dir + "/records");

    std::vector<pf::Record> records;
    if (a.synthetic) {
        // Cohort spanning the BP range, with pulse morphology (rate and
        // dicrotic depth) coupled to pressure so there is signal to learn.
        for (std::size_t i = 0; i < a.n_records; ++i) {
            const double frac = a.n_records > 1
                                    ? static_cast<double>(i) / static_cast<double>(a.n_records - 1)
                                    : 0.0;
            pf::SynthConfig sc;
            sc.duration_s = a.duration;
            sc.sbp_mmHg = 90.0 + 70.0 * frac;
            sc.dbp_mmHg = 60.0 + 40.0 * frac;
            sc.heart_rate_bpm = 50.0 + 70.0 * frac;
            sc.notch_depth = 0.2 + 0.2 * frac;
            sc.noise_std = 0.005;
            sc.seed = cfg.seed + i;
            pf::Record rec = pf::synthesize(sc);
            char name[32];
            std::snprintf(name, sizeof(name), "rec%03zu", i);
            rec.record_id = name;
            rec.subject_id = name;
            pf::write_record(rec, a.out_dir + "/records/" + name + ".csv");
            records.push_back(std::move(rec));
        }
    } else {
        require_file(a.in_dir);
        std::vector<std::string> paths;
        for (const auto& entry : std::filesystem::directory_iterator(a.in_dir))
            if (entry.path().extension() == ".csv") paths.push_back(entry.path().string());
        std::sort(paths.begin(), paths.end());
        if (paths.empty()) throw pf::Error("EmptyInput", "no record CSVs in " + a.in_dir);
        for (const std::string& p : paths) records.push_back(pf::read_record(p));
    }

    // Stage duration gate adapts to the cohort's record length.
    cfg.cleaning.min_duration_s = std::min(cfg.cleaning.min_duration_s, a.duration * 0.5);

    std::vector<pf::FrameSample> all_samples;
    json cleaning = json::array();
    for (const pf::Record& raw : records) {
        cfg.bandpass.fs = raw.fs;
        pf::PreprocessResult pp = pf::preprocess_chain(raw, cfg.cleaning, cfg.bandpass,
                                                       cfg.maf_window);
        json cr;
        cr["record_id"] = raw.record_id;
        cr["rejected"] = pp.clean.rejected;
        cr["reason"] = pp.clean.reason;
        cleaning.push_back(cr);
        if (pp.clean.rejected) continue;
        if (!pp.record.abp) throw pf::Error("MissingChannel", raw.record_id + " has no ABP");
        const std::vector<double> sdppg = pf::second_derivative(pp.record.ppg, pp.record.fs);
        std::vector<pf::Cycle> cycles =
            pf::extract_cycles(pp.record.ppg, sdppg, pp.record.fs, cfg.min_distance_s,
                               cfg.min_prominence, cfg.frame_len_s);
        std::vector<std::pair<double, double>> targets =
            pf::label_targets(*pp.record.abp, cycles);
        std::vector<pf::FrameSample> samples =
            samples_from_record(pp.record, cycles, targets, cfg.frame_len_s, cfg.model.T);
        all_samples.insert(all_samples.end(), samples.begin(), samples.end());
    }
    for (std::size_t i = 0; i < all_samples.size(); ++i) all_samples[i].sample_id = i;
    if (all_samples.size() < cfg.train.folds)
        throw pf::Error("InsufficientData", "cohort yielded too few samples for CV");

    std::ofstream cout_(a.out_dir + "/cleaning_report.json", std::ios::binary);
    cout_ << cleaning.dump(2) << '\n';
    if (!cout_) throw pf::Error("IoFailure", "write failed for cleaning_report.json");

    pf::save_dataset(all_samples, a.out_dir + "/dataset.bin");

    pf::TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    pf::CvResult cv = pf::cross_validate(all_samples, cfg.model, tc, a.out_dir);
    pf::emit_report(cv.pooled, a.out_dir);

    std::vector<std::uint64_t> ids;
    std::vector<double> ts, td, ps, pd;
    for (const pf::FoldResult& f : cv.folds)
        for (std::size_t i = 0; i < f.test_indices.size(); ++i) {
            const pf::FrameSample& s = all_samples[f.test_indices[i]];
            ids.push_back(s.sample_id);
            ts.push_back(s.sbp);
            td.push_back(s.dbp);
            ps.push_back(f.predictions[i][0]);
            pd.push_back(f.predictions[i][1]);
        }
    write_predictions_csv(a.out_dir + "/predictions.csv", ids, ts, td, ps, pd);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pulseforge: PPG-to-blood-pressure estimation toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::uint64_t seed = 0;
    bool verbose = false;
    app.add_option("--config", config_path, "JSON configuration file (flags override)");
    auto* seed_opt = app.add_option("--seed", seed, "master random seed")->capture_default_str();
    app.add_flag("--verbose", verbose, "chatty progress output");

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "generate a synthetic PPG/ABP record");
    synth->add_option("--duration", synth_args.duration, "record length, seconds")
        ->capture_default_str();
    synth->add_option("--hr", synth_args.hr, "heart rate, bpm")->capture_default_str();
    synth->add_option("--sbp", synth_args.sbp, "systolic pressure, mmHg")->capture_default_str();
    synth->add_option("--dbp", synth_args.dbp, "diastolic pressure, mmHg")->capture_default_str();
    synth->add_option("--notch", synth_args.notch, "dicrotic lobe relative amplitude")
        ->capture_default_str();
    synth->add_option("--noise", synth_args.noise, "additive Gaussian noise sigma")
        ->capture_default_str();
    synth->add_option("--drift", synth_args.drift, "baseline drift amplitude")
        ->capture_default_str();
    synth->add_option("--out", synth_args.out, "output record CSV path")->required();

    PreprocessArgs pp_args;
    auto* preprocess = app.add_subcommand("preprocess", "clean and filter a record");
    preprocess->add_option("--in", pp_args.in, "input record CSV")->required();
    preprocess->add_option("--out", pp_args.out, "output record CSV")->required();
    preprocess->add_option("--report", pp_args.report,
                           "cleaning report JSON path (default: <out>.clean.json)");
    preprocess->add_option("--min-duration", pp_args.min_duration, "minimum usable length, seconds")
        ->capture_default_str();
    preprocess->add_option("--f-low", pp_args.f_low, "bandpass low cutoff, Hz")
        ->capture_default_str();
    preprocess->add_option("--f-high", pp_args.f_high, "bandpass high cutoff, Hz")
        ->capture_default_str();
    preprocess->add_option("--order", pp_args.order, "Butterworth order")->capture_default_str();
    preprocess->add_option("--maf-window", pp_args.maf_window, "moving-average window, samples")
        ->capture_default_str();

    SegmentArgs seg_args;
    auto* segment = app.add_subcommand("segment", "extract cardiac cycles");
    segment->add_option("--in", seg_args.in, "input record CSV")->required();
    segment->add_option("--out", seg_args.out, "output cycles.json path")->required();
    segment->add_option("--min-distance", seg_args.min_distance, "minimum peak spacing, seconds")
        ->capture_default_str();
    segment->add_option("--frame-len", seg_args.frame_len, "frame length, seconds")
        ->capture_default_str();
    segment
        ->add_option("--min-prominence", seg_args.min_prominence,
                     "peak prominence threshold (< 0: 10% of signal range)")
        ->capture_default_str();

    FeaturesArgs feat_args;
    auto* features = app.add_subcommand("features", "compute per-cycle features and samples");
    features->add_option("--cycles", feat_args.cycles, "cycles.json from `segment`")->required();
    features->add_option("--record", feat_args.record, "preprocessed record CSV")->required();
    features->add_option("--out", feat_args.out, "output dataset path")->required();
    features->add_option("--format", feat_args.format, "output format: bin | csv")
        ->check(CLI::IsMember({"bin", "csv"}))
        ->capture_default_str();
    features->add_option("--norm-out", feat_args.norm_out, "optional NormStats JSON output");
    features->add_option("--frame-len", feat_args.frame_len, "frame length, seconds")
        ->capture_default_str();
    features->add_option("-T,--seq-len", feat_args.T, "cycles per sample window")
        ->capture_default_str();

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "train on a full dataset");
    train->add_option("--dataset", train_args.dataset, "dataset.bin path")->required();
    train->add_option("--out-dir", train_args.out_dir, "output directory")->required();

    CvArgs cv_args;
    auto* cv = app.add_subcommand("cv", "k-fold cross-validation training");
    cv->add_option("--dataset", cv_args.dataset, "dataset.bin path")->required();
    cv->add_option("--out-dir", cv_args.out_dir, "output directory")->required();

    // train/cv hyperparameter flags (override the config file)
    std::size_t folds = 5, epochs = 400, batch = 128;
    double lr = 1e-4, dropout_p = 0.15, wd_max = 1e-4;
    std::vector<CLI::Option*> hyper_opts;
    for (CLI::App* sub : {train, cv}) {
        hyper_opts.push_back(
            sub->add_option("--folds", folds, "number of CV folds")->capture_default_str());
        hyper_opts.push_back(
            sub->add_option("--epochs", epochs, "training epochs")->capture_default_str());
        hyper_opts.push_back(
            sub->add_option("--batch", batch, "mini-batch size")->capture_default_str());
        hyper_opts.push_back(sub->add_option("--lr", lr, "learning rate")->capture_default_str());
        hyper_opts.push_back(
            sub->add_option("--dropout", dropout_p, "dropout probability")->capture_default_str());
        hyper_opts.push_back(sub->add_option("--wd-max", wd_max, "peak weight decay")
                                 ->capture_default_str());
    }

    PredictArgs pred_args;
    auto* predict = app.add_subcommand("predict", "run a checkpoint over a dataset");
    predict->add_option("--checkpoint", pred_args.checkpoint, "model checkpoint path")->required();
    predict->add_option("--dataset", pred_args.dataset, "dataset.bin path")->required();
    predict->add_option("--norm", pred_args.norm, "NormStats JSON from training")->required();
    predict->add_option("--out", pred_args.out, "predictions CSV path")->required();

    EvaluateArgs eval_args;
    auto* evaluate = app.add_subcommand("evaluate", "score predictions against targets");
    evaluate->add_option("--predictions", eval_args.predictions, "predictions CSV")->required();
    evaluate->add_option("--out-dir", eval_args.out_dir, "report output directory")->required();

    PipelineArgs pipe_args;
    auto* pipeline = app.add_subcommand("pipeline", "end-to-end synth/ingest -> report");
    pipeline->add_flag("--synthetic", pipe_args.synthetic, "generate a synthetic cohort");
    pipeline->add_option("--in-dir", pipe_args.in_dir, "directory of record CSVs to ingest");
    pipeline->add_option("--out-dir", pipe_args.out_dir, "output directory")->required();
    pipeline->add_option("--records", pipe_args.n_records, "synthetic cohort size")
        ->capture_default_str();
    pipeline->add_option("--duration", pipe_args.duration, "synthetic record length, seconds")
        ->capture_default_str();
    auto* pipe_epochs =
        pipeline->add_option("--epochs", epochs, "training epochs")->capture_default_str();
    auto* pipe_folds =
        pipeline->add_option("--folds", folds, "number of CV folds")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        return emit_error(2, e.get_name(), e.what());
    }

    try {
        PipelineConfig cfg = load_config(config_path);
        if (!seed_opt->empty()) cfg.seed = seed;
        cfg.train.seed = cfg.seed;
        if (verbose) std::cerr << "pulseforge: seed " << cfg.seed << '\n';

        auto apply_hyper = [&](CLI::App* sub) {
            if (sub->count("--folds")) cfg.train.folds = folds;
            if (sub->count("--epochs")) cfg.train.epochs = epochs;
            if (sub->count("--batch")) cfg.train.batch_size = batch;
            if (sub->count("--lr")) cfg.train.lr = lr;
            if (sub->count("--dropout")) cfg.train.dropout_p = dropout_p;
            if (sub->count("--wd-max")) cfg.train.wd_max = wd_max;
        };

        if (synth->parsed()) {
            run_synth(synth_args, cfg.seed);
        } else if (preprocess->parsed()) {
            run_preprocess(pp_args, cfg);
        } else if (segment->parsed()) {
            run_segment(seg_args);
        } else if (features->parsed()) {
            run_features(feat_args);
        } else if (train->parsed()) {
            apply_hyper(train);
            run_train(train_args, cfg);
        } else if (cv->parsed()) {
            apply_hyper(cv);
            run_cv(cv_args, cfg);
        } else if (predict->parsed()) {
            run_predict(pred_args);
        } else if (evaluate->parsed()) {
            run_evaluate(eval_args);
        } else if (pipeline->parsed()) {
            // scaled-down defaults so the end-to-end run stays desk-sized
            if (!pipe_epochs->count()) epochs = 40;
            if (!pipe_folds->count()) folds = 5;
            cfg.train.epochs = epochs;
            cfg.train.folds = folds;
            run_pipeline(pipe_args, cfg);
        }
    } catch (const pf::Error& e) {
        const std::string msg = std::string(e.what()).substr(e.code().size() + 2);
        return emit_error(exit_class(e.code()), e.code(), msg,
                          e.code() == "FileNotFound" ? msg : "");
    } catch (const std::exception& e) {
        return emit_error(3, "Unhandled", e.what());
    }
    return 0;
}
