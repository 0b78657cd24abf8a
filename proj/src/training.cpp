#include "pulseforge/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>

#include <json.hpp>

namespace pulseforge {

namespace {

using nlohmann::json;

constexpr std::uint64_t kFoldSeedSalt = 0x9e3779b97f4a7c15ULL;

// Packs the listed samples into an N x T x L batch and an N x 2 target tensor.
std::pair<tg::Tensor, tg::Tensor> pack_batch(const std::vector<FrameSample>& samples,
                                             const std::vector<std::size_t>& indices,
                                             std::size_t begin, std::size_t end) {
    const std::size_t n = end - begin;
    const std::size_t T = samples[indices[begin]].T;
    std::vector<double> x(n * T * kFeatureCount);
    std::vector<double> y(n * 2);
    for (std::size_t i = 0; i < n; ++i) {
        const FrameSample& s = samples[indices[begin + i]];
        std::copy(s.features.begin(), s.features.end(), x.begin() + i * T * kFeatureCount);
        y[2 * i] = s.sbp;
        y[2 * i + 1] = s.dbp;
    }
    return {tg::Tensor::from_data(std::move(x), {n, T, kFeatureCount}),
            tg::Tensor::from_data(std::move(y), {n, 2})};
}

double eval_mse(const ModelParams& params, const std::vector<FrameSample>& samples,
                const std::vector<std::size_t>& indices) {
    if (indices.empty()) return 0.0;
    double se = 0.0;
    // evaluate in slices so the graph stays small
    const std::size_t chunk = 256;
    for (std::size_t b = 0; b < indices.size(); b += chunk) {
        const std::size_t e = std::min(b + chunk, indices.size());
        auto [x, y] = pack_batch(samples, indices, b, e);
        tg::Tensor out = forward(x, params, Mode::kEval);
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double d = out.data()[i] - y.data()[i];
            se += d * d;
        }
    }
    return se / (static_cast<double>(indices.size()) * 2.0);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void TrainConfig::validate() const {
    if (batch_size == 0) throw Error("InvalidConfig", "batch_size must be positive");
    if (epochs == 0) throw Error("InvalidConfig", "epochs must be positive");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw Error("InvalidConfig", "lr must be positive");
    if (dropout_p < 0.0 || dropout_p >= 1.0)
        throw Error("InvalidConfig", "dropout_p must be in [0, 1)");
    if (folds < 2) throw Error("InvalidConfig", "folds must be >= 2");
    if (wd_max < 0.0 || !std::isfinite(wd_max))
        throw Error("InvalidConfig", "wd_max must be non-negative");
    if (early_stop_patience && *early_stop_patience == 0)
        throw Error("InvalidConfig", "early_stop_patience must be positive when set");
}

std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> make_folds(
    std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw Error("InvalidConfig", "folds must be >= 2");
    if (n < k) throw Error("InsufficientData", "need at least one sample per fold");
    Rng rng(seed);
    const std::vector<std::size_t> order = rng.permutation(n);

    std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> folds(k);
    std::size_t offset = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t len = n / k + (f < n % k ? 1 : 0);
        auto& [train, test] = folds[f];
        test.assign(order.begin() + offset, order.begin() + offset + len);
        train.reserve(n - len);
        train.insert(train.end(), order.begin(), order.begin() + offset);
        train.insert(train.end(), order.begin() + offset + len, order.end());
        offset += len;
    }
    return folds;
}

std::vector<std::array<double, 2>> predict(const ModelParams& params,
                                           const std::vector<FrameSample>& normalized) {
    std::vector<std::array<double, 2>> out;
    out.reserve(normalized.size());
    std::vector<std::size_t> indices(normalized.size());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    const std::size_t chunk = 256;
    for (std::size_t b = 0; b < indices.size(); b += chunk) {
        const std::size_t e = std::min(b + chunk, indices.size());
        auto [x, y] = pack_batch(normalized, indices, b, e);
        tg::Tensor pred = forward(x, params, Mode::kEval);
        for (std::size_t i = b; i < e; ++i)
            out.push_back({pred.data()[2 * (i - b)], pred.data()[2 * (i - b) + 1]});
    }
    return out;
}

FoldResult train_fold(const std::vector<FrameSample>& samples,
                      const std::vector<std::size_t>& train_indices,
                      const std::vector<std::size_t>& test_indices,
                      const ModelConfig& model_config, const TrainConfig& train_config,
                      std::size_t fold_id, const std::string& out_dir) {
    model_config.validate();
    train_config.validate();
    if (train_indices.empty()) throw Error("InsufficientData", "empty training split");

    FoldResult result;
    result.fold_id = fold_id;
    result.train_indices = train_indices;
    result.test_indices = test_indices;

    std::vector<FrameSample> train_raw;
    train_raw.reserve(train_indices.size());
    for (std::size_t i : train_indices) train_raw.push_back(samples[i]);
    result.norm_stats = fit_norm_stats(train_raw);
    const std::vector<FrameSample> normalized = apply_norm_stats(samples, result.norm_stats);

    Rng rng(train_config.seed ^ (kFoldSeedSalt * (fold_id + 1)));
    Rng init_rng = rng.split();
    Rng shuffle_rng = rng.split();
    Rng dropout_rng = rng.split();

    ModelConfig config = model_config;
    config.dropout_p = train_config.dropout_p;
    ModelParams params = init_params(config, init_rng);
    std::vector<tg::Tensor> trainable = params.all();

    tg::AdamState opt;
    opt.lr = train_config.lr;

    double initial_loss = -1.0;
    std::size_t high_loss_streak = 0;
    double best_test = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    for (std::size_t epoch = 0; epoch < train_config.epochs; ++epoch) {
        opt.weight_decay =
            train_config.wd_max * 0.5 *
            (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) /
                            static_cast<double>(train_config.epochs)));

        std::vector<std::size_t> order = shuffle_rng.permutation(train_indices.size());
        for (std::size_t& o : order) o = train_indices[o];

        double epoch_se = 0.0;
        for (std::size_t b = 0; b < order.size(); b += train_config.batch_size) {
            const std::size_t e = std::min(b + train_config.batch_size, order.size());
            auto [x, y] = pack_batch(normalized, order, b, e);
            tg::Tensor out = forward(x, params, Mode::kTrain, &dropout_rng);
            tg::Tensor loss = tg::mse_loss(out, y);
            epoch_se += loss.item() * static_cast<double>((e - b) * 2);

            for (tg::Tensor& p : trainable) p.zero_grad();
            tg::backward(loss);
            tg::adam_step(opt, trainable);
        }
        const double train_mse =
            epoch_se / (static_cast<double>(train_indices.size()) * 2.0);
        const double test_mse = eval_mse(params, normalized, test_indices);
        result.loss_curve.push_back({epoch, train_mse, test_mse});

        if (!std::isfinite(train_mse))
            throw Error("NumericDivergence", "non-finite training loss at epoch " +
                                                 std::to_string(epoch));
        if (initial_loss < 0.0) initial_loss = train_mse;
        if (train_mse > 10.0 * initial_loss)
            ++high_loss_streak;
        else
            high_loss_streak = 0;
        if (high_loss_streak >= 20)
            throw Error("NumericDivergence",
                        "loss exceeded 10x the initial value for 20 consecutive epochs");

        if (!test_indices.empty() && train_config.early_stop_patience) {
            if (test_mse < best_test) {
                best_test = test_mse;
                since_best = 0;
            } else if (++since_best >= *train_config.early_stop_patience) {
                break;
            }
        }
    }

    if (!test_indices.empty()) {
        std::vector<FrameSample> test_norm;
        test_norm.reserve(test_indices.size());
        for (std::size_t i : test_indices) test_norm.push_back(normalized[i]);
        result.predictions = predict(params, test_norm);
        std::vector<double> sbp_t, sbp_p, dbp_t, dbp_p;
        for (std::size_t i = 0; i < test_indices.size(); ++i) {
            sbp_t.push_back(samples[test_indices[i]].sbp);
            dbp_t.push_back(samples[test_indices[i]].dbp);
            sbp_p.push_back(result.predictions[i][0]);
            dbp_p.push_back(result.predictions[i][1]);
        }
        result.sbp = evaluate_channel(sbp_t, sbp_p, test_indices.size());
        result.dbp = evaluate_channel(dbp_t, dbp_p, test_indices.size());
    }

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        const std::string prefix = out_dir + "/fold" + std::to_string(fold_id);
        result.final_params_path = prefix + ".pfck";
        save_params(params, result.final_params_path);
        save_norm_stats(result.norm_stats, prefix + "_norm.json");

        std::ofstream curve(prefix + "_loss_curve.csv", std::ios::binary);
        if (!curve) throw Error("IoFailure", "cannot write loss curve for fold " +
                                                 std::to_string(fold_id));
        curve << "epoch,train_mse,test_mse\n";
        for (const EpochLoss& l : result.loss_curve)
            curve << l.epoch << ',' << fmt(l.train_mse) << ',' << fmt(l.test_mse) << '\n';

        json j;
        j["fold_id"] = fold_id;
        j["seed"] = train_config.seed;
        j["train_size"] = train_indices.size();
        j["test_size"] = test_indices.size();
        j["epochs_run"] = result.loss_curve.size();
        j["final_train_mse"] = result.loss_curve.back().train_mse;
        j["final_test_mse"] = result.loss_curve.back().test_mse;
        if (!test_indices.empty()) {
            j["sbp"] = {{"me", result.sbp.metrics.me},
                        {"mae", result.sbp.metrics.mae},
                        {"rmse", result.sbp.metrics.rmse},
                        {"std", result.sbp.metrics.std},
                        {"r2", result.sbp.metrics.r2}};
            j["dbp"] = {{"me", result.dbp.metrics.me},
                        {"mae", result.dbp.metrics.mae},
                        {"rmse", result.dbp.metrics.rmse},
                        {"std", result.dbp.metrics.std},
                        {"r2", result.dbp.metrics.r2}};
        }
        std::ofstream report(prefix + "_report.json", std::ios::binary);
        report << j.dump(2) << '\n';
        if (!report) throw Error("IoFailure", "cannot write fold report");
    }
    return result;
}

CvResult cross_validate(const std::vector<FrameSample>& samples, const ModelConfig& model_config,
                        const TrainConfig& train_config, const std::string& out_dir) {
    train_config.validate();
    CvResult cv;
    const auto folds = make_folds(samples.size(), train_config.folds, train_config.seed);

    std::vector<double> sbp_t, sbp_p, dbp_t, dbp_p;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        FoldResult fr = train_fold(samples, folds[f].first, folds[f].second, model_config,
                                   train_config, f, out_dir);
        for (std::size_t i = 0; i < fr.test_indices.size(); ++i) {
            sbp_t.push_back(samples[fr.test_indices[i]].sbp);
            dbp_t.push_back(samples[fr.test_indices[i]].dbp);
            sbp_p.push_back(fr.predictions[i][0]);
            dbp_p.push_back(fr.predictions[i][1]);
        }
        cv.mean_sbp.r2 += fr.sbp.metrics.r2;
        cv.mean_sbp.me += fr.sbp.metrics.me;
        cv.mean_sbp.mae += fr.sbp.metrics.mae;
        cv.mean_sbp.rmse += fr.sbp.metrics.rmse;
        cv.mean_sbp.std += fr.sbp.metrics.std;
        cv.mean_dbp.r2 += fr.dbp.metrics.r2;
        cv.mean_dbp.me += fr.dbp.metrics.me;
        cv.mean_dbp.mae += fr.dbp.metrics.mae;
        cv.mean_dbp.rmse += fr.dbp.metrics.rmse;
        cv.mean_dbp.std += fr.dbp.metrics.std;
        cv.folds.push_back(std::move(fr));
    }
    const double k = static_cast<double>(folds.size());
    for (Metrics* m : {&cv.mean_sbp, &cv.mean_dbp}) {
        m->r2 /= k;
        m->me /= k;
        m->mae /= k;
        m->rmse /= k;
        m->std /= k;
    }
    cv.pooled.sbp = evaluate_channel(sbp_t, sbp_p, sbp_t.size());
    cv.pooled.dbp = evaluate_channel(dbp_t, dbp_p, dbp_t.size());

    if (!out_dir.empty()) {
        emit_report(cv.pooled, out_dir);
        json j;
        j["folds"] = folds.size();
        j["seed"] = train_config.seed;
        j["mean_sbp"] = {{"r2", cv.mean_sbp.r2},
                         {"me", cv.mean_sbp.me},
                         {"mae", cv.mean_sbp.mae},
                         {"rmse", cv.mean_sbp.rmse},
                         {"std", cv.mean_sbp.std}};
        j["mean_dbp"] = {{"r2", cv.mean_dbp.r2},
                         {"me", cv.mean_dbp.me},
                         {"mae", cv.mean_dbp.mae},
                         {"rmse", cv.mean_dbp.rmse},
                         {"std", cv.mean_dbp.std}};
        std::ofstream out(out_dir + "/cv_summary.json", std::ios::binary);
        out << j.dump(2) << '\n';
        if (!out) throw Error("IoFailure", "cannot write cv_summary.json");
    }
    return cv;
}

}  // namespace pulseforge
