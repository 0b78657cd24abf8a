#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pulseforge/evaluation.hpp"
#include "pulseforge/features.hpp"
#include "pulseforge/model.hpp"

namespace pulseforge {

struct TrainConfig {
    std::size_t batch_size = 128;
    std::size_t epochs = 400;
    double lr = 1e-4;
    double dropout_p = 0.15;
    std::uint64_t seed = 0;
    std::size_t folds = 5;
    double wd_max = 1e-4;  // cosine-scheduled decoupled weight decay, wd_max -> 0
    std::optional<std::size_t> early_stop_patience;

    void validate() const;
};

struct EpochLoss {
    std::size_t epoch = 0;
    double train_mse = 0;
    double test_mse = 0;
};

struct FoldResult {
    std::size_t fold_id = 0;
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;
    std::vector<EpochLoss> loss_curve;
    NormStats norm_stats;
    std::string final_params_path;  // empty when not persisted
    // test-split predictions aligned with test_indices
    std::vector<std::array<double, 2>> predictions;
    ChannelReport sbp;
    ChannelReport dbp;
};

struct CvResult {
    std::vector<FoldResult> folds;
    Metrics mean_sbp;  // arithmetic mean of per-fold metrics
    Metrics mean_dbp;
    EvalReport pooled;  // every sample evaluated in its test fold
};

// One global seeded shuffle; fold i's test set is the i-th contiguous
// chunk (remainder samples go to the earliest folds).
std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> make_folds(
    std::size_t n, std::size_t k, std::uint64_t seed);

// Eval-mode predictions for already-normalized samples.
std::vector<std::array<double, 2>> predict(const ModelParams& params,
                                           const std::vector<FrameSample>& normalized);

// Trains one fold: normalization stats from the training split only,
// shuffled mini-batches, Adam with the cosine weight-decay schedule.
// out_dir may be empty to skip persistence.
FoldResult train_fold(const std::vector<FrameSample>& samples,
                      const std::vector<std::size_t>& train_indices,
                      const std::vector<std::size_t>& test_indices,
                      const ModelConfig& model_config, const TrainConfig& train_config,
                      std::size_t fold_id = 0, const std::string& out_dir = "");

CvResult cross_validate(const std::vector<FrameSample>& samples, const ModelConfig& model_config,
                        const TrainConfig& train_config, const std::string& out_dir = "");

}  // namespace pulseforge
