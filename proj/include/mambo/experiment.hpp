#pragma once

#include "mambo/config.hpp"
#include "mambo/scoring.hpp"

#include <string>
#include <vector>

namespace mambo {

// Class word embeddings such that a hidden ideal context maps class m to
// targets.row(m) through the encoder, while near-zero context lands
// `misalignment` away from it in pre-activation space.
Mat derive_class_words(const FrozenTextEncoder& encoder, const Mat& targets, int context_len, double misalignment,
                       double sharpness, std::uint64_t seed);

struct World {
    FrozenTextEncoder encoder;
    Mat class_words;
    Dataset train;
    Dataset id_test;
    Dataset ood_test;
    std::optional<Vec> background_init;  // from a dump, when it carries one
};

// Synthetic world for `seed`, or the dumps named in the config.
World build_world(const ExperimentConfig& cfg, std::uint64_t seed);
FrozenTextEncoder build_encoder(const ExperimentConfig& cfg, std::uint64_t seed);
PromptSet initial_prompt(const ExperimentConfig& cfg, const World& world, std::uint64_t seed);

std::vector<AllScores> score_dataset(const Dataset& data, const Mat& class_features, const Vec& background_feature,
                                     const ModelConfig& mc);

// Mean IoU between extracted background and ground-truth masks on labelled, masked samples.
double mean_extraction_iou(const Dataset& data, const PromptSet& prompt, const FrozenTextEncoder& encoder,
                           const ModelConfig& mc, const TrainConfig& tc);

StrategyFlags strategy_flags(const std::string& name);

struct CellResult {
    std::string strategy;
    std::uint64_t seed = 0;
    double fpr95 = 0.0;
    double auroc = 0.0;
    double iou_train = 0.0;
    double iou_test = 0.0;
    double auroc_mcm = 0.0;
    double auroc_glmcm = 0.0;
    double auroc_rmcm = 0.0;
};

CellResult run_cell(const ExperimentConfig& cfg, const std::string& strategy, std::uint64_t seed);

struct Summary {
    double mean = 0.0;
    double std = 0.0;
};
Summary summarize(const std::vector<double>& xs);

struct BenchmarkRow {
    std::string strategy;
    Summary fpr95, auroc, iou_train, iou_test;
};

struct BenchmarkResult {
    std::vector<CellResult> cells;  // strategy-major, seeds in config order
    std::vector<BenchmarkRow> rows;
};

BenchmarkResult run_benchmark(const ExperimentConfig& cfg);
std::string format_benchmark(const BenchmarkResult& r, const std::string& score);

// The defaults used by the bundled benchmark.
ExperimentConfig default_benchmark_config();

}  // namespace mambo
