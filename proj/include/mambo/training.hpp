#pragma once

#include "mambo/bgdecomp.hpp"
#include "mambo/core.hpp"
#include "mambo/encoders.hpp"

#include <optional>
#include <string>

namespace mambo {

inline constexpr double kProbFloor = 1e-12;

struct StrategyFlags {
    bool use_refinement = true;
    bool use_patch_sct = true;
    bool use_loss_modulation = true;

    // Top-K extraction is used only when neither thresholded variant is on.
    bool uses_topk() const { return !use_refinement && !use_patch_sct; }
};

StrategyFlags full_flags();
StrategyFlags locoop_flags();

struct TrainConfig {
    int epochs = 30;
    double learning_rate = 0.002;
    int batch_size = 32;
    int shots = 4;
    StrategyFlags flags;
    double lambda = 0.2;
    double alpha = 1.0;
    int K = 4;
    bool grad_through_p = false;  // differentiate the modulation factor
    int threads = 1;

    void validate() const;
};

// Floor hits for probabilities clamped inside logarithms.
struct FloorCounts {
    std::size_t ce = 0;
    std::size_t entropy = 0;
    FloorCounts& operator+=(const FloorCounts& o) {
        ce += o.ce;
        entropy += o.entropy;
        return *this;
    }
};

double ce_loss(const Vec& probs, int label, FloorCounts* floors = nullptr);

// Mean over J of sum_c q log q; zero for empty J.
double ood_loss(const Mat& patch_probs, const BackgroundSet& J, FloorCounts* floors = nullptr);

struct SampleLoss {
    double ce = 0.0;
    double ood = 0.0;
    double p = 0.0;
};

double sample_objective(const SampleLoss& s, double lambda, bool modulation);
double total_loss(const std::vector<SampleLoss>& batch, double lambda, bool modulation);

// Selection state that can be pinned, e.g. for finite-difference checks.
struct FrozenSelection {
    BackgroundSet J;
    std::optional<double> p;
};

struct SampleForward {
    int label = 0;
    Vec global_probs;
    SimilarityMaps maps;
    Mat patch_probs;
    Vec delta;  // empty unless refinement ran
    BackgroundSet J;
    SampleLoss loss;
    FloorCounts floors;
};

SampleForward forward_sample(const FeatureBundle& bundle, const Mat& class_features, const Vec& background_feature,
                             double tau, const TrainConfig& tc, const FrozenSelection* frozen = nullptr);

// d(scale * per-sample objective)/d(class features), M x d.
Mat sample_feature_grad(const SampleForward& fw, const FeatureBundle& bundle, const Mat& class_features, double tau,
                        const TrainConfig& tc, double scale);

struct BatchResult {
    double loss = 0.0;
    std::vector<SampleForward> samples;
    PromptGrad grad;
    FloorCounts floors;
};

BatchResult batch_loss_and_grad(const PromptSet& prompt, const FrozenTextEncoder& encoder, const Dataset& data,
                                const std::vector<int>& batch, double tau, const TrainConfig& tc,
                                const std::vector<FrozenSelection>* frozen = nullptr, bool with_grad = true);

struct EpochRecord {
    int epoch = 0;
    double loss = 0.0;
    double ce = 0.0;
    double ood = 0.0;
    double mean_bg_fraction = 0.0;
};

struct TrainResult {
    PromptSet prompt;
    std::vector<EpochRecord> trace;
    FloorCounts floors;
    int steps = 0;
};

TrainResult train(const Dataset& data, const ModelConfig& mc, const TrainConfig& tc, const FrozenTextEncoder& encoder,
                  const PromptSet& init);

void sgd_step(PromptSet& prompt, const PromptGrad& grad, double lr);

}  // namespace mambo
