#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mambo {

using Vec = Eigen::VectorXd;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DegenerateVectorError : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
struct IndexError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct InvariantError : Error { using Error::Error; };

// Data errors; the dump reader raises one subclass per failure kind.
struct DataError : Error { using Error::Error; };
struct BadMagicError : DataError { using DataError::DataError; };
struct VersionMismatchError : DataError { using DataError::DataError; };
struct TruncatedFileError : DataError { using DataError::DataError; };
struct NormViolationError : DataError { using DataError::DataError; };
struct StructuralError : DataError { using DataError::DataError; };

struct ModelConfig {
    int d = 32;
    int M = 8;
    int H = 4;
    int W = 4;
    int N = 16;
    int L = 64;
    double tau = 0.01;
    double tau_test = 1.0;
    double lambda = 0.2;
    double alpha = 1.0;
    int K = 4;
    int q = 10;
    std::uint64_t seed = 0;

    int patches() const { return H * W; }
    void validate() const;
};

struct FeatureBundle {
    Vec global;
    Mat local;  // H*W rows, row-major patch order
    std::optional<int> label;
    std::optional<std::vector<bool>> background_mask;

    void validate(int d, int patches, double tol = 1e-6) const;
};

using Dataset = std::vector<FeatureBundle>;

struct PromptSet {
    Mat context;      // N x d
    Mat class_words;  // M x d, frozen
    Mat background;   // L x d

    static PromptSet initialize(const ModelConfig& cfg, const Mat& class_words, std::uint64_t seed,
                                double init_std = 0.02);
};

struct SimilarityMaps {
    Mat class_sim;       // patches x M
    Vec background_sim;  // patches
    Vec refined_sim;     // equals background_sim until refined
    double p = 0.0;
};

enum class ExtractionStrategy { topk, sct };

struct BackgroundSet {
    std::vector<int> indices;  // ascending
    std::optional<double> threshold;
    ExtractionStrategy strategy = ExtractionStrategy::topk;

    bool contains(int i) const;
};

struct DetectionReport {
    std::vector<double> id_scores;
    std::vector<double> ood_scores;
    double gamma = 0.0;
    double fpr95 = 0.0;
    double auroc = 0.0;
};

Vec normalize(const Vec& v);

// Stable softmax of x / tau.
Vec softmax(const Vec& x, double tau);

const char* to_string(ExtractionStrategy s);

}  // namespace mambo
