#include "mambo/core.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace mambo {

void ModelConfig::validate() const {
    auto need = [](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError(msg);
    };
    need(d >= 1, "d must be >= 1");
    need(M >= 1, "num_classes must be >= 1");
    need(H >= 1 && W >= 1, "grid dimensions must be >= 1");
    need(N >= 1, "context_len must be >= 1");
    need(L >= 1, "background_len must be >= 1");
    need(std::isfinite(tau) && tau > 0, "tau must be > 0");
    need(std::isfinite(tau_test) && tau_test > 0, "tau_test must be > 0");
    need(std::isfinite(lambda) && lambda >= 0, "lambda must be >= 0");
    need(std::isfinite(alpha) && alpha >= 0, "alpha must be >= 0");
    need(K >= 0 && K < patches(), "topk must satisfy 0 <= K < H*W");
    need(q >= 1 && q <= patches(), "rmcm_q must satisfy 1 <= q <= H*W");
}

void FeatureBundle::validate(int d, int patches, double tol) const {
    if (global.size() != d) throw ShapeError("global feature has wrong dimension");
    if (local.rows() != patches || local.cols() != d)
        throw ShapeError("local features must be H*W x d");
    if (std::abs(global.norm() - 1.0) > tol) throw InvariantError("global feature is not unit-norm");
    for (int i = 0; i < patches; ++i)
        if (std::abs(local.row(i).norm() - 1.0) > tol)
            throw InvariantError("local feature " + std::to_string(i) + " is not unit-norm");
    if (background_mask && static_cast<int>(background_mask->size()) != patches)
        throw ShapeError("background mask must have H*W entries");
}

PromptSet PromptSet::initialize(const ModelConfig& cfg, const Mat& class_words, std::uint64_t seed,
                                double init_std) {
    if (class_words.rows() != cfg.M || class_words.cols() != cfg.d)
        throw ShapeError("class word embeddings must be M x d");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, init_std);
    PromptSet ps;
    ps.context.resize(cfg.N, cfg.d);
    ps.background.resize(cfg.L, cfg.d);
    for (Eigen::Index i = 0; i < ps.context.size(); ++i) ps.context.data()[i] = nd(rng);
    for (Eigen::Index i = 0; i < ps.background.size(); ++i) ps.background.data()[i] = nd(rng);
    ps.class_words = class_words;
    return ps;
}

bool BackgroundSet::contains(int i) const {
    return std::binary_search(indices.begin(), indices.end(), i);
}

Vec normalize(const Vec& v) {
    if (!v.allFinite()) throw DegenerateVectorError("cannot normalize a non-finite vector");
    const double n = v.norm();
    if (!(n > 1e-12)) throw DegenerateVectorError("cannot normalize a zero-norm vector");
    return v / n;
}

Vec softmax(const Vec& x, double tau) {
    if (!(tau > 0)) throw ConfigError("temperature must be > 0");
    Vec z = x / tau;
    const double mx = z.maxCoeff();
    Vec e = (z.array() - mx).exp();
    return e / e.sum();
}

const char* to_string(ExtractionStrategy s) {
    return s == ExtractionStrategy::topk ? "topk" : "sct";
}

}  // namespace mambo
