#include "mambo/bgdecomp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mambo {

namespace {

void check_label(int label, Eigen::Index M) {
    if (label < 0 || label >= M) throw IndexError("label " + std::to_string(label) + " out of range");
}

}  // namespace

Mat local_class_similarity(const FeatureBundle& bundle, const Mat& class_features) {
    if (bundle.local.cols() != class_features.cols())
        throw ShapeError("patch and class feature dimensions differ");
    return bundle.local * class_features.transpose();
}

Mat patch_probabilities(const Mat& class_sim, double tau) {
    if (!(tau > 0)) throw ConfigError("temperature must be > 0");
    Mat out(class_sim.rows(), class_sim.cols());
    for (Eigen::Index i = 0; i < class_sim.rows(); ++i)
        out.row(i) = softmax(class_sim.row(i).transpose(), tau).transpose();
    return out;
}

GlobalProbability global_probability(const Vec& global_feature, const Mat& class_features, double tau,
                                     std::optional<int> label) {
    if (global_feature.size() != class_features.cols())
        throw ShapeError("global and class feature dimensions differ");
    GlobalProbability gp;
    gp.probs = softmax(class_features * global_feature, tau);
    if (label) {
        check_label(*label, class_features.rows());
        gp.p = gp.probs[*label];
    }
    return gp;
}

Vec local_background_similarity(const FeatureBundle& bundle, const Vec& background_feature) {
    if (bundle.local.cols() != background_feature.size())
        throw ShapeError("patch and background feature dimensions differ");
    return bundle.local * background_feature;
}

Vec refinement_weights(const Vec& column) {
    const double hi = column.maxCoeff();
    const double lo = column.minCoeff();
    if (!(hi > lo)) return Vec::Ones(column.size());
    Vec delta = (hi - column.array()) / (hi - lo);
    return delta.cwiseMax(0.0).cwiseMin(1.0);
}

Vec refine_similarity(SimilarityMaps& maps, int label) {
    check_label(label, maps.class_sim.cols());
    if (maps.class_sim.rows() != maps.background_sim.size())
        throw ShapeError("class and background similarity maps differ in patch count");
    if (!(maps.p >= 0.0 && maps.p <= 1.0)) throw ConfigError("gt probability must lie in [0, 1]");
    Vec delta = refinement_weights(maps.class_sim.col(label));
    maps.refined_sim = maps.background_sim.array() * ((1.0 - maps.p) + maps.p * delta.array());
    return delta;
}

BackgroundSet extract_background_topk(const Mat& patch_probs, int label, int K) {
    const int n = static_cast<int>(patch_probs.rows());
    check_label(label, patch_probs.cols());
    if (K < 0) throw ConfigError("topk must be >= 0");
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return patch_probs(a, label) > patch_probs(b, label); });
    BackgroundSet bs;
    bs.strategy = ExtractionStrategy::topk;
    for (int r = K; r < n; ++r) bs.indices.push_back(order[r]);
    std::sort(bs.indices.begin(), bs.indices.end());
    return bs;
}

double sct_threshold(const Vec& refined_sim, double p, double alpha) {
    if (refined_sim.size() == 0) throw ShapeError("similarity map is empty");
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("p must lie in [0, 1]");
    if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
    const double mean = refined_sim.mean();
    const double var = (refined_sim.array() - mean).square().mean();
    return mean - alpha * (2.0 * p - 1.0) * std::sqrt(var);
}

BackgroundSet extract_background_sct(const Vec& refined_sim, double p, double alpha) {
    BackgroundSet bs;
    bs.strategy = ExtractionStrategy::sct;
    const double theta = sct_threshold(refined_sim, p, alpha);
    bs.threshold = theta;
    for (Eigen::Index i = 0; i < refined_sim.size(); ++i)
        if (refined_sim[i] > theta) bs.indices.push_back(static_cast<int>(i));
    return bs;
}

}  // namespace mambo
