#pragma once

#include "mambo/core.hpp"

namespace mambo {

// (patches x M) matrix of cosine similarities f_i . g_j.
Mat local_class_similarity(const FeatureBundle& bundle, const Mat& class_features);

// Row-wise softmax of class_sim / tau.
Mat patch_probabilities(const Mat& class_sim, double tau);

struct GlobalProbability {
    Vec probs;
    double p = 0.0;  // probability of the label, 0 when no label
};

GlobalProbability global_probability(const Vec& global_feature, const Mat& class_features, double tau,
                                     std::optional<int> label = std::nullopt);

Vec local_background_similarity(const FeatureBundle& bundle, const Vec& background_feature);

// Delta over one class column: (max - s_i) / (max - min), all ones when the column is flat.
Vec refinement_weights(const Vec& column);

// Fills maps.refined_sim and returns the Delta map.
Vec refine_similarity(SimilarityMaps& maps, int label);

BackgroundSet extract_background_topk(const Mat& patch_probs, int label, int K);

BackgroundSet extract_background_sct(const Vec& refined_sim, double p, double alpha);

double sct_threshold(const Vec& refined_sim, double p, double alpha);

}  // namespace mambo
