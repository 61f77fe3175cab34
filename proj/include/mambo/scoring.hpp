#pragma once

#include "mambo/core.hpp"

#include <string>

namespace mambo {

enum class ScoreKind { mcm, glmcm, rmcm };

ScoreKind parse_score_kind(const std::string& name);
const char* to_string(ScoreKind k);

double score_mcm(const FeatureBundle& bundle, const Mat& class_features, double tau_test = 1.0);
double score_glmcm(const FeatureBundle& bundle, const Mat& class_features, double tau_test = 1.0);

// Per-patch max_i exp(S_zi/t) / (sum_j exp(S_zj/t) + exp(s_z/t)).
Vec rmcm_patch_values(const Mat& class_sim, const Vec& background_sim, double tau_test = 1.0);
double score_rmcm(const FeatureBundle& bundle, const Mat& class_features, const Vec& background_feature,
                  int q, double tau_test = 1.0);

struct AllScores {
    double mcm = 0.0;
    double glmcm = 0.0;
    double rmcm = 0.0;
    double get(ScoreKind k) const;
};

AllScores score_all(const FeatureBundle& bundle, const Mat& class_features, const Vec& background_feature,
                    int q, double tau_test = 1.0);

enum class Decision { id, ood };
Decision detect(double score, double gamma);

// Largest threshold whose ID true-positive rate is still >= 0.95.
double fpr95_threshold(const std::vector<double>& id_scores);
double fpr95(const std::vector<double>& id_scores, const std::vector<double>& ood_scores);
double auroc(const std::vector<double>& id_scores, const std::vector<double>& ood_scores);

DetectionReport make_report(std::vector<double> id_scores, std::vector<double> ood_scores);

}  // namespace mambo
