#include "mambo/scoring.hpp"

#include "mambo/bgdecomp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace mambo {

ScoreKind parse_score_kind(const std::string& name) {
    if (name == "mcm") return ScoreKind::mcm;
    if (name == "glmcm") return ScoreKind::glmcm;
    if (name == "rmcm") return ScoreKind::rmcm;
    throw ConfigError("unknown score '" + name + "' (expected mcm, glmcm or rmcm)");
}

const char* to_string(ScoreKind k) {
    switch (k) {
        case ScoreKind::mcm: return "mcm";
        case ScoreKind::glmcm: return "glmcm";
        case ScoreKind::rmcm: return "rmcm";
    }
    return "?";
}

double score_mcm(const FeatureBundle& bundle, const Mat& class_features, double tau_test) {
    return global_probability(bundle.global, class_features, tau_test).probs.maxCoeff();
}

double score_glmcm(const FeatureBundle& bundle, const Mat& class_features, double tau_test) {
    Mat pp = patch_probabilities(local_class_similarity(bundle, class_features), tau_test);
    return score_mcm(bundle, class_features, tau_test) + pp.maxCoeff();
}

Vec rmcm_patch_values(const Mat& class_sim, const Vec& background_sim, double tau_test) {
    if (!(tau_test > 0)) throw ConfigError("temperature must be > 0");
    if (class_sim.rows() != background_sim.size()) throw ShapeError("patch count mismatch");
    Vec out(class_sim.rows());
    for (Eigen::Index z = 0; z < class_sim.rows(); ++z) {
        const double top = class_sim.row(z).maxCoeff() / tau_test;
        const double bg = background_sim[z] / tau_test;
        const double mx = std::max(top, bg);
        double denom = std::exp(bg - mx);
        for (Eigen::Index j = 0; j < class_sim.cols(); ++j) denom += std::exp(class_sim(z, j) / tau_test - mx);
        out[z] = std::exp(top - mx) / denom;
    }
    return out;
}

double score_rmcm(const FeatureBundle& bundle, const Mat& class_features, const Vec& background_feature, int q,
                  double tau_test) {
    const int n = static_cast<int>(bundle.local.rows());
    if (q < 1 || q > n) throw ConfigError("rmcm_q must satisfy 1 <= q <= H*W");
    Vec v = rmcm_patch_values(local_class_similarity(bundle, class_features),
                              local_background_similarity(bundle, background_feature), tau_test);
    std::vector<double> vals(v.data(), v.data() + n);
    std::partial_sort(vals.begin(), vals.begin() + q, vals.end(), std::greater<>());
    double s = 0.0;
    for (int i = 0; i < q; ++i) s += vals[i];
    return score_mcm(bundle, class_features, tau_test) + s / q;
}

double AllScores::get(ScoreKind k) const {
    switch (k) {
        case ScoreKind::mcm: return mcm;
        case ScoreKind::glmcm: return glmcm;
        case ScoreKind::rmcm: return rmcm;
    }
    return mcm;
}

AllScores score_all(const FeatureBundle& bundle, const Mat& class_features, const Vec& background_feature, int q,
                    double tau_test) {
    return {score_mcm(bundle, class_features, tau_test), score_glmcm(bundle, class_features, tau_test),
            score_rmcm(bundle, class_features, background_feature, q, tau_test)};
}

Decision detect(double score, double gamma) { return score >= gamma ? Decision::id : Decision::ood; }

double fpr95_threshold(const std::vector<double>& id_scores) {
    if (id_scores.empty()) throw DataError("ID score list is empty");
    std::vector<double> s = id_scores;
    std::sort(s.begin(), s.end(), std::greater<>());
    const std::size_t n = s.size();
    const std::size_t k = (95 * n + 99) / 100;  // smallest k with k/n >= 0.95
    return s[k - 1];
}

double fpr95(const std::vector<double>& id_scores, const std::vector<double>& ood_scores) {
    if (ood_scores.empty()) throw DataError("OOD score list is empty");
    const double gamma = fpr95_threshold(id_scores);
    const auto fp = std::count_if(ood_scores.begin(), ood_scores.end(), [&](double s) { return s >= gamma; });
    return static_cast<double>(fp) / static_cast<double>(ood_scores.size());
}

double auroc(const std::vector<double>& id_scores, const std::vector<double>& ood_scores) {
    if (id_scores.empty() || ood_scores.empty()) throw DataError("score list is empty");
    std::vector<double> ood = ood_scores;
    std::sort(ood.begin(), ood.end());
    // Twice the Mann-Whitney count keeps the sum integral until the final division.
    long long twice = 0;
    for (double s : id_scores) {
        auto lo = std::lower_bound(ood.begin(), ood.end(), s);
        auto hi = std::upper_bound(lo, ood.end(), s);
        twice += 2 * static_cast<long long>(lo - ood.begin()) + static_cast<long long>(hi - lo);
    }
    return static_cast<double>(twice) /
           (2.0 * static_cast<double>(id_scores.size()) * static_cast<double>(ood.size()));
}

DetectionReport make_report(std::vector<double> id_scores, std::vector<double> ood_scores) {
    DetectionReport r;
    r.gamma = fpr95_threshold(id_scores);
    r.fpr95 = fpr95(id_scores, ood_scores);
    r.auroc = auroc(id_scores, ood_scores);
    r.id_scores = std::move(id_scores);
    r.ood_scores = std::move(ood_scores);
    return r;
}

}  // namespace mambo
