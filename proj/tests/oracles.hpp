#pragma once
// Independent reference implementations used only by tests.

#include "mambo/core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

// All-pairs Mann-Whitney: P(id > ood) + 0.5 P(tie).
inline double auroc_pairs(const std::vector<double>& id, const std::vector<double>& ood) {
    double num = 0.0;
    for (double a : id)
        for (double b : ood) num += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
    return num / (static_cast<double>(id.size()) * static_cast<double>(ood.size()));
}

// Tries every observed score as a threshold; keeps the largest one with TPR >= 0.95.
inline double fpr95_sweep(const std::vector<double>& id, const std::vector<double>& ood, double* gamma_out = nullptr) {
    std::vector<double> cands = id;
    cands.insert(cands.end(), ood.begin(), ood.end());
    double best = -std::numeric_limits<double>::infinity();
    for (double g : cands) {
        std::size_t tp = 0;
        for (double s : id) tp += s >= g;
        if (100 * tp >= 95 * id.size()) best = std::max(best, g);
    }
    std::size_t fp = 0;
    for (double s : ood) fp += s >= best;
    if (gamma_out) *gamma_out = best;
    return static_cast<double>(fp) / static_cast<double>(ood.size());
}

// Central differences over every entry of `x`.
inline std::vector<double> central_diff(const std::function<double()>& f, double* x, std::size_t n, double h = 1e-6) {
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = f();
        x[i] = keep - h;
        const double dn = f();
        x[i] = keep;
        g[i] = (up - dn) / (2 * h);
    }
    return g;
}

inline double rel_err(double analytic, double numeric, double atol = 1e-6) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), atol});
}

inline mambo::Vec random_unit(std::mt19937_64& rng, int d) {
    std::normal_distribution<double> nd;
    mambo::Vec v(d);
    for (int i = 0; i < d; ++i) v[i] = nd(rng);
    return v / v.norm();
}

inline mambo::FeatureBundle random_bundle(std::mt19937_64& rng, int d, int patches, std::optional<int> label) {
    mambo::FeatureBundle b;
    b.local.resize(patches, d);
    mambo::Vec sum = mambo::Vec::Zero(d);
    for (int i = 0; i < patches; ++i) {
        mambo::Vec v = random_unit(rng, d);
        b.local.row(i) = v.transpose();
        sum += v;
    }
    b.global = sum / sum.norm();
    b.label = label;
    return b;
}

inline mambo::Mat random_units(std::mt19937_64& rng, int rows, int d) {
    mambo::Mat m(rows, d);
    for (int r = 0; r < rows; ++r) m.row(r) = random_unit(rng, d).transpose();
    return m;
}

}  // namespace oracle
