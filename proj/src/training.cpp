#include "mambo/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

namespace mambo {

StrategyFlags full_flags() { return {true, true, true}; }
StrategyFlags locoop_flags() { return {false, false, false}; }

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (!(learning_rate >= 0) || !std::isfinite(learning_rate)) throw ConfigError("lr must be >= 0");
    if (batch_size < 1) throw ConfigError("batch must be >= 1");
    if (shots < 1) throw ConfigError("shots must be >= 1");
    if (!(lambda >= 0)) throw ConfigError("lambda must be >= 0");
    if (!(alpha >= 0)) throw ConfigError("alpha must be >= 0");
    if (K < 0) throw ConfigError("topk must be >= 0");
    if (threads < 1) throw ConfigError("threads must be >= 1");
}

double ce_loss(const Vec& probs, int label, FloorCounts* floors) {
    if (label < 0 || label >= probs.size()) throw IndexError("label out of range");
    double py = probs[label];
    if (py < kProbFloor) {
        if (floors) ++floors->ce;
        py = kProbFloor;
    }
    return -std::log(py);
}

namespace {

// q log q with the log argument floored; derivative is log(max(q, fl)) + [q > fl].
double plogp(double q, FloorCounts* floors) {
    if (q > kProbFloor) return q * std::log(q);
    if (floors) ++floors->entropy;
    return q * std::log(kProbFloor);
}

double plogp_prime(double q) { return q > kProbFloor ? std::log(q) + 1.0 : std::log(kProbFloor); }

}  // namespace

double ood_loss(const Mat& patch_probs, const BackgroundSet& J, FloorCounts* floors) {
    if (J.indices.empty()) return 0.0;
    double acc = 0.0;
    for (int k : J.indices) {
        if (k < 0 || k >= patch_probs.rows()) throw IndexError("background index out of range");
        double row = 0.0;
        for (Eigen::Index c = 0; c < patch_probs.cols(); ++c) row += plogp(patch_probs(k, c), floors);
        acc += row;
    }
    return acc / static_cast<double>(J.indices.size());
}

double sample_objective(const SampleLoss& s, double lambda, bool modulation) {
    if (modulation) return s.ce * (1.0 - s.p) + lambda * s.ood * s.p;
    return s.ce + lambda * s.ood;
}

double total_loss(const std::vector<SampleLoss>& batch, double lambda, bool modulation) {
    if (batch.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& s : batch) acc += sample_objective(s, lambda, modulation);
    return acc / static_cast<double>(batch.size());
}

SampleForward forward_sample(const FeatureBundle& bundle, const Mat& class_features, const Vec& background_feature,
                             double tau, const TrainConfig& tc, const FrozenSelection* frozen) {
    if (!bundle.label) throw DataError("training sample has no label");
    SampleForward fw;
    fw.label = *bundle.label;
    GlobalProbability gp = global_probability(bundle.global, class_features, tau, fw.label);
    fw.global_probs = gp.probs;
    const double p = (frozen && frozen->p) ? *frozen->p : gp.p;

    fw.maps.p = p;
    fw.maps.class_sim = local_class_similarity(bundle, class_features);
    fw.patch_probs = patch_probabilities(fw.maps.class_sim, tau);
    fw.maps.background_sim = local_background_similarity(bundle, background_feature);
    fw.maps.refined_sim = fw.maps.background_sim;

    if (frozen) {
        fw.J = frozen->J;
    } else if (tc.flags.uses_topk()) {
        fw.J = extract_background_topk(fw.patch_probs, fw.label, tc.K);
    } else {
        if (tc.flags.use_refinement) fw.delta = refine_similarity(fw.maps, fw.label);
        fw.J = extract_background_sct(fw.maps.refined_sim, p, tc.flags.use_patch_sct ? tc.alpha : 0.0);
    }

    fw.loss.p = p;
    fw.loss.ce = ce_loss(fw.global_probs, fw.label, &fw.floors);
    fw.loss.ood = ood_loss(fw.patch_probs, fw.J, &fw.floors);
    return fw;
}

Mat sample_feature_grad(const SampleForward& fw, const FeatureBundle& bundle, const Mat& class_features, double tau,
                        const TrainConfig& tc, double scale) {
    const Eigen::Index M = class_features.rows();
    const bool mod = tc.flags.use_loss_modulation;
    const double p = fw.loss.p;
    const double w_ce = mod ? (1.0 - p) : 1.0;
    const double w_ood = mod ? tc.lambda * p : tc.lambda;
    const Vec& P = fw.global_probs;

    // Coefficients on the global feature, one per class logit.
    Vec global_coef = Vec::Zero(M);
    if (P[fw.label] >= kProbFloor) {
        global_coef = w_ce * P;
        global_coef[fw.label] -= w_ce;
    }
    if (mod && tc.grad_through_p) {
        const double dobj_dp = -fw.loss.ce + tc.lambda * fw.loss.ood;
        const double py = P[fw.label];
        for (Eigen::Index c = 0; c < M; ++c)
            global_coef[c] += dobj_dp * py * ((c == fw.label ? 1.0 : 0.0) - P[c]);
    }
    Mat grad = global_coef * bundle.global.transpose();

    if (!fw.J.indices.empty() && w_ood != 0.0) {
        const double inv = w_ood / static_cast<double>(fw.J.indices.size());
        Vec tp(M);
        for (int k : fw.J.indices) {
            auto q = fw.patch_probs.row(k);
            double m = 0.0;
            for (Eigen::Index j = 0; j < M; ++j) {
                tp[j] = plogp_prime(q[j]);
                m += q[j] * tp[j];
            }
            for (Eigen::Index c = 0; c < M; ++c)
                grad.row(c) += (inv * q[c] * (tp[c] - m)) * bundle.local.row(k);
        }
    }
    return grad * (scale / tau);
}

BatchResult batch_loss_and_grad(const PromptSet& prompt, const FrozenTextEncoder& encoder, const Dataset& data,
                                const std::vector<int>& batch, double tau, const TrainConfig& tc,
                                const std::vector<FrozenSelection>* frozen, bool with_grad) {
    if (batch.empty()) throw DataError("empty batch");
    if (frozen && frozen->size() != batch.size()) throw ShapeError("frozen selection count differs from batch");
    const Mat G = encoder.encode_classes(prompt);
    const Vec gb = encoder.encode_background(prompt);
    const std::size_t B = batch.size();
    const double scale = 1.0 / static_cast<double>(B);

    BatchResult res;
    res.samples.resize(B);
    std::vector<Mat> grads(with_grad ? B : 0);

    auto work = [&](std::size_t s) {
        const FeatureBundle& b = data.at(static_cast<std::size_t>(batch[s]));
        res.samples[s] = forward_sample(b, G, gb, tau, tc, frozen ? &(*frozen)[s] : nullptr);
        if (with_grad) grads[s] = sample_feature_grad(res.samples[s], b, G, tau, tc, scale);
    };

    const std::size_t T = std::min<std::size_t>(static_cast<std::size_t>(tc.threads), B);
    if (T <= 1) {
        for (std::size_t s = 0; s < B; ++s) work(s);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errs(T);
        for (std::size_t t = 0; t < T; ++t)
            pool.emplace_back([&, t] {
                try {
                    for (std::size_t s = t; s < B; s += T) work(s);
                } catch (...) {
                    errs[t] = std::current_exception();
                }
            });
        for (auto& th : pool) th.join();
        for (auto& e : errs)
            if (e) std::rethrow_exception(e);
    }

    // Ordered reduction keeps serial and threaded runs bit-identical.
    std::vector<SampleLoss> losses;
    losses.reserve(B);
    for (const auto& fw : res.samples) {
        losses.push_back(fw.loss);
        res.floors += fw.floors;
    }
    res.loss = total_loss(losses, tc.lambda, tc.flags.use_loss_modulation);
    if (with_grad) {
        Mat dG = Mat::Zero(G.rows(), G.cols());
        for (const auto& g : grads) dG += g;
        res.grad = encoder.grad_text_wrt_prompt(prompt, dG, Vec::Zero(gb.size()));
    }
    return res;
}

void sgd_step(PromptSet& prompt, const PromptGrad& grad, double lr) {
    prompt.context -= lr * grad.context;
    prompt.background -= lr * grad.background;
}

TrainResult train(const Dataset& data, const ModelConfig& mc, const TrainConfig& tc, const FrozenTextEncoder& encoder,
                  const PromptSet& init) {
    mc.validate();
    tc.validate();
    if (tc.K >= mc.patches()) throw ConfigError("topk must be < H*W");
    std::vector<int> per_class(static_cast<std::size_t>(mc.M), 0);
    for (const auto& b : data) {
        if (!b.label) throw DataError("training sample has no label");
        if (*b.label < 0 || *b.label >= mc.M) throw DataError("training label out of range");
        ++per_class[static_cast<std::size_t>(*b.label)];
    }
    for (int m = 0; m < mc.M; ++m)
        if (per_class[static_cast<std::size_t>(m)] == 0)
            throw ConfigError("class " + std::to_string(m) + " has no training samples");

    TrainResult out;
    out.prompt = init;
    std::vector<int> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(mc.seed ^ 0x5DEECE66DULL);

    for (int e = 0; e < tc.epochs; ++e) {
        std::shuffle(order.begin(), order.end(), rng);
        EpochRecord rec;
        rec.epoch = e + 1;
        double bg = 0.0;
        int nb = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tc.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(tc.batch_size));
            std::vector<int> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(stop));
            BatchResult br = batch_loss_and_grad(out.prompt, encoder, data, batch, mc.tau, tc);
            sgd_step(out.prompt, br.grad, tc.learning_rate);
            out.floors += br.floors;
            ++out.steps;
            ++nb;
            rec.loss += br.loss;
            double ce = 0.0, ood = 0.0, frac = 0.0;
            for (const auto& s : br.samples) {
                ce += s.loss.ce;
                ood += s.loss.ood;
                frac += static_cast<double>(s.J.indices.size()) / static_cast<double>(mc.patches());
            }
            const double n = static_cast<double>(br.samples.size());
            rec.ce += ce / n;
            rec.ood += ood / n;
            bg += frac / n;
        }
        rec.loss /= nb;
        rec.ce /= nb;
        rec.ood /= nb;
        rec.mean_bg_fraction = bg / nb;
        out.trace.push_back(rec);
    }
    return out;
}

}  // namespace mambo
