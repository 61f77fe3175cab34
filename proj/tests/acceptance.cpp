#include "mambo/experiment.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

using namespace mambo;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

// ---------------------------------------------------------------- 1: gradients

struct GradCase {
    ModelConfig mc;
    FrozenTextEncoder enc;
    PromptSet prompt;
    Dataset data;
    std::vector<int> batch;
};

GradCase random_grad_case(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    static const int shapes[][2] = {{1, 2}, {2, 2}, {1, 3}, {2, 3}, {3, 3}, {2, 4}, {1, 5}, {3, 2}};
    const auto& hw = shapes[pick(0, 7)];
    ModelConfig mc;
    mc.d = pick(2, 8);
    mc.M = pick(2, 4);
    mc.H = hw[0];
    mc.W = hw[1];
    mc.N = pick(1, 4);
    mc.L = pick(1, 3);
    mc.tau = std::uniform_real_distribution<double>(0.1, 0.5)(rng);
    mc.K = pick(0, mc.patches());
    mc.q = 1;
    TextEncoderOptions to;
    to.gain = std::uniform_real_distribution<double>(0.5, 2.0)(rng);
    GradCase g{mc, FrozenTextEncoder(mc.d, seed + 100, to), {}, {}, {}};
    g.prompt = PromptSet::initialize(mc, oracle::random_units(rng, mc.M, mc.d), seed, 0.4);
    for (int s = 0; s < 4; ++s) {
        g.data.push_back(oracle::random_bundle(rng, mc.d, mc.patches(), pick(0, mc.M - 1)));
        g.batch.push_back(s);
    }
    return g;
}

// Worst relative error of the batch gradient over every learnable prompt token,
// with the selection frozen at the analytic point. `lambda_diff` isolates the OOD term.
double grad_error(GradCase& g, const TrainConfig& tc, bool freeze_p, bool lambda_diff) {
    TrainConfig tc0 = tc;
    tc0.lambda = 0.0;
    BatchResult br = batch_loss_and_grad(g.prompt, g.enc, g.data, g.batch, g.mc.tau, tc);
    std::vector<FrozenSelection> fr;
    for (const auto& s : br.samples) fr.push_back({s.J, freeze_p ? std::optional<double>(s.loss.p) : std::nullopt});
    PromptGrad analytic = br.grad;
    if (lambda_diff) {
        BatchResult b0 = batch_loss_and_grad(g.prompt, g.enc, g.data, g.batch, g.mc.tau, tc0, &fr);
        analytic.context = (br.grad.context - b0.grad.context) / tc.lambda;
        analytic.background = (br.grad.background - b0.grad.background) / tc.lambda;
    }
    auto f = [&] {
        double v = batch_loss_and_grad(g.prompt, g.enc, g.data, g.batch, g.mc.tau, tc, &fr, false).loss;
        if (lambda_diff) v = (v - batch_loss_and_grad(g.prompt, g.enc, g.data, g.batch, g.mc.tau, tc0, &fr, false).loss) /
                             tc.lambda;
        return v;
    };
    double worst = 0.0;
    auto check = [&](Mat& param, const Mat& grad) {
        auto num = oracle::central_diff(f, param.data(), static_cast<std::size_t>(param.size()), 1e-5);
        for (std::size_t i = 0; i < num.size(); ++i) worst = std::max(worst, oracle::rel_err(grad.data()[i], num[i]));
    };
    check(g.prompt.context, analytic.context);
    check(g.prompt.background, analytic.background);
    return worst;
}

Outcome criterion_gradients() {
    const auto t0 = Clock::now();
    const StrategyFlags variants[] = {locoop_flags(), full_flags(), {true, false, true}, {false, true, true}};
    double worst_ce = 0, worst_ood = 0, worst_total = 0, worst_through_p = 0;
    const int cases = 24;
    for (int c = 0; c < cases; ++c) {
        GradCase g = random_grad_case(static_cast<std::uint64_t>(c));
        TrainConfig tc;
        tc.K = g.mc.K;
        tc.flags = variants[c % 4];
        tc.lambda = 0.5;

        TrainConfig plain = tc;
        plain.flags.use_loss_modulation = false;
        plain.lambda = 1.0;
        TrainConfig ce_only = plain;
        ce_only.lambda = 0.0;
        worst_ce = std::max(worst_ce, grad_error(g, ce_only, true, false));
        worst_ood = std::max(worst_ood, grad_error(g, plain, true, true));

        tc.flags.use_loss_modulation = true;
        worst_total = std::max(worst_total, grad_error(g, tc, true, false));
        tc.grad_through_p = true;
        worst_through_p = std::max(worst_through_p, grad_error(g, tc, false, false));
    }
    const double secs = seconds_since(t0);
    const double worst = std::max({worst_ce, worst_ood, worst_total, worst_through_p});
    return {worst < 1e-5 && secs < 30.0,
            fmt("%.0f configs, max rel err CE %.1e OOD %.1e", cases, worst_ce, worst_ood) +
                fmt(" total %.1e total(p differentiated) %.1e", worst_total, worst_through_p) + fmt(", %.2f s", secs)};
}

// ---------------------------------------------------------------- 2: refinement

Outcome criterion_refinement() {
    Outcome o;
    Vec sims(3);
    sims << 0.2, 0.5, 0.8;
    Vec delta = refinement_weights(sims);
    Vec expect(3);
    expect << 1.0, 0.5, 0.0;
    if (delta != expect) {
        o.pass = false;
        o.detail += "worked example mismatch; ";
    }
    std::mt19937_64 rng(21);
    double worst_p0 = 0;
    for (int t = 0; t < 200; ++t) {
        const int n = 1 + t % 9, M = 2 + t % 3;
        FeatureBundle b = oracle::random_bundle(rng, 5, n, std::nullopt);
        SimilarityMaps m;
        m.class_sim = local_class_similarity(b, oracle::random_units(rng, M, 5));
        m.background_sim = local_background_similarity(b, oracle::random_unit(rng, 5));
        const int label = t % M;
        m.p = std::uniform_real_distribution<double>(0, 1)(rng);
        Vec d = refine_similarity(m, label);
        Eigen::Index amax;
        m.class_sim.col(label).maxCoeff(&amax);
        if (d.minCoeff() < 0.0 || d.maxCoeff() > 1.0 || (n > 1 && d[amax] != 0.0)) o.pass = false;
        m.p = 0.0;
        refine_similarity(m, label);
        worst_p0 = std::max(worst_p0, (m.refined_sim - m.background_sim).cwiseAbs().maxCoeff());
    }
    if (worst_p0 != 0.0) o.pass = false;
    o.detail += fmt("worked example (1, 0.5, 0); 200 random maps, p=0 max abs diff %.1e", worst_p0);
    return o;
}

// ---------------------------------------------------------------- 3: SCT

bool subset(const BackgroundSet& a, const BackgroundSet& b) {
    return std::all_of(a.indices.begin(), a.indices.end(), [&](int i) { return b.contains(i); });
}

Outcome criterion_sct() {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> nd(0.0, 0.3);
    int mean_ok = 0, mono_ok = 0, flat_ok = 0;
    for (int t = 0; t < 100; ++t) {
        Vec s(2 + t % 15);
        for (auto& x : s) x = nd(rng);
        mean_ok += sct_threshold(s, 0.5, 1.7) == s.mean();
        bool mono = true, flat = true;
        BackgroundSet prev = extract_background_sct(s, 0.0, 1.0);
        const BackgroundSet base = extract_background_sct(s, 0.0, 0.0);
        for (int k = 1; k <= 40; ++k) {
            const double p = k / 40.0;
            BackgroundSet cur = extract_background_sct(s, p, 1.0);
            mono = mono && subset(prev, cur);
            prev = cur;
            flat = flat && extract_background_sct(s, p, 0.0).indices == base.indices;
        }
        mono_ok += mono;
        flat_ok += flat;
    }
    return {mean_ok == 100 && mono_ok == 100 && flat_ok == 100,
            fmt("100 vectors: theta(p=0.5)=mean %.0f/100, monotone in p %.0f/100, alpha=0 p-independent %.0f/100",
                mean_ok, mono_ok, flat_ok)};
}

// ---------------------------------------------------------------- 4: metrics

Outcome criterion_metrics() {
    std::mt19937_64 rng(41);
    int auroc_ok = 0, fpr_ok = 0;
    for (int t = 0; t < 50; ++t) {
        const int n = std::uniform_int_distribution<int>(1, 200)(rng);
        const int m = std::uniform_int_distribution<int>(1, 200)(rng);
        // Every third set uses coarse values so ties are common.
        auto draw = [&](double shift) {
            std::normal_distribution<double> nd(shift, 1.0);
            double v = nd(rng);
            return t % 3 == 0 ? std::round(v * 4) / 4 : v;
        };
        std::vector<double> id(n), ood(m);
        for (auto& x : id) x = draw(0.7);
        for (auto& x : ood) x = draw(0.0);
        auroc_ok += auroc(id, ood) == oracle::auroc_pairs(id, ood);
        double gamma = 0;
        const double want = oracle::fpr95_sweep(id, ood, &gamma);
        fpr_ok += fpr95(id, ood) == want && fpr95_threshold(id) == gamma;
    }
    const std::vector<double> hi{2, 3, 4, 5}, lo{-1, 0, 1};
    const bool perfect = auroc(hi, lo) == 1.0 && fpr95(hi, lo) == 0.0;
    std::vector<double> same;
    for (int i = 0; i < 100; ++i) same.push_back(i % 10);
    const double half = auroc(same, same);
    return {auroc_ok == 50 && fpr_ok == 50 && perfect && std::abs(half - 0.5) <= 1e-12,
            fmt("AUROC exact %.0f/50, FPR95 exact %.0f/50, separated %.0f, identical AUROC %.12f", auroc_ok, fpr_ok,
                perfect, half)};
}

// ---------------------------------------------------------------- 5: score bounds

Outcome criterion_scores() {
    std::mt19937_64 rng(51);
    bool bounds = true;
    for (int t = 0; t < 300; ++t) {
        const int M = 2 + t % 7, n = 1 + t % 16, d = 3 + t % 6;
        FeatureBundle b = oracle::random_bundle(rng, d, n, std::nullopt);
        Mat G = oracle::random_units(rng, M, d);
        Vec gb = oracle::random_unit(rng, d);
        const double mcm = score_mcm(b, G);
        const double added = score_rmcm(b, G, gb, 1 + t % n) - mcm;
        bounds = bounds && mcm >= 1.0 / M && mcm < 1.0 && added > 0.0 && added <= 1.0;
    }
    bool symmetric = true;
    for (int M = 1; M <= 8; ++M) {
        FeatureBundle b = oracle::random_bundle(rng, 4, 5, std::nullopt);
        Mat G = Mat::Zero(M, 4);
        G.col(0).setOnes();
        symmetric = symmetric && score_mcm(b, G) == 1.0 / M;
        Mat eq = Mat::Constant(5, M, 0.25);
        Vec bq = Vec::Constant(5, 0.25);
        Vec v = rmcm_patch_values(eq, bq);
        symmetric = symmetric && (v.array() == 1.0 / (M + 1)).all();
    }
    return {bounds && symmetric, fmt("300 random inputs in bounds %.0f; symmetric cases 1/M and 1/(M+1) exact %.0f",
                                     bounds, symmetric)};
}

// ---------------------------------------------------------------- 6: ablation

Outcome criterion_ablation() {
    const auto t0 = Clock::now();
    ExperimentConfig cfg = default_benchmark_config();
    cfg.seeds = {0, 1, 2};
    cfg.strategies = {"baseline", "full", "untrained"};
    BenchmarkResult r = run_benchmark(cfg);
    auto row = [&](const std::string& s) {
        for (const auto& x : r.rows)
            if (x.strategy == s) return x;
        throw InvariantError("missing row " + s);
    };
    const auto base = row("baseline"), full = row("full"), untrained = row("untrained");
    const double secs = seconds_since(t0);
    const bool iou = full.iou_train.mean >= base.iou_train.mean;
    const bool keep = full.auroc.mean >= base.auroc.mean - 0.01;
    const bool gain = full.auroc.mean - untrained.auroc.mean >= 0.05;
    return {iou && keep && gain && secs < 300.0,
            fmt("IoU full %.4f vs baseline %.4f; AUROC full %.4f vs baseline %.4f", full.iou_train.mean,
                base.iou_train.mean, full.auroc.mean, base.auroc.mean) +
                fmt("; trained - untrained %+.4f; %.2f s", full.auroc.mean - untrained.auroc.mean, secs)};
}

// ---------------------------------------------------------------- 7: reduction to the local-entropy baseline

// Straight-line reference: CE on the global feature plus lambda times the mean
// negative entropy of the patches ranked below the top K for the label,
// identity projection, optional tanh, SGD on the shared context only.
struct Reference {
    int N, M, d;
    bool tanh_nl;
    std::vector<std::vector<double>> ctx, words;

    std::vector<std::vector<double>> features(std::vector<std::vector<double>>* pre = nullptr,
                                              std::vector<double>* norms = nullptr) const {
        std::vector<std::vector<double>> g(M, std::vector<double>(d));
        if (pre) pre->assign(M, std::vector<double>(d));
        if (norms) norms->assign(M, 0.0);
        for (int m = 0; m < M; ++m) {
            double nn = 0;
            for (int k = 0; k < d; ++k) {
                double s = words[m][k];
                for (int n = 0; n < N; ++n) s += ctx[n][k];
                s /= (N + 1);
                const double h = tanh_nl ? std::tanh(s) : s;
                g[m][k] = h;
                if (pre) (*pre)[m][k] = h;
                nn += h * h;
            }
            nn = std::sqrt(nn);
            for (int k = 0; k < d; ++k) g[m][k] /= nn;
            if (norms) (*norms)[m] = nn;
        }
        return g;
    }

    static std::vector<double> softmax(const std::vector<double>& x) {
        double mx = x[0];
        for (double v : x) mx = std::max(mx, v);
        std::vector<double> e(x.size());
        double s = 0;
        for (std::size_t i = 0; i < x.size(); ++i) s += (e[i] = std::exp(x[i] - mx));
        for (auto& v : e) v /= s;
        return e;
    }

    double step(const Dataset& data, const std::vector<int>& batch, double tau, double lambda, int K, double lr) {
        const double fl = 1e-12;
        std::vector<std::vector<double>> h;
        std::vector<double> norms;
        auto g = features(&h, &norms);
        std::vector<std::vector<double>> dg(M, std::vector<double>(d, 0.0));
        double total = 0;
        const double B = static_cast<double>(batch.size());
        for (int idx : batch) {
            const FeatureBundle& b = data[idx];
            const int y = *b.label;
            std::vector<double> logit(M);
            for (int m = 0; m < M; ++m) {
                double s = 0;
                for (int k = 0; k < d; ++k) s += b.global[k] * g[m][k];
                logit[m] = s / tau;
            }
            auto P = softmax(logit);
            double loss = -std::log(std::max(P[y], fl));
            for (int m = 0; m < M; ++m) {
                const double dl = (P[m] - (m == y ? 1.0 : 0.0)) / B;
                for (int k = 0; k < d; ++k) dg[m][k] += dl * b.global[k] / tau;
            }
            const int n = static_cast<int>(b.local.rows());
            std::vector<std::vector<double>> q(n);
            for (int i = 0; i < n; ++i) {
                std::vector<double> li(M);
                for (int m = 0; m < M; ++m) {
                    double s = 0;
                    for (int k = 0; k < d; ++k) s += b.local(i, k) * g[m][k];
                    li[m] = s / tau;
                }
                q[i] = softmax(li);
            }
            std::vector<int> J;
            for (int i = 0; i < n; ++i) {
                int rank = 0;
                for (int j = 0; j < n; ++j) rank += q[j][y] > q[i][y] || (q[j][y] == q[i][y] && j < i);
                if (rank >= K) J.push_back(i);
            }
            if (!J.empty()) {
                double ood = 0;
                const double w = lambda / static_cast<double>(J.size()) / B;
                for (int i : J) {
                    double mean_a = 0;
                    std::vector<double> a(M);
                    for (int m = 0; m < M; ++m) {
                        ood += q[i][m] * std::log(std::max(q[i][m], fl));
                        a[m] = std::log(std::max(q[i][m], fl)) + (q[i][m] > fl ? 1.0 : 0.0);
                        mean_a += q[i][m] * a[m];
                    }
                    for (int m = 0; m < M; ++m) {
                        const double dl = q[i][m] * (a[m] - mean_a) * w;
                        for (int k = 0; k < d; ++k) dg[m][k] += dl * b.local(i, k) / tau;
                    }
                }
                loss += lambda * ood / static_cast<double>(J.size());
            }
            total += loss;
        }
        std::vector<double> dctx(d, 0.0);
        for (int m = 0; m < M; ++m) {
            double gdot = 0;
            for (int k = 0; k < d; ++k) gdot += g[m][k] * dg[m][k];
            for (int k = 0; k < d; ++k) {
                double dh = (dg[m][k] - g[m][k] * gdot) / norms[m];
                if (tanh_nl) dh *= 1.0 - h[m][k] * h[m][k];
                dctx[k] += dh / (N + 1);
            }
        }
        for (int n = 0; n < N; ++n)
            for (int k = 0; k < d; ++k) ctx[n][k] -= lr * dctx[k];
        return total / B;
    }
};

Outcome criterion_reduction() {
    double worst = 0;
    bool bg_fixed = true;
    int steps = 0;
    for (int run = 0; run < 2; ++run) {
        const bool tanh_nl = run == 1;
        std::mt19937_64 rng(71 + run);
        ModelConfig mc;
        mc.d = 6;
        mc.M = 4;
        mc.H = 3;
        mc.W = 3;
        mc.N = 3;
        mc.L = 2;
        mc.tau = 0.1;
        PromptSet prompt = PromptSet::initialize(mc, oracle::random_units(rng, mc.M, mc.d), 71 + run, 0.3);
        const Mat bg0 = prompt.background;
        TextEncoderOptions to;
        to.identity_projection = true;
        to.nonlinearity = tanh_nl ? Nonlinearity::tanh : Nonlinearity::identity;
        FrozenTextEncoder enc(mc.d, 0, to);

        Reference ref{mc.N, mc.M, mc.d, tanh_nl, {}, {}};
        for (int n = 0; n < mc.N; ++n)
            ref.ctx.emplace_back(prompt.context.row(n).data(), prompt.context.row(n).data() + mc.d);
        for (int m = 0; m < mc.M; ++m)
            ref.words.emplace_back(prompt.class_words.row(m).data(), prompt.class_words.row(m).data() + mc.d);

        Dataset data;
        for (int s = 0; s < 16; ++s) data.push_back(oracle::random_bundle(rng, mc.d, mc.patches(), s % mc.M));
        TrainConfig tc;
        tc.flags = locoop_flags();
        tc.lambda = 0.25;
        tc.K = 3;
        tc.learning_rate = 0.05;
        for (int step = 0; step < 10; ++step) {
            std::vector<int> idx(data.size());
            std::iota(idx.begin(), idx.end(), 0);
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(3 + step % 5);
            BatchResult br = batch_loss_and_grad(prompt, enc, data, idx, mc.tau, tc);
            sgd_step(prompt, br.grad, tc.learning_rate);
            const double want = ref.step(data, idx, mc.tau, tc.lambda, tc.K, tc.learning_rate);
            worst = std::max(worst, std::abs(br.loss - want));
            ++steps;
        }
        bg_fixed = bg_fixed && prompt.background == bg0;
    }
    return {worst <= 1e-9 && bg_fixed,
            fmt("%.0f steps over random batches, max |loss - reference| %.2e", steps, worst)};
}

// ---------------------------------------------------------------- 8: formats and CLI determinism

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(MAMBO_CLI) + " " + args + " > " + log.string() + " 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

Outcome criterion_formats() {
    Outcome o;
    std::mt19937_64 rng(81);
    SyntheticSpec spec;
    spec.d = 8;
    spec.M = 3;
    spec.num_ood_classes = 2;
    spec.eval_per_class = 3;
    spec.H = 3;
    spec.W = 2;
    spec.seed = 9;
    SyntheticData w = generate_synthetic(spec);
    Mat text = oracle::random_units(rng, 3, 8);
    Vec bg = oracle::random_unit(rng, 8);
    FeatureDump dump = make_dump(w.train, text, &bg, 3, 2);
    const auto bytes = serialize_dump(dump);
    const bool round_trip = parse_dump(bytes) == dump && serialize_dump(parse_dump(bytes)) == bytes;

    int clean = 0, total = 0;
    std::uniform_int_distribution<int> byte(0, 255);
    for (int t = 0; t < 2000; ++t) {
        auto bad = bytes;
        const int kind = t % 4;
        if (kind == 0) {
            bad[static_cast<std::size_t>(t / 4 % 28)] ^= static_cast<unsigned char>(1 + byte(rng) % 255);
        } else if (kind == 1) {
            const int flips = 1 + t % 4;
            for (int f = 0; f < flips; ++f) bad[static_cast<std::size_t>(byte(rng) % 28)] = static_cast<unsigned char>(byte(rng));
        } else if (kind == 2) {
            bad.resize(static_cast<std::size_t>(std::uniform_int_distribution<int>(0, 27)(rng)));
        } else {
            const std::size_t at = 8 + 4 * static_cast<std::size_t>(byte(rng) % 5);
            const std::uint32_t v = t % 8 == 3 ? 0xFFFFFFFFu : static_cast<std::uint32_t>(rng());
            std::memcpy(bad.data() + at, &v, 4);
        }
        if (bad == bytes) continue;
        ++total;
        try {
            parse_dump(bad);
        } catch (const DataError&) {
            ++clean;
        } catch (...) {
        }
    }
    if (!round_trip || clean != total || total < 1000) o.pass = false;

    const fs::path root = fs::temp_directory_path() / "mambo_acceptance_cli";
    fs::remove_all(root);
    bool identical = true;
    int files = 0;
    for (const char* run : {"a", "b"}) {
        const fs::path dir = root / run;
        fs::create_directories(dir);
        std::ofstream(dir / "cfg.txt") << "seed=3\neval_per_class=10\nepochs=10\n";
        const std::string d = dir.string();
        const std::string cmds[] = {
            "generate " + d + "/cfg.txt --out " + d + "/w",
            "train " + d + "/cfg.txt --out " + d + "/ck.bin",
            "eval " + d + "/ck.bin --out " + d + "/scores.csv",
            "visualize " + d + "/ck.bin --sample 1 --out " + d + "/viz",
            "benchmark " + d + "/cfg.txt --seeds 0,1 --strategies baseline,full --out " + d + "/bench.md",
        };
        int i = 0;
        for (const auto& c : cmds) {
            if (run_cli(c, dir / ("log" + std::to_string(i++) + ".txt")) != 0) identical = false;
        }
    }
    for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
        if (!e.is_regular_file()) continue;
        const fs::path rel = fs::relative(e.path(), root / "a");
        auto a = read_file_bytes(e.path().string());
        auto b = read_file_bytes((root / "b" / rel).string());
        // Logs and the config echo carry the run directory; compare them with it removed.
        if (rel.extension() == ".txt") {
            std::string sa(a.begin(), a.end()), sb(b.begin(), b.end());
            auto strip = [](std::string s, const std::string& p) {
                for (std::size_t k; (k = s.find(p)) != std::string::npos;) s.erase(k, p.size());
                return s;
            };
            identical = identical && strip(sa, (root / "a").string()) == strip(sb, (root / "b").string());
        } else {
            identical = identical && a == b;
        }
        ++files;
    }
    if (!identical || files < 10) o.pass = false;
    o.detail = fmt("round trip %.0f; %.0f/%.0f header mutations rejected with a data error", round_trip, clean, total) +
               fmt("; repeated CLI runs identical over %.0f files: %.0f", files, identical);
    return o;
}

}  // namespace

int main() {
    struct Item {
        int id;
        const char* name;
        Outcome (*fn)();
    };
    const Item items[] = {
        {1, "gradients match finite differences", criterion_gradients},
        {2, "refinement invariants", criterion_refinement},
        {3, "patch-level threshold invariants", criterion_sct},
        {4, "metric oracles", criterion_metrics},
        {5, "score bounds", criterion_scores},
        {6, "ablation direction on the default benchmark", criterion_ablation},
        {7, "flags off reduces to the local-entropy baseline", criterion_reduction},
        {8, "format and CLI determinism", criterion_formats},
    };
    int failed = 0;
    for (const auto& it : items) {
        Outcome o;
        try {
            o = it.fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("[%s] criterion %d: %s -- %s\n", o.pass ? "PASS" : "FAIL", it.id, it.name, o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
