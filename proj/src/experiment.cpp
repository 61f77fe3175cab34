#include "mambo/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <future>
#include <random>
#include <sstream>

namespace mambo {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

enum SeedTag : std::uint64_t { kEncoder = 1, kData = 2, kWords = 3, kPrompt = 4 };

}  // namespace

Mat derive_class_words(const FrozenTextEncoder& encoder, const Mat& targets, int context_len, double misalignment,
                       double sharpness, std::uint64_t seed) {
    const int d = encoder.dim();
    if (targets.cols() != d) throw ShapeError("targets must have the encoder's dimension");
    if (context_len < 1) throw ConfigError("context_len must be >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    Vec dir(d);
    for (int i = 0; i < d; ++i) dir[i] = nd(rng);
    const Vec shift = misalignment * normalize(dir);
    const auto lu = encoder.projection().partialPivLu();
    const double n1 = context_len + 1.0;

    Mat words(targets.rows(), d);
    for (Eigen::Index m = 0; m < targets.rows(); ++m) {
        Vec z = sharpness * normalize(targets.row(m).transpose());
        if (encoder.nonlinearity() == Nonlinearity::tanh) z = z.cwiseMax(-0.95).cwiseMin(0.95).array().atanh();
        Vec rhs = z - encoder.bias() - shift;
        words.row(m) = (n1 * lu.solve(rhs)).transpose();
    }
    return words;
}

FrozenTextEncoder build_encoder(const ExperimentConfig& cfg, std::uint64_t seed) {
    return FrozenTextEncoder(cfg.model.d, mix_seed(seed, kEncoder), cfg.text);
}

World build_world(const ExperimentConfig& cfg, std::uint64_t seed) {
    World w{build_encoder(cfg, seed), {}, {}, {}, {}, std::nullopt};
    if (!cfg.train_dump.empty()) {
        FeatureDump tr = read_dump(cfg.train_dump);
        if (static_cast<int>(tr.d) != cfg.model.d || static_cast<int>(tr.M) != cfg.model.M ||
            static_cast<int>(tr.H) != cfg.model.H || static_cast<int>(tr.W) != cfg.model.W)
            throw DataError("train dump shape disagrees with config (d, classes, grid_h, grid_w)");
        w.class_words = dump_class_text(tr);
        w.background_init = dump_background(tr);
        w.train = dump_bundles(tr);
        auto load = [&](const std::string& path) {
            if (path.empty()) return Dataset{};
            FeatureDump dd = read_dump(path);
            if (dd.d != tr.d || dd.H != tr.H || dd.W != tr.W) throw DataError("dump '" + path + "' shape mismatch");
            return dump_bundles(dd);
        };
        w.id_test = load(cfg.id_dump);
        w.ood_test = load(cfg.ood_dump);
        return w;
    }
    SyntheticSpec spec = cfg.synth;
    spec.seed = mix_seed(seed, kData);
    if (w.encoder.bias().norm() > 0) spec.common_direction = normalize(w.encoder.bias());
    SyntheticData data = generate_synthetic(spec);
    w.class_words = derive_class_words(w.encoder, data.id_archetypes, cfg.model.N, cfg.misalignment, cfg.sharpness,
                                       mix_seed(seed, kWords));
    w.train = std::move(data.train);
    w.id_test = std::move(data.id_test);
    w.ood_test = std::move(data.ood_test);
    return w;
}

PromptSet initial_prompt(const ExperimentConfig& cfg, const World& world, std::uint64_t seed) {
    PromptSet p = PromptSet::initialize(cfg.model, world.class_words, mix_seed(seed, kPrompt));
    if (world.background_init) p.background.rowwise() = world.background_init->transpose();
    return p;
}

std::vector<AllScores> score_dataset(const Dataset& data, const Mat& class_features, const Vec& background_feature,
                                     const ModelConfig& mc) {
    std::vector<AllScores> out;
    out.reserve(data.size());
    for (const auto& b : data) out.push_back(score_all(b, class_features, background_feature, mc.q, mc.tau_test));
    return out;
}

double mean_extraction_iou(const Dataset& data, const PromptSet& prompt, const FrozenTextEncoder& encoder,
                           const ModelConfig& mc, const TrainConfig& tc) {
    const Mat G = encoder.encode_classes(prompt);
    const Vec gb = encoder.encode_background(prompt);
    double acc = 0.0;
    int n = 0;
    for (const auto& b : data) {
        if (!b.label || !b.background_mask) continue;
        SampleForward fw = forward_sample(b, G, gb, mc.tau, tc);
        acc += extraction_iou(fw.J, *b.background_mask);
        ++n;
    }
    if (n == 0) throw DataError("no labelled samples with masks to measure extraction IoU");
    return acc / n;
}

StrategyFlags strategy_flags(const std::string& name) {
    if (name == "baseline") return locoop_flags();
    if (name == "refinement") return {true, false, true};
    if (name == "sct") return {false, true, true};
    if (name == "full" || name == "untrained") return full_flags();
    throw ConfigError("unknown strategy '" + name + "' (expected baseline, refinement, sct, full or untrained)");
}

CellResult run_cell(const ExperimentConfig& cfg, const std::string& strategy, std::uint64_t seed) {
    ExperimentConfig c = cfg;
    c.model.seed = seed;
    c.train.flags = strategy_flags(strategy);
    const ScoreKind kind = parse_score_kind(c.score);
    World w = build_world(c, seed);
    PromptSet prompt = initial_prompt(c, w, seed);
    if (strategy != "untrained") prompt = train(w.train, c.model, c.train, w.encoder, prompt).prompt;

    const Mat G = w.encoder.encode_classes(prompt);
    const Vec gb = w.encoder.encode_background(prompt);
    auto id = score_dataset(w.id_test, G, gb, c.model);
    auto ood = score_dataset(w.ood_test, G, gb, c.model);
    auto pick = [](const std::vector<AllScores>& v, ScoreKind k) {
        std::vector<double> out;
        for (const auto& s : v) out.push_back(s.get(k));
        return out;
    };
    CellResult r;
    r.strategy = strategy;
    r.seed = seed;
    r.auroc_mcm = auroc(pick(id, ScoreKind::mcm), pick(ood, ScoreKind::mcm));
    r.auroc_glmcm = auroc(pick(id, ScoreKind::glmcm), pick(ood, ScoreKind::glmcm));
    r.auroc_rmcm = auroc(pick(id, ScoreKind::rmcm), pick(ood, ScoreKind::rmcm));
    r.auroc = auroc(pick(id, kind), pick(ood, kind));
    r.fpr95 = fpr95(pick(id, kind), pick(ood, kind));
    r.iou_train = mean_extraction_iou(w.train, prompt, w.encoder, c.model, c.train);
    r.iou_test = mean_extraction_iou(w.id_test, prompt, w.encoder, c.model, c.train);
    return r;
}

Summary summarize(const std::vector<double>& xs) {
    Summary s;
    if (xs.empty()) return s;
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double v = 0.0;
        for (double x : xs) v += (x - s.mean) * (x - s.mean);
        s.std = std::sqrt(v / static_cast<double>(xs.size() - 1));
    }
    return s;
}

BenchmarkResult run_benchmark(const ExperimentConfig& cfg) {
    cfg.validate();
    for (const auto& s : cfg.strategies) strategy_flags(s);
    std::vector<std::pair<std::string, std::uint64_t>> jobs;
    for (const auto& s : cfg.strategies)
        for (auto seed : cfg.seeds) jobs.emplace_back(s, seed);

    BenchmarkResult res;
    res.cells.resize(jobs.size());
    const std::size_t T = static_cast<std::size_t>(cfg.cell_threads);
    for (std::size_t start = 0; start < jobs.size(); start += T) {
        std::vector<std::future<CellResult>> fut;
        for (std::size_t j = start; j < std::min(jobs.size(), start + T); ++j)
            fut.push_back(std::async(T > 1 ? std::launch::async : std::launch::deferred,
                                     [&, j] { return run_cell(cfg, jobs[j].first, jobs[j].second); }));
        for (std::size_t j = 0; j < fut.size(); ++j) res.cells[start + j] = fut[j].get();
    }
    for (std::size_t s = 0; s < cfg.strategies.size(); ++s) {
        std::vector<double> f, a, it, ie;
        for (std::size_t k = 0; k < cfg.seeds.size(); ++k) {
            const auto& c = res.cells[s * cfg.seeds.size() + k];
            f.push_back(c.fpr95);
            a.push_back(c.auroc);
            it.push_back(c.iou_train);
            ie.push_back(c.iou_test);
        }
        res.rows.push_back({cfg.strategies[s], summarize(f), summarize(a), summarize(it), summarize(ie)});
    }
    return res;
}

std::string format_benchmark(const BenchmarkResult& r, const std::string& score) {
    std::ostringstream o;
    auto cell = [](const Summary& s) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.4f +- %.4f", s.mean, s.std);
        return std::string(buf);
    };
    o << "| strategy | FPR95 (" << score << ") | AUROC (" << score << ") | IoU train | IoU test |\n";
    o << "|---|---|---|---|---|\n";
    for (const auto& row : r.rows)
        o << "| " << row.strategy << " | " << cell(row.fpr95) << " | " << cell(row.auroc) << " | "
          << cell(row.iou_train) << " | " << cell(row.iou_test) << " |\n";
    return o.str();
}

ExperimentConfig default_benchmark_config() {
    ExperimentConfig c;
    c.strategies = {"baseline", "refinement", "sct", "full", "untrained"};
    return c;
}

}  // namespace mambo
