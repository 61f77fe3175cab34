#include "mambo/experiment.hpp"
#include "mambo/viz.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace mambo;

namespace {

enum Exit { kOk = 0, kUsage = 2, kData = 3, kInternal = 4 };

void apply_overrides(ExperimentConfig& cfg, const std::vector<std::string>& sets) {
    for (const auto& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
}

void write_text(const std::string& path, const std::string& s) {
    write_file_bytes(path, std::vector<unsigned char>(s.begin(), s.end()));
}

struct TrainArgs {
    std::string config, out, trace;
    std::vector<std::string> sets;
    int epochs = -1;
};

int cmd_train(const TrainArgs& a) {
    ExperimentConfig cfg = ExperimentConfig::load(a.config);
    apply_overrides(cfg, a.sets);
    if (a.epochs >= 0) cfg.train.epochs = a.epochs;
    cfg.validate();
    const std::uint64_t seed = cfg.model.seed;
    World w = build_world(cfg, seed);
    PromptSet init = initial_prompt(cfg, w, seed);
    TrainResult r = train(w.train, cfg.model, cfg.train, w.encoder, init);
    write_checkpoint(a.out, {cfg.to_text(), r.prompt});

    std::ostringstream tr;
    tr << "epoch,loss,ce,ood,bg_fraction\n";
    for (const auto& e : r.trace)
        tr << e.epoch << ',' << format_double(e.loss) << ',' << format_double(e.ce) << ',' << format_double(e.ood)
           << ',' << format_double(e.mean_bg_fraction) << '\n';
    write_text(a.trace.empty() ? a.out + ".trace.csv" : a.trace, tr.str());

    if (r.trace.empty()) {
        std::printf("epochs=0 steps=0 (checkpoint holds the initial prompts)\n");
    } else {
        const auto& e = r.trace.back();
        std::printf("epochs=%d steps=%d loss=%.6f ce=%.6f ood=%.6f bg_fraction=%.4f\n", e.epoch, r.steps, e.loss,
                    e.ce, e.ood, e.mean_bg_fraction);
    }
    if (r.floors.ce || r.floors.entropy)
        std::printf("probability floor hits: ce=%zu entropy=%zu\n", r.floors.ce, r.floors.entropy);
    return kOk;
}

struct Loaded {
    ExperimentConfig cfg;
    PromptSet prompt;
    FrozenTextEncoder encoder;
};

Loaded load_checkpoint(const std::string& path) {
    Checkpoint ck = read_checkpoint(path);
    ExperimentConfig cfg;
    try {
        cfg = ExperimentConfig::parse(ck.config_text);
    } catch (const ConfigError& e) {
        throw StructuralError(std::string("checkpoint config is unreadable: ") + e.what());
    }
    if (ck.prompt.context.cols() != cfg.model.d || ck.prompt.class_words.rows() != cfg.model.M)
        throw StructuralError("checkpoint tensors disagree with the embedded config");
    FrozenTextEncoder enc = build_encoder(cfg, cfg.model.seed);
    return {cfg, ck.prompt, enc};
}

struct EvalArgs {
    std::string checkpoint, id, ood, score = "rmcm", out;
};

int cmd_eval(const EvalArgs& a) {
    const ScoreKind kind = parse_score_kind(a.score);
    if (a.id.empty() != a.ood.empty()) throw ConfigError("--id and --ood must be given together");
    Loaded L = load_checkpoint(a.checkpoint);
    Dataset id, ood;
    if (!a.id.empty()) {
        id = dump_bundles(read_dump(a.id));
        ood = dump_bundles(read_dump(a.ood));
    } else {
        World w = build_world(L.cfg, L.cfg.model.seed);
        id = std::move(w.id_test);
        ood = std::move(w.ood_test);
    }
    if (id.empty() || ood.empty()) throw DataError("evaluation needs non-empty ID and OOD sets");
    for (const auto* set : {&id, &ood})
        for (const auto& b : *set) b.validate(L.cfg.model.d, L.cfg.model.patches());

    const Mat G = L.encoder.encode_classes(L.prompt);
    const Vec gb = L.encoder.encode_background(L.prompt);
    auto sid = score_dataset(id, G, gb, L.cfg.model);
    auto sood = score_dataset(ood, G, gb, L.cfg.model);

    std::ostringstream csv;
    csv << "sample_id,label_or_OOD,s_mcm,s_glmcm,s_rmcm\n";
    std::vector<double> vi, vo;
    auto row = [&](const std::string& name, const std::string& lab, const AllScores& s) {
        csv << csv_field(name) << ',' << csv_field(lab) << ',' << format_double(s.mcm) << ','
            << format_double(s.glmcm) << ',' << format_double(s.rmcm) << '\n';
    };
    for (std::size_t i = 0; i < id.size(); ++i) {
        row("id" + std::to_string(i), id[i].label ? std::to_string(*id[i].label) : "ID", sid[i]);
        vi.push_back(sid[i].get(kind));
    }
    for (std::size_t i = 0; i < ood.size(); ++i) {
        row("ood" + std::to_string(i), "OOD", sood[i]);
        vo.push_back(sood[i].get(kind));
    }
    DetectionReport rep = make_report(vi, vo);
    if (!a.out.empty()) write_text(a.out, csv.str());
    std::printf("score=%s gamma=%.17g\n", to_string(kind), rep.gamma);
    std::printf("FPR95=%.6f AUROC=%.6f\n", rep.fpr95, rep.auroc);
    return kOk;
}

struct VisArgs {
    std::string checkpoint, set = "train", out;
    int sample = 0;
};

int cmd_visualize(const VisArgs& a) {
    Loaded L = load_checkpoint(a.checkpoint);
    World w = build_world(L.cfg, L.cfg.model.seed);
    const Dataset* data = a.set == "train" ? &w.train : a.set == "id" ? &w.id_test : a.set == "ood" ? &w.ood_test : nullptr;
    if (!data) throw ConfigError("--set must be train, id or ood");
    if (a.sample < 0 || a.sample >= static_cast<int>(data->size()))
        throw ConfigError("--sample " + std::to_string(a.sample) + " out of range for set '" + a.set + "'");
    FeatureBundle b = (*data)[static_cast<std::size_t>(a.sample)];
    const Mat G = L.encoder.encode_classes(L.prompt);
    const Vec gb = L.encoder.encode_background(L.prompt);
    if (!b.label) {
        // No ground truth: refine toward the predicted class.
        Vec probs = global_probability(b.global, G, L.cfg.model.tau).probs;
        Eigen::Index arg;
        probs.maxCoeff(&arg);
        b.label = static_cast<int>(arg);
    }
    SampleForward fw = forward_sample(b, G, gb, L.cfg.model.tau, L.cfg.train);
    Vec delta = fw.delta.size() ? fw.delta : refinement_weights(fw.maps.class_sim.col(*b.label));
    const std::string id = a.set + std::to_string(a.sample);
    write_sample_maps(a.out, id, fw.maps.refined_sim, delta, fw.J, L.cfg.model.H, L.cfg.model.W);
    std::printf("wrote %s/%s_{sim,mask,delta} label=%d p=%.6f |J|=%zu", a.out.c_str(), id.c_str(), *b.label,
                fw.loss.p, fw.J.indices.size());
    if (b.background_mask) std::printf(" iou=%.6f", extraction_iou(fw.J, *b.background_mask));
    std::printf("\n");
    return kOk;
}

struct BenchArgs {
    std::string config, out, strategies, seeds;
    std::vector<std::string> sets;
};

int cmd_benchmark(const BenchArgs& a) {
    ExperimentConfig cfg = a.config.empty() ? default_benchmark_config() : ExperimentConfig::load(a.config);
    apply_overrides(cfg, a.sets);
    if (!a.strategies.empty()) cfg.set("strategies", a.strategies);
    if (!a.seeds.empty()) cfg.set("seeds", a.seeds);
    BenchmarkResult r = run_benchmark(cfg);
    std::string table = format_benchmark(r, cfg.score);
    std::ostringstream cells;
    cells << "strategy,seed,fpr95,auroc,iou_train,iou_test,auroc_mcm,auroc_glmcm,auroc_rmcm\n";
    for (const auto& c : r.cells)
        cells << c.strategy << ',' << c.seed << ',' << format_double(c.fpr95) << ',' << format_double(c.auroc) << ','
              << format_double(c.iou_train) << ',' << format_double(c.iou_test) << ','
              << format_double(c.auroc_mcm) << ',' << format_double(c.auroc_glmcm) << ','
              << format_double(c.auroc_rmcm) << '\n';
    std::fputs(table.c_str(), stdout);
    if (!a.out.empty()) {
        write_text(a.out, table);
        write_text(a.out + ".cells.csv", cells.str());
    }
    return kOk;
}

struct GenArgs {
    std::string config, out;
    std::vector<std::string> sets;
};

int cmd_generate(const GenArgs& a) {
    ExperimentConfig cfg = ExperimentConfig::load(a.config);
    apply_overrides(cfg, a.sets);
    cfg.validate();
    if (!cfg.train_dump.empty()) throw ConfigError("generate builds a synthetic world; unset train_dump");
    World w = build_world(cfg, cfg.model.seed);
    PromptSet init = initial_prompt(cfg, w, cfg.model.seed);
    // Class text as a frozen model would see it before any prompt learning.
    PromptSet zero = init;
    zero.context.setZero();
    const Mat text = w.encoder.encode_classes(zero);
    const Vec gb = w.encoder.encode_background(init);
    const int H = cfg.model.H, W = cfg.model.W;
    write_dump(a.out + "_train.mmbo", make_dump(w.train, text, &gb, H, W));
    write_dump(a.out + "_id.mmbo", make_dump(w.id_test, text, &gb, H, W));
    write_dump(a.out + "_ood.mmbo", make_dump(w.ood_test, text, &gb, H, W));
    std::printf("wrote %s_{train,id,ood}.mmbo (%zu/%zu/%zu samples)\n", a.out.c_str(), w.train.size(),
                w.id_test.size(), w.ood_test.size());
    return kOk;
}

template <class F>
int guarded(F&& f) {
    try {
        return f();
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kUsage;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kData;
    } catch (const InvariantError& e) {
        std::fprintf(stderr, "invariant violation: %s\n", e.what());
        return kInternal;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kInternal;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Foreground-background decomposition prompt learning for few-shot OOD detection"};
    app.require_subcommand(1);

    TrainArgs ta;
    auto* train_cmd = app.add_subcommand("train", "Train prompts; writes a checkpoint and a loss-trace CSV");
    train_cmd->add_option("config", ta.config, "Config file (key=value)")->required();
    train_cmd->add_option("--out", ta.out, "Checkpoint path")->required();
    train_cmd->add_option("--trace", ta.trace, "Loss-trace CSV path (default <out>.trace.csv)");
    train_cmd->add_option("--epochs", ta.epochs, "Override the epoch count");
    train_cmd->add_option("--set", ta.sets, "Override a config key (key=value), repeatable");

    EvalArgs ea;
    auto* eval_cmd = app.add_subcommand("eval", "Score ID/OOD sets; prints FPR95 and AUROC");
    eval_cmd->add_option("checkpoint", ea.checkpoint, "Checkpoint path")->required();
    eval_cmd->add_option("--id", ea.id, "ID feature dump (default: synthetic ID test set)");
    eval_cmd->add_option("--ood", ea.ood, "OOD feature dump (default: synthetic OOD test set)");
    eval_cmd->add_option("--score", ea.score, "Score: mcm, glmcm or rmcm");
    eval_cmd->add_option("--out", ea.out, "Per-sample score CSV path");

    VisArgs va;
    auto* vis_cmd = app.add_subcommand("visualize", "Write similarity, mask and delta maps for one sample");
    vis_cmd->add_option("checkpoint", va.checkpoint, "Checkpoint path")->required();
    vis_cmd->add_option("--sample", va.sample, "Sample index within the set");
    vis_cmd->add_option("--set", va.set, "Sample set: train, id or ood");
    vis_cmd->add_option("--out", va.out, "Output directory")->required();

    BenchArgs ba;
    auto* bench_cmd = app.add_subcommand("benchmark", "Run the strategy x seed ablation grid");
    bench_cmd->add_option("config", ba.config, "Config file (default: built-in benchmark)");
    bench_cmd->add_option("--strategies", ba.strategies, "Comma list of baseline, refinement, sct, full, untrained");
    bench_cmd->add_option("--seeds", ba.seeds, "Comma list of seeds");
    bench_cmd->add_option("--set", ba.sets, "Override a config key (key=value), repeatable");
    bench_cmd->add_option("--out", ba.out, "Write the table here and per-cell results to <out>.cells.csv");

    GenArgs ga;
    auto* gen_cmd = app.add_subcommand("generate", "Write the synthetic world as feature dumps");
    gen_cmd->add_option("config", ga.config, "Config file")->required();
    gen_cmd->add_option("--out", ga.out, "Output prefix")->required();
    gen_cmd->add_option("--set", ga.sets, "Override a config key (key=value), repeatable");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }
    if (train_cmd->parsed()) return guarded([&] { return cmd_train(ta); });
    if (eval_cmd->parsed()) return guarded([&] { return cmd_eval(ea); });
    if (vis_cmd->parsed()) return guarded([&] { return cmd_visualize(va); });
    if (bench_cmd->parsed()) return guarded([&] { return cmd_benchmark(ba); });
    if (gen_cmd->parsed()) return guarded([&] { return cmd_generate(ga); });
    return kUsage;
}
