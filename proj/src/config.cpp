#include "mambo/config.hpp"

#include "mambo/scoring.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace mambo {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const char* what) {
    throw ConfigError("config key '" + key + "': " + what + " (got '" + value + "')");
}

long long to_int(const std::string& key, const std::string& v) {
    long long out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) bad(key, v, "expected an integer");
    return out;
}

int to_i32(const std::string& key, const std::string& v) {
    const long long x = to_int(key, v);
    if (x < -2147483647LL || x > 2147483647LL) bad(key, v, "integer out of range");
    return static_cast<int>(x);
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) bad(key, v, "expected a non-negative integer");
    return out;
}

double to_real(const std::string& key, const std::string& v) {
    if (v.empty()) bad(key, v, "expected a number");
    std::size_t used = 0;
    double out = 0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        bad(key, v, "expected a number");
    }
    if (used != v.size() || !std::isfinite(out)) bad(key, v, "expected a finite number");
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    bad(key, v, "expected true or false");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string fmt(double v) { return format_double(v); }

}  // namespace

void ExperimentConfig::set(const std::string& key, const std::string& value) {
    const std::string& v = value;
    auto& m = model;
    auto& t = train;
    auto& s = synth;
    if (key == "seed") m.seed = to_u64(key, v);
    else if (key == "d") m.d = s.d = to_i32(key, v);
    else if (key == "classes") m.M = s.M = to_i32(key, v);
    else if (key == "grid_h") m.H = s.H = to_i32(key, v);
    else if (key == "grid_w") m.W = s.W = to_i32(key, v);
    else if (key == "context_len") m.N = to_i32(key, v);
    else if (key == "background_len") m.L = to_i32(key, v);
    else if (key == "tau") m.tau = to_real(key, v);
    else if (key == "tau_test") m.tau_test = to_real(key, v);
    else if (key == "lambda") m.lambda = t.lambda = to_real(key, v);
    else if (key == "alpha") m.alpha = t.alpha = to_real(key, v);
    else if (key == "topk") m.K = t.K = to_i32(key, v);
    else if (key == "rmcm_q") m.q = to_i32(key, v);
    else if (key == "lr") t.learning_rate = to_real(key, v);
    else if (key == "epochs") t.epochs = to_i32(key, v);
    else if (key == "batch") t.batch_size = to_i32(key, v);
    else if (key == "shots") t.shots = s.shots = to_i32(key, v);
    else if (key == "use_refinement") t.flags.use_refinement = to_bool(key, v);
    else if (key == "use_patch_sct") t.flags.use_patch_sct = to_bool(key, v);
    else if (key == "use_loss_modulation") t.flags.use_loss_modulation = to_bool(key, v);
    else if (key == "grad_through_p") t.grad_through_p = to_bool(key, v);
    else if (key == "threads") t.threads = to_i32(key, v);
    else if (key == "text_gain") text.gain = to_real(key, v);
    else if (key == "text_bias") text.bias_scale = to_real(key, v);
    else if (key == "text_nonlinearity") {
        if (v == "tanh") text.nonlinearity = Nonlinearity::tanh;
        else if (v == "identity") text.nonlinearity = Nonlinearity::identity;
        else bad(key, v, "expected tanh or identity");
    } else if (key == "text_projection") {
        if (v == "random") text.identity_projection = false;
        else if (v == "identity") text.identity_projection = true;
        else bad(key, v, "expected random or identity");
    }
    else if (key == "misalignment") misalignment = to_real(key, v);
    else if (key == "sharpness") sharpness = to_real(key, v);
    else if (key == "ood_classes") s.num_ood_classes = to_i32(key, v);
    else if (key == "eval_per_class") s.eval_per_class = to_i32(key, v);
    else if (key == "pool") s.pool_size = to_i32(key, v);
    else if (key == "coverage_min") s.coverage_min = to_real(key, v);
    else if (key == "coverage_max") s.coverage_max = to_real(key, v);
    else if (key == "noise") s.noise = to_real(key, v);
    else if (key == "common_weight") s.common_weight = to_real(key, v);
    else if (key == "near_ood") s.near_ood = to_real(key, v);
    else if (key == "train_dump") train_dump = v;
    else if (key == "id_dump") id_dump = v;
    else if (key == "ood_dump") ood_dump = v;
    else if (key == "seeds") {
        seeds.clear();
        for (const auto& x : split_list(v)) seeds.push_back(to_u64(key, x));
    } else if (key == "strategies") strategies = split_list(v);
    else if (key == "score") score = v;
    else if (key == "cell_threads") cell_threads = to_i32(key, v);
    else throw ConfigError("unknown config key '" + key + "'");
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
    ExperimentConfig cfg;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        if (!seen.insert(key).second) throw ConfigError("config key '" + key + "' given twice");
        cfg.set(key, trim(line.substr(eq + 1)));
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::string ExperimentConfig::to_text() const {
    std::ostringstream o;
    auto b = [](bool x) { return x ? "true" : "false"; };
    o << "seed=" << model.seed << "\n"
      << "d=" << model.d << "\n"
      << "classes=" << model.M << "\n"
      << "grid_h=" << model.H << "\n"
      << "grid_w=" << model.W << "\n"
      << "context_len=" << model.N << "\n"
      << "background_len=" << model.L << "\n"
      << "tau=" << fmt(model.tau) << "\n"
      << "tau_test=" << fmt(model.tau_test) << "\n"
      << "lambda=" << fmt(model.lambda) << "\n"
      << "alpha=" << fmt(model.alpha) << "\n"
      << "topk=" << model.K << "\n"
      << "rmcm_q=" << model.q << "\n"
      << "lr=" << fmt(train.learning_rate) << "\n"
      << "epochs=" << train.epochs << "\n"
      << "batch=" << train.batch_size << "\n"
      << "shots=" << train.shots << "\n"
      << "use_refinement=" << b(train.flags.use_refinement) << "\n"
      << "use_patch_sct=" << b(train.flags.use_patch_sct) << "\n"
      << "use_loss_modulation=" << b(train.flags.use_loss_modulation) << "\n"
      << "grad_through_p=" << b(train.grad_through_p) << "\n"
      << "threads=" << train.threads << "\n"
      << "text_gain=" << fmt(text.gain) << "\n"
      << "text_bias=" << fmt(text.bias_scale) << "\n"
      << "text_nonlinearity=" << (text.nonlinearity == Nonlinearity::tanh ? "tanh" : "identity") << "\n"
      << "text_projection=" << (text.identity_projection ? "identity" : "random") << "\n"
      << "misalignment=" << fmt(misalignment) << "\n"
      << "sharpness=" << fmt(sharpness) << "\n"
      << "ood_classes=" << synth.num_ood_classes << "\n"
      << "eval_per_class=" << synth.eval_per_class << "\n"
      << "pool=" << synth.pool_size << "\n"
      << "coverage_min=" << fmt(synth.coverage_min) << "\n"
      << "coverage_max=" << fmt(synth.coverage_max) << "\n"
      << "noise=" << fmt(synth.noise) << "\n"
      << "common_weight=" << fmt(synth.common_weight) << "\n"
      << "near_ood=" << fmt(synth.near_ood) << "\n"
      << "train_dump=" << train_dump << "\n"
      << "id_dump=" << id_dump << "\n"
      << "ood_dump=" << ood_dump << "\n";
    o << "seeds=";
    for (std::size_t i = 0; i < seeds.size(); ++i) o << (i ? "," : "") << seeds[i];
    o << "\nstrategies=";
    for (std::size_t i = 0; i < strategies.size(); ++i) o << (i ? "," : "") << strategies[i];
    o << "\nscore=" << score << "\n"
      << "cell_threads=" << cell_threads << "\n";
    return o.str();
}

void ExperimentConfig::validate() const {
    model.validate();
    train.validate();
    if (train.K != model.K || train.lambda != model.lambda || train.alpha != model.alpha)
        throw ConfigError("training and model hyperparameters disagree");
    if (train_dump.empty()) synth.validate();
    if (!(misalignment >= 0)) throw ConfigError("config key 'misalignment': must be >= 0");
    if (!(sharpness > 0)) throw ConfigError("config key 'sharpness': must be > 0");
    if (seeds.empty()) throw ConfigError("config key 'seeds': need at least one seed");
    if (cell_threads < 1) throw ConfigError("config key 'cell_threads': must be >= 1");
    parse_score_kind(score);
}

}  // namespace mambo
