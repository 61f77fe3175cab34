#include "mambo/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

namespace mambo {

// ---------------------------------------------------------------- synthetic

void SyntheticSpec::validate() const {
    auto need = [](bool ok, const char* msg) {
        if (!ok) throw ConfigError(msg);
    };
    need(M >= 1, "num_classes must be >= 1");
    need(d >= M + 2, "synthetic d must be >= classes + 2");
    need(num_ood_classes >= 1, "ood_classes must be >= 1");
    need(shots >= 1, "shots must be >= 1");
    need(eval_per_class >= 1, "eval_per_class must be >= 1");
    need(H >= 1 && W >= 1, "grid dimensions must be >= 1");
    need(pool_size >= 1, "pool must be >= 1");
    need(coverage_min > 0 && coverage_min <= coverage_max && coverage_max <= 1.0,
         "coverage range must satisfy 0 < coverage_min <= coverage_max <= 1");
    need(noise >= 0 && std::isfinite(noise), "noise must be >= 0");
    need(common_weight >= 0 && std::isfinite(common_weight), "common_weight must be >= 0");
    need(near_ood >= 0 && near_ood < 1, "near_ood must lie in [0, 1)");
    need(common_direction.size() == 0 || common_direction.size() == d, "common direction has wrong dimension");
}

namespace {

Vec gaussian(std::mt19937_64& rng, int d) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Vec v(d);
    for (int i = 0; i < d; ++i) v[i] = nd(rng);
    return v;
}

// Random unit direction orthogonal to u.
Vec orthogonal_direction(std::mt19937_64& rng, const Vec& u) {
    Vec v = gaussian(rng, static_cast<int>(u.size()));
    v -= u * u.dot(v);
    return normalize(v);
}

struct Grid {
    const SyntheticSpec& spec;
    const Mat& bg;
    std::mt19937_64& rng;

    FeatureBundle make(const Vec& archetype, std::optional<int> label) {
        const int n = spec.H * spec.W;
        const int d = spec.d;
        std::uniform_real_distribution<double> cov(spec.coverage_min, spec.coverage_max);
        const int nf = std::clamp(static_cast<int>(std::lround(cov(rng) * n)), 1, n);
        std::vector<int> pos(n);
        std::iota(pos.begin(), pos.end(), 0);
        std::shuffle(pos.begin(), pos.end(), rng);
        std::vector<bool> is_bg(n, true);
        for (int i = 0; i < nf; ++i) is_bg[pos[i]] = false;
        std::uniform_int_distribution<int> pick(0, static_cast<int>(bg.rows()) - 1);
        const double ns = spec.noise / std::sqrt(static_cast<double>(d));

        FeatureBundle b;
        b.local.resize(n, d);
        Vec sum = Vec::Zero(d);
        for (int i = 0; i < n; ++i) {
            Vec base = is_bg[i] ? Vec(bg.row(pick(rng)).transpose()) : archetype;
            Vec v = ns > 0 ? Vec(base + ns * gaussian(rng, d)) : base;
            v = normalize(v);
            b.local.row(i) = v.transpose();
            sum += v;
        }
        b.global = normalize(sum);
        b.label = label;
        b.background_mask = is_bg;
        return b;
    }
};

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    const int d = spec.d;
    Vec u = spec.common_direction.size() ? normalize(spec.common_direction) : normalize(gaussian(rng, d));

    auto with_common = [&](const Vec& dir) { return normalize(spec.common_weight * u + dir); };

    SyntheticData out;
    out.id_archetypes.resize(spec.M, d);
    Mat id_dirs(spec.M, d);
    for (int m = 0; m < spec.M; ++m) {
        id_dirs.row(m) = orthogonal_direction(rng, u).transpose();
        out.id_archetypes.row(m) = with_common(id_dirs.row(m).transpose()).transpose();
    }
    out.ood_archetypes.resize(spec.num_ood_classes, d);
    // OOD-specific directions avoid u and every ID direction.
    Mat span(d, spec.M + 1);
    span << u, id_dirs.transpose();
    const Mat basis = Eigen::HouseholderQR<Mat>(span).householderQ() * Mat::Identity(d, spec.M + 1);
    const double own = std::sqrt(1.0 - spec.near_ood * spec.near_ood);
    for (int k = 0; k < spec.num_ood_classes; ++k) {
        Vec fresh = gaussian(rng, d);
        fresh -= basis * (basis.transpose() * fresh);
        Vec mix = spec.near_ood * id_dirs.row(k % spec.M).transpose() + own * normalize(fresh);
        out.ood_archetypes.row(k) = with_common(mix).transpose();
    }
    out.bg_archetypes.resize(spec.pool_size, d);
    for (int j = 0; j < spec.pool_size; ++j)
        out.bg_archetypes.row(j) = with_common(orthogonal_direction(rng, u)).transpose();

    Mat all(spec.M + spec.num_ood_classes, d);
    all << out.id_archetypes, out.ood_archetypes;
    for (Eigen::Index i = 0; i < all.rows(); ++i)
        for (Eigen::Index j = i + 1; j < all.rows(); ++j)
            if ((all.row(i) - all.row(j)).norm() < 1e-9) throw InvariantError("duplicate archetypes drawn");

    Grid grid{spec, out.bg_archetypes, rng};
    for (int m = 0; m < spec.M; ++m)
        for (int s = 0; s < spec.shots; ++s) out.train.push_back(grid.make(out.id_archetypes.row(m).transpose(), m));
    for (int m = 0; m < spec.M; ++m)
        for (int s = 0; s < spec.eval_per_class; ++s)
            out.id_test.push_back(grid.make(out.id_archetypes.row(m).transpose(), m));
    for (int k = 0; k < spec.num_ood_classes; ++k)
        for (int s = 0; s < spec.eval_per_class; ++s)
            out.ood_test.push_back(grid.make(out.ood_archetypes.row(k).transpose(), std::nullopt));
    return out;
}

double extraction_iou(const BackgroundSet& J, const std::vector<bool>& true_background) {
    const int n = static_cast<int>(true_background.size());
    int inter = 0, uni = 0;
    std::vector<bool> inJ(n, false);
    for (int k : J.indices) {
        if (k < 0 || k >= n) throw IndexError("background index out of range");
        inJ[k] = true;
    }
    for (int i = 0; i < n; ++i) {
        inter += inJ[i] && true_background[i];
        uni += inJ[i] || true_background[i];
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
}

// ---------------------------------------------------------------- bytes

namespace {

constexpr char kDumpMagic[4] = {'M', 'M', 'B', 'O'};
constexpr char kCkptMagic[4] = {'M', 'M', 'B', 'C'};
constexpr std::uint16_t kCkptVersion = 1;
constexpr double kDumpNormTol = 1e-3;

struct Writer {
    std::vector<unsigned char> buf;
    void raw(const void* p, std::size_t n) {
        auto c = static_cast<const unsigned char*>(p);
        buf.insert(buf.end(), c, c + n);
    }
    void u8(std::uint8_t v) { buf.push_back(v); }
    void u16(std::uint16_t v) {
        for (int i = 0; i < 2; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f32(float f) {
        std::uint32_t v;
        std::memcpy(&v, &f, 4);
        u32(v);
    }
    void f64(double f) {
        std::uint64_t v;
        std::memcpy(&v, &f, 8);
        u64(v);
    }
};

struct Reader {
    const std::vector<unsigned char>& buf;
    std::size_t pos = 0;
    void need(std::size_t n) {
        if (buf.size() - pos < n) throw TruncatedFileError("unexpected end of file at byte " + std::to_string(pos));
    }
    std::uint64_t le(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(buf[pos + i]) << (8 * i);
        pos += static_cast<std::size_t>(n);
        return v;
    }
    std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    float f32() {
        std::uint32_t v = u32();
        float f;
        std::memcpy(&f, &v, 4);
        return f;
    }
    double f64() {
        std::uint64_t v = le(8);
        double f;
        std::memcpy(&f, &v, 8);
        return f;
    }
};

// Checked a*b and a+b on sizes.
std::uint64_t mul(std::uint64_t a, std::uint64_t b) {
    if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a)
        throw StructuralError("declared sizes overflow");
    return a * b;
}
std::uint64_t add(std::uint64_t a, std::uint64_t b) {
    if (b > std::numeric_limits<std::uint64_t>::max() - a) throw StructuralError("declared sizes overflow");
    return a + b;
}

void check_unit(const float* v, std::uint32_t d, const std::string& what) {
    double s = 0.0;
    for (std::uint32_t i = 0; i < d; ++i) {
        if (!std::isfinite(v[i])) throw NormViolationError(what + " has a non-finite entry");
        s += static_cast<double>(v[i]) * v[i];
    }
    if (std::abs(std::sqrt(s) - 1.0) > kDumpNormTol) throw NormViolationError(what + " is not unit-norm");
}

std::vector<float> to_f32(const double* p, std::size_t n) {
    std::vector<float> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(p[i]);
    return out;
}

Vec from_f32(const float* p, std::size_t n) {
    Vec v(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) v[static_cast<Eigen::Index>(i)] = p[i];
    return normalize(v);
}

}  // namespace

std::vector<unsigned char> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    return std::vector<unsigned char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------- dump

std::vector<unsigned char> serialize_dump(const FeatureDump& dump) {
    const std::size_t d = dump.d, hw = static_cast<std::size_t>(dump.H) * dump.W;
    if (dump.class_text.size() != static_cast<std::size_t>(dump.M) * d) throw ShapeError("class text size mismatch");
    if (dump.background && dump.background->size() != d) throw ShapeError("background feature size mismatch");
    Writer w;
    w.raw(kDumpMagic, 4);
    w.u16(kDumpVersion);
    w.u16(static_cast<std::uint16_t>((dump.background ? kDumpFlagBackground : 0) |
                                     (dump.has_masks ? kDumpFlagMasks : 0)));
    w.u32(dump.d);
    w.u32(dump.M);
    w.u32(dump.H);
    w.u32(dump.W);
    w.u32(static_cast<std::uint32_t>(dump.records.size()));
    for (float f : dump.class_text) w.f32(f);
    if (dump.background)
        for (float f : *dump.background) w.f32(f);
    for (const auto& r : dump.records) {
        if (r.global.size() != d || r.local.size() != hw * d) throw ShapeError("record size mismatch");
        if (dump.has_masks != (r.mask.size() == hw)) throw ShapeError("record mask size mismatch");
        w.i32(r.label);
        for (float f : r.global) w.f32(f);
        for (float f : r.local) w.f32(f);
        for (auto m : r.mask) w.u8(m);
    }
    return std::move(w.buf);
}

FeatureDump parse_dump(const std::vector<unsigned char>& bytes) {
    Reader r{bytes};
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kDumpMagic, 4) != 0) throw BadMagicError("not a feature dump");
    r.pos = 4;
    const std::uint16_t version = r.u16();
    if (version != kDumpVersion)
        throw VersionMismatchError("unsupported dump version " + std::to_string(version));
    const std::uint16_t flags = r.u16();
    if (flags & ~(kDumpFlagBackground | kDumpFlagMasks)) throw StructuralError("unknown flag bits in dump header");
    FeatureDump dump;
    dump.d = r.u32();
    dump.M = r.u32();
    dump.H = r.u32();
    dump.W = r.u32();
    const std::uint32_t count = r.u32();
    if (dump.d == 0 || dump.M == 0 || dump.H == 0 || dump.W == 0)
        throw StructuralError("dump header declares a zero dimension");
    dump.has_masks = flags & kDumpFlagMasks;
    const bool has_bg = flags & kDumpFlagBackground;

    const std::uint64_t hw = mul(dump.H, dump.W);
    const std::uint64_t rec_floats = add(dump.d, mul(hw, dump.d));
    const std::uint64_t rec_bytes = add(add(4, mul(4, rec_floats)), dump.has_masks ? hw : 0);
    std::uint64_t expected = add(r.pos, mul(4, mul(dump.M, dump.d)));
    if (has_bg) expected = add(expected, mul(4, dump.d));
    expected = add(expected, mul(rec_bytes, count));
    if (bytes.size() < expected) throw TruncatedFileError("file shorter than its header declares");
    if (bytes.size() > expected) throw StructuralError("file longer than its header declares");

    auto read_floats = [&](std::vector<float>& v, std::uint64_t n) {
        v.resize(static_cast<std::size_t>(n));
        for (auto& f : v) f = r.f32();
    };
    read_floats(dump.class_text, mul(dump.M, dump.d));
    for (std::uint32_t m = 0; m < dump.M; ++m)
        check_unit(dump.class_text.data() + static_cast<std::size_t>(m) * dump.d, dump.d,
                   "class text feature " + std::to_string(m));
    if (has_bg) {
        dump.background.emplace();
        read_floats(*dump.background, dump.d);
        check_unit(dump.background->data(), dump.d, "background feature");
    }
    dump.records.resize(count);
    for (std::uint32_t s = 0; s < count; ++s) {
        auto& rec = dump.records[s];
        rec.label = r.i32();
        if (rec.label < -1 || rec.label >= static_cast<std::int64_t>(dump.M))
            throw StructuralError("record " + std::to_string(s) + " has an invalid label");
        read_floats(rec.global, dump.d);
        read_floats(rec.local, mul(hw, dump.d));
        const std::string tag = "record " + std::to_string(s);
        check_unit(rec.global.data(), dump.d, tag + " global feature");
        for (std::uint64_t i = 0; i < hw; ++i)
            check_unit(rec.local.data() + i * dump.d, dump.d, tag + " patch " + std::to_string(i));
        if (dump.has_masks) {
            rec.mask.resize(static_cast<std::size_t>(hw));
            for (auto& m : rec.mask) {
                m = r.u8();
                if (m > 1) throw StructuralError(tag + " has a mask byte other than 0/1");
            }
        }
    }
    return dump;
}

void write_dump(const std::string& path, const FeatureDump& dump) { write_file_bytes(path, serialize_dump(dump)); }

FeatureDump read_dump(const std::string& path) { return parse_dump(read_file_bytes(path)); }

FeatureDump make_dump(const Dataset& data, const Mat& class_text, const Vec* background, int H, int W) {
    FeatureDump dump;
    dump.d = static_cast<std::uint32_t>(class_text.cols());
    dump.M = static_cast<std::uint32_t>(class_text.rows());
    dump.H = static_cast<std::uint32_t>(H);
    dump.W = static_cast<std::uint32_t>(W);
    dump.class_text = to_f32(class_text.data(), static_cast<std::size_t>(class_text.size()));
    if (background) dump.background = to_f32(background->data(), static_cast<std::size_t>(background->size()));
    dump.has_masks = !data.empty() && std::all_of(data.begin(), data.end(),
                                                   [](const FeatureBundle& b) { return b.background_mask.has_value(); });
    for (const auto& b : data) {
        b.validate(class_text.cols(), H * W, 1e-6);
        DumpRecord rec;
        rec.label = b.label ? *b.label : -1;
        rec.global = to_f32(b.global.data(), static_cast<std::size_t>(b.global.size()));
        rec.local = to_f32(b.local.data(), static_cast<std::size_t>(b.local.size()));
        if (dump.has_masks)
            for (bool m : *b.background_mask) rec.mask.push_back(m ? 1 : 0);
        dump.records.push_back(std::move(rec));
    }
    return dump;
}

Dataset dump_bundles(const FeatureDump& dump) {
    const std::size_t d = dump.d, hw = static_cast<std::size_t>(dump.H) * dump.W;
    Dataset out;
    out.reserve(dump.records.size());
    for (const auto& rec : dump.records) {
        FeatureBundle b;
        b.global = from_f32(rec.global.data(), d);
        b.local.resize(static_cast<Eigen::Index>(hw), static_cast<Eigen::Index>(d));
        for (std::size_t i = 0; i < hw; ++i)
            b.local.row(static_cast<Eigen::Index>(i)) = from_f32(rec.local.data() + i * d, d).transpose();
        if (rec.label >= 0) b.label = rec.label;
        if (!rec.mask.empty()) {
            std::vector<bool> m(hw);
            for (std::size_t i = 0; i < hw; ++i) m[i] = rec.mask[i] != 0;
            b.background_mask = std::move(m);
        }
        out.push_back(std::move(b));
    }
    return out;
}

Mat dump_class_text(const FeatureDump& dump) {
    Mat g(dump.M, dump.d);
    for (std::uint32_t m = 0; m < dump.M; ++m)
        g.row(m) = from_f32(dump.class_text.data() + static_cast<std::size_t>(m) * dump.d, dump.d).transpose();
    return g;
}

std::optional<Vec> dump_background(const FeatureDump& dump) {
    if (!dump.background) return std::nullopt;
    return from_f32(dump.background->data(), dump.d);
}

// ---------------------------------------------------------------- checkpoint

void write_checkpoint(const std::string& path, const Checkpoint& ck) {
    const auto& p = ck.prompt;
    Writer w;
    w.raw(kCkptMagic, 4);
    w.u16(kCkptVersion);
    w.u16(0);
    w.u32(static_cast<std::uint32_t>(ck.config_text.size()));
    w.raw(ck.config_text.data(), ck.config_text.size());
    w.u32(static_cast<std::uint32_t>(p.context.rows()));
    w.u32(static_cast<std::uint32_t>(p.background.rows()));
    w.u32(static_cast<std::uint32_t>(p.class_words.rows()));
    w.u32(static_cast<std::uint32_t>(p.context.cols()));
    for (const Mat* m : {&p.context, &p.class_words, &p.background})
        for (Eigen::Index i = 0; i < m->size(); ++i) w.f64(m->data()[i]);
    write_file_bytes(path, w.buf);
}

Checkpoint read_checkpoint(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    Reader r{bytes};
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kCkptMagic, 4) != 0) throw BadMagicError("not a checkpoint");
    r.pos = 4;
    const std::uint16_t version = r.u16();
    if (version != kCkptVersion) throw VersionMismatchError("unsupported checkpoint version");
    if (r.u16() != 0) throw StructuralError("unknown checkpoint flags");
    const std::uint32_t len = r.u32();
    r.need(len);
    Checkpoint ck;
    ck.config_text.assign(reinterpret_cast<const char*>(bytes.data() + r.pos), len);
    r.pos += len;
    const std::uint32_t N = r.u32(), L = r.u32(), M = r.u32(), d = r.u32();
    if (N == 0 || L == 0 || M == 0 || d == 0) throw StructuralError("checkpoint declares a zero dimension");
    const std::uint64_t total = mul(8, mul(add(add(N, M), L), d));
    if (bytes.size() - r.pos < total) throw TruncatedFileError("checkpoint shorter than declared");
    if (bytes.size() - r.pos > total) throw StructuralError("checkpoint longer than declared");
    auto fill = [&](Mat& m, std::uint32_t rows) {
        m.resize(rows, d);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.f64();
    };
    fill(ck.prompt.context, N);
    fill(ck.prompt.class_words, M);
    fill(ck.prompt.background, L);
    return ck;
}

// ---------------------------------------------------------------- text

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace mambo
