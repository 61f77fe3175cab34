#include "mambo/encoders.hpp"

#include <cmath>
#include <cstring>
#include <random>

namespace mambo {

std::uint64_t hash_doubles(const double* data, std::size_t n, std::uint64_t h) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n * sizeof(double); ++i) {
        h ^= bytes[i];
        h *= 1099511628211ULL;
    }
    return h;
}

FrozenTextEncoder::FrozenTextEncoder(int d, std::uint64_t seed, const TextEncoderOptions& opts) {
    if (d < 1) throw ConfigError("text encoder dimension must be >= 1");
    nl_ = opts.nonlinearity;
    if (opts.identity_projection) {
        proj_ = Mat::Identity(d, d);
        bias_ = Vec::Zero(d);
        return;
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    proj_.resize(d, d);
    const double s = opts.gain / std::sqrt(static_cast<double>(d));
    for (Eigen::Index i = 0; i < proj_.size(); ++i) proj_.data()[i] = s * nd(rng);
    Vec dir(d);
    for (int i = 0; i < d; ++i) dir[i] = nd(rng);
    bias_ = opts.bias_scale * normalize(dir);
}

FrozenTextEncoder FrozenTextEncoder::identity(int d) {
    FrozenTextEncoder e;
    e.proj_ = Mat::Identity(d, d);
    e.bias_ = Vec::Zero(d);
    e.nl_ = Nonlinearity::identity;
    return e;
}

Vec FrozenTextEncoder::preactivation(const Vec& pooled) const {
    if (pooled.size() != dim()) throw ShapeError("token dimension mismatch");
    return proj_ * pooled + bias_;
}

Vec FrozenTextEncoder::encode_pooled(const Vec& pooled) const {
    Vec z = preactivation(pooled);
    if (nl_ == Nonlinearity::tanh) z = z.array().tanh();
    return normalize(z);
}

Vec FrozenTextEncoder::encode_tokens(const Mat& tokens) const {
    if (tokens.rows() < 1) throw ShapeError("need at least one token");
    if (tokens.cols() != dim()) throw ShapeError("token dimension mismatch");
    return encode_pooled(tokens.colwise().mean().transpose());
}

Vec FrozenTextEncoder::backward_pooled(const Vec& pooled, const Vec& upstream) const {
    if (upstream.size() != dim()) throw ShapeError("upstream gradient dimension mismatch");
    Vec z = preactivation(pooled);
    Vec h = nl_ == Nonlinearity::tanh ? Vec(z.array().tanh()) : z;
    const double n = h.norm();
    if (!(n > 1e-12)) throw DegenerateVectorError("text feature collapsed to zero");
    Vec g = h / n;
    Vec dh = (upstream - g * g.dot(upstream)) / n;
    Vec dz = nl_ == Nonlinearity::tanh ? Vec(dh.array() * (1.0 - h.array().square())) : dh;
    return proj_.transpose() * dz;
}

Vec FrozenTextEncoder::pooled_class(const PromptSet& prompt, int class_index) const {
    if (class_index < 0 || class_index >= prompt.class_words.rows())
        throw IndexError("class index " + std::to_string(class_index) + " out of range");
    if (prompt.context.cols() != dim() || prompt.class_words.cols() != dim())
        throw ShapeError("prompt dimension mismatch");
    const double n = static_cast<double>(prompt.context.rows() + 1);
    Vec s = prompt.context.colwise().sum().transpose() + prompt.class_words.row(class_index).transpose();
    return s / n;
}

Vec FrozenTextEncoder::encode_class(const PromptSet& prompt, int class_index) const {
    return encode_pooled(pooled_class(prompt, class_index));
}

Mat FrozenTextEncoder::encode_classes(const PromptSet& prompt) const {
    Mat g(prompt.class_words.rows(), dim());
    for (int m = 0; m < g.rows(); ++m) g.row(m) = encode_class(prompt, m).transpose();
    return g;
}

Vec FrozenTextEncoder::encode_background(const PromptSet& prompt) const {
    return encode_tokens(prompt.background);
}

PromptGrad FrozenTextEncoder::grad_text_wrt_prompt(const PromptSet& prompt, const Mat& upstream_class,
                                                   const Vec& upstream_background) const {
    const int M = static_cast<int>(prompt.class_words.rows());
    if (upstream_class.rows() != M || upstream_class.cols() != dim())
        throw ShapeError("class upstream gradient must be M x d");
    PromptGrad out{Mat::Zero(prompt.context.rows(), dim()), Mat::Zero(prompt.background.rows(), dim())};
    Vec acc = Vec::Zero(dim());
    for (int m = 0; m < M; ++m) {
        if (upstream_class.row(m).isZero(0.0)) continue;
        acc += backward_pooled(pooled_class(prompt, m), upstream_class.row(m).transpose());
    }
    acc /= static_cast<double>(prompt.context.rows() + 1);
    out.context.rowwise() = acc.transpose();
    if (!upstream_background.isZero(0.0)) {
        Vec pooled = prompt.background.colwise().mean().transpose();
        Vec gb = backward_pooled(pooled, upstream_background) / static_cast<double>(prompt.background.rows());
        out.background.rowwise() = gb.transpose();
    }
    return out;
}

std::uint64_t FrozenTextEncoder::weights_hash() const {
    std::uint64_t h = hash_doubles(proj_.data(), static_cast<std::size_t>(proj_.size()));
    h = hash_doubles(bias_.data(), static_cast<std::size_t>(bias_.size()), h);
    return h ^ static_cast<std::uint64_t>(nl_);
}

FrozenImageEncoder::FrozenImageEncoder(int d, int H, int W, int patch_h, int patch_w, int channels,
                                       std::uint64_t seed)
    : H_(H), W_(W), ph_(patch_h), pw_(patch_w), ch_(channels) {
    if (d < 1 || H < 1 || W < 1 || patch_h < 1 || patch_w < 1 || channels < 1)
        throw ConfigError("image encoder dimensions must be positive");
    const int raw = patch_h * patch_w * channels;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0 / std::sqrt(static_cast<double>(raw)));
    std::uniform_real_distribution<double> ud(0.5, 1.5);
    proj_.resize(d, raw);
    for (Eigen::Index i = 0; i < proj_.size(); ++i) proj_.data()[i] = nd(rng);
    offset_.resize(d);
    for (int i = 0; i < d; ++i) offset_[i] = nd(rng);
    pool_.resize(H * W);
    for (int i = 0; i < H * W; ++i) pool_[i] = ud(rng);
}

FeatureBundle FrozenImageEncoder::encode(const RawImage& image) const {
    if (image.height != H_ * ph_ || image.width != W_ * pw_ || image.channels != ch_)
        throw ShapeError("image dimensions do not match the encoder's patch grid");
    if (image.pixels.size() != static_cast<std::size_t>(image.height) * image.width * image.channels)
        throw ShapeError("pixel buffer size does not match image dimensions");
    if (image.background_mask && static_cast<int>(image.background_mask->size()) != H_ * W_)
        throw ShapeError("background mask must have one entry per patch");
    const int d = static_cast<int>(proj_.rows());
    FeatureBundle b;
    b.local.resize(H_ * W_, d);
    Vec pooled = Vec::Zero(d);
    Vec raw(raw_dim());
    for (int r = 0; r < H_; ++r) {
        for (int c = 0; c < W_; ++c) {
            int k = 0;
            for (int y = 0; y < ph_; ++y)
                for (int x = 0; x < pw_; ++x)
                    for (int ch = 0; ch < ch_; ++ch) {
                        const std::size_t idx =
                            (static_cast<std::size_t>(r * ph_ + y) * image.width + (c * pw_ + x)) * ch_ + ch;
                        raw[k++] = image.pixels[idx];
                    }
            const int i = r * W_ + c;
            Vec v = proj_ * raw + offset_;
            pooled += pool_[i] * v;
            b.local.row(i) = normalize(v).transpose();
        }
    }
    b.global = normalize(pooled);
    b.label = image.label;
    b.background_mask = image.background_mask;
    return b;
}

std::uint64_t FrozenImageEncoder::weights_hash() const {
    std::uint64_t h = hash_doubles(proj_.data(), static_cast<std::size_t>(proj_.size()));
    h = hash_doubles(offset_.data(), static_cast<std::size_t>(offset_.size()), h);
    return hash_doubles(pool_.data(), static_cast<std::size_t>(pool_.size()), h);
}

}  // namespace mambo
