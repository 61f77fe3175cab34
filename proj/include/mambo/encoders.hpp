#pragma once

#include "mambo/core.hpp"

namespace mambo {

enum class Nonlinearity { identity, tanh };

struct TextEncoderOptions {
    double gain = 20.0;        // scale of the seeded projection
    double bias_scale = 1.0;   // norm of the shared pre-activation offset
    Nonlinearity nonlinearity = Nonlinearity::tanh;
    bool identity_projection = false;  // A = I, no bias
};

struct PromptGrad {
    Mat context;     // N x d
    Mat background;  // L x d
};

// Per-token linear projection, mean pooling, optional tanh, L2 normalization.
// With mean pooling the per-token projection commutes with the pool, so the
// encoder is evaluated as phi(A * mean(tokens) + b) / |.|.
class FrozenTextEncoder {
public:
    FrozenTextEncoder(int d, std::uint64_t seed, const TextEncoderOptions& opts = {});

    static FrozenTextEncoder identity(int d);

    int dim() const { return static_cast<int>(bias_.size()); }
    const Mat& projection() const { return proj_; }
    const Vec& bias() const { return bias_; }
    Nonlinearity nonlinearity() const { return nl_; }

    Vec preactivation(const Vec& pooled) const;
    Vec encode_pooled(const Vec& pooled) const;
    Vec encode_tokens(const Mat& tokens) const;

    // Gradient w.r.t. the pooled input given dL/dg.
    Vec backward_pooled(const Vec& pooled, const Vec& upstream) const;

    Vec pooled_class(const PromptSet& prompt, int class_index) const;
    Vec encode_class(const PromptSet& prompt, int class_index) const;
    Mat encode_classes(const PromptSet& prompt) const;
    Vec encode_background(const PromptSet& prompt) const;

    // upstream_class: M x d (dL/dg_m per row), upstream_background: d.
    PromptGrad grad_text_wrt_prompt(const PromptSet& prompt, const Mat& upstream_class,
                                    const Vec& upstream_background) const;

    std::uint64_t weights_hash() const;

private:
    FrozenTextEncoder() = default;
    Mat proj_;
    Vec bias_;
    Nonlinearity nl_ = Nonlinearity::identity;
};

// Row-major pixel grid, channels interleaved: pixel(y, x, c) = pixels[(y*width + x)*channels + c].
struct RawImage {
    int height = 0;
    int width = 0;
    int channels = 1;
    std::vector<double> pixels;
    std::optional<int> label;
    std::optional<std::vector<bool>> background_mask;  // one entry per patch
};

class FrozenImageEncoder {
public:
    FrozenImageEncoder(int d, int H, int W, int patch_h, int patch_w, int channels, std::uint64_t seed);

    FeatureBundle encode(const RawImage& image) const;

    int raw_dim() const { return static_cast<int>(proj_.cols()); }
    std::uint64_t weights_hash() const;

private:
    int H_, W_, ph_, pw_, ch_;
    Mat proj_;     // d x raw_dim
    Vec offset_;   // keeps blank patches away from the origin
    Vec pool_;     // positive weights per patch
};

std::uint64_t hash_doubles(const double* data, std::size_t n, std::uint64_t h = 1469598103934665603ULL);

}  // namespace mambo
