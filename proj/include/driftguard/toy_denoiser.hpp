#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "driftguard/scheduler.hpp"

namespace driftguard {

// Row-major d x d matrix.
struct SquareMatrix {
    std::size_t dim = 0;
    std::vector<double> values;

    static SquareMatrix zeros(std::size_t d);
    static SquareMatrix identity(std::size_t d);
    double at(std::size_t r, std::size_t c) const { return values[r * dim + c]; }
    bool operator==(const SquareMatrix&) const = default;
};

// Single-head attention projections.
struct AttentionWeights {
    SquareMatrix query;
    SquareMatrix key;
    SquareMatrix value;
    SquareMatrix output;

    std::size_t d_model() const { return query.dim; }
    static AttentionWeights zeros(std::size_t d);
    static AttentionWeights identity(std::size_t d);
    // Entries ~ N(0, scale^2 / d), keyed by (seed, stream).
    static AttentionWeights random(std::size_t d, std::uint64_t seed, std::uint64_t stream,
                                   double scale = 1.0);
    void validate(std::size_t d) const;
    bool operator==(const AttentionWeights&) const = default;
};

struct ToyBlock {
    std::size_t d_model = 0;
    AttentionWeights self_attn;
    AttentionWeights text_attn;
    AttentionWeights audio_attn;

    static ToyBlock zeros(std::size_t d);
    static ToyBlock random(std::size_t d, std::uint64_t seed, double scale = 1.0);
    void validate() const;
    bool operator==(const ToyBlock&) const = default;
};

using TokenRows = std::vector<std::vector<double>>;

// Copies every text-attention matrix into the audio-attention slot.
ToyBlock init_audio_from_text(ToyBlock block);

// softmax((x Wq)(c Wk)^T / sqrt(d)) (c Wv) Wo. Empty context yields zeros.
TokenRows attention(const AttentionWeights& w, std::span<const FeatureVector> queries,
                    std::span<const FeatureVector> context);

struct BlockBranches {
    TokenRows self;
    TokenRows text;
    TokenRows audio;
};

// The three additive attention terms of block_forward, kept apart.
BlockBranches block_branches(const ToyBlock& block, std::span<const FeatureVector> latent_tokens,
                             std::span<const FeatureVector> text_tokens,
                             std::span<const FeatureVector> audio_tokens);

// x + SelfAttn(x) + TextAttn(x, text) + AudioAttn(x, audio).
std::vector<FeatureVector> block_forward(const ToyBlock& block,
                                         std::span<const FeatureVector> latent_tokens,
                                         std::span<const FeatureVector> text_tokens,
                                         std::span<const FeatureVector> audio_tokens);

// Clip generator that rolls the block forward frame by frame, starting from
// the last overlap frame (or the pivotal frame for the first clip).
ClipGenerator make_block_generator(ToyBlock block, std::size_t clip_len);

}  // namespace driftguard
