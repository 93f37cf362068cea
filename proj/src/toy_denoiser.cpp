#include "driftguard/toy_denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "driftguard/error.hpp"
#include "driftguard/random.hpp"

namespace driftguard {

namespace {

void require_tokens(std::span<const FeatureVector> tokens, std::size_t d, const char* what) {
    for (const auto& t : tokens) {
        if (t.dim() != d) {
            throw InvalidArgument(std::string(what) + " token has dimension " +
                                  std::to_string(t.dim()) + ", block expects " + std::to_string(d));
        }
    }
}

// rows x W for a list of token vectors.
TokenRows project(std::span<const FeatureVector> rows, const SquareMatrix& w) {
    const std::size_t d = w.dim;
    TokenRows out(rows.size(), std::vector<double>(d, 0.0));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t i = 0; i < d; ++i) {
            const double xi = rows[r][i];
            if (xi == 0.0) continue;
            for (std::size_t j = 0; j < d; ++j) out[r][j] += xi * w.at(i, j);
        }
    }
    return out;
}

TokenRows project(const TokenRows& rows, const SquareMatrix& w) {
    const std::size_t d = w.dim;
    TokenRows out(rows.size(), std::vector<double>(d, 0.0));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < d; ++j) out[r][j] += rows[r][i] * w.at(i, j);
        }
    }
    return out;
}

}  // namespace

SquareMatrix SquareMatrix::zeros(std::size_t d) { return {d, std::vector<double>(d * d, 0.0)}; }

SquareMatrix SquareMatrix::identity(std::size_t d) {
    SquareMatrix m = zeros(d);
    for (std::size_t i = 0; i < d; ++i) m.values[i * d + i] = 1.0;
    return m;
}

AttentionWeights AttentionWeights::zeros(std::size_t d) {
    return {SquareMatrix::zeros(d), SquareMatrix::zeros(d), SquareMatrix::zeros(d),
            SquareMatrix::zeros(d)};
}

AttentionWeights AttentionWeights::identity(std::size_t d) {
    return {SquareMatrix::identity(d), SquareMatrix::identity(d), SquareMatrix::identity(d),
            SquareMatrix::identity(d)};
}

AttentionWeights AttentionWeights::random(std::size_t d, std::uint64_t seed, std::uint64_t stream,
                                          double scale) {
    AttentionWeights w = zeros(d);
    const double sd = scale / std::sqrt(static_cast<double>(d));
    SquareMatrix* mats[] = {&w.query, &w.key, &w.value, &w.output};
    for (std::uint64_t m = 0; m < 4; ++m) {
        for (std::size_t e = 0; e < d * d; ++e) {
            mats[m]->values[e] = sd * counter_rng::gaussian(seed, 0x61747471ULL, stream, m, e);
        }
    }
    return w;
}

void AttentionWeights::validate(std::size_t d) const {
    for (const SquareMatrix* m : {&query, &key, &value, &output}) {
        if (m->dim != d || m->values.size() != d * d) {
            throw InvalidArgument("attention matrix shape does not match d_model " + std::to_string(d));
        }
        for (double v : m->values) {
            if (!std::isfinite(v)) throw InvalidArgument("attention weight is non-finite");
        }
    }
}

ToyBlock ToyBlock::zeros(std::size_t d) {
    return {d, AttentionWeights::zeros(d), AttentionWeights::zeros(d), AttentionWeights::zeros(d)};
}

ToyBlock ToyBlock::random(std::size_t d, std::uint64_t seed, double scale) {
    return {d, AttentionWeights::random(d, seed, 0, scale), AttentionWeights::random(d, seed, 1, scale),
            AttentionWeights::random(d, seed, 2, scale)};
}

void ToyBlock::validate() const {
    if (d_model == 0) throw InvalidArgument("d_model must be >= 1");
    self_attn.validate(d_model);
    text_attn.validate(d_model);
    audio_attn.validate(d_model);
}

ToyBlock init_audio_from_text(ToyBlock block) {
    block.validate();
    block.audio_attn = block.text_attn;
    return block;
}

TokenRows attention(const AttentionWeights& w, std::span<const FeatureVector> queries,
                    std::span<const FeatureVector> context) {
    const std::size_t d = w.d_model();
    require_tokens(queries, d, "query");
    require_tokens(context, d, "context");
    TokenRows out(queries.size(), std::vector<double>(d, 0.0));
    if (context.empty()) return out;

    const TokenRows q = project(queries, w.query);
    const TokenRows k = project(context, w.key);
    const TokenRows v = project(context, w.value);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));

    TokenRows mixed(queries.size(), std::vector<double>(d, 0.0));
    std::vector<double> logits(context.size());
    for (std::size_t r = 0; r < queries.size(); ++r) {
        double top = -INFINITY;
        for (std::size_t c = 0; c < context.size(); ++c) {
            double dot = 0.0;
            for (std::size_t j = 0; j < d; ++j) dot += q[r][j] * k[c][j];
            logits[c] = dot * scale;
            top = std::max(top, logits[c]);
        }
        double norm = 0.0;
        for (double& l : logits) {
            l = std::exp(l - top);
            norm += l;
        }
        for (std::size_t c = 0; c < context.size(); ++c) {
            const double p = logits[c] / norm;
            for (std::size_t j = 0; j < d; ++j) mixed[r][j] += p * v[c][j];
        }
    }
    return project(mixed, w.output);
}

BlockBranches block_branches(const ToyBlock& block, std::span<const FeatureVector> latent_tokens,
                             std::span<const FeatureVector> text_tokens,
                             std::span<const FeatureVector> audio_tokens) {
    block.validate();
    return {attention(block.self_attn, latent_tokens, latent_tokens),
            attention(block.text_attn, latent_tokens, text_tokens),
            attention(block.audio_attn, latent_tokens, audio_tokens)};
}

std::vector<FeatureVector> block_forward(const ToyBlock& block,
                                         std::span<const FeatureVector> latent_tokens,
                                         std::span<const FeatureVector> text_tokens,
                                         std::span<const FeatureVector> audio_tokens) {
    const BlockBranches b = block_branches(block, latent_tokens, text_tokens, audio_tokens);
    std::vector<FeatureVector> out;
    out.reserve(latent_tokens.size());
    for (std::size_t r = 0; r < latent_tokens.size(); ++r) {
        std::vector<float> row(block.d_model);
        for (std::size_t j = 0; j < block.d_model; ++j) {
            row[j] = static_cast<float>(static_cast<double>(latent_tokens[r][j]) + b.self[r][j] +
                                        b.text[r][j] + b.audio[r][j]);
        }
        out.emplace_back(std::move(row));
    }
    return out;
}

ClipGenerator make_block_generator(ToyBlock block, std::size_t clip_len) {
    block.validate();
    if (clip_len == 0) throw InvalidArgument("clip length must be >= 1");
    return [block = std::move(block), clip_len](const ConditioningBundle& bundle) {
        const LatentFrame& start =
            bundle.overlap_tail.empty() ? bundle.pivotal : bundle.overlap_tail.back();
        if (start.dim() != block.d_model) {
            throw InvalidArgument("latent dimension does not match block d_model");
        }
        const TokenSequence none;
        const TokenSequence& text = bundle.text_handle ? *bundle.text_handle : none;
        const TokenSequence& audio = bundle.audio_window ? *bundle.audio_window : none;

        std::vector<FeatureVector> tokens;
        for (std::size_t s = 0; s < start.tokens(); ++s) tokens.emplace_back(start.token(s));

        std::vector<LatentFrame> frames;
        frames.reserve(clip_len);
        frames.push_back(LatentFrame::from_tokens(tokens, 0));
        for (std::size_t t = 1; t < clip_len; ++t) {
            tokens = block_forward(block, tokens, text, audio);
            frames.push_back(LatentFrame::from_tokens(tokens, t));
        }
        return LatentClip(std::move(frames), bundle.clip_index);
    };
}

}  // namespace driftguard
