#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "driftguard/codebook.hpp"
#include "driftguard/latent.hpp"

namespace driftguard {

inline constexpr std::size_t kDefaultOverlapFrames = 2;
// Probability with which the overlap is applied during training. Training is
// not part of this library; the value is kept for reference only.
inline constexpr double kTrainingOverlapProbability = 0.5;

struct ChainConfig {
    std::size_t clip_latent_len = kDefaultClipLatentLen;
    std::size_t overlap = kDefaultOverlapFrames;
    std::size_t num_clips = 1;
    double tau = 0.0;
    bool use_replacement = true;
    bool use_overlap = true;

    // Overlap actually applied: 0 when use_overlap is off.
    std::size_t effective_overlap() const { return use_overlap ? overlap : 0; }
    // Frames in the stitched sequence.
    std::size_t stitched_length() const;
    void validate() const;
};

// Opaque conditioning tokens (audio window, text embedding). The scheduler
// only passes them through.
using TokenSequence = std::vector<FeatureVector>;
using TokenHandle = std::shared_ptr<const TokenSequence>;

struct ConditioningStats {
    std::size_t clipped = 0;
    std::size_t total = 0;
    // Nearest-centroid distances of the tail tokens before/after projection.
    double max_distance_before = 0.0;
    double max_distance_after = 0.0;

    double fraction_clipped() const {
        return total == 0 ? 0.0 : static_cast<double>(clipped) / static_cast<double>(total);
    }
};

struct ConditioningBundle {
    LatentFrame pivotal;
    std::vector<LatentFrame> overlap_tail;
    TokenHandle audio_window;
    TokenHandle text_handle;
    std::size_t clip_index = 0;
    ConditioningStats stats;
};

struct ChainResult {
    std::vector<LatentFrame> sequence;
    // Half-open [start, end) range of each clip's frames in `sequence`.
    std::vector<std::pair<std::size_t, std::size_t>> clip_boundaries;
    // Fraction of conditioning-tail tokens clipped, per clip (0 for clip 0).
    std::vector<double> replacement_stats;
    std::vector<ConditioningStats> conditioning;
    // Generated clips as returned by the generator, before stitching.
    std::vector<LatentClip> clips;
};

struct ChainHandles {
    TokenHandle text;
    // audio_windows[i] goes to clip i; missing entries stay empty.
    std::vector<TokenHandle> audio_windows;
};

using ClipGenerator = std::function<LatentClip(const ConditioningBundle&)>;

LatentFrame make_pivotal(const LatentFrame& reference);

// prev_clip must be non-null exactly when clip_index >= 1.
ConditioningBundle assemble_conditioning(const LatentFrame& pivotal, const LatentClip* prev_clip,
                                         const Codebook& cb, const ChainConfig& cfg,
                                         std::size_t clip_index, const ChainHandles& handles = {});

ChainResult stitch(const std::vector<LatentClip>& clips, const ChainConfig& cfg);

ChainResult chain_generate(const ClipGenerator& generator, const LatentFrame& reference,
                           const Codebook& cb, const ChainConfig& cfg,
                           const ChainHandles& handles = {});

}  // namespace driftguard
