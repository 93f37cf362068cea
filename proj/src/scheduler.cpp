#include "driftguard/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "driftguard/error.hpp"

namespace driftguard {

std::size_t ChainConfig::stitched_length() const {
    if (num_clips == 0) return 0;
    return clip_latent_len + (clip_latent_len - effective_overlap()) * (num_clips - 1);
}

void ChainConfig::validate() const {
    if (clip_latent_len == 0) throw InvalidArgument("clip length must be >= 1");
    if (num_clips == 0) throw InvalidArgument("number of clips must be >= 1");
    if (overlap >= clip_latent_len) {
        throw InvalidArgument("overlap " + std::to_string(overlap) +
                              " must be smaller than clip length " +
                              std::to_string(clip_latent_len));
    }
    if (!std::isfinite(tau) || tau < 0.0) {
        throw InvalidArgument("tau must be finite and non-negative");
    }
}

LatentFrame make_pivotal(const LatentFrame& reference) {
    LatentFrame pivotal = reference;
    pivotal.set_frame_index(0);
    return pivotal;
}

ConditioningBundle assemble_conditioning(const LatentFrame& pivotal, const LatentClip* prev_clip,
                                         const Codebook& cb, const ChainConfig& cfg,
                                         std::size_t clip_index, const ChainHandles& handles) {
    cfg.validate();
    if (clip_index >= 1 && prev_clip == nullptr) {
        throw InvalidArgument("clip " + std::to_string(clip_index) +
                              " needs the previous clip for its overlap");
    }
    if (clip_index == 0 && prev_clip != nullptr) {
        throw InvalidArgument("clip 0 has no previous clip");
    }

    ConditioningBundle bundle;
    bundle.pivotal = pivotal;
    bundle.clip_index = clip_index;
    bundle.text_handle = handles.text;
    if (clip_index < handles.audio_windows.size()) {
        bundle.audio_window = handles.audio_windows[clip_index];
    }

    const std::size_t o = cfg.effective_overlap();
    if (clip_index == 0 || o == 0) return bundle;

    if (prev_clip->length() < o) {
        throw InvalidArgument("previous clip has " + std::to_string(prev_clip->length()) +
                              " frames, fewer than overlap " + std::to_string(o));
    }
    if (cfg.use_replacement && prev_clip->dim() != cb.dim()) {
        throw InvalidArgument("previous clip dimension does not match codebook dimension");
    }

    bundle.overlap_tail.reserve(o);
    for (std::size_t t = prev_clip->length() - o; t < prev_clip->length(); ++t) {
        const LatentFrame& src = prev_clip->frame(t);
        if (!cfg.use_replacement) {
            bundle.overlap_tail.push_back(src);
            continue;
        }
        FrameProjectionStats fs;
        bundle.overlap_tail.push_back(project_frame(src, cb, cfg.tau, &fs));
        bundle.stats.clipped += fs.clipped;
        bundle.stats.total += fs.total;
        bundle.stats.max_distance_before = std::max(bundle.stats.max_distance_before, fs.max_distance_before);
        bundle.stats.max_distance_after = std::max(bundle.stats.max_distance_after, fs.max_distance_after);
    }
    if (!cfg.use_replacement) {
        // Still report where the unprojected tail sits relative to the codebook.
        for (const LatentFrame& f : bundle.overlap_tail) {
            if (f.dim() != cb.dim()) break;
            for (std::size_t s = 0; s < f.tokens(); ++s) {
                const double d = cb.search(f.token(s)).distance;
                bundle.stats.max_distance_before = std::max(bundle.stats.max_distance_before, d);
            }
            bundle.stats.total += f.tokens();
        }
        bundle.stats.max_distance_after = bundle.stats.max_distance_before;
    }
    return bundle;
}

ChainResult stitch(const std::vector<LatentClip>& clips, const ChainConfig& cfg) {
    cfg.validate();
    if (clips.empty()) throw InvalidArgument("nothing to stitch");
    const std::size_t len = cfg.clip_latent_len;
    const std::size_t o = cfg.effective_overlap();

    ChainResult result;
    result.sequence.reserve(len + (len - o) * (clips.size() - 1));
    for (std::size_t n = 0; n < clips.size(); ++n) {
        if (clips[n].length() != len) {
            throw InvalidArgument("clip " + std::to_string(n) + " has " +
                                  std::to_string(clips[n].length()) + " frames, expected " +
                                  std::to_string(len));
        }
        const std::size_t first = n == 0 ? 0 : o;
        const std::size_t start = result.sequence.size();
        for (std::size_t t = first; t < len; ++t) {
            LatentFrame f = clips[n].frame(t);
            f.set_frame_index(result.sequence.size());
            result.sequence.push_back(std::move(f));
        }
        result.clip_boundaries.emplace_back(start, result.sequence.size());
    }
    result.replacement_stats.assign(clips.size(), 0.0);
    result.conditioning.assign(clips.size(), ConditioningStats{});
    return result;
}

ChainResult chain_generate(const ClipGenerator& generator, const LatentFrame& reference,
                           const Codebook& cb, const ChainConfig& cfg, const ChainHandles& handles) {
    cfg.validate();
    const LatentFrame pivotal = make_pivotal(reference);

    std::vector<LatentClip> clips;
    std::vector<ConditioningStats> stats;
    clips.reserve(cfg.num_clips);
    for (std::size_t n = 0; n < cfg.num_clips; ++n) {
        const LatentClip* prev = n == 0 ? nullptr : &clips.back();
        const ConditioningBundle bundle = assemble_conditioning(pivotal, prev, cb, cfg, n, handles);
        LatentClip clip = generator(bundle);
        if (clip.length() != cfg.clip_latent_len) {
            throw InvalidArgument("generator returned " + std::to_string(clip.length()) +
                                  " frames for clip " + std::to_string(n) + ", expected " +
                                  std::to_string(cfg.clip_latent_len));
        }
        clips.push_back(LatentClip(clip.frames(), n));
        stats.push_back(bundle.stats);
    }

    ChainResult result = stitch(clips, cfg);
    result.conditioning = stats;
    for (std::size_t n = 0; n < stats.size(); ++n) {
        result.replacement_stats[n] = stats[n].fraction_clipped();
    }
    result.clips = std::move(clips);
    return result;
}

}  // namespace driftguard
