#include "driftguard/drift_lab.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "driftguard/error.hpp"
#include "driftguard/parallel.hpp"
#include "driftguard/random.hpp"

namespace driftguard {

namespace {

constexpr std::uint64_t kNoiseStream = 0x6e6f697365ULL;
constexpr std::uint64_t kDirectionStream = 0x646972ULL;
constexpr std::uint64_t kReferenceStream = 0x726566ULL;
constexpr std::uint64_t kBlobCenterStream = 0x626c6f62ULL;
constexpr std::uint64_t kBlobPointStream = 0x706f696eULL;

std::vector<double> random_unit(std::uint64_t seed, std::uint64_t stream, std::uint64_t key,
                                std::size_t dim) {
    std::vector<double> v(dim);
    double norm = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
        v[d] = counter_rng::gaussian(seed, stream, key, d);
        norm += v[d] * v[d];
    }
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
}

// Per-frame means averaged over frames. The outer sum is exact in long double
// for realistic clip lengths, so identical frames average to their own mean
// whatever the frame count.
double average_of_frames(const std::vector<double>& frame_means) {
    long double sum = 0.0L;
    for (double m : frame_means) sum += m;
    return static_cast<double>(sum / static_cast<long double>(frame_means.size()));
}

std::vector<double> mean_token(const std::vector<LatentFrame>& frames, std::size_t begin,
                               std::size_t end) {
    const std::size_t dim = frames[begin].dim();
    std::vector<std::vector<double>> per_dim(dim, std::vector<double>(end - begin, 0.0));
    for (std::size_t f = begin; f < end; ++f) {
        std::vector<double> sum(dim, 0.0);
        for (std::size_t s = 0; s < frames[f].tokens(); ++s) {
            const ConstVec tok = frames[f].token(s);
            for (std::size_t d = 0; d < dim; ++d) sum[d] += tok[d];
        }
        for (std::size_t d = 0; d < dim; ++d) {
            per_dim[d][f - begin] = sum[d] / static_cast<double>(frames[f].tokens());
        }
    }
    std::vector<double> mean(dim);
    for (std::size_t d = 0; d < dim; ++d) mean[d] = average_of_frames(per_dim[d]);
    return mean;
}

double cosine_or_zero(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

}  // namespace

void DriftConfig::validate() const {
    if (!std::isfinite(bias) || bias < 0.0) throw InvalidArgument("drift bias must be finite and >= 0");
    if (!std::isfinite(noise) || noise < 0.0) throw InvalidArgument("drift noise must be finite and >= 0");
    if (!(ar_coeff > 0.0 && ar_coeff <= 1.0)) {
        throw InvalidArgument("ar coefficient must lie in (0, 1], got " + std::to_string(ar_coeff));
    }
}

FeatureVector resolve_drift_direction(const DriftConfig& drift, std::size_t dim) {
    if (drift.drift_direction) {
        const FeatureVector& dir = *drift.drift_direction;
        if (dir.dim() != dim) {
            throw InvalidArgument("drift direction has dimension " + std::to_string(dir.dim()) +
                                  ", latents have " + std::to_string(dim));
        }
        double norm = 0.0;
        for (float v : dir.values()) norm += static_cast<double>(v) * v;
        if (std::abs(std::sqrt(norm) - 1.0) > 1e-4) {
            throw InvalidArgument("drift direction must be a unit vector");
        }
        return dir;
    }
    const std::vector<double> v = random_unit(drift.seed, kDirectionStream, 0, dim);
    return FeatureVector(std::vector<float>(v.begin(), v.end()));
}

LatentClip toy_generate_clip(const ConditioningBundle& bundle, const DriftConfig& drift,
                             std::size_t clip_len) {
    drift.validate();
    if (clip_len == 0) throw InvalidArgument("clip length must be >= 1");
    const LatentFrame& pivotal = bundle.pivotal;
    const std::size_t tokens = pivotal.tokens();
    const std::size_t dim = pivotal.dim();
    const FeatureVector dir = resolve_drift_direction(drift, dim);
    const double alpha = drift.ar_coeff;
    const double pull = 1.0 - alpha;
    const std::uint64_t noise_key = counter_rng::mix(drift.seed ^ kNoiseStream);

    std::vector<float> state;
    if (bundle.overlap_tail.empty()) {
        state = pivotal.data();
    } else {
        const LatentFrame& last = bundle.overlap_tail.back();
        if (last.tokens() != tokens || last.dim() != dim) {
            throw InvalidArgument("overlap frame shape does not match the pivotal frame");
        }
        state.resize(tokens * dim);
        for (std::size_t v = 0; v < state.size(); ++v) {
            state[v] = static_cast<float>(alpha * last.data()[v] + pull * pivotal.data()[v]);
        }
    }

    std::vector<LatentFrame> frames;
    frames.reserve(clip_len);
    frames.emplace_back(tokens, dim, state, 0);
    for (std::size_t t = 1; t < clip_len; ++t) {
        std::vector<float> next(tokens * dim);
        parallel_for(0, static_cast<std::int64_t>(tokens), [&](std::int64_t ss) {
            const std::size_t s = static_cast<std::size_t>(ss);
            for (std::size_t d = 0; d < dim; ++d) {
                const std::size_t v = s * dim + d;
                double x = alpha * state[v] + pull * pivotal.data()[v] + drift.bias * dir[d];
                if (drift.noise > 0.0) {
                    x += drift.noise * counter_rng::gaussian(noise_key, bundle.clip_index, t, s, d);
                }
                next[v] = static_cast<float>(x);
            }
        });
        state = std::move(next);
        frames.emplace_back(tokens, dim, state, t);
    }
    return LatentClip(std::move(frames), bundle.clip_index);
}

ClipGenerator make_drift_generator(const DriftConfig& drift, std::size_t clip_len) {
    drift.validate();
    return [drift, clip_len](const ConditioningBundle& bundle) {
        return toy_generate_clip(bundle, drift, clip_len);
    };
}

void DriftReport::validate() const {
    const std::size_t n = mean_dist.size();
    if (max_dist.size() != n || frac_clipped.size() != n || pivotal_cosine.size() != n) {
        throw InvalidArgument("drift report series have different lengths");
    }
    for (double f : frac_clipped) {
        if (!(f >= 0.0 && f <= 1.0)) throw InvalidArgument("clipped fraction outside [0, 1]");
    }
}

DriftReport simulate_long_run(const LatentFrame& reference, const Codebook& cb,
                              const ChainConfig& chain_cfg, const DriftConfig& drift,
                              ChainResult* chain_out) {
    chain_cfg.validate();
    drift.validate();
    if (chain_cfg.num_clips < 2) throw InvalidArgument("a long run needs at least 2 clips");
    if (reference.dim() != cb.dim()) {
        throw InvalidArgument("reference dimension " + std::to_string(reference.dim()) +
                              " does not match codebook dimension " + std::to_string(cb.dim()));
    }

    ChainResult chain = chain_generate(make_drift_generator(drift, chain_cfg.clip_latent_len),
                                       reference, cb, chain_cfg);

    DriftReport report;
    report.config = drift;
    report.stitched_length = chain.sequence.size();
    const std::vector<double> pivot_mean = mean_token({reference}, 0, 1);

    for (std::size_t n = 0; n < chain.clip_boundaries.size(); ++n) {
        const auto [begin, end] = chain.clip_boundaries[n];
        const std::size_t tokens = reference.tokens();
        std::vector<double> dist((end - begin) * tokens);
        parallel_for(0, static_cast<std::int64_t>(dist.size()), [&](std::int64_t ii) {
            const std::size_t i = static_cast<std::size_t>(ii);
            dist[i] = cb.search(chain.sequence[begin + i / tokens].token(i % tokens)).distance;
        });
        std::vector<double> frame_means(end - begin, 0.0);
        double top = 0.0;
        for (std::size_t i = 0; i < dist.size(); ++i) {
            frame_means[i / tokens] += dist[i];
            top = std::max(top, dist[i]);
        }
        for (double& m : frame_means) m /= static_cast<double>(tokens);
        report.mean_dist.push_back(average_of_frames(frame_means));
        report.max_dist.push_back(top);
        report.frac_clipped.push_back(chain.replacement_stats[n]);
        report.pivotal_cosine.push_back(cosine_or_zero(mean_token(chain.sequence, begin, end), pivot_mean));
        report.conditioning_max_dist.push_back(chain.conditioning[n].max_distance_after);
    }
    if (chain_out) *chain_out = std::move(chain);
    return report;
}

RunComparison compare_runs(const DriftReport& report_on, const DriftReport& report_off) {
    report_on.validate();
    report_off.validate();
    if (report_on.clips() != report_off.clips()) {
        throw InvalidArgument("reports cover different clip counts: " +
                              std::to_string(report_on.clips()) + " vs " +
                              std::to_string(report_off.clips()));
    }
    if (report_on.clips() == 0) throw InvalidArgument("reports are empty");
    if (report_on.config && report_off.config && !(*report_on.config == *report_off.config)) {
        throw InvalidArgument("reports were produced with different drift configurations");
    }
    RunComparison cmp;
    for (std::size_t n = 0; n < report_on.clips(); ++n) {
        const double on = report_on.mean_dist[n];
        const double off = report_off.mean_dist[n];
        double r;
        if (on == off) {
            r = 1.0;
        } else if (on == 0.0) {
            r = INFINITY;
        } else {
            r = off / on;
        }
        cmp.ratio.push_back(r);
    }
    cmp.final_ratio = cmp.ratio.back();
    cmp.mitigated = cmp.final_ratio >= kMitigationRatio;
    return cmp;
}

LatentCorpus make_blob_corpus(const BlobCorpusSpec& spec) {
    if (spec.n == 0 || spec.dim == 0 || spec.blobs == 0) {
        throw InvalidArgument("corpus needs n, dim and blobs >= 1");
    }
    if (!std::isfinite(spec.blob_std) || spec.blob_std < 0.0 || !std::isfinite(spec.center_range) ||
        spec.center_range < 0.0) {
        throw InvalidArgument("blob std and center range must be finite and >= 0");
    }
    std::vector<double> centers(spec.blobs * spec.dim);
    for (std::size_t b = 0; b < spec.blobs; ++b) {
        for (std::size_t d = 0; d < spec.dim; ++d) {
            const double u = counter_rng::uniform(spec.seed, kBlobCenterStream, b, d);
            centers[b * spec.dim + d] = spec.center_range * (2.0 * u - 1.0);
        }
    }
    std::vector<float> data(spec.n * spec.dim);
    parallel_for(0, static_cast<std::int64_t>(spec.n), [&](std::int64_t ii) {
        const std::size_t i = static_cast<std::size_t>(ii);
        const double u = counter_rng::uniform(spec.seed, kBlobPointStream, i, spec.dim);
        const std::size_t b =
            std::min(spec.blobs - 1, static_cast<std::size_t>(u * static_cast<double>(spec.blobs)));
        for (std::size_t d = 0; d < spec.dim; ++d) {
            const double g = spec.blob_std == 0.0
                                 ? 0.0
                                 : spec.blob_std * counter_rng::gaussian(spec.seed, kBlobPointStream, i, d);
            data[i * spec.dim + d] = static_cast<float>(centers[b * spec.dim + d] + g);
        }
    });
    return LatentCorpus(spec.dim, std::move(data),
                        "blobs=" + std::to_string(spec.blobs) + " seed=" + std::to_string(spec.seed));
}

LatentFrame make_reference_frame(const Codebook& cb, std::size_t tokens, std::uint64_t seed) {
    if (tokens == 0) throw InvalidArgument("reference frame needs at least one token");
    const std::size_t k = cb.size();
    const std::size_t dim = cb.dim();
    std::vector<double> cumulative(k);
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        total += static_cast<double>(cb.counts()[j]);
        cumulative[j] = total;
    }
    const bool uniform = total == 0.0;
    const double radius = cb.quantile(Quantile::p50);

    std::vector<float> data(tokens * dim);
    for (std::size_t s = 0; s < tokens; ++s) {
        const double u = counter_rng::uniform(seed, kReferenceStream, s);
        std::size_t j;
        if (uniform) {
            j = std::min(k - 1, static_cast<std::size_t>(u * static_cast<double>(k)));
        } else {
            j = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u * total) -
                                         cumulative.begin());
            j = std::min(j, k - 1);
        }
        const std::vector<double> dir = random_unit(seed, kReferenceStream + 1, s, dim);
        const ConstVec c = cb.centroid(j);
        for (std::size_t d = 0; d < dim; ++d) {
            data[s * dim + d] = static_cast<float>(c[d] + radius * dir[d]);
        }
    }
    return LatentFrame(tokens, dim, std::move(data), 0);
}

}  // namespace driftguard
