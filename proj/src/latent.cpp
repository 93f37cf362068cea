#include "driftguard/latent.hpp"

#include <cmath>
#include <string>

#include "driftguard/error.hpp"

namespace driftguard {

namespace {

void require_valid_vector(ConstVec values) {
    if (values.empty()) {
        throw InvalidArgument("feature vector must have dimension >= 1");
    }
    if (!all_finite(values)) {
        throw InvalidArgument("feature vector contains a non-finite value");
    }
}

void require_same_dim(ConstVec a, ConstVec b) {
    if (a.size() != b.size()) {
        throw InvalidArgument("dimension mismatch: " + std::to_string(a.size()) + " vs " +
                              std::to_string(b.size()));
    }
}

}  // namespace

bool all_finite(ConstVec values) {
    for (float v : values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

FeatureVector::FeatureVector(std::vector<float> values) : values_(std::move(values)) {
    require_valid_vector(values_);
}

FeatureVector::FeatureVector(std::initializer_list<float> values) : values_(values) {
    require_valid_vector(values_);
}

FeatureVector::FeatureVector(ConstVec values) : values_(values.begin(), values.end()) {
    require_valid_vector(values_);
}

LatentFrame::LatentFrame(std::size_t tokens, std::size_t dim, std::vector<float> data,
                         std::size_t frame_index)
    : tokens_(tokens), dim_(dim), frame_index_(frame_index), data_(std::move(data)) {
    if (tokens_ == 0 || dim_ == 0) {
        throw InvalidArgument("latent frame needs at least one token of dimension >= 1");
    }
    if (data_.size() != tokens_ * dim_) {
        throw InvalidArgument("latent frame buffer holds " + std::to_string(data_.size()) +
                              " values, expected " + std::to_string(tokens_ * dim_));
    }
    if (!all_finite(data_)) {
        throw InvalidArgument("latent frame contains a non-finite value");
    }
}

LatentFrame LatentFrame::from_tokens(const std::vector<FeatureVector>& tokens,
                                     std::size_t frame_index) {
    if (tokens.empty()) {
        throw InvalidArgument("latent frame needs at least one token");
    }
    const std::size_t dim = tokens.front().dim();
    std::vector<float> data;
    data.reserve(tokens.size() * dim);
    for (const auto& t : tokens) {
        if (t.dim() != dim) {
            throw InvalidArgument("latent frame tokens disagree on dimension");
        }
        data.insert(data.end(), t.values().begin(), t.values().end());
    }
    return LatentFrame(tokens.size(), dim, std::move(data), frame_index);
}

bool LatentFrame::same_tokens(const LatentFrame& other) const {
    return tokens_ == other.tokens_ && dim_ == other.dim_ && data_ == other.data_;
}

LatentClip::LatentClip(std::vector<LatentFrame> frames, std::size_t clip_index)
    : frames_(std::move(frames)), clip_index_(clip_index) {
    if (frames_.empty()) {
        throw InvalidArgument("latent clip needs at least one frame");
    }
    const std::size_t s = frames_.front().tokens();
    const std::size_t d = frames_.front().dim();
    for (std::size_t t = 0; t < frames_.size(); ++t) {
        if (frames_[t].tokens() != s || frames_[t].dim() != d) {
            throw InvalidArgument("frame " + std::to_string(t) +
                                  " of clip has a different token count or dimension");
        }
        frames_[t].set_frame_index(t);
    }
}

LatentCorpus::LatentCorpus(std::size_t dim, std::vector<float> data, std::string provenance)
    : dim_(dim), data_(std::move(data)), provenance_(std::move(provenance)) {
    if (dim_ == 0) {
        throw InvalidArgument("corpus dimension must be >= 1");
    }
    if (data_.empty()) {
        throw InvalidArgument("corpus must contain at least one vector");
    }
    if (data_.size() % dim_ != 0) {
        throw InvalidArgument("corpus buffer length " + std::to_string(data_.size()) +
                              " is not a multiple of dimension " + std::to_string(dim_));
    }
    if (!all_finite(data_)) {
        throw InvalidArgument("corpus contains a non-finite value");
    }
}

std::int64_t pixel_to_latent_frames(std::int64_t pixel_frames) {
    if (pixel_frames < 1 || (pixel_frames - 1) % kTemporalStride != 0) {
        throw InvalidArgument("invalid frame count " + std::to_string(pixel_frames) +
                              ": pixel frames minus one must be a non-negative multiple of "
                              "temporal stride " +
                              std::to_string(kTemporalStride));
    }
    return (pixel_frames - 1) / kTemporalStride + 1;
}

std::int64_t latent_to_pixel_frames(std::int64_t latent_frames) {
    if (latent_frames < 1) {
        throw InvalidArgument("invalid latent frame count " + std::to_string(latent_frames) +
                              ": must be >= 1");
    }
    return (latent_frames - 1) * kTemporalStride + 1;
}

double squared_l2(ConstVec a, ConstVec b) {
    require_same_dim(a, b);
    return squared_l2_unchecked(a.data(), b.data(), a.size());
}

double l2_distance(ConstVec a, ConstVec b) { return std::sqrt(squared_l2(a, b)); }

double cosine_similarity(ConstVec a, ConstVec b) {
    require_same_dim(a, b);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        throw InvalidArgument("cosine similarity is undefined for a zero-norm vector");
    }
    const double c = dot / (std::sqrt(na) * std::sqrt(nb));
    return c > 1.0 ? 1.0 : (c < -1.0 ? -1.0 : c);
}

}  // namespace driftguard
