#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace driftguard {

// Temporal compression of the video VAE: 4 pixel frames per latent frame,
// plus the leading frame that is encoded on its own (109 px <-> 28 latent).
inline constexpr std::int64_t kTemporalStride = 4;
inline constexpr std::size_t kDefaultClipLatentLen = 28;
inline constexpr std::size_t kDefaultLatentDim = 16;
inline constexpr std::size_t kDefaultTokensPerFrame = 64;

using ConstVec = std::span<const float>;

// One D-dimensional latent feature. Values are always finite.
class FeatureVector {
public:
    FeatureVector() = default;
    explicit FeatureVector(std::vector<float> values);
    FeatureVector(std::initializer_list<float> values);
    explicit FeatureVector(ConstVec values);

    std::size_t dim() const { return values_.size(); }
    ConstVec view() const { return values_; }
    const std::vector<float>& values() const { return values_; }
    float operator[](std::size_t i) const { return values_[i]; }

    operator ConstVec() const { return values_; }
    bool operator==(const FeatureVector&) const = default;

private:
    std::vector<float> values_;
};

// S tokens of dimension D, stored token-major in one contiguous buffer.
class LatentFrame {
public:
    LatentFrame() = default;
    LatentFrame(std::size_t tokens, std::size_t dim, std::vector<float> data,
                std::size_t frame_index = 0);
    static LatentFrame from_tokens(const std::vector<FeatureVector>& tokens,
                                   std::size_t frame_index = 0);

    std::size_t tokens() const { return tokens_; }
    std::size_t dim() const { return dim_; }
    std::size_t frame_index() const { return frame_index_; }
    void set_frame_index(std::size_t index) { frame_index_ = index; }

    ConstVec token(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
    std::span<float> mutable_token(std::size_t i) { return {data_.data() + i * dim_, dim_}; }
    const std::vector<float>& data() const { return data_; }

    // Token content only; frame_index is ignored.
    bool same_tokens(const LatentFrame& other) const;
    bool operator==(const LatentFrame&) const = default;

private:
    std::size_t tokens_ = 0;
    std::size_t dim_ = 0;
    std::size_t frame_index_ = 0;
    std::vector<float> data_;
};

class LatentClip {
public:
    LatentClip() = default;
    // Renumbers frame indices to 0..T-1 and checks that S and D agree.
    explicit LatentClip(std::vector<LatentFrame> frames, std::size_t clip_index = 0);

    std::size_t length() const { return frames_.size(); }
    std::size_t clip_index() const { return clip_index_; }
    const std::vector<LatentFrame>& frames() const { return frames_; }
    const LatentFrame& frame(std::size_t t) const { return frames_.at(t); }
    std::size_t tokens() const { return frames_.front().tokens(); }
    std::size_t dim() const { return frames_.front().dim(); }

    bool operator==(const LatentClip&) const = default;

private:
    std::vector<LatentFrame> frames_;
    std::size_t clip_index_ = 0;
};

// N vectors of dimension D in one row-major buffer.
class LatentCorpus {
public:
    LatentCorpus() = default;
    LatentCorpus(std::size_t dim, std::vector<float> data, std::string provenance = {});

    std::size_t size() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
    std::size_t dim() const { return dim_; }
    ConstVec row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
    const std::vector<float>& data() const { return data_; }
    const std::string& provenance() const { return provenance_; }

    bool operator==(const LatentCorpus& other) const {
        return dim_ == other.dim_ && data_ == other.data_;
    }

private:
    std::size_t dim_ = 0;
    std::vector<float> data_;
    std::string provenance_;
};

std::int64_t pixel_to_latent_frames(std::int64_t pixel_frames);
std::int64_t latent_to_pixel_frames(std::int64_t latent_frames);

// Squared Euclidean distance: per-dimension differences squared in double
// and summed in dimension order. This exact order is the library's distance
// definition; the blocked kernels reproduce it bit for bit.
inline double squared_l2_unchecked(const float* a, const float* b, std::size_t dim) {
    double acc = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    return acc;
}

double squared_l2(ConstVec a, ConstVec b);
double l2_distance(ConstVec a, ConstVec b);
double cosine_similarity(ConstVec a, ConstVec b);

bool all_finite(ConstVec values);

}  // namespace driftguard
