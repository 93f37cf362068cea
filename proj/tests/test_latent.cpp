#include <doctest.h>

#include <cmath>
#include <random>
#include <string>

#include "driftguard/error.hpp"
#include "driftguard/latent.hpp"
#include "support.hpp"

using namespace driftguard;

TEST_CASE("pixel and latent frame counts map through stride 4") {
    CHECK(pixel_to_latent_frames(109) == 28);
    CHECK(pixel_to_latent_frames(1) == 1);
    CHECK(pixel_to_latent_frames(45) == 12);
    CHECK(latent_to_pixel_frames(28) == 109);
    CHECK(latent_to_pixel_frames(1) == 1);
    CHECK(latent_to_pixel_frames(12) == 45);
}

TEST_CASE("45 pixel frames sampled at stride 4 give 12 latent slots") {
    int slots = 0;
    for (int f = 0; f < 45; ++f) {
        if (f == 0 || f % 4 == 0) ++slots;
    }
    CHECK(pixel_to_latent_frames(45) == slots);
}

TEST_CASE("frame count round trip") {
    for (std::int64_t p = 1; p <= 4001; p += 4) {
        CHECK(latent_to_pixel_frames(pixel_to_latent_frames(p)) == p);
    }
    for (std::int64_t l = 1; l <= 1000; ++l) {
        CHECK(pixel_to_latent_frames(latent_to_pixel_frames(l)) == l);
    }
}

TEST_CASE("invalid frame counts name the value and the stride") {
    try {
        pixel_to_latent_frames(110);
        FAIL("expected an error");
    } catch (const InvalidArgument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("110") != std::string::npos);
        CHECK(msg.find('4') != std::string::npos);
    }
    CHECK_THROWS_AS(pixel_to_latent_frames(0), InvalidArgument);
    CHECK_THROWS_AS(pixel_to_latent_frames(-3), InvalidArgument);
    CHECK_THROWS_AS(latent_to_pixel_frames(0), InvalidArgument);
}

TEST_CASE("l2 distance examples") {
    const FeatureVector a{0.0f, 0.0f}, b{3.0f, 4.0f};
    CHECK(l2_distance(a, b) == 5.0);
    CHECK(l2_distance(b, b) == 0.0);
    CHECK(l2_distance(FeatureVector{1, 1, 1}, FeatureVector{2, 3, 1}) == doctest::Approx(std::sqrt(5.0)).epsilon(1e-15));
    CHECK(squared_l2(a, b) == 25.0);
    CHECK_THROWS_AS(l2_distance(a, FeatureVector{1, 2, 3}), InvalidArgument);
}

TEST_CASE("l2 distance is symmetric and satisfies the triangle inequality") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t dim = 1 + rng() % 32;
        const auto va = testing::random_values(dim, rng());
        const auto vb = testing::random_values(dim, rng());
        const auto vc = testing::random_values(dim, rng());
        const double ab = l2_distance(va, vb), bc = l2_distance(vb, vc), ac = l2_distance(va, vc);
        CHECK(ab == l2_distance(vb, va));
        CHECK(ac <= (ab + bc) * (1.0 + 1e-9));
    }
}

TEST_CASE("cosine similarity") {
    CHECK(cosine_similarity(FeatureVector{1, 0}, FeatureVector{1, 0}) == 1.0);
    CHECK(cosine_similarity(FeatureVector{1, 0}, FeatureVector{0, 1}) == 0.0);
    CHECK(cosine_similarity(FeatureVector{1, 2}, FeatureVector{2, 4}) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(cosine_similarity(FeatureVector{1, 2}, FeatureVector{-1, -2}) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK_THROWS_AS(cosine_similarity(FeatureVector{0, 0}, FeatureVector{1, 0}), InvalidArgument);
    CHECK_THROWS_AS(cosine_similarity(FeatureVector{1, 0}, FeatureVector{1, 0, 0}), InvalidArgument);

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<float> scale(0.01f, 100.0f);
    for (int trial = 0; trial < 500; ++trial) {
        const auto a = testing::random_values(16, rng());
        const float s = scale(rng);
        std::vector<float> b(a);
        for (float& v : b) v *= s;
        const double c = cosine_similarity(a, b);
        CHECK(c <= 1.0);
        CHECK(c == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("feature vectors reject empty and non-finite values") {
    CHECK_THROWS_AS(FeatureVector(std::vector<float>{}), InvalidArgument);
    CHECK_THROWS_AS(FeatureVector({1.0f, NAN}), InvalidArgument);
    CHECK_THROWS_AS(FeatureVector({INFINITY}), InvalidArgument);
    CHECK(FeatureVector({1.0f, 2.0f}).dim() == 2);
}

TEST_CASE("latent frames, clips and corpora validate their shape") {
    CHECK_THROWS_AS(LatentFrame(2, 3, std::vector<float>(5)), InvalidArgument);
    CHECK_THROWS_AS(LatentFrame(0, 3, {}), InvalidArgument);
    CHECK_THROWS_AS(LatentFrame(1, 2, {1.0f, NAN}), InvalidArgument);

    const LatentFrame f = LatentFrame::from_tokens({FeatureVector{1, 2}, FeatureVector{3, 4}}, 5);
    CHECK(f.tokens() == 2);
    CHECK(f.dim() == 2);
    CHECK(f.frame_index() == 5);
    CHECK(f.token(1)[0] == 3.0f);
    CHECK_THROWS_AS(LatentFrame::from_tokens({FeatureVector{1, 2}, FeatureVector{3}}), InvalidArgument);

    LatentFrame g(2, 2, {1, 2, 3, 4}, 9);
    CHECK(f.same_tokens(g));
    CHECK_FALSE(f == g);

    const LatentClip clip({g, f, g}, 4);
    CHECK(clip.length() == 3);
    CHECK(clip.clip_index() == 4);
    for (std::size_t t = 0; t < clip.length(); ++t) CHECK(clip.frame(t).frame_index() == t);
    CHECK_THROWS_AS(LatentClip({f, LatentFrame(1, 2, {0, 0})}), InvalidArgument);
    CHECK_THROWS_AS(LatentClip(std::vector<LatentFrame>{}), InvalidArgument);

    const LatentCorpus corpus(2, {1, 2, 3, 4, 5, 6}, "unit");
    CHECK(corpus.size() == 3);
    CHECK(corpus.row(2)[1] == 6.0f);
    CHECK(corpus.provenance() == "unit");
    CHECK_THROWS_AS(LatentCorpus(2, {1, 2, 3}), InvalidArgument);
    CHECK_THROWS_AS(LatentCorpus(2, {}), InvalidArgument);
    CHECK_THROWS_AS(LatentCorpus(0, {1}), InvalidArgument);
    CHECK_THROWS_AS(LatentCorpus(1, {INFINITY}), InvalidArgument);
}
