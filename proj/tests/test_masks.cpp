#include <catch2/catch_amalgamated.hpp>

#include "seploss/masks.hpp"
#include "test_helpers.hpp"

using namespace seploss;
using seploss::testing::random_magnitudes;

TEST_CASE("single source gets mask one", "[masks]") {
    Tensor mags({2, 3, 1});
    for (auto& v : mags.data) v = 0.5;
    Tensor m = ratio_masks(mags);
    for (double v : m.data) CHECK(v == 1.0);
}

TEST_CASE("equal magnitudes split evenly", "[masks]") {
    Tensor mags({2, 2, 2});
    for (auto& v : mags.data) v = 0.7;
    Tensor m = ratio_masks(mags);
    for (double v : m.data) CHECK(v == Catch::Approx(0.5));
}

TEST_CASE("3:1 magnitudes give 0.75/0.25", "[masks]") {
    Tensor mags({1, 1, 2});
    mags[0] = 3.0;
    mags[1] = 1.0;
    Tensor m = ratio_masks(mags);
    CHECK(m[0] == Catch::Approx(0.75));
    CHECK(m[1] == Catch::Approx(0.25));
}

TEST_CASE("silent bins fall back to the uniform mask", "[masks]") {
    Tensor mags({1, 2, 4});
    for (std::size_t k = 0; k < 4; ++k) mags.at(0, 1, k) = 1.0;  // bin 0 stays silent
    Tensor m = ratio_masks(mags);
    for (std::size_t k = 0; k < 4; ++k) CHECK(m.at(0, 0, k) == 0.25);
}

TEST_CASE("masks stay on the simplex at energetic bins", "[masks]") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor mags = random_magnitudes(rng, 4, 5, 1 + rng.index(4), 0.0, 2.0);
        Tensor m = ratio_masks(mags);
        const std::size_t K = mags.dim(2);
        for (std::size_t i = 0; i < mags.size() / K; ++i) {
            double sum = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                CHECK(m[i * K + k] >= 0.0);
                CHECK(m[i * K + k] <= 1.0);
                sum += m[i * K + k];
            }
            CHECK(std::abs(sum - 1.0) < 1e-6);
        }
    }
}

TEST_CASE("uniform masks split the mixture evenly", "[masks]") {
    Tensor masks({2, 2, 4});
    for (auto& v : masks.data) v = 0.25;
    Tensor mix({2, 2});
    mix.data = {1.0, 2.0, 3.0, 4.0};
    Tensor out = apply_mask(masks, mix);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t k = 0; k < 4; ++k) CHECK(out[i * 4 + k] == Catch::Approx(mix[i] / 4.0));
}

TEST_CASE("zero mask silences a source", "[masks]") {
    Tensor masks({1, 2, 2});
    masks.data = {0.0, 1.0, 0.0, 1.0};
    Tensor mix({1, 2});
    mix.data = {3.0, 5.0};
    Tensor out = apply_mask(masks, mix);
    CHECK(out.at(0, 0, 0) == 0.0);
    CHECK(out.at(0, 1, 0) == 0.0);
    CHECK(out.at(0, 0, 1) == 3.0);
    CHECK(out.at(0, 1, 1) == 5.0);
}

TEST_CASE("ratio masks then apply_mask recovers the sources", "[masks]") {
    Rng rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t K = 2 + rng.index(3);
        Tensor mags = random_magnitudes(rng, 3, 4, K, 0.01, 1.5);
        Tensor mix({3, 4});
        for (std::size_t i = 0; i < mix.size(); ++i) {
            double s = 0.0;
            for (std::size_t k = 0; k < K; ++k) s += mags[i * K + k];
            mix[i] = s;
        }
        Tensor recovered = apply_mask(ratio_masks(mags), mix);
        for (std::size_t i = 0; i < mags.size(); ++i)
            CHECK(recovered[i] == Catch::Approx(mags[i]).margin(1e-12));
    }
}

TEST_CASE("apply_mask rejects mismatched shapes", "[masks]") {
    Tensor masks({2, 2, 2});
    Tensor mix({3, 2});
    CHECK_THROWS_AS(apply_mask(masks, mix), std::invalid_argument);
}

TEST_CASE("ratio_masks rejects negative magnitudes", "[masks]") {
    Tensor mags({1, 1, 2});
    mags[0] = -0.1;
    mags[1] = 1.0;
    CHECK_THROWS_AS(ratio_masks(mags), std::invalid_argument);
}
