#include <catch2/catch_amalgamated.hpp>

#include "seploss/deep_feature.hpp"
#include "seploss/grad_check.hpp"
#include "test_helpers.hpp"

using namespace seploss;
using seploss::testing::random_magnitudes;

namespace {

// Jacobi eigenvalues for small symmetric matrices; plenty for C <= 32.
std::vector<double> sym_eigenvalues(Tensor a) {
    const std::size_t n = a.dim(0);
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a.at(p, q) * a.at(p, q);
        if (off < 1e-24) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a.at(p, q)) < 1e-18) continue;
                const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * a.at(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = a.at(i, p), aiq = a.at(i, q);
                    a.at(i, p) = c * aip - s * aiq;
                    a.at(i, q) = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double api = a.at(p, i), aqi = a.at(q, i);
                    a.at(p, i) = c * api - s * aqi;
                    a.at(q, i) = s * api + c * aqi;
                }
            }
    }
    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = a.at(i, i);
    return ev;
}

}  // namespace

TEST_CASE("gram of a single channel is the normalized energy", "[deep_feature]") {
    Rng rng(71);
    Tensor emb({1, 3, 4});
    double sum2 = 0.0;
    for (auto& v : emb.data) {
        v = rng.uniform(-1.0, 1.0);
        sum2 += v * v;
    }
    Tensor g = gram(emb);
    REQUIRE(g.shape == std::vector<std::size_t>{1, 1});
    CHECK(g[0] == Catch::Approx(sum2 / 12.0));
}

TEST_CASE("gram of duplicated channels is rank one with equal entries", "[deep_feature]") {
    Rng rng(72);
    Tensor emb({2, 2, 3});
    for (std::size_t i = 0; i < 6; ++i) {
        emb.data[i] = rng.uniform(-1.0, 1.0);
        emb.data[6 + i] = emb.data[i];
    }
    Tensor g = gram(emb);
    CHECK(g.at(0, 0) == Catch::Approx(g.at(0, 1)));
    CHECK(g.at(0, 0) == Catch::Approx(g.at(1, 1)));
    CHECK(g.at(1, 0) == Catch::Approx(g.at(0, 1)));
}

TEST_CASE("gram of silence is zero", "[deep_feature]") {
    Tensor g = gram(Tensor({3, 2, 2}, 0.0));
    for (double v : g.data) CHECK(v == 0.0);
}

TEST_CASE("gram is symmetric positive semidefinite", "[deep_feature]") {
    Rng rng(73);
    for (int trial = 0; trial < 25; ++trial) {
        Tensor emb({2 + rng.index(5), 3, 3});
        for (auto& v : emb.data) v = rng.uniform(-2.0, 2.0);
        Tensor g = gram(emb);
        for (std::size_t a = 0; a < g.dim(0); ++a)
            for (std::size_t b = 0; b < g.dim(0); ++b) CHECK(g.at(a, b) == g.at(b, a));
        for (double ev : sym_eigenvalues(g)) CHECK(ev >= -1e-10);
    }
}

TEST_CASE("gram distance is invariant under consistent channel permutation", "[deep_feature]") {
    Rng rng(74);
    Tensor a({3, 2, 2}), b({3, 2, 2});
    for (auto& v : a.data) v = rng.uniform(-1.0, 1.0);
    for (auto& v : b.data) v = rng.uniform(-1.0, 1.0);
    const std::size_t perm[3] = {2, 0, 1};
    Tensor ap = a, bp = b;
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < 4; ++i) {
            ap.data[perm[c] * 4 + i] = a.data[c * 4 + i];
            bp.data[perm[c] * 4 + i] = b.data[c * 4 + i];
        }
    const auto dist2 = [](const Tensor& x, const Tensor& y) {
        double s = 0.0;
        Tensor gx = gram(x), gy = gram(y);
        for (std::size_t i = 0; i < gx.size(); ++i) s += (gx[i] - gy[i]) * (gx[i] - gy[i]);
        return s;
    };
    CHECK(dist2(ap, bp) == Catch::Approx(dist2(a, b)).epsilon(1e-12));
}

TEST_CASE("embedding net is deterministic per seed", "[deep_feature]") {
    EmbeddingNet a(0x5EED), b(0x5EED), c(0xBEEF);
    Tensor x({17, 19});
    Rng rng(75);
    for (auto& v : x.data) v = rng.uniform(0.0, 1.0);
    const Tensor fa = a.forward(x).back();
    const Tensor fb = b.forward(x).back();
    const Tensor fc = c.forward(x).back();
    for (std::size_t i = 0; i < fa.size(); ++i) CHECK(fa[i] == fb[i]);
    double diff = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) diff += std::abs(fa[i] - fc[i]);
    CHECK(diff > 0.0);
}

TEST_CASE("feature_loss vanishes at the target", "[deep_feature]") {
    Rng rng(76);
    EmbeddingNet net;
    Tensor x = random_magnitudes(rng, 9, 11, 2);
    for (std::size_t layer = 0; layer <= net.num_layers(); ++layer)
        CHECK(feature_loss(x, x, net, layer).value == 0.0);
    CHECK_THROWS_AS(feature_loss(x, x, net, 4), std::invalid_argument);
}

TEST_CASE("feature_loss at the identity layer equals lp_freq(2)", "[deep_feature]") {
    Rng rng(77);
    EmbeddingNet net;
    Tensor est = random_magnitudes(rng, 6, 7, 2);
    Tensor tgt = random_magnitudes(rng, 6, 7, 2);
    // layer 0 is phi = identity with C=1, H=N, W=Omega, so the normalization
    // constants coincide exactly
    CHECK(feature_loss(est, tgt, net, 0).value ==
          Catch::Approx(lp_freq(2, est, tgt).value).epsilon(1e-15));
}

TEST_CASE("feature_loss matches an independent evaluation of the formula", "[deep_feature]") {
    Rng rng(78);
    EmbeddingNet net(0x77);
    Tensor est = random_magnitudes(rng, 10, 12, 2);
    Tensor tgt = random_magnitudes(rng, 10, 12, 2);
    const std::size_t layer = 2;

    double expected = 0.0;
    for (std::size_t k = 0; k < 2; ++k) {
        Tensor es({10, 12}), ts({10, 12});
        for (std::size_t i = 0; i < es.size(); ++i) {
            es[i] = est[i * 2 + k];
            ts[i] = tgt[i * 2 + k];
        }
        const Tensor fe = net.forward(es)[layer];
        const Tensor ft = net.forward(ts)[layer];
        double acc = 0.0;
        for (std::size_t i = 0; i < fe.size(); ++i) acc += (fe[i] - ft[i]) * (fe[i] - ft[i]);
        expected += acc / (static_cast<double>(fe.size()) * 2.0);
    }
    CHECK(feature_loss(est, tgt, net, layer).value == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("style_loss with one channel is the squared gram gap", "[deep_feature]") {
    Rng rng(79);
    EmbeddingNet net;
    Tensor est = random_magnitudes(rng, 5, 6, 1);
    Tensor tgt = random_magnitudes(rng, 5, 6, 1);
    // layer 0: C=1, gram is a scalar
    Tensor es({5, 6}), ts({5, 6});
    for (std::size_t i = 0; i < es.size(); ++i) {
        es[i] = est[i];
        ts[i] = tgt[i];
    }
    const double ge = gram(net.forward(es)[0])[0];
    const double gt = gram(net.forward(ts)[0])[0];
    CHECK(style_loss(est, tgt, net, 0).value == Catch::Approx((ge - gt) * (ge - gt)));
    CHECK(style_loss(est, est, net, 2).value == 0.0);
}

TEST_CASE("deep_feature_loss composition", "[deep_feature]") {
    Rng rng(80);
    EmbeddingNet net;
    Tensor est = random_magnitudes(rng, 9, 10, 2);
    Tensor tgt = random_magnitudes(rng, 9, 10, 2);

    // delta = lambda = 0 collapses to L2_freq
    CHECK(deep_feature_loss(est, tgt, net, 2, 0.0, 0.0).value == lp_freq(2, est, tgt).value);
    CHECK(deep_feature_loss(tgt, tgt, net, 2).value == 0.0);

    const double delta = 0.5, lambda = 10.0 / 3.0;
    const double combined = deep_feature_loss(est, tgt, net, 2, delta, lambda).value;
    const double parts = lp_freq(2, est, tgt).value + delta * feature_loss(est, tgt, net, 2).value +
                         lambda * style_loss(est, tgt, net, 2).value;
    CHECK(std::abs(combined - parts) < 1e-12);
}

TEST_CASE("deep feature gradients pass the finite-difference oracle", "[deep_feature]") {
    Rng rng(81);
    EmbeddingNet net(0x99);
    Tensor tgt = random_magnitudes(rng, 6, 8, 2);
    Tensor est = random_magnitudes(rng, 6, 8, 2);

    const auto check = [&](auto loss) {
        GradCheckReport rep = check_gradient(loss, est, {1e-6, 1e-4, 1e-8});
        INFO("max_rel=" << rep.max_rel_error);
        CHECK(rep.pass);
    };
    check([&](const Tensor& e) { return feature_loss(e, tgt, net, 1); });
    check([&](const Tensor& e) { return feature_loss(e, tgt, net, 3); });
    check([&](const Tensor& e) { return style_loss(e, tgt, net, 2); });
    check([&](const Tensor& e) { return deep_feature_loss(e, tgt, net, 2); });
}

TEST_CASE("embedding parameters round-trip through the tensor blob", "[deep_feature]") {
    EmbeddingNet net(0x11), other(0x22);
    const std::string path = "embed_params_test.bin";
    const auto entries =
        write_tensor_blob(path, static_cast<const EmbeddingNet&>(net).params());
    read_tensor_blob(path, entries, other.params());
    Tensor x({9, 9});
    Rng rng(82);
    for (auto& v : x.data) v = rng.uniform(0.0, 1.0);
    const Tensor fa = net.forward(x).back();
    const Tensor fb = other.forward(x).back();
    for (std::size_t i = 0; i < fa.size(); ++i) CHECK(fa[i] == fb[i]);
    std::remove(path.c_str());
}
