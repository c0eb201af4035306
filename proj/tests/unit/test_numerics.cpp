#include <doctest.h>

#include <cmath>

#include "plrlab/error.hpp"
#include "plrlab/numerics.hpp"
#include "plrlab/rng.hpp"

using namespace plr;

namespace {

Tensor random_tensor(SeededRng& rng, const Shape& shape) {
    Tensor t(shape);
    for (auto& v : t.values()) v = rng.uniform(-1.0, 1.0);
    return t;
}

}  // namespace

TEST_CASE("normal_sample scale 0 is all zero") {
    SeededRng rng(3);
    const Tensor t = normal_sample(rng, {4, 5, 6}, 0.0);
    CHECK(t.shape() == Shape{4, 5, 6});
    CHECK(max_abs(t) == 0.0);
}

TEST_CASE("normal_sample scale 0.01 has matching sample std") {
    SeededRng rng(11);
    const Tensor t = normal_sample(rng, {100000}, 0.01);
    double mean = 0.0;
    for (double v : t.values()) mean += v;
    mean /= t.size();
    double ss = 0.0;
    for (double v : t.values()) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (t.size() - 1));
    CHECK(sd >= 0.0095);
    CHECK(sd <= 0.0105);
}

TEST_CASE("normal_sample is deterministic per seed") {
    SeededRng a(42), b(42);
    CHECK(normal_sample(a, {7, 3}, 1.0) == normal_sample(b, {7, 3}, 1.0));
}

TEST_CASE("derived streams differ from each other and the parent") {
    const SeededRng root(5);
    SeededRng a = root.derive(1), b = root.derive(2), c = root;
    CHECK(a.next_u64() != b.next_u64());
    CHECK(root.derive(1).next_u64() != c.next_u64());
}

TEST_CASE("matmul small cases") {
    const Tensor id = Tensor::matrix({{1, 0}, {0, 1}});
    const Tensor v = Tensor::matrix({{3}, {4}});
    CHECK(matmul(id, v) == v);
    CHECK(matmul(Tensor::matrix({{1, 2}}), v) == Tensor::matrix({{11}}));
}

TEST_CASE("matmul matches the naive triple loop") {
    SeededRng rng(8);
    const Tensor a = random_tensor(rng, {7, 5});
    const Tensor b = random_tensor(rng, {5, 3});
    const Tensor c = matmul(a, b);
    for (std::size_t i = 0; i < 7; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < 5; ++k) s += a.at(i, k) * b.at(k, j);
            CHECK(c.at(i, j) == doctest::Approx(s).epsilon(1e-14));
        }
    }
}

TEST_CASE("gemm honours transposes and beta") {
    SeededRng rng(9);
    const Tensor a = random_tensor(rng, {4, 6});  // used as op(a) = a^T: 6 x 4
    const Tensor b = random_tensor(rng, {3, 4});  // op(b) = b^T: 4 x 3
    Tensor c = random_tensor(rng, {6, 3});
    const Tensor c0 = c;
    gemm(Transpose::Yes, Transpose::Yes, 6, 3, 4, 2.0, a.data(), b.data(), 0.5, c.data());
    for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < 4; ++k) s += a.at(k, i) * b.at(j, k);
            CHECK(c.at(i, j) == doctest::Approx(2.0 * s + 0.5 * c0.at(i, j)).epsilon(1e-13));
        }
    }
}

TEST_CASE("matmul rejects mismatched inner extents") {
    CHECK_THROWS_AS(matmul(Tensor({2, 3}), Tensor({2, 3})), DimensionError);
}

TEST_CASE("batch_moments small cases") {
    const Moments m = batch_moments(Tensor({3, 1}, {1, 2, 3}));
    CHECK(m.mean[0] == doctest::Approx(2.0));
    CHECK(m.var[0] == doctest::Approx(2.0 / 3.0));
    const Moments c = batch_moments(Tensor({2, 1}, {5, 5}));
    CHECK(c.mean[0] == 5.0);
    CHECK(c.var[0] == 0.0);
}

TEST_CASE("batch_moments matches a two-pass oracle") {
    SeededRng rng(12);
    const Tensor x = random_tensor(rng, {100, 8});
    const Moments m = batch_moments(x);
    for (std::size_t f = 0; f < 8; ++f) {
        double mean = 0.0;
        for (std::size_t n = 0; n < 100; ++n) mean += x.at(n, f);
        mean /= 100.0;
        double var = 0.0;
        for (std::size_t n = 0; n < 100; ++n) var += (x.at(n, f) - mean) * (x.at(n, f) - mean);
        var /= 100.0;
        CHECK(std::abs(m.mean[f] - mean) < 1e-12);
        CHECK(std::abs(m.var[f] - var) < 1e-12);
    }
}

TEST_CASE("batch_moments reduces rank-4 input per channel") {
    SeededRng rng(13);
    const Tensor x = random_tensor(rng, {3, 2, 4, 5});
    const Moments m = batch_moments(x);
    for (std::size_t c = 0; c < 2; ++c) {
        double mean = 0.0;
        for (std::size_t n = 0; n < 3; ++n)
            for (std::size_t i = 0; i < 4; ++i)
                for (std::size_t j = 0; j < 5; ++j) mean += x.at(n, c, i, j);
        mean /= 60.0;
        CHECK(std::abs(m.mean[c] - mean) < 1e-12);
    }
}

TEST_CASE("finite_diff_grad small cases") {
    SeededRng rng(14);
    const Tensor x = random_tensor(rng, {3, 4});
    const Tensor g = finite_diff_grad([](const Tensor& t) { return sum(t); }, x);
    for (double v : g.values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
    const Tensor sq =
        finite_diff_grad([](const Tensor& t) { return t[0] * t[0]; }, Tensor::vector({3.0}), 1e-4);
    CHECK(std::abs(sq[0] - 6.0) < 1e-6);
}

TEST_CASE("finite_diff_grad rejects non-finite values") {
    CHECK_THROWS_AS(
        finite_diff_grad([](const Tensor& t) { return std::log(t[0]); }, Tensor::vector({0.0})),
        NumericError);
}
