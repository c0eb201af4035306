#include <doctest.h>

#include <cmath>

#include "plrlab/error.hpp"
#include "plrlab/layers.hpp"

using namespace plr;

namespace {

Tensor random_tensor(SeededRng& rng, const Shape& shape) {
    Tensor t(shape);
    for (auto& v : t.values()) v = rng.uniform(-1.0, 1.0);
    return t;
}

}  // namespace

TEST_CASE("linear small cases") {
    const Tensor x = Tensor::matrix({{3, 4}});
    const LinearParams id{Tensor::matrix({{1, 0}, {0, 1}}), Tensor::vector({0, 0})};
    CHECK(linear_forward(x, id) == x);
    const LinearParams p{Tensor::matrix({{1, 2}}), Tensor::vector({1})};
    CHECK(linear_forward(x, p) == Tensor::matrix({{12}}));
}

TEST_CASE("linear matches a naive loop") {
    SeededRng rng(21);
    const Tensor x = random_tensor(rng, {6, 5});
    const LinearParams p{random_tensor(rng, {4, 5}), random_tensor(rng, {4})};
    const Tensor y = linear_forward(x, p);
    for (std::size_t n = 0; n < 6; ++n) {
        for (std::size_t o = 0; o < 4; ++o) {
            double s = p.bias[o];
            for (std::size_t i = 0; i < 5; ++i) s += p.weight.at(o, i) * x.at(n, i);
            CHECK(std::abs(y.at(n, o) - s) < 1e-12);
        }
    }
}

TEST_CASE("linear rejects a wrong input width") {
    const LinearParams p{Tensor({3, 4}), Tensor({3})};
    CHECK_THROWS_AS(linear_forward(Tensor({2, 5}), p), DimensionError);
}

TEST_CASE("conv2d small cases") {
    SeededRng rng(22);
    const Tensor x = random_tensor(rng, {2, 1, 5, 5});
    const ConvParams one{Tensor({1, 1, 1, 1}, 1.0), Tensor({1}), 1, 0};
    CHECK(conv2d_forward(x, one) == x);

    const ConvParams box{Tensor({1, 1, 3, 3}, 1.0), Tensor({1}), 1, 1};
    const Tensor ones({1, 1, 5, 5}, 1.0);
    const Tensor y = conv2d_forward(ones, box);
    CHECK(y.shape() == Shape{1, 1, 5, 5});
    CHECK(y.at(0, 0, 2, 2) == 9.0);
    CHECK(y.at(0, 0, 0, 0) == 4.0);
    CHECK(y.at(0, 0, 0, 2) == 6.0);
}

TEST_CASE("conv2d matches a direct nested loop") {
    SeededRng rng(23);
    for (std::size_t stride : {1, 2}) {
        const Tensor x = random_tensor(rng, {2, 3, 8, 8});
        const ConvParams p{random_tensor(rng, {4, 3, 3, 3}), random_tensor(rng, {4}), stride, 1};
        const Tensor y = conv2d_forward(x, p);
        const std::size_t oh = (8 + 2 - 3) / stride + 1;
        REQUIRE(y.shape() == Shape{2, 4, oh, oh});
        double worst = 0.0;
        for (std::size_t n = 0; n < 2; ++n)
            for (std::size_t o = 0; o < 4; ++o)
                for (std::size_t i = 0; i < oh; ++i)
                    for (std::size_t j = 0; j < oh; ++j) {
                        double s = p.bias[o];
                        for (std::size_t c = 0; c < 3; ++c)
                            for (std::size_t a = 0; a < 3; ++a)
                                for (std::size_t b = 0; b < 3; ++b) {
                                    const long yy = static_cast<long>(i * stride + a) - 1;
                                    const long xx = static_cast<long>(j * stride + b) - 1;
                                    if (yy < 0 || xx < 0 || yy >= 8 || xx >= 8) continue;
                                    s += p.kernels.at(o, c, a, b) * x.at(n, c, yy, xx);
                                }
                        worst = std::max(worst, std::abs(s - y.at(n, o, i, j)));
                    }
        CHECK(worst < 1e-10);
    }
}

TEST_CASE("conv output extent rejects kernels larger than the padded input") {
    CHECK(conv_output_extent(28, 5, 1, 2) == 28);
    CHECK(conv_output_extent(7, 3, 1, 0) == 5);
    CHECK_THROWS_AS(conv_output_extent(2, 5, 1, 1), DimensionError);
}

TEST_CASE("ReLU family definitions") {
    const ActivationOutput r = activation_forward(Tensor::matrix({{-2, 3}}), ActivationSpec::relu());
    CHECK(r.y == Tensor::matrix({{0, 3}}));
    CHECK(r.pattern == std::vector<LaneIndex>{0, 1});
    const ActivationOutput l =
        activation_forward(Tensor::matrix({{-2}}), ActivationSpec::leaky_relu(0.01));
    CHECK(l.y[0] == doctest::Approx(-0.02));
    const Tensor alpha = Tensor::vector({0.5});
    const ActivationOutput p =
        activation_forward(Tensor::matrix({{-2}}), ActivationSpec::prelu(), &alpha);
    CHECK(p.y[0] == doctest::Approx(-1.0));
}

TEST_CASE("maxout picks the winning lane, lowest index on ties") {
    const ActivationOutput m = activation_forward(Tensor::matrix({{1, 3, 2}}), ActivationSpec::maxout(3));
    CHECK(m.y == Tensor::matrix({{3}}));
    CHECK(m.pattern == std::vector<LaneIndex>{1});
    const ActivationOutput t = activation_forward(Tensor::matrix({{2, 2}}), ActivationSpec::maxout(2));
    CHECK(t.y[0] == 2.0);
    CHECK(t.pattern[0] == 0);
}

TEST_CASE("maxout backward routes gradient to the argmax lane only") {
    SeededRng rng(24);
    const Tensor h = random_tensor(rng, {5, 12});
    const ActivationSpec spec = ActivationSpec::maxout(3);
    const ActivationOutput out = activation_forward(h, spec);
    const Tensor dy = random_tensor(rng, out.y.shape());
    const ActivationGrads g = activation_backward(h, spec, nullptr, out.pattern, dy);
    for (std::size_t n = 0; n < 5; ++n) {
        for (std::size_t u = 0; u < 4; ++u) {
            for (std::size_t j = 0; j < 3; ++j) {
                const double want = j == out.pattern[n * 4 + u] ? dy.at(n, u) : 0.0;
                CHECK(g.input.at(n, u * 3 + j) == want);
            }
        }
    }
}

TEST_CASE("activation spec validation") {
    CHECK_THROWS_AS(ActivationSpec::maxout(1).validate(), SpecError);
    CHECK_THROWS_AS((ActivationSpec{ActivationKind::ReLU, 2, 0.0}).validate(), SpecError);
    CHECK_THROWS_AS(activation_forward(Tensor({2, 5}), ActivationSpec::maxout(2)), DimensionError);
}

TEST_CASE("batchnorm train mode small cases") {
    BatchNormState s = BatchNormState::identity(1, 0.0);
    const Tensor y = batchnorm_forward(Tensor({3, 1}, {1, 2, 3}), s, Mode::Train);
    CHECK(y[0] == doctest::Approx(-1.22474).epsilon(1e-5));
    CHECK(y[1] == doctest::Approx(0.0));
    CHECK(y[2] == doctest::Approx(1.22474).epsilon(1e-5));

    BatchNormState c = BatchNormState::identity(1, 1e-5);
    c.gamma[0] = 2.0;
    c.beta[0] = 1.0;
    const Tensor cy = batchnorm_forward(Tensor({3, 1}, 5.0), c, Mode::Train);
    for (double v : cy.values()) CHECK(v == doctest::Approx(1.0));

    SeededRng rng(25);
    BatchNormState z = BatchNormState::identity(4);
    z.gamma.fill(0.0);
    for (std::size_t f = 0; f < 4; ++f) z.beta[f] = 0.5 * f;
    const Tensor zy = batchnorm_forward(random_tensor(rng, {6, 4}), z, Mode::Train);
    for (std::size_t n = 0; n < 6; ++n)
        for (std::size_t f = 0; f < 4; ++f) CHECK(zy.at(n, f) == 0.5 * f);
}

TEST_CASE("batchnorm updates running moments in train mode only") {
    SeededRng rng(26);
    const Tensor x = random_tensor(rng, {10, 3});
    BatchNormState s = BatchNormState::identity(3);
    const BatchNormState before = s;
    batchnorm_forward(x, s, Mode::Infer);
    CHECK(s.running_mean == before.running_mean);
    CHECK(s.running_var == before.running_var);
    batchnorm_forward(x, s, Mode::Train);
    CHECK_FALSE(s.running_mean == before.running_mean);
}

TEST_CASE("batchnorm train mode needs two examples") {
    BatchNormState s = BatchNormState::identity(2);
    CHECK_THROWS_AS(batchnorm_forward(Tensor({1, 2}), s, Mode::Train), DomainError);
}

TEST_CASE("dropout contracts") {
    SeededRng rng(27);
    const Tensor x = random_tensor(rng, {4, 6});
    CHECK(dropout_forward(x, {0.0}, Mode::Train, rng).y == x);
    CHECK(dropout_forward(x, {0.0}, Mode::Infer, rng).y == x);
    CHECK(dropout_forward(x, {0.2}, Mode::Infer, rng).y == x);
}

TEST_CASE("dropout drop rate and expectation") {
    SeededRng rng(28);
    const Tensor x({100000}, 1.0);
    const DropoutOutput out = dropout_forward(x, {0.2}, Mode::Train, rng);
    std::size_t dropped = 0;
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (out.y[i] == 0.0) ++dropped;
        total += out.y[i];
    }
    CHECK(std::abs(static_cast<double>(dropped) / x.size() - 0.2) <= 0.01);
    CHECK(total / x.size() == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("pooling small cases") {
    const Tensor c({1, 2, 5, 5}, 3.5);
    for (const PoolSpec& spec : {PoolSpec::max(3, 2), PoolSpec::avg(2, 1), PoolSpec::global_avg()}) {
        const Tensor y = pool_forward(c, spec).y;
        for (double v : y.values()) CHECK(v == doctest::Approx(3.5));
    }
    const Tensor x({1, 1, 2, 2}, {1, 5, 2, 3});
    const PoolOutput m = pool_forward(x, PoolSpec::max(2, 2));
    CHECK(m.y.size() == 1);
    CHECK(m.y[0] == 5.0);
}

TEST_CASE("average pooling matches a loop oracle") {
    SeededRng rng(29);
    const Tensor x = random_tensor(rng, {2, 3, 7, 7});
    const Tensor y = pool_forward(x, PoolSpec::avg(3, 2)).y;
    REQUIRE(y.shape() == Shape{2, 3, 3, 3});
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < 3; ++i)
                for (std::size_t j = 0; j < 3; ++j) {
                    double s = 0.0;
                    for (std::size_t a = 0; a < 3; ++a)
                        for (std::size_t b = 0; b < 3; ++b) s += x.at(n, c, 2 * i + a, 2 * j + b);
                    CHECK(std::abs(y.at(n, c, i, j) - s / 9.0) < 1e-12);
                }
    const Tensor g = pool_forward(x, PoolSpec::global_avg()).y;
    double s = 0.0;
    for (std::size_t i = 0; i < 7; ++i)
        for (std::size_t j = 0; j < 7; ++j) s += x.at(1, 2, i, j);
    CHECK(std::abs(g[1 * 3 + 2] - s / 49.0) < 1e-12);
}

TEST_CASE("softmax cross-entropy") {
    const Tensor uniform({1, 10}, 0.3);
    const std::vector<int> label{4};
    CHECK(softmax_xent(uniform, label).loss == doctest::Approx(std::log(10.0)));
    Tensor sure({1, 10});
    sure[4] = 1000.0;
    CHECK(softmax_xent(sure, label).loss == doctest::Approx(0.0));

    SeededRng rng(30);
    const Tensor logits = random_tensor(rng, {5, 7});
    const std::vector<int> labels{0, 3, 6, 2, 2};
    const LossOutput out = softmax_xent(logits, labels);
    for (std::size_t n = 0; n < 5; ++n) {
        double s = 0.0;
        for (std::size_t c = 0; c < 7; ++c) s += out.grad.at(n, c);
        CHECK(std::abs(s) < 1e-12);
    }
}

TEST_CASE("softmax cross-entropy rejects labels out of range") {
    const std::vector<int> bad{5};
    CHECK_THROWS(softmax_xent(Tensor({1, 3}), bad));
}
