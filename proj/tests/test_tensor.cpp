#include "doctest.h"

#include <cmath>

#include "maelab/ops.hpp"

using namespace maelab;
namespace ops_ = maelab::ops;

TEST_CASE("tensor construction and invariants") {
    Tensor t = Tensor::from_values({1, 2, 3, 4, 5, 6}, 2, 3);
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    CHECK(t.at(1, 2) == 6.0);
    CHECK_THROWS_AS(Tensor::from_values({1, 2}, 2, 3), TensorError);
    CHECK_THROWS_AS(Tensor::zeros(0, 3), TensorError);
    CHECK_THROWS_AS(t.scalar(), TensorError);
}

TEST_CASE("backward of sum is all ones") {
    Tensor p = Tensor::from_values({1, 2, 3}, 1, 3, true);
    Tensor loss = ops_::sum_all(p);
    backward(loss);
    CHECK((*p.grad)[0] == 1.0);
    CHECK((*p.grad)[1] == 1.0);
    CHECK((*p.grad)[2] == 1.0);
}

TEST_CASE("backward of sum of squares") {
    Tensor p = Tensor::from_values({1, 2}, 1, 2, true);
    Tensor loss = ops_::sum_all(ops_::mul(p, p));
    backward(loss);
    CHECK((*p.grad)[0] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK((*p.grad)[1] == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("disconnected parameter keeps zero gradient") {
    Tensor p = Tensor::from_values({1, 2}, 1, 2, true);
    Tensor q = Tensor::from_values({3, 4}, 1, 2, true);
    Tensor loss = ops_::sum_all(p);
    backward(loss);
    CHECK((*q.grad)[0] == 0.0);
    CHECK((*q.grad)[1] == 0.0);
}

TEST_CASE("backward rejects non-scalar loss") {
    Tensor p = Tensor::from_values({1, 2}, 1, 2, true);
    Tensor out = ops_::mul(p, p);
    CHECK_THROWS_AS(backward(out), TensorError);
}

TEST_CASE("backward through shared subexpression accumulates") {
    // loss = sum(p*p + p*p) -> d/dp = 4p
    Tensor p = Tensor::from_values({1.5}, 1, 1, true);
    Tensor sq = ops_::mul(p, p);
    Tensor loss = ops_::sum_all(ops_::add(sq, sq));
    backward(loss);
    CHECK((*p.grad)[0] == doctest::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("non-finite forward values raise a numeric error naming the op") {
    Tensor a = Tensor::full(2, 2, 1e200);
    Tensor b = Tensor::full(2, 2, 1e200);
    try {
        ops_::matmul(a, b);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("matmul") != std::string::npos);
    }
}

TEST_CASE("softmax rows sum to one") {
    Rng rng(7);
    Tensor x = Tensor::randn(rng, 16, 33, 5.0);
    Tensor y = ops_::softmax_rows(x);
    for (int i = 0; i < y.rows(); ++i) {
        double sum = 0.0;
        for (int j = 0; j < y.cols(); ++j) sum += y.at(i, j);
        CHECK(std::fabs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("layer norm rows have zero mean and unit variance") {
    Rng rng(8);
    Tensor x = Tensor::randn(rng, 12, 64, 3.0);
    Tensor y = ops_::layer_norm_rows(x, 1e-12);
    for (int i = 0; i < y.rows(); ++i) {
        double mean = 0.0;
        for (int j = 0; j < y.cols(); ++j) mean += y.at(i, j);
        mean /= y.cols();
        double var = 0.0;
        for (int j = 0; j < y.cols(); ++j) var += (y.at(i, j) - mean) * (y.at(i, j) - mean);
        var /= y.cols();
        CHECK(std::fabs(mean) <= 1e-10);
        CHECK(std::fabs(var - 1.0) <= 1e-8);
    }
}

TEST_CASE("matmul against hand-computed values") {
    Tensor a = Tensor::from_values({1, 2, 3, 4}, 2, 2);
    Tensor b = Tensor::from_values({5, 6, 7, 8}, 2, 2);
    Tensor c = ops_::matmul(a, b);
    CHECK(c.at(0, 0) == 19.0);
    CHECK(c.at(0, 1) == 22.0);
    CHECK(c.at(1, 0) == 43.0);
    CHECK(c.at(1, 1) == 50.0);
    CHECK_THROWS_AS(ops_::matmul(a, Tensor::zeros(3, 2)), TensorError);
}

TEST_CASE("structural ops behave as documented") {
    Tensor a = Tensor::from_values({1, 2, 3, 4, 5, 6}, 3, 2);

    Tensor t = ops_::transpose(a);
    CHECK(t.rows() == 2);
    CHECK(t.at(0, 2) == 5.0);

    Tensor g = ops_::gather_rows(a, {2, 0, 2});
    CHECK(g.rows() == 3);
    CHECK(g.at(0, 0) == 5.0);
    CHECK(g.at(1, 0) == 1.0);
    CHECK(g.at(2, 1) == 6.0);
    CHECK_THROWS_AS(ops_::gather_rows(a, {3}), TensorError);

    Tensor r = ops_::repeat_row(Tensor::from_values({7, 8}, 1, 2), 3);
    CHECK(r.rows() == 3);
    CHECK(r.at(2, 1) == 8.0);

    Tensor cc = ops_::concat_cols({a, a});
    CHECK(cc.cols() == 4);
    CHECK(cc.at(1, 3) == 4.0);

    Tensor sc = ops_::slice_cols(cc, 2, 2);
    CHECK(sc.at(1, 0) == 3.0);

    Tensor cr = ops_::concat_rows(a, a);
    CHECK(cr.rows() == 6);
    CHECK(cr.at(5, 1) == 6.0);

    Tensor rs = ops_::reshape(a, 2, 3);
    CHECK(rs.at(0, 2) == 3.0);
    CHECK_THROWS_AS(ops_::reshape(a, 4, 2), TensorError);
}

TEST_CASE("forward passes are bitwise deterministic") {
    Rng rng1(11), rng2(11);
    Tensor a1 = Tensor::randn(rng1, 8, 8, 1.0);
    Tensor a2 = Tensor::randn(rng2, 8, 8, 1.0);
    Tensor y1 = ops_::softmax_rows(ops_::matmul(a1, ops_::gelu(a1)));
    Tensor y2 = ops_::softmax_rows(ops_::matmul(a2, ops_::gelu(a2)));
    for (size_t i = 0; i < y1.numel(); ++i) CHECK((*y1.data)[i] == (*y2.data)[i]);
}

TEST_CASE("gradients accumulate for duplicate gather indices") {
    Tensor p = Tensor::from_values({1, 2}, 2, 1, true);
    Tensor g = ops_::gather_rows(p, {0, 0, 1});
    backward(ops_::sum_all(g));
    CHECK((*p.grad)[0] == 2.0);
    CHECK((*p.grad)[1] == 1.0);
}

TEST_CASE("no-grad mode records no tape") {
    Tensor p = Tensor::from_values({1, 2}, 1, 2, true);
    NoGradGuard guard;
    Tensor out = ops_::mul(p, p);
    CHECK_FALSE(out.requires_grad);
    CHECK(out.node == nullptr);
}

TEST_CASE("op-shape instrumentation records calls") {
    opstats_clear();
    opstats_enable(true);
    Tensor a = Tensor::full(3, 4, 1.0);
    ops_::scale(a, 2.0);
    opstats_enable(false);
    REQUIRE(opstats_calls().size() == 1);
    CHECK(std::string(opstats_calls()[0].op) == "scale");
    CHECK(opstats_calls()[0].rows == 3);
    opstats_clear();
}
