#include "doctest.h"

#include "maelab/gradcheck.hpp"
#include "maelab/ops.hpp"

using namespace maelab;
namespace ops_ = maelab::ops;

namespace {

// Random parameter matrix registered in a fresh set.
Tensor param(ParamSet& params, const std::string& name, int rows, int cols, uint64_t seed,
             double stddev = 1.0, double shift = 0.0) {
    Rng rng(seed);
    Tensor t = Tensor::randn(rng, rows, cols, stddev, true);
    if (shift != 0.0) {
        for (double& v : *t.data) v += shift;
    }
    return params.add(name, t);
}

}  // namespace

TEST_CASE("grad_check: quadratic is exact to 1e-7") {
    ParamSet params;
    Tensor p = param(params, "p", 4, 5, 21);
    auto loss = [&] { return ops_::sum_all(ops_::mul(p, p)); };
    CHECK(grad_check(loss, params, 200, 1) <= 1e-7);
}

TEST_CASE("grad_check: zero function has zero error under the denominator floor") {
    ParamSet params;
    Tensor p = param(params, "p", 3, 3, 22);
    auto loss = [&] { return ops_::scale(ops_::sum_all(p), 0.0); };
    CHECK(grad_check(loss, params, 50, 2) == 0.0);
}

TEST_CASE("grad_check: probe count must be positive") {
    ParamSet params;
    Tensor p = param(params, "p", 2, 2, 23);
    auto loss = [&] { return ops_::sum_all(p); };
    CHECK_THROWS_AS(grad_check(loss, params, 0, 3), TensorError);
}

// Every differentiable op, checked against central differences over at
// least 200 random coordinates.
TEST_CASE("grad_check: elementwise and arithmetic ops") {
    Rng data_rng(100);
    Tensor r = Tensor::randn(data_rng, 6, 7, 1.0);

    struct Case {
        const char* name;
        std::function<Tensor(const Tensor&, const Tensor&)> fn;
        double shift;  // keeps abs/pow away from kinks
    };
    const std::vector<Case> cases = {
        {"add", [&](const Tensor& a, const Tensor& b) { return ops_::add(a, b); }, 0.0},
        {"sub", [&](const Tensor& a, const Tensor& b) { return ops_::sub(a, b); }, 0.0},
        {"mul", [&](const Tensor& a, const Tensor& b) { return ops_::mul(a, b); }, 0.0},
        {"scale", [&](const Tensor& a, const Tensor&) { return ops_::scale(a, -1.7); }, 0.0},
        {"add_scalar", [&](const Tensor& a, const Tensor&) { return ops_::add_scalar(a, 2.5); },
         0.0},
        {"abs", [&](const Tensor& a, const Tensor&) { return ops_::abs_val(a); }, 3.0},
        {"pow", [&](const Tensor& a, const Tensor&) { return ops_::pow_scalar(a, 2.5); }, 4.0},
        {"sigmoid", [&](const Tensor& a, const Tensor&) { return ops_::sigmoid(a); }, 0.0},
        {"softplus", [&](const Tensor& a, const Tensor&) { return ops_::softplus(a); }, 0.0},
        {"gelu", [&](const Tensor& a, const Tensor&) { return ops_::gelu(a); }, 0.0},
    };
    for (const Case& c : cases) {
        CAPTURE(c.name);
        ParamSet params;
        Tensor a = param(params, "a", 6, 7, 200 + fnv1a(c.name), 1.0, c.shift);
        Tensor b = param(params, "b", 6, 7, 300 + fnv1a(c.name), 1.0, c.shift);
        auto loss = [&] { return ops_::mean_all(ops_::mul(c.fn(a, b), r)); };
        CHECK(grad_check(loss, params, 200, 5) <= 1e-4);
    }
}

TEST_CASE("grad_check: matmul, transpose, reshape") {
    Rng data_rng(101);
    Tensor r = Tensor::randn(data_rng, 5, 6, 1.0);
    ParamSet params;
    Tensor a = param(params, "a", 5, 4, 400);
    Tensor b = param(params, "b", 4, 6, 401);
    auto loss = [&] {
        Tensor c = ops_::matmul(a, b);
        Tensor t = ops_::transpose(ops_::reshape(c, 6, 5));
        return ops_::mean_all(ops_::mul(t, r));
    };
    CHECK(grad_check(loss, params, 200, 6) <= 1e-4);
}

TEST_CASE("grad_check: fused linear and layer_norm_affine") {
    Rng data_rng(105);
    Tensor r = Tensor::randn(data_rng, 5, 6, 1.0);
    ParamSet params;
    Tensor x = param(params, "x", 5, 4, 800);
    Tensor w = param(params, "w", 4, 6, 801);
    Tensor b = param(params, "b", 1, 6, 802);
    Tensor gain = param(params, "gain", 1, 6, 803);
    Tensor shift = param(params, "shift", 1, 6, 804);
    auto loss = [&] {
        Tensor y = ops_::layer_norm_affine(ops_::linear(x, w, b), gain, shift, 1e-5);
        return ops_::mean_all(ops_::mul(y, r));
    };
    CHECK(grad_check(loss, params, 200, 10) <= 1e-4);

    // Fused forms agree with their composed equivalents.
    NoGradGuard no_grad;
    Tensor lhs = ops_::linear(x, w, b);
    Tensor rhs = ops_::add_rowvec(ops_::matmul(x, w), b);
    for (size_t i = 0; i < lhs.numel(); ++i) {
        CHECK((*lhs.data)[i] == doctest::Approx((*rhs.data)[i]).epsilon(1e-14));
    }
    Tensor fused = ops_::layer_norm_affine(lhs, gain, shift, 1e-5);
    Tensor composed = ops_::add_rowvec(ops_::mul_rowvec(ops_::layer_norm_rows(rhs, 1e-5), gain), shift);
    for (size_t i = 0; i < fused.numel(); ++i) {
        CHECK((*fused.data)[i] == doctest::Approx((*composed.data)[i]).epsilon(1e-12));
    }
}

TEST_CASE("grad_check: softmax and layer norm") {
    Rng data_rng(102);
    Tensor r = Tensor::randn(data_rng, 6, 9, 1.0);
    ParamSet params;
    Tensor a = param(params, "a", 6, 9, 500, 2.0);
    auto loss = [&] {
        return ops_::mean_all(
            ops_::mul(ops_::softmax_rows(ops_::layer_norm_rows(a, 1e-5)), r));
    };
    CHECK(grad_check(loss, params, 200, 7) <= 1e-4);
}

TEST_CASE("grad_check: row-vector broadcasts and reductions") {
    Rng data_rng(103);
    Tensor r = Tensor::randn(data_rng, 1, 8, 1.0);
    ParamSet params;
    Tensor a = param(params, "a", 7, 8, 600);
    Tensor v = param(params, "v", 1, 8, 601);
    auto loss = [&] {
        Tensor x = ops_::add_rowvec(ops_::mul_rowvec(a, v), v);
        return ops_::sum_all(ops_::mul(ops_::mean_over_rows(x), r));
    };
    CHECK(grad_check(loss, params, 200, 8) <= 1e-4);
}

TEST_CASE("grad_check: gather, concat, slice, repeat") {
    Rng data_rng(104);
    Tensor r = Tensor::randn(data_rng, 9, 4, 1.0);
    ParamSet params;
    Tensor a = param(params, "a", 5, 4, 700);
    Tensor b = param(params, "b", 1, 4, 701);
    auto loss = [&] {
        Tensor g = ops_::gather_rows(a, {0, 2, 2, 4, 1});  // duplicate index on purpose
        Tensor stack = ops_::concat_rows(g, ops_::repeat_row(b, 4));
        Tensor wide = ops_::concat_cols({stack, stack});
        return ops_::mean_all(ops_::mul(ops_::slice_cols(wide, 2, 4), r));
    };
    CHECK(grad_check(loss, params, 200, 9) <= 1e-4);
}
