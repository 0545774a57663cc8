#include <doctest.h>

#include "s2c/ops.hpp"
#include "test_helpers.hpp"

using namespace s2c;
using s2c_test::fd_max_rel_error;
using s2c_test::projection_loss;

namespace {

// Generic gradient check for a graph builder: loss = <w, f(x)>.
void check_unary_grads(const std::function<Var<double>(const Var<double>&)>& op, Shape in_shape, double lo, double hi,
                       double tol = 1e-6) {
    Rng rng(7);
    Var<double> x(Tensor<double>::uniform(in_shape, rng, lo, hi), true);
    Tensor<double> w;
    {
        Var<double> y0 = op(x);
        w = Tensor<double>::uniform(y0.shape(), rng, -1.0, 1.0);
    }
    auto f = [&]() { return projection_loss(op(x), w).value()[0]; };
    Var<double> loss = projection_loss(op(x), w);
    backward(loss);
    CHECK(fd_max_rel_error(x, f) < tol);
}

}  // namespace

TEST_CASE("elementwise forward values") {
    Rng rng(1);
    Var<double> a(Tensor<double>::uniform(Shape{1, 2, 3, 3}, rng, -2, 2));
    Var<double> b(Tensor<double>::uniform(Shape{1, 2, 3, 3}, rng, 0.5, 2));
    auto s = add(a, b);
    for (i64 i = 0; i < s.value().numel(); ++i) CHECK(s.value()[i] == doctest::Approx(a.value()[i] + b.value()[i]));
    auto g0 = gelu(Var<double>(Tensor<double>::zeros(Shape{1, 1, 1, 1})));
    CHECK(g0.value()[0] == 0.0);  // gelu(0) = 0 keeps the zero-input block cases exact
    auto sp = softplus(Var<double>(Tensor<double>::zeros(Shape{1, 1, 1, 1})));
    CHECK(sp.value()[0] == doctest::Approx(std::log(2.0)));
}

TEST_CASE("broadcast add/mul with channel and scalar operands") {
    Rng rng(2);
    Var<double> x(Tensor<double>::uniform(Shape{2, 3, 4, 5}, rng, -1, 1), true);
    Var<double> cvec(Tensor<double>::uniform(Shape{1, 3, 1, 1}, rng, -1, 1), true);
    Var<double> sc(Tensor<double>::uniform(Shape{1, 1, 1, 1}, rng, 0.5, 1.5), true);

    Tensor<double> w;
    {
        Var<double> y = mul(add(x, cvec), sc);
        w = Tensor<double>::uniform(y.shape(), rng, -1, 1);
    }
    auto build = [&]() { return projection_loss(mul(add(x, cvec), sc), w); };
    auto f = [&]() { return build().value()[0]; };
    x.zero_grad();
    cvec.zero_grad();
    sc.zero_grad();
    backward(build());
    CHECK(fd_max_rel_error(x, f) < 1e-6);
    CHECK(fd_max_rel_error(cvec, f) < 1e-6);
    CHECK(fd_max_rel_error(sc, f) < 1e-6);
}

TEST_CASE("unary op gradients") {
    check_unary_grads([](const Var<double>& x) { return gelu(x); }, Shape{1, 2, 3, 3}, -2, 2);
    check_unary_grads([](const Var<double>& x) { return sigmoid(x); }, Shape{1, 2, 3, 3}, -2, 2);
    check_unary_grads([](const Var<double>& x) { return silu(x); }, Shape{1, 2, 3, 3}, -2, 2);
    check_unary_grads([](const Var<double>& x) { return tanh_op(x); }, Shape{1, 2, 3, 3}, -2, 2);
    check_unary_grads([](const Var<double>& x) { return softplus(x); }, Shape{1, 2, 3, 3}, -2, 2);
    check_unary_grads([](const Var<double>& x) { return erf_op(x); }, Shape{1, 2, 3, 3}, -2, 2);
    check_unary_grads([](const Var<double>& x) { return exp_op(x); }, Shape{1, 2, 3, 3}, -1, 1);
    check_unary_grads([](const Var<double>& x) { return log_op(x); }, Shape{1, 2, 3, 3}, 0.2, 3);
    check_unary_grads([](const Var<double>& x) { return sqrt_op(x); }, Shape{1, 2, 3, 3}, 0.2, 3);
    check_unary_grads([](const Var<double>& x) { return square(x); }, Shape{1, 2, 3, 3}, -2, 2);
    check_unary_grads([](const Var<double>& x) { return div(constant(Tensor<double>::full(x.shape(), 1.0)), x); },
                      Shape{1, 2, 3, 3}, 0.5, 2);
}

TEST_CASE("shape op gradients") {
    check_unary_grads([](const Var<double>& x) { return pad_symmetric(x, 2, 3, 1, 4); }, Shape{1, 2, 4, 5}, -1, 1);
    check_unary_grads([](const Var<double>& x) { return crop(x, 1, 3, 2, 2); }, Shape{1, 2, 5, 5}, -1, 1);
    check_unary_grads([](const Var<double>& x) { return slice_channels(x, 1, 2); }, Shape{1, 4, 3, 3}, -1, 1);
    check_unary_grads([](const Var<double>& x) { return avg_pool2(x); }, Shape{1, 2, 6, 6}, -1, 1);
    check_unary_grads(
        [](const Var<double>& x) {
            return concat_channels<double>({slice_channels(x, 0, 1), slice_channels(x, 1, 2), x});
        },
        Shape{1, 3, 2, 2}, -1, 1);
}

TEST_CASE("pad_symmetric mirrors edges") {
    Tensor<double> t(Shape{1, 1, 2, 3});
    // rows: [1 2 3; 4 5 6]
    for (i64 i = 0; i < 6; ++i) t[i] = static_cast<double>(i + 1);
    auto p = pad_symmetric(Var<double>(t), 1, 1, 1, 1);
    // symmetric (edge-inclusive): top-left corner duplicates (0,0)
    CHECK(p.value().at(0, 0, 0, 0) == 1.0);
    CHECK(p.value().at(0, 0, 0, 1) == 1.0);
    CHECK(p.value().at(0, 0, 1, 0) == 1.0);
    CHECK(p.value().at(0, 0, 3, 4) == 6.0);
    // padding wider than the source folds repeatedly instead of reading out of bounds
    auto wide = pad_symmetric(Var<double>(t), 5, 5, 7, 7);
    CHECK(wide.value().all_finite());
    CHECK(wide.shape().h == 12);
    CHECK(wide.shape().w == 17);
}

TEST_CASE("conv2d matches direct loop reference") {
    Rng rng(3);
    const i64 cin = 3, cout = 4, k = 3, stride = 2, pad = 1;
    Var<double> x(Tensor<double>::uniform(Shape{2, cin, 7, 6}, rng, -1, 1));
    Var<double> w(Tensor<double>::uniform(Shape{cout, cin, k, k}, rng, -1, 1));
    Var<double> b(Tensor<double>::uniform(Shape{1, cout, 1, 1}, rng, -1, 1));
    auto y = conv2d(x, w, b, stride, pad);
    const Shape ys = y.shape();
    CHECK(ys == Shape{2, cout, 4, 3});
    for (i64 n = 0; n < ys.n; ++n)
        for (i64 co = 0; co < cout; ++co)
            for (i64 ho = 0; ho < ys.h; ++ho)
                for (i64 wo = 0; wo < ys.w; ++wo) {
                    double acc = b.value()[co];
                    for (i64 ci = 0; ci < cin; ++ci)
                        for (i64 i = 0; i < k; ++i)
                            for (i64 j = 0; j < k; ++j) {
                                const i64 sh = ho * stride - pad + i;
                                const i64 sw = wo * stride - pad + j;
                                if (sh >= 0 && sh < 7 && sw >= 0 && sw < 6)
                                    acc += w.value().at(co, ci, i, j) * x.value().at(n, ci, sh, sw);
                            }
                    CHECK(y.value().at(n, co, ho, wo) == doctest::Approx(acc).epsilon(1e-10));
                }
}

TEST_CASE("conv2d gradients (dense, depthwise, grouped, pointwise)") {
    Rng rng(4);
    struct Case {
        i64 cin, cout, k, stride, pad, groups;
    };
    for (const Case cs : {Case{4, 6, 3, 1, 1, 1}, Case{4, 4, 3, 1, 1, 4}, Case{6, 6, 1, 1, 0, 3},
                          Case{3, 5, 1, 1, 0, 1}, Case{3, 4, 5, 2, 2, 1}}) {
        Var<double> x(Tensor<double>::uniform(Shape{2, cs.cin, 6, 5}, rng, -1, 1), true);
        Var<double> w(Tensor<double>::uniform(Shape{cs.cout, cs.cin / cs.groups, cs.k, cs.k}, rng, -1, 1), true);
        Var<double> b(Tensor<double>::uniform(Shape{1, cs.cout, 1, 1}, rng, -1, 1), true);
        Tensor<double> proj;
        {
            auto y = conv2d(x, w, b, cs.stride, cs.pad, cs.groups);
            proj = Tensor<double>::uniform(y.shape(), rng, -1, 1);
        }
        auto build = [&]() { return projection_loss(conv2d(x, w, b, cs.stride, cs.pad, cs.groups), proj); };
        x.zero_grad();
        w.zero_grad();
        b.zero_grad();
        backward(build());
        auto f = [&]() { return build().value()[0]; };
        CHECK(fd_max_rel_error(x, f) < 1e-6);
        CHECK(fd_max_rel_error(w, f) < 1e-6);
        CHECK(fd_max_rel_error(b, f) < 1e-6);
    }
}

TEST_CASE("conv_transpose2d inverts stride arithmetic and has correct grads") {
    Rng rng(5);
    Var<double> x(Tensor<double>::uniform(Shape{1, 3, 4, 5}, rng, -1, 1), true);
    Var<double> w(Tensor<double>::uniform(Shape{3, 2, 5, 5}, rng, -1, 1), true);
    Var<double> b(Tensor<double>::uniform(Shape{1, 2, 1, 1}, rng, -1, 1), true);
    auto y = conv_transpose2d(x, w, b, 2, 2, 1);
    CHECK(y.shape() == Shape{1, 2, 8, 10});

    Tensor<double> proj = Tensor<double>::uniform(y.shape(), rng, -1, 1);
    auto build = [&]() { return projection_loss(conv_transpose2d(x, w, b, 2, 2, 1), proj); };
    x.zero_grad();
    w.zero_grad();
    b.zero_grad();
    backward(build());
    auto f = [&]() { return build().value()[0]; };
    CHECK(fd_max_rel_error(x, f) < 1e-6);
    CHECK(fd_max_rel_error(w, f) < 1e-6);
    CHECK(fd_max_rel_error(b, f) < 1e-6);
}

TEST_CASE("layer_norm_chan normalizes per position and has correct grads") {
    Rng rng(6);
    const i64 C = 5;
    Var<double> x(Tensor<double>::uniform(Shape{2, C, 3, 4}, rng, -3, 3), true);
    Var<double> gamma(Tensor<double>::uniform(Shape{1, C, 1, 1}, rng, 0.5, 1.5), true);
    Var<double> beta(Tensor<double>::uniform(Shape{1, C, 1, 1}, rng, -0.5, 0.5), true);
    auto y = layer_norm_chan(x, gamma, beta);
    // channel mean of (y-beta)/gamma is ~0 and variance ~1 at each position
    for (i64 n = 0; n < 2; ++n)
        for (i64 h = 0; h < 3; ++h)
            for (i64 w = 0; w < 4; ++w) {
                double m = 0, v = 0;
                for (i64 c = 0; c < C; ++c) {
                    const double xh = (y.value().at(n, c, h, w) - beta.value()[c]) / gamma.value()[c];
                    m += xh;
                    v += xh * xh;
                }
                CHECK(std::abs(m / C) < 1e-9);
                CHECK(v / C == doctest::Approx(1.0).epsilon(1e-4));
            }

    Tensor<double> proj = Tensor<double>::uniform(y.shape(), rng, -1, 1);
    auto build = [&]() { return projection_loss(layer_norm_chan(x, gamma, beta), proj); };
    x.zero_grad();
    gamma.zero_grad();
    beta.zero_grad();
    backward(build());
    auto f = [&]() { return build().value()[0]; };
    CHECK(fd_max_rel_error(x, f) < 1e-5);
    CHECK(fd_max_rel_error(gamma, f) < 1e-6);
    CHECK(fd_max_rel_error(beta, f) < 1e-6);
}

TEST_CASE("window_attention gradients") {
    Rng rng(8);
    const i64 C = 6, heads = 2, win = 2;
    Var<double> q(Tensor<double>::uniform(Shape{1, C, 4, 4}, rng, -1, 1), true);
    Var<double> k(Tensor<double>::uniform(Shape{1, C, 4, 4}, rng, -1, 1), true);
    Var<double> v(Tensor<double>::uniform(Shape{1, C, 4, 4}, rng, -1, 1), true);
    Tensor<double> proj;
    {
        auto y = window_attention(q, k, v, heads, win);
        proj = Tensor<double>::uniform(y.shape(), rng, -1, 1);
    }
    auto build = [&]() { return projection_loss(window_attention(q, k, v, heads, win), proj); };
    q.zero_grad();
    k.zero_grad();
    v.zero_grad();
    backward(build());
    auto f = [&]() { return build().value()[0]; };
    CHECK(fd_max_rel_error(q, f) < 1e-5);
    CHECK(fd_max_rel_error(k, f) < 1e-5);
    CHECK(fd_max_rel_error(v, f) < 1e-5);
}

TEST_CASE("ste_round passes gradient through and rounds half away from zero") {
    Tensor<double> t(Shape{1, 1, 1, 6});
    t[0] = 1.4;
    t[1] = -1.4;
    t[2] = 0.5;
    t[3] = -0.5;
    t[4] = 2.5;
    t[5] = -2.5;
    Var<double> x(t, true);
    auto y = ste_round(x);
    CHECK(y.value()[0] == 1.0);
    CHECK(y.value()[1] == -1.0);
    CHECK(y.value()[2] == 1.0);
    CHECK(y.value()[3] == -1.0);
    CHECK(y.value()[4] == 3.0);
    CHECK(y.value()[5] == -3.0);
    backward(sum_all(y));
    for (i64 i = 0; i < 6; ++i) CHECK(x.grad()[i] == 1.0);
}

TEST_CASE("graph memory is released during backward") {
    Rng rng(9);
    Var<double> x(Tensor<double>::uniform(Shape{1, 4, 8, 8}, rng, -1, 1), true);
    Var<double> y = gelu(x);
    Var<double> z = mean_all(square(y));
    auto ynode = y.n;
    backward(z);
    CHECK_FALSE(ynode->value.defined());  // interior value dropped
    CHECK(x.grad().defined());            // leaf grad kept
}
