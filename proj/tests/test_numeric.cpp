#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "netsight/autodiff.hpp"
#include "netsight/gradcheck.hpp"
#include "netsight/optim.hpp"
#include "netsight/rng.hpp"

using namespace netsight;

namespace {

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, Scalar lo = -1.0,
                     Scalar hi = 1.0) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.uniform(lo, hi);
    return m;
}

}  // namespace

TEST_CASE("linear: identity and hand-computed products") {
    Tape t;
    Var x = t.watch((Matrix(1, 2) << 1, 2).finished());
    Var w_id = t.watch(Matrix::Identity(2, 2));
    Var b0 = t.watch(Matrix::Zero(1, 2));
    Var y = linear(x, w_id, b0);
    CHECK(t.value(y).mat()(0, 0) == doctest::Approx(1.0));
    CHECK(t.value(y).mat()(0, 1) == doctest::Approx(2.0));

    Var w = t.watch((Matrix(2, 1) << 3, 4).finished());
    Var b = t.watch((Matrix(1, 1) << 5).finished());
    Var y2 = linear(x, w, b);
    CHECK(t.value(y2).mat()(0, 0) == doctest::Approx(16.0));
}

TEST_CASE("linear: dimension mismatch raises") {
    Tape t;
    Var x = t.watch(Matrix::Ones(2, 3));
    Var w = t.watch(Matrix::Ones(2, 2));
    CHECK_THROWS_AS(linear(x, w), DimensionError);
}

TEST_CASE("linear: gradient wrt W matches finite differences") {
    Rng rng(7);
    Matrix x = random_matrix(rng, 3, 4);
    Matrix w0 = random_matrix(rng, 4, 2);
    Scalar err = grad_check(
        [&](Tape& t, Var w) {
            Var xv = t.constant(x);
            return sum_all(linear(xv, w));
        },
        w0, 1e-5);
    CHECK(err < 1e-6);
}

TEST_CASE("softmax: symmetry, closed form, overflow safety") {
    Tape t;
    Var a = t.watch(Tensor::row({0.0, 0.0}));
    auto ya = t.value(softmax(a));
    CHECK(ya(0) == doctest::Approx(0.5));
    CHECK(ya(1) == doctest::Approx(0.5));

    Var b = t.watch(Tensor::row({std::log(1.0), std::log(3.0)}));
    auto yb = t.value(softmax(b));
    CHECK(yb(0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(yb(1) == doctest::Approx(0.75).epsilon(1e-12));

    Var c = t.watch(Tensor::row({1000.0, 1000.0}));
    auto yc = t.value(softmax(c));
    CHECK(yc(0) == doctest::Approx(0.5));
    CHECK(yc(1) == doctest::Approx(0.5));
    CHECK(t.value(c).all_finite());
}

TEST_CASE("softmax: sums to one and shift invariance (property)") {
    Rng rng(11);
    for (int rep = 0; rep < 50; ++rep) {
        const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng.uniform_index(8));
        Matrix v = random_matrix(rng, 1, k, -5.0, 5.0);
        Tape t;
        auto y = t.value(softmax(t.watch(v)));
        Scalar sum = 0.0;
        for (Eigen::Index i = 0; i < k; ++i) {
            CHECK(y(i) > 0.0);
            sum += y(i);
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);

        const Scalar shift = rng.uniform(-100.0, 100.0);
        Tape t2;
        auto y2 = t2.value(softmax(t2.watch(Matrix(v.array() + shift))));
        for (Eigen::Index i = 0; i < k; ++i) CHECK(std::abs(y(i) - y2(i)) < 1e-12);
    }
}

TEST_CASE("layer_norm: constant slice, hand values, affine") {
    Tape t;
    Var g1 = t.watch(Matrix::Ones(1, 3));
    Var b0 = t.watch(Matrix::Zero(1, 3));
    auto y = t.value(layer_norm(t.watch((Matrix(1, 3) << 2, 2, 2).finished()), g1, b0));
    for (int i = 0; i < 3; ++i) CHECK(y(i) == doctest::Approx(0.0));

    Var g2 = t.watch(Matrix::Ones(1, 2));
    Var b2 = t.watch(Matrix::Zero(1, 2));
    auto y2 = t.value(layer_norm(t.watch((Matrix(1, 2) << 1, 3).finished()), g2, b2));
    CHECK(y2(0) == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(y2(1) == doctest::Approx(1.0).epsilon(1e-9));

    Var g3 = t.watch(Matrix(Matrix::Ones(1, 2) * 2.0));
    Var b3 = t.watch(Matrix(Matrix::Ones(1, 2) * 5.0));
    auto y3 = t.value(layer_norm(t.watch((Matrix(1, 2) << 1, 3).finished()), g3, b3));
    CHECK(y3(0) == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(y3(1) == doctest::Approx(7.0).epsilon(1e-9));
}

TEST_CASE("layer_norm: default affine gives zero mean unit std per row") {
    Rng rng(3);
    Matrix x = random_matrix(rng, 5, 8, -4.0, 4.0);
    Tape t;
    Var g = t.watch(Matrix::Ones(1, 8));
    Var b = t.watch(Matrix::Zero(1, 8));
    auto y = t.value(layer_norm(t.watch(x), g, b)).mat();
    for (Eigen::Index r = 0; r < 5; ++r) {
        const Scalar mu = y.row(r).mean();
        const Scalar sd = std::sqrt((y.row(r).array() - mu).square().sum() / 8.0);
        CHECK(std::abs(mu) < 1e-9);
        CHECK(std::abs(sd - 1.0) < 1e-9);
    }
}

TEST_CASE("huber_loss: branches and zero case") {
    Tape t;
    Tensor target = Tensor::from_matrix((Matrix(1, 1) << 0.0).finished());

    Var same = t.watch((Matrix(1, 1) << 0.0).finished());
    CHECK(t.value(huber_loss(same, target, 1.0)).flat()(0) == doctest::Approx(0.0));

    Var quad = t.watch((Matrix(1, 1) << 0.5).finished());
    CHECK(t.value(huber_loss(quad, target, 1.0)).flat()(0) == doctest::Approx(0.125));

    Var lin = t.watch((Matrix(1, 1) << 3.0).finished());
    CHECK(t.value(huber_loss(lin, target, 1.0)).flat()(0) == doctest::Approx(2.5));
}

TEST_CASE("huber_loss: zero at equality and bounded gradient (property)") {
    Rng rng(23);
    for (int rep = 0; rep < 20; ++rep) {
        Matrix x = random_matrix(rng, 3, 3, -10.0, 10.0);
        const Scalar delta = rng.uniform(0.2, 2.0);
        {
            Tape t;
            Var p = t.watch(x);
            CHECK(t.value(huber_loss(p, Tensor::from_matrix(x), delta)).flat()(0) ==
                  doctest::Approx(0.0));
        }
        Matrix target = random_matrix(rng, 3, 3, -10.0, 10.0);
        Tape t;
        Var p = t.watch(x);
        Var l = huber_loss(p, Tensor::from_matrix(target), delta);
        t.backward(l);
        Matrix g = t.grad_of(p);
        CHECK(g.array().abs().maxCoeff() <= delta + 1e-12);
    }
}

TEST_CASE("adam_step: zero grad, closed-form first step, determinism") {
    Matrix p = (Matrix(1, 1) << 2.0).finished();
    std::vector<Matrix*> params{&p};
    AdamState st = AdamState::for_params(params, 0.1);
    adam_step(params, {Matrix::Zero(1, 1)}, st);
    CHECK(p(0, 0) == doctest::Approx(2.0));
    CHECK(st.t == 1);

    Matrix q = (Matrix(1, 1) << 0.0).finished();
    std::vector<Matrix*> qp{&q};
    AdamState st2 = AdamState::for_params(qp, 0.1);
    adam_step(qp, {(Matrix(1, 1) << 1.0).finished()}, st2);
    CHECK(q(0, 0) == doctest::Approx(-0.1).epsilon(1e-6));

    // Two identical parameter sets with identical grads stay identical.
    Rng rng(5);
    Matrix a = random_matrix(rng, 2, 3);
    Matrix b = a;
    Matrix g = random_matrix(rng, 2, 3);
    std::vector<Matrix*> pa{&a}, pb{&b};
    AdamState sa = AdamState::for_params(pa, 1e-3), sb = AdamState::for_params(pb, 1e-3);
    for (int i = 0; i < 5; ++i) {
        adam_step(pa, {g}, sa);
        adam_step(pb, {g}, sb);
    }
    CHECK((a - b).norm() == 0.0);
}

TEST_CASE("adam_step: pure function of (params, grads, state)") {
    Rng rng(9);
    Matrix p1 = random_matrix(rng, 3, 2);
    Matrix p2 = p1;
    Matrix g = random_matrix(rng, 3, 2);
    std::vector<Matrix*> v1{&p1}, v2{&p2};
    AdamState s1 = AdamState::for_params(v1, 1e-2);
    AdamState s2 = s1;
    adam_step(v1, {g}, s1);
    adam_step(v2, {g}, s2);
    CHECK((p1 - p2).norm() == 0.0);
    CHECK(s1.t == s2.t);
    CHECK((s1.m[0] - s2.m[0]).norm() == 0.0);
    CHECK((s1.v[0] - s2.v[0]).norm() == 0.0);
}

TEST_CASE("grad_check: linear, softmax composite, huber at zero residual") {
    Rng rng(31);
    Matrix x = random_matrix(rng, 1, 6);

    Scalar e1 = grad_check([](Tape&, Var v) { return sum_all(v); }, x);
    CHECK(e1 < 1e-10);

    Scalar e2 = grad_check([](Tape&, Var v) { return sum_all(softmax(v) * v); }, x);
    CHECK(e2 < 1e-5);

    Matrix target = x;
    Scalar e3 = grad_check(
        [&](Tape& t, Var v) { return huber_loss(v, Tensor::from_matrix(target), 1.0); }, x);
    CHECK(e3 < 1e-5);
}

TEST_CASE("backward of composed graphs matches finite differences (property)") {
    Rng rng(41);
    for (int rep = 0; rep < 6; ++rep) {
        Matrix x = random_matrix(rng, 3, 4, -2.0, 2.0);
        Matrix w = random_matrix(rng, 4, 4);
        Matrix bias = random_matrix(rng, 1, 4);
        Matrix gamma = random_matrix(rng, 1, 4, 0.5, 1.5);
        Matrix beta = random_matrix(rng, 1, 4, -0.5, 0.5);
        Scalar err = grad_check(
            [&](Tape& t, Var v) {
                Var h = relu(linear(v, t.watch(w), t.watch(bias)));
                Var n = layer_norm(h, t.watch(gamma), t.watch(beta));
                Var s = row_softmax(matmul(n, transpose(n)));
                return mean_all(matmul(s, n));
            },
            x, 1e-5);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("primitive backward rules pass finite-difference checks") {
    Rng rng(51);
    Matrix x = random_matrix(rng, 4, 3, -2.0, 2.0);

    CHECK(grad_check([](Tape&, Var v) { return mean_all(relu(v)); }, x) < 1e-5);
    CHECK(grad_check([](Tape&, Var v) { return mean_all(leaky_relu(v, 0.2)); }, x) < 1e-5);
    CHECK(grad_check([](Tape&, Var v) { return sum_all(transpose(v) * transpose(v)); }, x) <
          1e-5);
    CHECK(grad_check([](Tape&, Var v) { return sum_all(normalize_entries(v)); }, x) < 1e-4);
    CHECK(grad_check(
              [](Tape& t, Var v) {
                  Var s = t.watch((Matrix(1, 1) << 1.7).finished());
                  Var m = t.watch((Matrix(1, 1) << -0.3).finished());
                  return sum_all(hadamard(add_scalar(mul_scalar(v, s), m), v));
              },
              x) < 1e-5);
    CHECK(grad_check(
              [](Tape&, Var v) {
                  Var a = slice_rows(v, 0, 2);
                  Var b = slice_rows(v, 2, 2);
                  return mean_all(vstack({b, a}) * vstack({a, b}));
              },
              x) < 1e-5);
    CHECK(grad_check(
              [](Tape&, Var v) {
                  Var h = hstack({v, v});
                  return mean_all(h * h);
              },
              x) < 1e-5);

    Matrix mask(4, 4);
    mask << 1, 1, 0, 0, 1, 1, 1, 0, 0, 1, 1, 1, 1, 0, 0, 1;
    CHECK(grad_check(
              [&](Tape& t, Var v) {
                  Var scores = matmul(v, transpose(v));
                  Var alpha = masked_row_softmax(scores, t.constant(mask));
                  return mean_all(matmul(alpha, v));
              },
              x) < 1e-4);
}

TEST_CASE("masked softmax: zeros off support, empty support raises") {
    Tape t;
    Matrix x = (Matrix(2, 3) << 1, 2, 3, 4, 5, 6).finished();
    Matrix mask = (Matrix(2, 3) << 1, 0, 1, 0, 1, 0).finished();
    auto y = t.value(masked_row_softmax(t.watch(x), t.constant(mask))).mat();
    CHECK(y(0, 1) == 0.0);
    CHECK(y(0, 0) + y(0, 2) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(y(1, 1) == doctest::Approx(1.0));

    Matrix empty_mask = Matrix::Zero(2, 3);
    CHECK_THROWS_AS(masked_row_softmax(t.watch(x), t.constant(empty_mask)), DimensionError);
}

TEST_CASE("tape consumed by backward cannot be replayed") {
    Tape t;
    Var x = t.watch(Matrix::Ones(2, 2));
    Var l = sum_all(x);
    t.backward(l);
    CHECK(t.consumed());
    CHECK_THROWS_AS(t.backward(l), std::logic_error);
}

TEST_CASE("tensor invariants: shape bookkeeping and gradient slot") {
    Tensor t3 = Tensor::zeros({2, 3, 4});
    CHECK(t3.rank() == 3);
    CHECK(t3.size() == 24);
    t3.slice(1)(0, 0) = 5.0;
    CHECK(t3.slice(1)(0, 0) == 5.0);
    CHECK(t3.slice(0)(0, 0) == 0.0);

    Tensor m = Tensor::from_matrix(Matrix::Ones(2, 2));
    CHECK_FALSE(m.has_grad());
    m.ensure_grad();
    CHECK(m.has_grad());
    CHECK(m.grad_mat().rows() == 2);
    CHECK(m.all_finite());
}

TEST_CASE("rng: deterministic sequences and uniform range") {
    Rng a(123), b(123);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
    Rng c(7);
    for (int i = 0; i < 1000; ++i) {
        Scalar u = c.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}
