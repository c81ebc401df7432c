#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dreamid/nn/tape.hpp"

using namespace dreamid;
using nn::Tape;

namespace {

// Central-difference check of d(scalar)/d(x) for a tape program built by f.
// f receives a tape and the leaf id of x and must return a 1x1 root.
template <typename F>
void check_grad(Mat x, F f, Scalar tol = 1e-6, Scalar h = 1e-5) {
    Mat grad = Mat::Zero(x.rows(), x.cols());
    {
        Tape tape;
        Tape::Id leaf = tape.leaf(x, &grad);
        tape.backward(f(tape, leaf));
    }
    for (Index i = 0; i < x.rows(); ++i) {
        for (Index j = 0; j < x.cols(); ++j) {
            Mat xp = x, xm = x;
            xp(i, j) += h;
            xm(i, j) -= h;
            Tape tp, tm;
            Scalar fp = tp.value(f(tp, tp.leaf(xp, nullptr)))(0, 0);
            Scalar fm = tm.value(f(tm, tm.leaf(xm, nullptr)))(0, 0);
            const Scalar fd = (fp - fm) / (2 * h);
            CAPTURE(i);
            CAPTURE(j);
            CHECK(grad(i, j) == doctest::Approx(fd).epsilon(tol).scale(1.0));
        }
    }
}

Mat test_matrix(Index r, Index c, std::uint64_t seed) {
    Rng rng(seed);
    return randn(r, c, rng);
}

}  // namespace

TEST_CASE("matmul gradient") {
    Mat b = test_matrix(4, 3, 2);
    check_grad(test_matrix(3, 4, 1), [&](Tape& t, Tape::Id x) {
        return t.sum(t.matmul(x, t.constant(b)));
    });
    Mat a = test_matrix(5, 3, 3);
    check_grad(test_matrix(3, 2, 4), [&](Tape& t, Tape::Id x) {
        return t.mean_sq(t.matmul(t.constant(a), x));
    });
}

TEST_CASE("add, sub, cwise_mul, scale gradients") {
    Mat b = test_matrix(3, 3, 7);
    check_grad(test_matrix(3, 3, 5), [&](Tape& t, Tape::Id x) {
        return t.sum(t.cwise_mul(t.add(x, t.constant(b)), t.sub(x, t.constant(b))));
    });
    check_grad(test_matrix(2, 5, 6), [&](Tape& t, Tape::Id x) {
        return t.sum(t.scale(t.cwise_mul(x, x), -1.7));
    });
}

TEST_CASE("add_rowvec gradient, both arguments") {
    Mat row = test_matrix(1, 4, 8);
    check_grad(test_matrix(3, 4, 9), [&](Tape& t, Tape::Id x) {
        return t.mean_sq(t.add_rowvec(x, t.constant(row)));
    });
    Mat base = test_matrix(3, 4, 10);
    check_grad(test_matrix(1, 4, 11), [&](Tape& t, Tape::Id x) {
        return t.mean_sq(t.add_rowvec(t.constant(base), x));
    });
}

TEST_CASE("gelu gradient") {
    check_grad(test_matrix(3, 4, 12), [&](Tape& t, Tape::Id x) {
        return t.sum(t.gelu(x));
    }, 1e-5);
}

TEST_CASE("layer_norm gradients for input, gain and bias") {
    Mat gain = test_matrix(1, 5, 13);
    Mat bias = test_matrix(1, 5, 14);
    Mat x0 = test_matrix(4, 5, 15);
    check_grad(x0, [&](Tape& t, Tape::Id x) {
        return t.mean_sq(t.layer_norm(x, t.constant(gain), t.constant(bias)));
    }, 1e-4);
    check_grad(gain, [&](Tape& t, Tape::Id g) {
        return t.mean_sq(t.layer_norm(t.constant(x0), g, t.constant(bias)));
    });
    check_grad(bias, [&](Tape& t, Tape::Id b) {
        return t.mean_sq(t.layer_norm(t.constant(x0), t.constant(gain), b));
    });
}

TEST_CASE("softmax_rows gradient and row sums") {
    Mat x0 = test_matrix(3, 6, 16);
    {
        Tape t;
        Mat p = t.value(t.softmax_rows(t.leaf(x0, nullptr)));
        for (Index i = 0; i < p.rows(); ++i)
            CHECK(p.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
    Mat w = test_matrix(3, 6, 17);
    check_grad(x0, [&](Tape& t, Tape::Id x) {
        return t.sum(t.cwise_mul(t.softmax_rows(x), t.constant(w)));
    }, 1e-5);
}

TEST_CASE("transpose, concat_rows, slice_rows, reshape gradients") {
    check_grad(test_matrix(3, 4, 18), [&](Tape& t, Tape::Id x) {
        return t.mean_sq(t.matmul(t.transpose(x), x));
    }, 1e-5);
    Mat other = test_matrix(2, 4, 19);
    check_grad(test_matrix(3, 4, 20), [&](Tape& t, Tape::Id x) {
        Tape::Id cat = t.concat_rows({x, t.constant(other), x});
        return t.mean_sq(t.slice_rows(cat, 1, 5));
    });
    check_grad(test_matrix(3, 4, 21), [&](Tape& t, Tape::Id x) {
        return t.mean_sq(t.reshape(x, 2, 6));
    });
}

TEST_CASE("reshape is a row-major reinterpretation") {
    Mat x(2, 3);
    x << 1, 2, 3, 4, 5, 6;
    Tape t;
    Mat y = t.value(t.reshape(t.constant(x), 3, 2));
    Mat want(3, 2);
    want << 1, 2, 3, 4, 5, 6;
    CHECK(y == want);
}

TEST_CASE("sum, mean_sq, sum_row_norms values and gradients") {
    Mat x0 = test_matrix(4, 3, 22);
    {
        Tape t;
        CHECK(t.value(t.sum(t.constant(x0)))(0, 0) == doctest::Approx(x0.sum()));
        CHECK(t.value(t.mean_sq(t.constant(x0)))(0, 0) ==
              doctest::Approx(x0.squaredNorm() / 12.0));
        Scalar norms = 0;
        for (Index i = 0; i < 4; ++i) norms += x0.row(i).norm();
        CHECK(t.value(t.sum_row_norms(t.constant(x0)))(0, 0) == doctest::Approx(norms));
    }
    check_grad(x0, [&](Tape& t, Tape::Id x) { return t.sum_row_norms(x); }, 1e-5);
}

TEST_CASE("sum_row_norms subgradient is zero at a zero row") {
    Mat x = Mat::Zero(2, 3);
    x(1, 0) = 3.0;
    x(1, 1) = 4.0;
    Mat grad = Mat::Zero(2, 3);
    Tape t;
    t.backward(t.sum_row_norms(t.leaf(x, &grad)));
    CHECK(grad.row(0).norm() == 0.0);
    CHECK(grad(1, 0) == doctest::Approx(0.6));
    CHECK(grad(1, 1) == doctest::Approx(0.8));
}

TEST_CASE("gradients accumulate when a leaf is reused") {
    Mat x0 = test_matrix(2, 2, 23);
    check_grad(x0, [&](Tape& t, Tape::Id x) {
        return t.sum(t.add(t.cwise_mul(x, x), t.scale(x, 2.0)));
    });
}
