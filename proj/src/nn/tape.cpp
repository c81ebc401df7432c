#include "dreamid/nn/tape.hpp"

#include <cmath>

namespace dreamid::nn {

namespace {
constexpr Scalar kLnEps = 1e-5;
constexpr Scalar kGeluC = 0.7978845608028654;  // sqrt(2/pi)
}  // namespace

Tape::Id Tape::push(Mat val, std::function<void(Tape&)> back) {
    nodes_.push_back(Node{std::move(val), Mat(), std::move(back), nullptr});
    return static_cast<Id>(nodes_.size() - 1);
}

Mat& Tape::grad_ref(Id id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) n.grad = Mat::Zero(n.val.rows(), n.val.cols());
    return n.grad;
}

Tape::Id Tape::constant(Mat v) { return push(std::move(v)); }

Tape::Id Tape::leaf(const Mat& value, Mat* grad_sink) {
    Id id = push(value);
    nodes_[id].sink = grad_sink;
    return id;
}

Tape::Id Tape::matmul(Id a, Id b) {
    Mat v = nodes_[a].val * nodes_[b].val;
    Id id = push(std::move(v));
    nodes_[id].back = [id, a, b](Tape& t) {
        const Mat& g = t.nodes_[id].grad;
        t.grad_ref(a).noalias() += g * t.nodes_[b].val.transpose();
        t.grad_ref(b).noalias() += t.nodes_[a].val.transpose() * g;
    };
    return id;
}

Tape::Id Tape::add(Id a, Id b) {
    Id id = push(nodes_[a].val + nodes_[b].val);
    nodes_[id].back = [id, a, b](Tape& t) {
        const Mat& g = t.nodes_[id].grad;
        t.grad_ref(a) += g;
        t.grad_ref(b) += g;
    };
    return id;
}

Tape::Id Tape::sub(Id a, Id b) {
    Id id = push(nodes_[a].val - nodes_[b].val);
    nodes_[id].back = [id, a, b](Tape& t) {
        const Mat& g = t.nodes_[id].grad;
        t.grad_ref(a) += g;
        t.grad_ref(b) -= g;
    };
    return id;
}

Tape::Id Tape::cwise_mul(Id a, Id b) {
    Id id = push(nodes_[a].val.cwiseProduct(nodes_[b].val));
    nodes_[id].back = [id, a, b](Tape& t) {
        const Mat& g = t.nodes_[id].grad;
        t.grad_ref(a) += g.cwiseProduct(t.nodes_[b].val);
        t.grad_ref(b) += g.cwiseProduct(t.nodes_[a].val);
    };
    return id;
}

Tape::Id Tape::scale(Id a, Scalar s) {
    Id id = push(nodes_[a].val * s);
    nodes_[id].back = [id, a, s](Tape& t) {
        t.grad_ref(a) += t.nodes_[id].grad * s;
    };
    return id;
}

Tape::Id Tape::add_rowvec(Id a, Id row) {
    const Mat& A = nodes_[a].val;
    const Mat& r = nodes_[row].val;
    if (r.rows() != 1 || r.cols() != A.cols())
        throw ShapeError("add_rowvec: row must be 1xC matching a");
    Mat v = A.rowwise() + r.row(0);
    Id id = push(std::move(v));
    nodes_[id].back = [id, a, row](Tape& t) {
        const Mat& g = t.nodes_[id].grad;
        t.grad_ref(a) += g;
        t.grad_ref(row).row(0) += g.colwise().sum();
    };
    return id;
}

Tape::Id Tape::gelu(Id a) {
    const Mat& x = nodes_[a].val;
    Mat inner = (kGeluC * (x.array() + 0.044715 * x.array().cube())).matrix();
    Mat th = inner.array().tanh().matrix();
    Mat v = (0.5 * x.array() * (1.0 + th.array())).matrix();
    Id id = push(std::move(v));
    nodes_[id].back = [id, a, th](Tape& t) {
        const Mat& x = t.nodes_[a].val;
        const Mat& g = t.nodes_[id].grad;
        Eigen::ArrayXXd sech2 = 1.0 - th.array().square();
        Eigen::ArrayXXd dinner = kGeluC * (1.0 + 3.0 * 0.044715 * x.array().square());
        Eigen::ArrayXXd d = 0.5 * (1.0 + th.array()) + 0.5 * x.array() * sech2 * dinner;
        t.grad_ref(a).array() += g.array() * d;
    };
    return id;
}

Tape::Id Tape::layer_norm(Id xid, Id gain, Id bias) {
    const Mat& x = nodes_[xid].val;
    const Index C = x.cols();
    Vec mu = x.rowwise().mean();
    Mat centered = x.colwise() - mu;
    Vec var = centered.array().square().rowwise().mean().matrix();
    Vec inv_std = (var.array() + kLnEps).rsqrt().matrix();
    Mat xhat = (centered.array().colwise() * inv_std.array()).matrix();
    Mat v = xhat;
    v.array().rowwise() *= nodes_[gain].val.row(0).array();
    v.array().rowwise() += nodes_[bias].val.row(0).array();
    Id id = push(std::move(v));
    nodes_[id].back = [id, xid, gain, bias, xhat, inv_std, C](Tape& t) {
        const Mat& g = t.nodes_[id].grad;
        t.grad_ref(gain).row(0) += (g.array() * xhat.array()).colwise().sum().matrix();
        t.grad_ref(bias).row(0) += g.colwise().sum();
        // d/dx of row-wise normalization
        Mat gxhat = g;
        gxhat.array().rowwise() *= t.nodes_[gain].val.row(0).array();
        Vec s1 = gxhat.rowwise().sum();
        Vec s2 = (gxhat.array() * xhat.array()).rowwise().sum().matrix();
        Mat gx = gxhat - (s1 / static_cast<Scalar>(C)).replicate(1, C) -
                 (xhat.array() * (s2 / static_cast<Scalar>(C)).replicate(1, C).array()).matrix();
        gx.array().colwise() *= inv_std.array();
        t.grad_ref(xid) += gx;
    };
    return id;
}

Tape::Id Tape::softmax_rows(Id a) {
    const Mat& x = nodes_[a].val;
    Mat y(x.rows(), x.cols());
    for (Index i = 0; i < x.rows(); ++i) {
        Eigen::ArrayXd row = x.row(i).array();
        Eigen::ArrayXd e = (row - row.maxCoeff()).exp();
        y.row(i) = (e / e.sum()).matrix();
    }
    Id id = push(y);
    nodes_[id].back = [id, a](Tape& t) {
        const Mat& y = t.nodes_[id].val;
        const Mat& g = t.nodes_[id].grad;
        Vec dot = (g.array() * y.array()).rowwise().sum().matrix();
        Mat gx = (y.array() * (g.array().colwise() - dot.array())).matrix();
        t.grad_ref(a) += gx;
    };
    return id;
}

Tape::Id Tape::transpose(Id a) {
    Id id = push(nodes_[a].val.transpose());
    nodes_[id].back = [id, a](Tape& t) {
        t.grad_ref(a) += t.nodes_[id].grad.transpose();
    };
    return id;
}

Tape::Id Tape::concat_rows(const std::vector<Id>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows: empty part list");
    Index rows = 0;
    const Index cols = nodes_[parts[0]].val.cols();
    for (Id p : parts) {
        if (nodes_[p].val.cols() != cols)
            throw ShapeError("concat_rows: column mismatch");
        rows += nodes_[p].val.rows();
    }
    Mat v(rows, cols);
    Index at = 0;
    for (Id p : parts) {
        v.middleRows(at, nodes_[p].val.rows()) = nodes_[p].val;
        at += nodes_[p].val.rows();
    }
    Id id = push(std::move(v));
    nodes_[id].back = [id, parts](Tape& t) {
        const Mat& g = t.nodes_[id].grad;
        Index at = 0;
        for (Id p : parts) {
            Index r = t.nodes_[p].val.rows();
            t.grad_ref(p) += g.middleRows(at, r);
            at += r;
        }
    };
    return id;
}

Tape::Id Tape::slice_rows(Id a, Index start, Index count) {
    const Mat& A = nodes_[a].val;
    if (start < 0 || start + count > A.rows())
        throw ShapeError("slice_rows: out of range");
    Id id = push(A.middleRows(start, count));
    nodes_[id].back = [id, a, start, count](Tape& t) {
        t.grad_ref(a).middleRows(start, count) += t.nodes_[id].grad;
    };
    return id;
}

Tape::Id Tape::reshape(Id a, Index rows, Index cols) {
    const Mat& A = nodes_[a].val;
    if (rows * cols != A.size()) throw ShapeError("reshape: size mismatch");
    Mat v(rows, cols);
    const Index ac = A.cols();
    for (Index i = 0; i < rows * cols; ++i)
        v(i / cols, i % cols) = A(i / ac, i % ac);
    Id id = push(std::move(v));
    nodes_[id].back = [id, a, rows, cols, ac](Tape& t) {
        const Mat& g = t.nodes_[id].grad;
        Mat& ga = t.grad_ref(a);
        for (Index i = 0; i < rows * cols; ++i)
            ga(i / ac, i % ac) += g(i / cols, i % cols);
    };
    return id;
}

Tape::Id Tape::sum(Id a) {
    Mat v(1, 1);
    v(0, 0) = nodes_[a].val.sum();
    Id id = push(std::move(v));
    nodes_[id].back = [id, a](Tape& t) {
        t.grad_ref(a).array() += t.nodes_[id].grad(0, 0);
    };
    return id;
}

Tape::Id Tape::mean_sq(Id a) {
    const Mat& x = nodes_[a].val;
    Mat v(1, 1);
    v(0, 0) = x.array().square().mean();
    Id id = push(std::move(v));
    nodes_[id].back = [id, a](Tape& t) {
        const Mat& x = t.nodes_[a].val;
        Scalar g = t.nodes_[id].grad(0, 0);
        t.grad_ref(a) += (2.0 * g / static_cast<Scalar>(x.size())) * x;
    };
    return id;
}

Tape::Id Tape::sum_row_norms(Id a) {
    const Mat& x = nodes_[a].val;
    Vec norms = x.rowwise().norm();
    Mat v(1, 1);
    v(0, 0) = norms.sum();
    Id id = push(std::move(v));
    nodes_[id].back = [id, a, norms](Tape& t) {
        const Mat& x = t.nodes_[a].val;
        Scalar g = t.nodes_[id].grad(0, 0);
        Mat& ga = t.grad_ref(a);
        for (Index i = 0; i < x.rows(); ++i) {
            if (norms(i) > 0.0) ga.row(i) += (g / norms(i)) * x.row(i);
            // zero row: subgradient fixed at 0
        }
    };
    return id;
}

void Tape::backward(Id root) {
    if (nodes_[root].val.size() != 1)
        throw ShapeError("backward: root must be scalar (1x1)");
    grad_ref(root)(0, 0) = 1.0;
    for (Id i = static_cast<Id>(nodes_.size()) - 1; i >= 0; --i) {
        Node& n = nodes_[i];
        if (n.grad.size() == 0) continue;  // never reached from root
        if (n.back) n.back(*this);
        if (n.sink) *n.sink += n.grad;
    }
}

}  // namespace dreamid::nn
