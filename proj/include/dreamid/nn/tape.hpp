#pragma once

#include "dreamid/core.hpp"

#include <functional>
#include <vector>

namespace dreamid::nn {

// Reverse-mode tape over dense Eigen matrices. One tape per forward pass;
// backward() walks the node list in reverse and pushes gradients into
// external sinks bound via leaf().
class Tape {
  public:
    using Id = std::int32_t;

    Id constant(Mat v);
    // Leaf bound to external storage. grad_sink may be null for frozen weights.
    Id leaf(const Mat& value, Mat* grad_sink);

    Id matmul(Id a, Id b);
    Id add(Id a, Id b);
    Id sub(Id a, Id b);
    Id cwise_mul(Id a, Id b);
    Id scale(Id a, Scalar s);
    // Broadcast-add a 1xC row vector to every row of a.
    Id add_rowvec(Id a, Id row);
    Id gelu(Id a);
    Id layer_norm(Id x, Id gain, Id bias);  // gain/bias are 1xC
    Id softmax_rows(Id a);
    Id transpose(Id a);
    Id concat_rows(const std::vector<Id>& parts);
    Id slice_rows(Id a, Index start, Index count);
    Id reshape(Id a, Index rows, Index cols);  // row-major reinterpretation
    Id sum(Id a);                              // -> 1x1
    Id mean_sq(Id a);                          // mean of squared entries -> 1x1
    Id sum_row_norms(Id a);  // sum_i ||row_i||_2, subgradient 0 at zero rows

    const Mat& value(Id id) const { return nodes_[id].val; }
    const Mat& grad(Id id) const { return nodes_[id].grad; }

    // Seeds d(root)/d(root) = 1 (root must be 1x1) and accumulates into sinks.
    void backward(Id root);

    std::size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        Mat val;
        Mat grad;
        std::function<void(Tape&)> back;
        Mat* sink = nullptr;
    };

    Id push(Mat val, std::function<void(Tape&)> back = nullptr);
    Mat& grad_ref(Id id);

    std::vector<Node> nodes_;
};

}  // namespace dreamid::nn
