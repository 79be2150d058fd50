#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "prnet/gradcheck.hpp"
#include "prnet/ops.hpp"
#include "prnet/parameter.hpp"
#include "prnet/tensor.hpp"

namespace prnet::ad {

// Dynamically built reverse-mode graph. Nodes are created in forward order;
// backward() visits the reachable set in descending creation order, which is
// a valid topological order because parents always precede children.
struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
    Tensor value;
    Tensor grad;  // allocated on first contribution
    bool requires_grad = false;
    uint64_t order = 0;
    Parameter* param = nullptr;
    std::vector<Var> parents;
    std::function<void(Node&)> backprop;

    void ensure_grad() {
        if (grad.size() != value.size()) grad = Tensor(value.shape());
    }
};

Var leaf(Tensor value, bool requires_grad = false);
Var param_leaf(Parameter& p);
Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backprop);

// Adds t into v's grad if v participates in differentiation.
void add_grad(const Var& v, const Tensor& t);

// root must be scalar; seeds d(root)/d(root) = 1 and propagates.
void backward(const Var& root);

// Adds the grads of parameter leaves reachable from root into Parameter::grad.
void accumulate_param_grads(const Var& root);

// ---- primitive ops ----------------------------------------------------------

Var add(const Var& a, const Var& b);
Var scale(const Var& a, double s);
// Weighted sum of scalar nodes.
Var combine(const std::vector<std::pair<double, Var>>& terms);
Var affine(const Var& x, const Var& w, const Var& b);
Var relu(const Var& x);
Var reshape(const Var& x, std::vector<size_t> shape);
Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(const Var& x, size_t begin, size_t end);
Var gather_rows(const Var& x, std::vector<size_t> idx);
Var sum_row_groups(const Var& x, size_t group, double scale_factor = 1.0);
Var conv2d(const Var& x, const Var& w, const Var& b, const Conv2dSpec& spec);
Var maxpool(const Var& x, size_t kernel, size_t stride, Padding pad);
// [B,2H] node holding (h', c'); slice afterwards.
Var lstm_cell(const Var& x, const Var& h, const Var& c, const Var& wx, const Var& wh,
              const Var& b);
Var softmax_ce(const Var& logits, std::vector<size_t> labels);
// <x, weights> as a scalar node; the standard probe for gradient checks.
Var weighted_sum(const Var& x, Tensor weights);

// Builds model(leaf(x)) (scalar root), backpropagates, and compares the leaf
// gradient against central differences of the same construction.
GradCheckReport grad_check_graph(const std::function<Var(const Var&)>& model, const Tensor& x,
                                 double h = 1e-5);

// Opt-in probe support: while enabled, relu tracks the smallest |input| it
// sees, so a finite-difference run can reject samples that would step across
// the kink. Enabling resets the tracked gap to infinity.
void monitor_relu_kink(bool on);
double relu_kink_gap();

}  // namespace prnet::ad
