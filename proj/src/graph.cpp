#include "prnet/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "prnet/error.hpp"

namespace prnet::ad {

namespace {

uint64_t next_order() {
    static uint64_t counter = 0;
    return ++counter;
}

thread_local bool g_monitor_kinks = false;
thread_local double g_relu_gap = 0.0;

bool any_requires_grad(const std::vector<Var>& parents) {
    for (const Var& p : parents)
        if (p->requires_grad) return true;
    return false;
}

}  // namespace

Var leaf(Tensor value, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    n->order = next_order();
    return n;
}

Var param_leaf(Parameter& p) {
    Var n = leaf(p.value, !p.frozen);
    n->param = &p;
    return n;
}

Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    n->requires_grad = any_requires_grad(n->parents);
    n->order = next_order();
    if (n->requires_grad) n->backprop = std::move(backprop);
    return n;
}

void add_grad(const Var& v, const Tensor& t) {
    if (!v->requires_grad) return;
    v->ensure_grad();
    v->grad += t;
}

void backward(const Var& root) {
    if (root->value.size() != 1) throw ShapeMismatch("backward root must be scalar");
    std::vector<Node*> reachable;
    std::unordered_set<Node*> seen;
    std::vector<Node*> stack{root.get()};
    seen.insert(root.get());
    while (!stack.empty()) {
        Node* n = stack.back();
        stack.pop_back();
        reachable.push_back(n);
        for (const Var& p : n->parents)
            if (seen.insert(p.get()).second) stack.push_back(p.get());
    }
    std::sort(reachable.begin(), reachable.end(),
              [](const Node* a, const Node* b) { return a->order > b->order; });
    root->ensure_grad();
    root->grad[0] = 1.0;
    for (Node* n : reachable) {
        if (!n->requires_grad || !n->backprop) continue;
        if (n->grad.size() != n->value.size()) continue;  // no contribution reached this node
        n->backprop(*n);
    }
}

void accumulate_param_grads(const Var& root) {
    std::unordered_set<Node*> seen;
    std::vector<Node*> stack{root.get()};
    seen.insert(root.get());
    while (!stack.empty()) {
        Node* n = stack.back();
        stack.pop_back();
        if (n->param && n->requires_grad && n->grad.size() == n->value.size())
            n->param->grad += n->grad;
        for (const Var& p : n->parents)
            if (seen.insert(p.get()).second) stack.push_back(p.get());
    }
}

Var add(const Var& a, const Var& b) {
    if (!a->value.same_shape(b->value)) throw ShapeMismatch("add node shapes");
    return make_node(a->value + b->value, {a, b}, [a, b](Node& self) {
        add_grad(a, self.grad);
        add_grad(b, self.grad);
    });
}

Var scale(const Var& a, double s) {
    return make_node(a->value * s, {a}, [a, s](Node& self) { add_grad(a, self.grad * s); });
}

Var combine(const std::vector<std::pair<double, Var>>& terms) {
    if (terms.empty()) throw ShapeMismatch("combine: no terms");
    double total = 0.0;
    std::vector<Var> parents;
    for (const auto& [w, v] : terms) {
        if (v->value.size() != 1) throw ShapeMismatch("combine expects scalar terms");
        total += w * v->value[0];
        parents.push_back(v);
    }
    auto weights = terms;
    return make_node(Tensor::scalar(total), parents, [weights](Node& self) {
        for (const auto& [w, v] : weights) add_grad(v, self.grad * w);
    });
}

Var affine(const Var& x, const Var& w, const Var& b) {
    Tensor y = affine_forward(x->value, w->value, b->value);
    return make_node(std::move(y), {x, w, b}, [x, w, b](Node& self) {
        AffineGrads g = affine_backward(self.grad, x->value, w->value);
        add_grad(x, g.dx);
        add_grad(w, g.dw);
        add_grad(b, g.db);
    });
}

void monitor_relu_kink(bool on) {
    g_monitor_kinks = on;
    g_relu_gap = std::numeric_limits<double>::infinity();
}

double relu_kink_gap() { return g_relu_gap; }

Var relu(const Var& x) {
    if (g_monitor_kinks) {
        for (size_t i = 0; i < x->value.size(); ++i)
            g_relu_gap = std::min(g_relu_gap, std::fabs(x->value[i]));
    }
    return make_node(relu_forward(x->value), {x}, [x](Node& self) {
        add_grad(x, relu_backward(self.grad, x->value));
    });
}

Var reshape(const Var& x, std::vector<size_t> shape) {
    Tensor y = x->value.reshaped(shape);
    return make_node(std::move(y), {x}, [x](Node& self) {
        add_grad(x, self.grad.reshaped(x->value.shape()));
    });
}

Var concat_cols(const std::vector<Var>& parts) {
    std::vector<const Tensor*> ptrs;
    ptrs.reserve(parts.size());
    for (const Var& p : parts) ptrs.push_back(&p->value);
    Tensor y = prnet::concat_cols(ptrs);
    std::vector<Var> parents = parts;
    return make_node(std::move(y), parents, [parts](Node& self) {
        const size_t rows = self.grad.dim(0);
        size_t offset = 0;
        for (const Var& p : parts) {
            const size_t pc = p->value.dim(1);
            if (p->requires_grad) {
                Tensor piece({rows, pc});
                for (size_t r = 0; r < rows; ++r)
                    std::copy(self.grad.data() + r * self.grad.dim(1) + offset,
                              self.grad.data() + r * self.grad.dim(1) + offset + pc,
                              piece.data() + r * pc);
                add_grad(p, piece);
            }
            offset += pc;
        }
    });
}

Var slice_cols(const Var& x, size_t begin, size_t end) {
    const size_t rows = x->value.dim(0), cols = x->value.dim(1);
    if (begin >= end || end > cols) throw ShapeMismatch("slice_cols range");
    Tensor y({rows, end - begin});
    for (size_t r = 0; r < rows; ++r)
        std::copy(x->value.data() + r * cols + begin, x->value.data() + r * cols + end,
                  y.data() + r * (end - begin));
    return make_node(std::move(y), {x}, [x, begin, end](Node& self) {
        const size_t rows = x->value.dim(0), cols = x->value.dim(1);
        Tensor dx({rows, cols});
        const size_t width = end - begin;
        for (size_t r = 0; r < rows; ++r)
            std::copy(self.grad.data() + r * width, self.grad.data() + (r + 1) * width,
                      dx.data() + r * cols + begin);
        add_grad(x, dx);
    });
}

Var gather_rows(const Var& x, std::vector<size_t> idx) {
    Tensor y = prnet::gather_rows(x->value, idx);
    return make_node(std::move(y), {x}, [x, idx = std::move(idx)](Node& self) {
        Tensor dx(x->value.shape());
        scatter_add_rows(dx, idx, self.grad);
        add_grad(x, dx);
    });
}

Var sum_row_groups(const Var& x, size_t group, double scale_factor) {
    Tensor y = prnet::sum_row_groups(x->value, group, scale_factor);
    return make_node(std::move(y), {x}, [x, group, scale_factor](Node& self) {
        const size_t out_rows = self.grad.dim(0), cols = self.grad.dim(1);
        Tensor dx({out_rows * group, cols});
        for (size_t r = 0; r < out_rows; ++r)
            for (size_t gi = 0; gi < group; ++gi)
                for (size_t c = 0; c < cols; ++c)
                    dx[(r * group + gi) * cols + c] = self.grad[r * cols + c] * scale_factor;
        add_grad(x, dx);
    });
}

Var conv2d(const Var& x, const Var& w, const Var& b, const Conv2dSpec& spec) {
    Tensor y = conv2d_forward(x->value, w->value, b->value, spec);
    return make_node(std::move(y), {x, w, b}, [x, w, b, spec](Node& self) {
        Conv2dGrads g = conv2d_backward(self.grad, x->value, w->value, spec);
        add_grad(x, g.dx);
        add_grad(w, g.dw);
        add_grad(b, g.db);
    });
}

Var maxpool(const Var& x, size_t kernel, size_t stride, Padding pad) {
    auto fwd = std::make_shared<MaxPoolResult>(maxpool_forward(x->value, kernel, stride, pad));
    Tensor y = fwd->y;
    return make_node(std::move(y), {x}, [x, fwd](Node& self) {
        add_grad(x, maxpool_backward(self.grad, x->value, *fwd));
    });
}

Var lstm_cell(const Var& x, const Var& h, const Var& c, const Var& wx, const Var& wh,
              const Var& b) {
    auto cache = std::make_shared<LstmCache>();
    LstmWeights weights{wx->value, wh->value, b->value};
    LstmState next = lstm_cell_forward(x->value, LstmState{h->value, c->value}, weights,
                                       cache.get());
    const size_t bsz = next.hidden.dim(0), hid = next.hidden.dim(1);
    Tensor hc({bsz, 2 * hid});
    for (size_t r = 0; r < bsz; ++r) {
        std::copy(next.hidden.data() + r * hid, next.hidden.data() + (r + 1) * hid,
                  hc.data() + r * 2 * hid);
        std::copy(next.cell.data() + r * hid, next.cell.data() + (r + 1) * hid,
                  hc.data() + r * 2 * hid + hid);
    }
    return make_node(std::move(hc), {x, h, c, wx, wh, b},
                     [x, h, c, wx, wh, b, cache](Node& self) {
                         const size_t bsz = self.grad.dim(0);
                         const size_t hid = self.grad.dim(1) / 2;
                         Tensor dh({bsz, hid}), dc({bsz, hid});
                         for (size_t r = 0; r < bsz; ++r)
                             for (size_t k = 0; k < hid; ++k) {
                                 dh[r * hid + k] = self.grad[r * 2 * hid + k];
                                 dc[r * hid + k] = self.grad[r * 2 * hid + hid + k];
                             }
                         LstmWeights weights{wx->value, wh->value, b->value};
                         LstmGrads g = lstm_cell_backward(dh, dc, *cache, weights);
                         add_grad(x, g.dx);
                         add_grad(h, g.dh_prev);
                         add_grad(c, g.dc_prev);
                         add_grad(wx, g.dwx);
                         add_grad(wh, g.dwh);
                         add_grad(b, g.db);
                     });
}

Var softmax_ce(const Var& logits, std::vector<size_t> labels) {
    auto result = std::make_shared<SoftmaxCE>(softmax_cross_entropy(logits->value, labels));
    return make_node(Tensor::scalar(result->loss), {logits}, [logits, result](Node& self) {
        add_grad(logits, result->dlogits * self.grad[0]);
    });
}

Var weighted_sum(const Var& x, Tensor weights) {
    if (!weights.same_shape(x->value)) throw ShapeMismatch("weighted_sum weights");
    double v = dot_all(x->value, weights);
    return make_node(Tensor::scalar(v), {x}, [x, weights = std::move(weights)](Node& self) {
        add_grad(x, weights * self.grad[0]);
    });
}

GradCheckReport grad_check_graph(const std::function<Var(const Var&)>& model, const Tensor& x,
                                 double h) {
    Var probe = leaf(x, true);
    Var root = model(probe);
    backward(root);
    probe->ensure_grad();
    Tensor analytic = probe->grad;
    auto f = [&model](const Tensor& t) {
        Var root_at = model(leaf(t, false));
        return root_at->value[0];
    };
    return grad_check(f, x, analytic, h);
}

}  // namespace prnet::ad
