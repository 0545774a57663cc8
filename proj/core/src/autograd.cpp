#include "s2c/autograd.hpp"

#include <unordered_set>

namespace s2c {

template <typename T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> inputs, std::function<void(Node<T>&)> backward_fn,
               const char* name) {
    Var<T> out;
    out.n = std::make_shared<Node<T>>();
    out.n->value = std::move(value);
    out.n->name = name;
    bool needs = false;
    for (const auto& v : inputs)
        if (v.defined() && v.n->requires_grad) needs = true;
    out.n->requires_grad = needs;
    if (needs) {
        for (auto& v : inputs)
            if (v.defined()) out.n->parents.push_back(v.n);
        out.n->backward_fn = std::move(backward_fn);
    }
    return out;
}

template <typename T>
void accumulate_grad(Node<T>& node, const Tensor<T>& g) {
    if (!node.requires_grad) return;
    node.ensure_grad();
    T* dst = node.grad.data();
    const T* src = g.data();
    const i64 n = g.numel();
    for (i64 i = 0; i < n; ++i) dst[i] += src[i];
}

namespace {

template <typename T>
std::vector<Node<T>*> topo_order(Node<T>* root) {
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    // Iterative post-order; graphs get deep enough that recursion is unsafe.
    std::vector<std::pair<Node<T>*, size_t>> stack;
    stack.emplace_back(root, 0);
    seen.insert(root);
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node<T>* p = node->parents[idx++].get();
            if (seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    return order;  // parents before children; reverse for backward
}

}  // namespace

template <typename T>
void backward(const Var<T>& root, const Tensor<T>& seed, BackwardOptions opts) {
    if (!root.defined()) throw Error("backward: undefined root");
    if (seed.shape() != root.shape()) throw ShapeError("backward: seed shape mismatch");
    root.n->ensure_grad();
    accumulate_grad(*root.n, seed);
    auto order = topo_order(root.n.get());
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* node = *it;
        if (node->backward_fn) {
            node->backward_fn(*node);
            node->backward_fn = nullptr;  // drop saved context
        }
        if (opts.free_graph && !node->is_leaf) {
            node->value.release();
            node->grad.release();
        }
    }
}

template <typename T>
void backward(const Var<T>& root, BackwardOptions opts) {
    if (!root.defined()) throw Error("backward: undefined root");
    if (root.shape().numel() != 1) throw ShapeError("backward: root must be scalar unless a seed is given");
    Tensor<T> seed(root.shape(), T(1));
    backward(root, seed, opts);
}

template struct Node<float>;
template struct Node<double>;
template class Var<float>;
template class Var<double>;
template Var<float> make_op(Tensor<float>, std::vector<Var<float>>, std::function<void(Node<float>&)>, const char*);
template Var<double> make_op(Tensor<double>, std::vector<Var<double>>, std::function<void(Node<double>&)>, const char*);
template void accumulate_grad(Node<float>&, const Tensor<float>&);
template void accumulate_grad(Node<double>&, const Tensor<double>&);
template void backward(const Var<float>&, BackwardOptions);
template void backward(const Var<double>&, BackwardOptions);
template void backward(const Var<float>&, const Tensor<float>&, BackwardOptions);
template void backward(const Var<double>&, const Tensor<double>&, BackwardOptions);

}  // namespace s2c
