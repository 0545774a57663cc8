#pragma once

#include <functional>
#include <memory>

#include "s2c/tensor.hpp"

namespace s2c {

/// One node of the single-use backward graph. Built implicitly by ops; freed
/// eagerly as backward() consumes it so peak memory stays near forward size.
template <typename T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    bool is_leaf = false;
    std::string name;
    std::vector<std::shared_ptr<Node<T>>> parents;
    /// Reads this->grad and accumulates into parents' grads.
    std::function<void(Node<T>&)> backward_fn;

    void ensure_grad() {
        if (!grad.defined() || grad.shape() != value.shape()) grad = Tensor<T>(value.shape());
    }
};

/// Value-semantic handle to a graph node.
template <typename T>
class Var {
public:
    Var() = default;
    explicit Var(Tensor<T> v, bool requires_grad = false, std::string name = {}) : n(std::make_shared<Node<T>>()) {
        n->value = std::move(v);
        n->requires_grad = requires_grad;
        n->is_leaf = true;
        n->name = std::move(name);
    }

    bool defined() const { return static_cast<bool>(n); }
    const Tensor<T>& value() const { return n->value; }
    Tensor<T>& value() { return n->value; }
    Tensor<T>& grad() { return n->grad; }
    const Tensor<T>& grad() const { return n->grad; }
    bool requires_grad() const { return n && n->requires_grad; }
    const Shape& shape() const { return n->value.shape(); }
    void zero_grad() {
        if (n) n->grad = Tensor<T>();
    }
    const std::string& name() const { return n->name; }

    std::shared_ptr<Node<T>> n;
};

/// Makes an op result node. Parents are linked only when a grad path exists,
/// so pure-inference graphs hold no history.
template <typename T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> inputs, std::function<void(Node<T>&)> backward_fn,
               const char* name = "");

/// Accumulate g into node's grad buffer (allocating on first touch).
template <typename T>
void accumulate_grad(Node<T>& node, const Tensor<T>& g);

struct BackwardOptions {
    bool free_graph = true;  ///< release values/closures as soon as they are consumed
};

/// Reverse-mode sweep from a scalar root (or from seed when given).
template <typename T>
void backward(const Var<T>& root, BackwardOptions opts = {});
template <typename T>
void backward(const Var<T>& root, const Tensor<T>& seed, BackwardOptions opts = {});

extern template struct Node<float>;
extern template struct Node<double>;
extern template class Var<float>;
extern template class Var<double>;
extern template Var<float> make_op(Tensor<float>, std::vector<Var<float>>, std::function<void(Node<float>&)>, const char*);
extern template Var<double> make_op(Tensor<double>, std::vector<Var<double>>, std::function<void(Node<double>&)>, const char*);
extern template void accumulate_grad(Node<float>&, const Tensor<float>&);
extern template void accumulate_grad(Node<double>&, const Tensor<double>&);
extern template void backward(const Var<float>&, BackwardOptions);
extern template void backward(const Var<double>&, BackwardOptions);
extern template void backward(const Var<float>&, const Tensor<float>&, BackwardOptions);
extern template void backward(const Var<double>&, const Tensor<double>&, BackwardOptions);

}  // namespace s2c
