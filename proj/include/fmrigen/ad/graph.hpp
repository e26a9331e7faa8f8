#pragma once

#include <algorithm>
#include <atomic>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "fmrigen/ad/tensor.hpp"

namespace fmrigen::ad {

inline uint64_t next_node_order() {
    static std::atomic<uint64_t> counter{0};
    return counter.fetch_add(1, std::memory_order_relaxed);
}

// Dynamic reverse-mode graph. Nodes are created by the op functions in
// ops.hpp; backward() walks the tape in reverse creation order, which is a
// valid topological order because an op's inputs always exist before it.
template <class S>
class Node {
public:
    Tensor<S> val;
    Tensor<S> grad; // lazily allocated, same shape as val
    bool requires_grad = false;
    uint64_t order = 0;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    Tensor<S>& ensure_grad() {
        if (grad.shape != val.shape) grad = Tensor<S>::zeros(val.shape);
        return grad;
    }

    void zero_grad() {
        if (grad.shape == val.shape)
            grad.fill(S(0));
        else
            grad = Tensor<S>::zeros(val.shape);
    }
};

template <class S>
using Var = std::shared_ptr<Node<S>>;

// When false, newly created op nodes drop their tape entries: forward values
// are computed but no graph is retained. Used for inference passes.
inline bool& grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(grad_mode()) { grad_mode() = false; }
    ~NoGradGuard() { grad_mode() = prev; }
};

template <class S>
Var<S> make_leaf(Tensor<S> t, bool requires_grad) {
    auto n = std::make_shared<Node<S>>();
    n->val = std::move(t);
    n->requires_grad = requires_grad;
    n->order = next_node_order();
    return n;
}

template <class S>
Var<S> make_const(Tensor<S> t) {
    return make_leaf(std::move(t), false);
}

template <class S>
Var<S> make_node(Tensor<S> val, std::vector<Var<S>> parents, std::function<void(Node<S>&)> fn) {
    auto n = std::make_shared<Node<S>>();
    n->val = std::move(val);
    n->order = next_node_order();
    bool needs = false;
    if (grad_mode()) {
        for (const auto& p : parents)
            if (p && p->requires_grad) {
                needs = true;
                break;
            }
    }
    n->requires_grad = needs;
    if (needs) {
        n->parents = std::move(parents);
        n->backward_fn = std::move(fn);
    }
    return n;
}

// Accumulates d(root)/d(leaf) into the .grad of every reachable node that
// requires grad. The caller zeroes parameter grads beforehand.
template <class S>
void backward(const Var<S>& root) {
    if (!root->requires_grad)
        throw ValidationError("backward() on a graph with no differentiable inputs");
    if (root->val.size() != 1)
        throw ValidationError("backward() requires a scalar root");

    std::vector<Node<S>*> reachable;
    std::unordered_set<Node<S>*> seen;
    std::vector<Node<S>*> stack{root.get()};
    seen.insert(root.get());
    while (!stack.empty()) {
        Node<S>* n = stack.back();
        stack.pop_back();
        reachable.push_back(n);
        for (const auto& p : n->parents) {
            if (p && p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
        }
    }
    std::sort(reachable.begin(), reachable.end(),
              [](const Node<S>* a, const Node<S>* b) { return a->order > b->order; });

    // Interior nodes are fresh per forward pass and start from zero; leaf
    // grads (parameters) deliberately accumulate across backward() calls and
    // are cleared by the optimizer instead.
    for (Node<S>* n : reachable)
        if (n->backward_fn && n != root.get()) n->zero_grad();
    root->zero_grad();
    root->grad.v[0] = S(1);

    for (Node<S>* n : reachable)
        if (n->backward_fn) n->backward_fn(*n);
}

} // namespace fmrigen::ad
