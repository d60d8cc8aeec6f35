#pragma once

#include <cassert>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "wavefill/rng.hpp"
#include "wavefill/tensor.hpp"

namespace wavefill {

// A learnable tensor with a stable identifier and a persistent gradient
// accumulator. backward() adds into grad; callers zero it between phases.
template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;

    Parameter(std::string n, Tensor<T> v) : name(std::move(n)), value(std::move(v)) {
        grad = Tensor<T>(value.shape);
    }

    void zero_grad() { grad.fill(T(0)); }
};

// Registration-ordered parameter container. Iteration order is the
// registration order, so optimizer sweeps and checkpoints are deterministic.
template <typename T>
class ParamStore {
  public:
    Parameter<T>& add(const std::string& name, Tensor<T> value) {
        if (index_.count(name)) throw Error("duplicate parameter identifier: " + name);
        params_.push_back(std::make_unique<Parameter<T>>(name, std::move(value)));
        index_[name] = params_.size() - 1;
        return *params_.back();
    }

    // Fan-in scaled uniform init: U(-sqrt(3/fan_in), +sqrt(3/fan_in)).
    Parameter<T>& add_uniform(const std::string& name, Shape4 shape, int fan_in, Rng& rng) {
        Tensor<T> v(shape);
        const double bound = std::sqrt(3.0 / std::max(1, fan_in));
        for (auto& x : v.data) x = static_cast<T>(rng.uniform(-bound, bound));
        return add(name, std::move(v));
    }

    Parameter<T>& add_zeros(const std::string& name, Shape4 shape) {
        return add(name, Tensor<T>(shape));
    }

    Parameter<T>* find(const std::string& name) {
        auto it = index_.find(name);
        return it == index_.end() ? nullptr : params_[it->second].get();
    }

    Parameter<T>& at(const std::string& name) {
        auto* p = find(name);
        if (!p) throw Error("unknown parameter: " + name);
        return *p;
    }

    std::vector<Parameter<T>*> all() {
        std::vector<Parameter<T>*> out;
        out.reserve(params_.size());
        for (auto& p : params_) out.push_back(p.get());
        return out;
    }

    std::vector<Parameter<T>*> with_prefix(const std::string& prefix) {
        std::vector<Parameter<T>*> out;
        for (auto& p : params_)
            if (p->name.rfind(prefix, 0) == 0) out.push_back(p.get());
        return out;
    }

    void zero_grad() {
        for (auto& p : params_) p->zero_grad();
    }

    size_t size() const { return params_.size(); }

  private:
    std::vector<std::unique_ptr<Parameter<T>>> params_;
    std::map<std::string, size_t> index_;
};

template <typename T>
class Tape;

// Lightweight handle to a recorded tensor on a tape.
template <typename T>
struct Var {
    Tape<T>* tape = nullptr;
    int id = -1;

    const Tensor<T>& value() const { return tape->value(id); }
    Shape4 shape() const { return tape->value(id).shape; }
    bool valid() const { return tape != nullptr && id >= 0; }
};

// Append-only record of the forward computation. Parents always precede
// children, so the creation order is a topological order and cycles are
// impossible by construction (asserted).
template <typename T>
class Tape {
  public:
    using BackwardFn = std::function<void(Tape&, int self)>;

    struct Node {
        Tensor<T> value;
        Tensor<T> grad;  // allocated lazily during backward
        bool requires_grad = false;
        std::vector<int> parents;
        BackwardFn backward;
        Parameter<T>* param = nullptr;
    };

    Var<T> constant(Tensor<T> v) {
        return make_var(add_node(std::move(v), {}, nullptr, /*requires_grad=*/false));
    }

    Var<T> constant_scalar(T v) { return constant(Tensor<T>::scalar_of(v)); }

    // Leaf bound to a parameter; backward() accumulates into p.grad.
    Var<T> leaf(Parameter<T>& p) {
        const int id = add_node(p.value, {}, nullptr, /*requires_grad=*/true);
        nodes_[static_cast<size_t>(id)].param = &p;
        return make_var(id);
    }

    // Re-reads the tensor as a constant with gradient tracking cut.
    Var<T> detach(Var<T> x) { return constant(value(x.id)); }

    int add_node(Tensor<T> value, std::vector<int> parents, BackwardFn fn,
                 bool requires_grad) {
        for (int p : parents) {
            assert(p >= 0 && p < static_cast<int>(nodes_.size()) &&
                   "graph cycle: parent id must precede child");
            (void)p;
        }
        Node node;
        node.value = std::move(value);
        node.parents = std::move(parents);
        node.backward = std::move(fn);
        node.requires_grad = requires_grad;
        nodes_.push_back(std::move(node));
        return static_cast<int>(nodes_.size()) - 1;
    }

    // Convenience used by ops: requires_grad if any parent does.
    Var<T> emit(Tensor<T> value, std::vector<int> parents, BackwardFn fn) {
        bool rg = false;
        for (int p : parents) rg = rg || nodes_[static_cast<size_t>(p)].requires_grad;
        return make_var(add_node(std::move(value), std::move(parents), rg ? std::move(fn) : nullptr, rg));
    }

    const Tensor<T>& value(int id) const { return nodes_[static_cast<size_t>(id)].value; }
    Node& node(int id) { return nodes_[static_cast<size_t>(id)]; }

    // Gradient buffer of a parent, allocated on first touch; nullptr when the
    // parent does not require gradients (pruned subgraph).
    Tensor<T>* grad_sink(int id) {
        Node& nd = nodes_[static_cast<size_t>(id)];
        if (!nd.requires_grad) return nullptr;
        if (nd.grad.empty()) nd.grad = Tensor<T>(nd.value.shape);
        return &nd.grad;
    }

    const Tensor<T>& grad(int id) const { return nodes_[static_cast<size_t>(id)].grad; }

    // Reverse sweep from a scalar loss. Accumulates (adds) into every bound
    // parameter's grad; parameters not reached are left untouched.
    void backward(Var<T> loss) {
        const Tensor<T>& lv = value(loss.id);
        if (lv.size() != 1)
            throw ShapeMismatch("backward expects a scalar loss, got " + lv.shape.str());
        for (auto& nd : nodes_) nd.grad = Tensor<T>();  // reset previous sweep
        Node& top = nodes_[static_cast<size_t>(loss.id)];
        if (!top.requires_grad) return;  // loss does not depend on any parameter
        top.grad = Tensor<T>(Shape4{1, 1, 1, 1});
        top.grad.data[0] = T(1);
        for (int id = loss.id; id >= 0; --id) {
            Node& nd = nodes_[static_cast<size_t>(id)];
            if (nd.grad.empty()) continue;  // not on a path to the loss
            if (nd.backward) nd.backward(*this, id);
            if (nd.param) {
                for (size_t i = 0; i < nd.grad.size(); ++i)
                    nd.param->grad.data[i] += nd.grad.data[i];
            }
        }
    }

    size_t node_count() const { return nodes_.size(); }

  private:
    Var<T> make_var(int id) { return Var<T>{this, id}; }

    std::vector<Node> nodes_;
};

}  // namespace wavefill
