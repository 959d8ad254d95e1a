#pragma once

#include <string>
#include <utility>
#include <vector>

#include "csf/autodiff.hpp"
#include "csf/common.hpp"

namespace csf {

/// Ordered collection of named parameter tensors. Order is stable and
/// defines the gradient/optimizer layout.
template <typename S>
class ParamStoreT {
   public:
    void add(const std::string& name, ad::TensorT<S> t) {
        if (find(name) >= 0) throw ConfigError("duplicate parameter: " + name);
        items_.emplace_back(name, std::move(t));
    }

    int find(const std::string& name) const {
        for (std::size_t i = 0; i < items_.size(); ++i)
            if (items_[i].first == name) return static_cast<int>(i);
        return -1;
    }

    ad::TensorT<S>& at(const std::string& name) {
        const int i = find(name);
        if (i < 0) throw ConfigError("missing parameter: " + name);
        return items_[i].second;
    }

    const ad::TensorT<S>& at(const std::string& name) const {
        const int i = find(name);
        if (i < 0) throw ConfigError("missing parameter: " + name);
        return items_[i].second;
    }

    std::size_t size() const { return items_.size(); }
    std::pair<std::string, ad::TensorT<S>>& item(std::size_t i) { return items_[i]; }
    const std::pair<std::string, ad::TensorT<S>>& item(std::size_t i) const { return items_[i]; }

    template <typename T>
    ParamStoreT<T> cast() const {
        ParamStoreT<T> out;
        for (const auto& [name, t] : items_) out.add(name, t.template cast<T>());
        return out;
    }

    /// Registers every parameter as a requires_grad leaf; returns node ids in
    /// store order.
    std::vector<int> register_leaves(ad::GraphT<S>& g) const {
        std::vector<int> ids;
        ids.reserve(items_.size());
        for (const auto& [name, t] : items_) ids.push_back(g.input(t, true));
        return ids;
    }

    void merge(const ParamStoreT& other) {
        for (std::size_t i = 0; i < other.size(); ++i)
            add(other.item(i).first, other.item(i).second);
    }

   private:
    std::vector<std::pair<std::string, ad::TensorT<S>>> items_;
};

using ParamStore = ParamStoreT<float>;

/// Binds a parameter store to leaf ids inside one graph.
template <typename S>
struct BoundParams {
    ad::GraphT<S>* graph = nullptr;
    const ParamStoreT<S>* store = nullptr;
    std::vector<int> ids;

    static BoundParams bind(ad::GraphT<S>& g, const ParamStoreT<S>& store) {
        BoundParams b;
        b.graph = &g;
        b.store = &store;
        b.ids = store.register_leaves(g);
        return b;
    }

    int operator()(const std::string& name) const {
        const int i = store->find(name);
        if (i < 0) throw ConfigError("missing parameter: " + name);
        return ids[i];
    }

    /// Gradient for a named parameter after backward; empty tensor when the
    /// parameter did not participate.
    ad::TensorT<S> grad_of(const std::string& name) const {
        const int id = (*this)(name);
        if (!graph->has_grad(id)) return {};
        return graph->grad(id);
    }

    std::vector<ad::TensorT<S>> grads() const {
        std::vector<ad::TensorT<S>> out;
        out.reserve(ids.size());
        for (int id : ids)
            out.push_back(graph->has_grad(id) ? graph->grad(id) : ad::TensorT<S>{});
        return out;
    }
};

/// Adam with bias correction plus a StepLR schedule on the epoch counter.
template <typename S>
struct OptimStateT {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int steplr_period = 0;  // epochs; 0 disables the schedule
    double steplr_gamma = 1.0;
    long step_count = 0;
    std::vector<ad::TensorT<S>> m;
    std::vector<ad::TensorT<S>> v;

    static OptimStateT init(const ParamStoreT<S>& params, double lr) {
        if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
        OptimStateT o;
        o.lr = lr;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto& t = params.item(i).second;
            o.m.emplace_back(t.rows(), t.cols());
            o.v.emplace_back(t.rows(), t.cols());
        }
        return o;
    }

    /// Learning rate for a given epoch under StepLR.
    double lr_at_epoch(int epoch) const {
        if (steplr_period <= 0) return lr;
        double f = 1.0;
        for (int e = steplr_period; e <= epoch; e += steplr_period) f *= steplr_gamma;
        return lr * f;
    }
};

using OptimState = OptimStateT<float>;

/// One Adam update. `grads` follow the store order; missing entries (empty
/// tensors) leave the parameter untouched.
template <typename S>
void adam_step(ParamStoreT<S>& params, const std::vector<ad::TensorT<S>>& grads,
               OptimStateT<S>& opt, double lr_override = -1.0) {
    if (grads.size() != params.size() || opt.m.size() != params.size())
        throw ShapeError("adam_step: gradient/state layout mismatch");
    const double lr = lr_override > 0.0 ? lr_override : opt.lr;
    opt.step_count += 1;
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step_count));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step_count));
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (grads[i].data.empty()) continue;
        auto& p = params.item(i).second;
        if (!grads[i].same_shape(p)) throw ShapeError("adam_step: grad shape mismatch");
        auto& m = opt.m[i];
        auto& v = opt.v[i];
        for (std::size_t j = 0; j < p.data.size(); ++j) {
            const double g = static_cast<double>(grads[i].data[j]);
            const double mj = opt.beta1 * m.data[j] + (1.0 - opt.beta1) * g;
            const double vj = opt.beta2 * v.data[j] + (1.0 - opt.beta2) * g * g;
            m.data[j] = static_cast<S>(mj);
            v.data[j] = static_cast<S>(vj);
            const double mhat = mj / bc1;
            const double vhat = vj / bc2;
            p.data[j] = static_cast<S>(p.data[j] - lr * mhat / (std::sqrt(vhat) + opt.eps));
        }
    }
}

// Checkpoint file ("CSFP"): u32 version=1, u32 tensor count; per tensor
// u16 name length, name bytes, u8 rank, u32 dims[rank], f32 data, all
// little-endian. Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const ParamStore& params);
ParamStore load_checkpoint(const std::string& path);

struct CheckpointInfo {
    uint32_t version = 0;
    std::vector<std::pair<std::string, std::vector<uint32_t>>> tensors;
};
CheckpointInfo inspect_checkpoint(const std::string& path);

}  // namespace csf
