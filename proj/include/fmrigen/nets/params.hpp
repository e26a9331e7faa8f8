#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "fmrigen/ad/graph.hpp"
#include "fmrigen/nets/arch.hpp"
#include "fmrigen/util/rng.hpp"

namespace fmrigen::nets {

struct ParamSpec {
    std::string name;
    std::vector<int> shape;
    int fan_in = 0; // 0 marks a bias (zero-initialized)
};

// Every trainable array of all four model components, in a fixed order.
// Name prefixes partition the parameter groups: "enc." and "gen." belong to
// the encoder-generator pair, "disc." and "code." to the two discriminators.
std::vector<ParamSpec> param_specs(const ArchConfig& cfg);

template <class S>
struct ParamStore {
    std::vector<ParamSpec> specs;
    std::vector<ad::Var<S>> vars;
    std::unordered_map<std::string, size_t> by_name;

    const ad::Var<S>& at(const std::string& name) const {
        auto it = by_name.find(name);
        if (it == by_name.end()) throw ValidationError("unknown parameter '" + name + "'");
        return vars[it->second];
    }
    size_t count() const { return vars.size(); }
};

// Weights uniform on ±sqrt(6/fan_in) (variance 2/fan_in), biases zero.
// Draws happen in double and are cast, so float and double stores from the
// same seed hold the same numbers.
template <class S>
ParamStore<S> init_store(std::vector<ParamSpec> specs, uint64_t seed) {
    ParamStore<S> store;
    store.specs = std::move(specs);
    store.vars.reserve(store.specs.size());
    for (size_t i = 0; i < store.specs.size(); ++i) {
        const auto& sp = store.specs[i];
        ad::Tensor<S> t(sp.shape);
        if (sp.fan_in > 0) {
            Rng rng(Rng::mix(seed, static_cast<uint64_t>(i)));
            const double a = std::sqrt(6.0 / sp.fan_in);
            for (auto& e : t.v) e = static_cast<S>(rng.uniform(-a, a));
        }
        store.vars.push_back(ad::make_leaf(std::move(t), true));
        store.by_name.emplace(sp.name, i);
    }
    return store;
}

template <class S>
ParamStore<S> init_params(const ArchConfig& cfg, uint64_t seed) {
    cfg.validate();
    return init_store<S>(param_specs(cfg), seed);
}

} // namespace fmrigen::nets
