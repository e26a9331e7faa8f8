#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "fmrigen/util/error.hpp"

namespace fmrigen::ad {

// Dense row-major tensor. The scalar type is a template parameter so the
// same network code runs in float (training) and double (gradient checks).
template <class S>
struct Tensor {
    std::vector<int> shape;
    std::vector<S> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> sh) : shape(std::move(sh)), v(count(shape), S(0)) {}
    Tensor(std::vector<int> sh, std::vector<S> data) : shape(std::move(sh)), v(std::move(data)) {
        if (static_cast<int64_t>(v.size()) != count(shape))
            throw ValidationError("tensor data does not match shape");
    }

    static int64_t count(const std::vector<int>& sh) {
        int64_t n = 1;
        for (int d : sh) n *= d;
        return n;
    }

    int64_t size() const { return static_cast<int64_t>(v.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }

    S* data() { return v.data(); }
    const S* data() const { return v.data(); }

    void fill(S x) { std::fill(v.begin(), v.end(), x); }

    static Tensor zeros(std::vector<int> sh) { return Tensor(std::move(sh)); }

    static Tensor full(std::vector<int> sh, S x) {
        Tensor t(std::move(sh));
        t.fill(x);
        return t;
    }

    static Tensor scalar(S x) { return Tensor({1}, {x}); }

    template <class T>
    Tensor<T> cast() const {
        Tensor<T> out;
        out.shape = shape;
        out.v.resize(v.size());
        for (size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<T>(v[i]);
        return out;
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    std::string shape_str() const {
        std::string s = "[";
        for (size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }
};

using Tensor32 = Tensor<float>;
using Tensor64 = Tensor<double>;

} // namespace fmrigen::ad
