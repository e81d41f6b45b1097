#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "normscape/errors.hpp"

namespace normscape {

inline std::string shape_str(const std::vector<int64_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

// Dense row-major N-dimensional array. The scalar type is fixed at
// construction: double is used wherever finite-difference checks have to be
// meaningful, float is the training default.
template <std::floating_point T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
        data_.assign(static_cast<size_t>(checked_volume(shape_)), T(0));
    }

    Tensor(std::vector<int64_t> shape, T fill) : shape_(std::move(shape)) {
        data_.assign(static_cast<size_t>(checked_volume(shape_)), fill);
    }

    Tensor(std::vector<int64_t> shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (checked_volume(shape_) != static_cast<int64_t>(data_.size())) {
            throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                        " does not match shape " + shape_str(shape_));
        }
    }

    int64_t size() const { return static_cast<int64_t>(data_.size()); }
    size_t rank() const { return shape_.size(); }
    const std::vector<int64_t>& shape() const { return shape_; }

    int64_t dim(size_t axis) const {
        if (axis >= shape_.size()) {
            throw std::invalid_argument("axis " + std::to_string(axis) +
                                        " out of range for shape " + shape_str(shape_));
        }
        return shape_[axis];
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    T operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    void fill(T value) { data_.assign(data_.size(), value); }

    bool all_finite() const {
        for (T v : data_) {
            if (!std::isfinite(static_cast<double>(v))) return false;
        }
        return true;
    }

    // NaN/Inf is an error state for every core operation.
    void require_finite(const std::string& what) const {
        for (size_t i = 0; i < data_.size(); ++i) {
            if (!std::isfinite(static_cast<double>(data_[i]))) {
                throw NumericError(what + ": non-finite value at flat index " +
                                   std::to_string(i) + " in tensor " + shape_str(shape_));
            }
        }
    }

    template <std::floating_point U>
    Tensor<U> cast() const {
        std::vector<U> out(data_.size());
        for (size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return Tensor<U>(shape_, std::move(out));
    }

private:
    static int64_t checked_volume(const std::vector<int64_t>& shape) {
        int64_t n = 1;
        for (int64_t d : shape) {
            if (d <= 0) {
                throw std::invalid_argument("tensor extents must be positive, got " +
                                            shape_str(shape));
            }
            n *= d;
        }
        return n;
    }

    std::vector<int64_t> shape_;
    std::vector<T> data_;
};

template <std::floating_point T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(what) + ": shape mismatch " +
                                    shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
}

// y += alpha * x
template <std::floating_point T>
void axpy_inplace(Tensor<T>& y, T alpha, const Tensor<T>& x) {
    check_same_shape(y, x, "axpy");
    T* yd = y.data();
    const T* xd = x.data();
    const int64_t n = y.size();
    for (int64_t i = 0; i < n; ++i) yd[i] += alpha * xd[i];
}

template <std::floating_point T>
void add_inplace(Tensor<T>& y, const Tensor<T>& x) {
    axpy_inplace(y, T(1), x);
}

template <std::floating_point T>
Tensor<T> scaled(const Tensor<T>& x, T alpha) {
    Tensor<T> out(x.shape());
    const T* xd = x.data();
    T* od = out.data();
    for (int64_t i = 0; i < x.size(); ++i) od[i] = alpha * xd[i];
    return out;
}

// Reductions accumulate in double (fixed ascending order) so that float-mode
// losses are still well conditioned and runs are reproducible.
template <std::floating_point T>
double sum(const Tensor<T>& x) {
    double acc = 0.0;
    const T* xd = x.data();
    for (int64_t i = 0; i < x.size(); ++i) acc += static_cast<double>(xd[i]);
    return acc;
}

template <std::floating_point T>
double sum_squares(const Tensor<T>& x) {
    double acc = 0.0;
    const T* xd = x.data();
    for (int64_t i = 0; i < x.size(); ++i) {
        acc += static_cast<double>(xd[i]) * static_cast<double>(xd[i]);
    }
    return acc;
}

template <std::floating_point T>
double sum_abs(const Tensor<T>& x) {
    double acc = 0.0;
    const T* xd = x.data();
    for (int64_t i = 0; i < x.size(); ++i) acc += std::abs(static_cast<double>(xd[i]));
    return acc;
}

template <std::floating_point T>
double dot(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "dot");
    double acc = 0.0;
    const T* ad = a.data();
    const T* bd = b.data();
    for (int64_t i = 0; i < a.size(); ++i) {
        acc += static_cast<double>(ad[i]) * static_cast<double>(bd[i]);
    }
    return acc;
}

template <std::floating_point T>
double max_abs(const Tensor<T>& x) {
    double m = 0.0;
    const T* xd = x.data();
    for (int64_t i = 0; i < x.size(); ++i) {
        m = std::max(m, std::abs(static_cast<double>(xd[i])));
    }
    return m;
}

}  // namespace normscape
