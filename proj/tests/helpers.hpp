#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "normscape/rng.hpp"
#include "normscape/tensor.hpp"

#ifndef NORMSCAPE_FIXTURE_DIR
#error "build must define NORMSCAPE_FIXTURE_DIR"
#endif

namespace testutil {

inline std::string fixture(const std::string& rel) {
    return std::string(NORMSCAPE_FIXTURE_DIR) + "/" + rel;
}

// Unique scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("normscape_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string str() const { return path_.string(); }
    std::string file(const std::string& rel) const { return (path_ / rel).string(); }

private:
    std::filesystem::path path_;
};

template <std::floating_point T>
normscape::Tensor<T> random_tensor(const std::vector<int64_t>& shape, normscape::Rng& rng,
                                   double lo = -1.0, double hi = 1.0) {
    normscape::Tensor<T> t(shape);
    for (int64_t i = 0; i < t.size(); ++i) {
        t[i] = static_cast<T>(lo + (hi - lo) * rng.next_double());
    }
    return t;
}

inline double rel_diff(double a, double b) {
    const double denom = std::max({std::abs(a), std::abs(b), 1e-12});
    return std::abs(a - b) / denom;
}

template <std::floating_point T>
double max_abs_diff(const normscape::Tensor<T>& a, const normscape::Tensor<T>& b) {
    normscape::check_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (int64_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    }
    return m;
}

template <std::floating_point T>
double max_rel_diff(const normscape::Tensor<T>& a, const normscape::Tensor<T>& b) {
    normscape::check_same_shape(a, b, "max_rel_diff");
    double m = 0.0;
    for (int64_t i = 0; i < a.size(); ++i) {
        m = std::max(m, rel_diff(static_cast<double>(a[i]), static_cast<double>(b[i])));
    }
    return m;
}

}  // namespace testutil
