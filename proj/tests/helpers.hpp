// Shared test utilities: temp files, deterministic fixtures, and the
// independent numeric oracles the module tests compare against.
#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "deltaforge/delta.hpp"
#include "deltaforge/rng.hpp"
#include "deltaforge/tensor.hpp"

namespace testutil {

// Unique scratch directory, removed on destruction.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        const std::filesystem::path base = std::filesystem::temp_directory_path();
        for (int attempt = 0; attempt < 1000; attempt++) {
            std::filesystem::path candidate =
                base / ("deltaforge_test_" + std::to_string(::getpid()) + "_" +
                        std::to_string(counter()++));
            if (std::filesystem::create_directory(candidate)) {
                path = candidate;
                return;
            }
        }
        std::abort();
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir &) = delete;
    TempDir & operator=(const TempDir &) = delete;

    std::string file(const std::string & name) const { return (path / name).string(); }

    static int & counter() {
        static int value = 0;
        return value;
    }
};

inline std::string read_file(const std::string & path) {
    std::ifstream file(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string & path, const std::string & bytes) {
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    file.write(bytes.data(), ptrdiff_t(bytes.size()));
}

inline deltaforge::Tensor make_tensor(std::vector<size_t> shape, std::vector<float> values) {
    deltaforge::Tensor t;
    t.shape = std::move(shape);
    t.values = std::move(values);
    return t;
}

// Deterministic tensor with standard-normal entries.
inline deltaforge::Tensor random_tensor(std::vector<size_t> shape, uint64_t seed,
                                        const std::string & stream = "tensor") {
    deltaforge::Tensor t;
    t.shape = std::move(shape);
    t.values.resize(t.numel());
    const uint64_t key = deltaforge::stream_key(seed, stream);
    for (size_t i = 0; i < t.values.size(); i++) {
        t.values[i] = float(deltaforge::normal_at(key, i));
    }
    return t;
}

inline deltaforge::DeltaSet make_delta(const std::string & name, deltaforge::Tensor tensor) {
    deltaforge::DeltaSet delta;
    delta.tensors.entries.emplace(name, std::move(tensor));
    return delta;
}

// ULP distance between two finite floats of the same sign region.
inline int64_t ulp_distance(float a, float b) {
    if (a == b) {
        return 0;
    }
    int32_t ia, ib;
    std::memcpy(&ia, &a, 4);
    std::memcpy(&ib, &b, 4);
    if (ia < 0) {
        ia = int32_t(0x80000000u) - ia;
    }
    if (ib < 0) {
        ib = int32_t(0x80000000u) - ib;
    }
    return std::llabs(int64_t(ia) - int64_t(ib));
}

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
// Deliberately independent of the Eigen-based code under test.
inline std::vector<double> jacobi_eigenvalues(std::vector<double> a, size_t n) {
    for (int sweep = 0; sweep < 100; sweep++) {
        double off = 0.0;
        for (size_t p = 0; p < n; p++) {
            for (size_t q = p + 1; q < n; q++) {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if (off < 1e-26) {
            break;
        }
        for (size_t p = 0; p < n; p++) {
            for (size_t q = p + 1; q < n; q++) {
                const double apq = a[p * n + q];
                if (std::fabs(apq) < 1e-300) {
                    continue;
                }
                const double app = a[p * n + p];
                const double aqq = a[q * n + q];
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (size_t i = 0; i < n; i++) {
                    const double aip = a[i * n + p];
                    const double aiq = a[i * n + q];
                    a[i * n + p] = c * aip - s * aiq;
                    a[i * n + q] = s * aip + c * aiq;
                }
                for (size_t i = 0; i < n; i++) {
                    const double api = a[p * n + i];
                    const double aqi = a[q * n + i];
                    a[p * n + i] = c * api - s * aqi;
                    a[q * n + i] = s * api + c * aqi;
                }
            }
        }
    }
    std::vector<double> eig(n);
    for (size_t i = 0; i < n; i++) {
        eig[i] = a[i * n + i];
    }
    std::sort(eig.begin(), eig.end(), std::greater<double>());
    return eig;
}

// Singular values of a rows x cols fp32 matrix, descending, via the
// eigenvalues of A^T A computed in fp64.
inline std::vector<double> singular_values_oracle(const std::vector<float> & m, size_t rows,
                                                  size_t cols) {
    std::vector<double> ata(cols * cols, 0.0);
    for (size_t i = 0; i < cols; i++) {
        for (size_t j = 0; j < cols; j++) {
            double sum = 0.0;
            for (size_t r = 0; r < rows; r++) {
                sum += double(m[r * cols + i]) * double(m[r * cols + j]);
            }
            ata[i * cols + j] = sum;
        }
    }
    std::vector<double> eig = jacobi_eigenvalues(std::move(ata), cols);
    for (double & v : eig) {
        v = std::sqrt(std::max(v, 0.0));
    }
    return eig;
}

// Solve the n x n system A x = b by Gaussian elimination with partial
// pivoting; used as the normal-equations oracle for least squares.
inline std::vector<double> solve_linear(std::vector<double> a, std::vector<double> b, size_t n) {
    for (size_t col = 0; col < n; col++) {
        size_t pivot = col;
        for (size_t r = col + 1; r < n; r++) {
            if (std::fabs(a[r * n + col]) > std::fabs(a[pivot * n + col])) {
                pivot = r;
            }
        }
        if (pivot != col) {
            for (size_t c = 0; c < n; c++) {
                std::swap(a[col * n + c], a[pivot * n + c]);
            }
            std::swap(b[col], b[pivot]);
        }
        const double diag = a[col * n + col];
        for (size_t r = col + 1; r < n; r++) {
            const double factor = a[r * n + col] / diag;
            for (size_t c = col; c < n; c++) {
                a[r * n + c] -= factor * a[col * n + c];
            }
            b[r] -= factor * b[col];
        }
    }
    std::vector<double> x(n);
    for (size_t r = n; r-- > 0;) {
        double sum = b[r];
        for (size_t c = r + 1; c < n; c++) {
            sum -= a[r * n + c] * x[c];
        }
        x[r] = sum / a[r * n + r];
    }
    return x;
}

} // namespace testutil
