#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "prnet/error.hpp"

namespace prnet {

// Dense row-major n-d array of doubles. Images and feature maps use
// channels-last layout ([B,]H,W,C); matrices are [rows, cols].
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<size_t> shape);
    Tensor(std::vector<size_t> shape, std::vector<double> data);

    static Tensor zeros(std::vector<size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<size_t> shape, double value);
    static Tensor scalar(double value) { return Tensor({1}, {value}); }
    static Tensor row(std::initializer_list<double> values);
    static Tensor matrix(size_t rows, size_t cols, std::initializer_list<double> values);

    const std::vector<size_t>& shape() const { return shape_; }
    size_t rank() const { return shape_.size(); }
    size_t size() const { return data_.size(); }
    size_t dim(size_t i) const { return shape_.at(i); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](size_t i) { return data_[i]; }
    double operator[](size_t i) const { return data_[i]; }

    double& at(size_t r, size_t c);
    double at(size_t r, size_t c) const;

    // Same data, new shape; element count must match.
    Tensor reshaped(std::vector<size_t> shape) const;

    // Row r of a rank-2 tensor as a rank-1 tensor.
    Tensor row_slice(size_t r) const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;
    std::string shape_str() const;

    Tensor& operator+=(const Tensor& other);
    Tensor& operator-=(const Tensor& other);
    Tensor& operator*=(double s);

    void fill(double value);

private:
    std::vector<size_t> shape_;
    std::vector<double> data_;
};

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, double s);

// Elementwise product.
Tensor hadamard(const Tensor& a, const Tensor& b);

// [M,K] x [K,N] -> [M,N], fixed accumulation order over K.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

double dot_all(const Tensor& a, const Tensor& b);
double sum_all(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);
bool bit_equal(const Tensor& a, const Tensor& b);

void require_shape(const Tensor& t, const std::vector<size_t>& shape, const char* what);

}  // namespace prnet
