#include "prnet/tensor.hpp"

#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

namespace prnet {

namespace {

size_t shape_product(const std::vector<size_t>& shape) {
    size_t n = 1;
    for (size_t d : shape) {
        if (d == 0) throw ShapeMismatch("zero extent in shape");
        n *= d;
    }
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<size_t> shape) : shape_(std::move(shape)) {
    data_.assign(shape_product(shape_), 0.0);
}

Tensor::Tensor(std::vector<size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_product(shape_))
        throw ShapeMismatch("data length does not match shape");
}

Tensor Tensor::full(std::vector<size_t> shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

Tensor Tensor::row(std::initializer_list<double> values) {
    return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(size_t rows, size_t cols, std::initializer_list<double> values) {
    return Tensor({rows, cols}, std::vector<double>(values));
}

double& Tensor::at(size_t r, size_t c) {
    if (rank() != 2) throw ShapeMismatch("at(r,c) on tensor of rank " + std::to_string(rank()));
    return data_[r * shape_[1] + c];
}

double Tensor::at(size_t r, size_t c) const {
    if (rank() != 2) throw ShapeMismatch("at(r,c) on tensor of rank " + std::to_string(rank()));
    return data_[r * shape_[1] + c];
}

Tensor Tensor::reshaped(std::vector<size_t> shape) const {
    if (shape_product(shape) != size())
        throw ShapeMismatch("reshape from " + shape_str() + " changes element count");
    return Tensor(std::move(shape), data_);
}

Tensor Tensor::row_slice(size_t r) const {
    if (rank() != 2) throw ShapeMismatch("row_slice on tensor of rank " + std::to_string(rank()));
    size_t cols = shape_[1];
    std::vector<double> out(data_.begin() + r * cols, data_.begin() + (r + 1) * cols);
    return Tensor({cols}, std::move(out));
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
    os << "]";
    return os.str();
}

Tensor& Tensor::operator+=(const Tensor& other) {
    if (!same_shape(other))
        throw ShapeMismatch("+= between " + shape_str() + " and " + other.shape_str());
    for (size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
    if (!same_shape(other))
        throw ShapeMismatch("-= between " + shape_str() + " and " + other.shape_str());
    for (size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Tensor& Tensor::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Tensor operator+(const Tensor& a, const Tensor& b) {
    Tensor r = a;
    r += b;
    return r;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
    Tensor r = a;
    r -= b;
    return r;
}

Tensor operator*(const Tensor& a, double s) {
    Tensor r = a;
    r *= s;
    return r;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw ShapeMismatch("hadamard between " + a.shape_str() + " and " + b.shape_str());
    Tensor r = a;
    for (size_t i = 0; i < r.size(); ++i) r[i] *= b[i];
    return r;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw ShapeMismatch("matmul between " + a.shape_str() + " and " + b.shape_str());
    const size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor c({m, n});
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
    for (size_t i = 0; i < m; ++i) {
        const double* arow = pa + i * k;
        double* crow = pc + i * n;
        for (size_t kk = 0; kk < k; ++kk) {
            const double aik = arow[kk];
            if (aik == 0.0) continue;
            const double* brow = pb + kk * n;
            for (size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw ShapeMismatch("transpose of rank " + std::to_string(a.rank()));
    const size_t m = a.dim(0), n = a.dim(1);
    Tensor t({n, m});
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) t[j * m + i] = a[i * n + j];
    return t;
}

double dot_all(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw ShapeMismatch("dot_all between " + a.shape_str() + " and " + b.shape_str());
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double sum_all(const Tensor& a) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i];
    return s;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw ShapeMismatch("max_abs_diff between " + a.shape_str() + " and " + b.shape_str());
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

void require_shape(const Tensor& t, const std::vector<size_t>& shape, const char* what) {
    if (t.shape() != shape) {
        Tensor want(shape);
        throw ShapeMismatch(std::string(what) + ": got " + t.shape_str() + ", want " +
                            want.shape_str());
    }
}

}  // namespace prnet
