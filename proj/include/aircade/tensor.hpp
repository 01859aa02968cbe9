#pragma once

#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace aircade {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape or dimension mismatch between operands.
struct ShapeError : Error {
    using Error::Error;
};

// Non-finite values or other numeric breakdown.
struct NumericError : Error {
    using Error::Error;
};

// Invalid model/training configuration.
struct ConfigError : Error {
    using Error::Error;
};

// Malformed dataset or checkpoint files.
struct DataFormatError : Error {
    enum class Kind { io, bad_magic, bad_version, truncated, non_finite };
    Kind kind;
    DataFormatError(Kind k, const std::string& msg) : Error(msg), kind(k) {}
};

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major n-dimensional array of 64-bit floats.
/// Immutable by convention once handed to a ComputeTape.
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(Shape s, std::vector<double> d);
    explicit Tensor(Shape s);  // zero-filled

    static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
    static Tensor full(Shape s, double v);
    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    static Tensor from_vector(std::vector<double> v);
    // Row-major 2-D literal, e.g. Tensor::matrix({{1,2},{3,4}}).
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int64_t dim(int i) const;

    double& at(const std::vector<int64_t>& idx);
    double at(const std::vector<int64_t>& idx) const;

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    bool all_finite() const;
};

bool bitwise_equal(const Tensor& a, const Tensor& b);
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace aircade
