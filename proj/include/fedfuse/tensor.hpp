#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace fedfuse::numkit {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major float32 tensor. Values are stored in 32 bits; kernels
// that reduce over many elements accumulate in 64 bits.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape);
    Tensor(Shape shape, std::vector<float> data);

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, float value);
    static Tensor identity(std::size_t n);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }
    std::size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }

    float& operator[](std::size_t i) { return data_[i]; }
    float operator[](std::size_t i) const { return data_[i]; }

    // 2-D and 3-D accessors; callers guarantee the rank.
    float& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    float at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
    float& at(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    float at(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;
    void fill(float value);

    Tensor reshaped(Shape new_shape) const;

private:
    Shape shape_;
    std::vector<float> data_;
};

// Complex tensor stored as interleaved (real, imaginary) float32 pairs.
class ComplexTensor {
public:
    ComplexTensor() = default;
    explicit ComplexTensor(Shape shape);
    ComplexTensor(Shape shape, std::vector<float> interleaved);

    const Shape& shape() const { return shape_; }
    std::size_t dim(std::size_t i) const { return shape_[i]; }
    std::size_t numel() const { return data_.size() / 2; }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }

    float re(std::size_t i) const { return data_[2 * i]; }
    float im(std::size_t i) const { return data_[2 * i + 1]; }
    void set(std::size_t i, float re, float im) {
        data_[2 * i] = re;
        data_[2 * i + 1] = im;
    }

    bool same_shape(const ComplexTensor& other) const { return shape_ == other.shape_; }

private:
    Shape shape_;
    std::vector<float> data_;  // 2 * numel floats
};

// Counter-based deterministic generator. A stream is a (key, counter) pair;
// fork() derives an independent child stream from up to three labels, so any
// (client, round, timestep) tuple maps to a reproducible stream.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : key_(mix64(seed ^ 0x9e3779b97f4a7c15ull)) {}

    Rng fork(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const;

    std::uint64_t next_u64();
    double uniform();  // [0, 1)
    double normal();   // standard normal, Box-Muller
    std::uint64_t below(std::uint64_t n);

    void fill_normal(Tensor& t, double stddev = 1.0);

    static std::uint64_t mix64(std::uint64_t x);

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace fedfuse::numkit
