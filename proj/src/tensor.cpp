#include "fedfuse/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace fedfuse::numkit {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0f) {}

Tensor::Tensor(Shape shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_numel(shape_)) {
        throw std::invalid_argument("tensor: data size " + std::to_string(data_.size()) +
                                    " does not match shape " + shape_str(shape_));
    }
}

Tensor Tensor::zeros(Shape shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(Shape shape, float value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0f;
    return t;
}

bool Tensor::all_finite() const {
    for (float v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void Tensor::fill(float value) { std::fill(data_.begin(), data_.end(), value); }

Tensor Tensor::reshaped(Shape new_shape) const {
    if (shape_numel(new_shape) != numel()) {
        throw std::invalid_argument("reshape: element count mismatch, " + shape_str(shape_) +
                                    " -> " + shape_str(new_shape));
    }
    return Tensor(std::move(new_shape), data_);
}

ComplexTensor::ComplexTensor(Shape shape)
    : shape_(std::move(shape)), data_(2 * shape_numel(shape_), 0.0f) {}

ComplexTensor::ComplexTensor(Shape shape, std::vector<float> interleaved)
    : shape_(std::move(shape)), data_(std::move(interleaved)) {
    if (data_.size() != 2 * shape_numel(shape_)) {
        throw std::invalid_argument("complex tensor: interleaved size " +
                                    std::to_string(data_.size()) + " does not match shape " +
                                    shape_str(shape_));
    }
}

std::uint64_t Rng::mix64(std::uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

Rng Rng::fork(std::uint64_t a, std::uint64_t b, std::uint64_t c) const {
    Rng child(0);
    std::uint64_t k = key_;
    k = mix64(k ^ mix64(a ^ 0x517cc1b727220a95ull));
    k = mix64(k ^ mix64(b ^ 0x6c62272e07bb0142ull));
    k = mix64(k ^ mix64(c ^ 0x27d4eb2f165667c5ull));
    child.key_ = k;
    return child;
}

std::uint64_t Rng::next_u64() {
    have_spare_ = false;  // stream position advanced, drop cached normal
    return mix64(key_ ^ mix64(++counter_));
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("rng: below(0)");
    // multiply-shift; bias is negligible for desk-scale n
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

void Rng::fill_normal(Tensor& t, double stddev) {
    for (std::size_t i = 0; i < t.numel(); ++i) {
        t[i] = static_cast<float>(normal() * stddev);
    }
}

}  // namespace fedfuse::numkit
