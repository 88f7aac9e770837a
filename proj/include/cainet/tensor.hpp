#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cainet {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// Raised when tensor extents do not line up for an operation.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised for invalid structural settings (even kernels, odd channel counts, ...).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct TensorImpl {
    Shape shape;
    std::vector<float> data;
    std::vector<float> grad;  // empty until first needed
    bool requires_grad = false;

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0f);
    }
};

/// Dense row-major float tensor with an optional gradient buffer.
///
/// Copies are shallow: two Tensor handles may refer to the same storage. Use
/// clone() for an independent copy.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, float value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<float> values, bool requires_grad = false);
    static Tensor scalar(float value, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    std::size_t rank() const { return impl_->shape.size(); }
    std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
    std::size_t numel() const { return impl_->data.size(); }

    std::span<float> data() { return impl_->data; }
    std::span<const float> data() const { return impl_->data; }
    float* ptr() { return impl_->data.data(); }
    const float* ptr() const { return impl_->data.data(); }

    bool requires_grad() const { return impl_ && impl_->requires_grad; }
    /// Gradient buffer, allocated (zero-filled) on first access.
    std::span<float> grad();
    std::span<const float> grad() const;
    bool has_grad() const { return impl_ && impl_->grad.size() == impl_->data.size(); }
    void zero_grad();

    float item() const;
    float& operator[](std::size_t i) { return impl_->data[i]; }
    float operator[](std::size_t i) const { return impl_->data[i]; }
    float at(std::initializer_list<std::size_t> index) const;
    float& at(std::initializer_list<std::size_t> index);

    /// Independent copy of the values; never tracked by the tape.
    Tensor clone() const;
    Tensor detach() const { return clone(); }

    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }
    const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

private:
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
    std::size_t flat_index(std::initializer_list<std::size_t> index) const;

    std::shared_ptr<TensorImpl> impl_;
};

/// Ordered record of backward closures for the ops executed since the last
/// backward(). One tape per thread.
class Tape {
public:
    static Tape& current();

    void record(std::function<void()> adjoint) { entries_.push_back(std::move(adjoint)); }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    void clear() { entries_.clear(); }
    /// Runs every adjoint in exact reverse order, then clears.
    void replay();

private:
    std::vector<std::function<void()>> entries_;
};

bool grad_enabled();

/// Disables tape recording on the current thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

/// Output tensor for a custom op. It requires grad when recording is enabled
/// and any input requires grad.
Tensor make_output(Shape shape, std::initializer_list<const Tensor*> inputs);

/// Records `adjoint` on the tape if `out` takes part in differentiation.
void on_backward(const Tensor& out, std::function<void()> adjoint);

/// Seeds d(loss)/d(loss) = 1 and replays the tape. Clears the tape.
void backward(const Tensor& loss);

void check_finite(const Tensor& t, const char* op);

}  // namespace cainet
