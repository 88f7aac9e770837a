#include "cainet/tensor.hpp"

#include <cmath>
#include <sstream>

namespace cainet {

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0f, requires_grad); }

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
    auto impl = std::make_shared<TensorImpl>();
    impl->data.assign(shape_numel(shape), value);
    impl->shape = std::move(shape);
    impl->requires_grad = requires_grad;
    if (requires_grad) impl->ensure_grad();
    return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<float> values, bool requires_grad) {
    if (shape_numel(shape) != values.size()) {
        throw DimensionError("Tensor::from: shape " + shape_str(shape) + " holds " +
                             std::to_string(shape_numel(shape)) + " values, got " +
                             std::to_string(values.size()));
    }
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(values);
    impl->requires_grad = requires_grad;
    if (requires_grad) impl->ensure_grad();
    return Tensor(std::move(impl));
}

Tensor Tensor::scalar(float value, bool requires_grad) { return from({1}, {value}, requires_grad); }

std::span<float> Tensor::grad() {
    impl_->ensure_grad();
    return impl_->grad;
}

std::span<const float> Tensor::grad() const {
    impl_->ensure_grad();
    return impl_->grad;
}

void Tensor::zero_grad() {
    if (impl_ && !impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0f);
}

float Tensor::item() const {
    if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
    return impl_->data[0];
}

std::size_t Tensor::flat_index(std::initializer_list<std::size_t> index) const {
    if (index.size() != rank()) throw DimensionError("index rank mismatch for shape " + shape_str(shape()));
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (auto i : index) {
        if (i >= impl_->shape[axis]) throw std::out_of_range("index out of range for shape " + shape_str(shape()));
        flat = flat * impl_->shape[axis] + i;
        ++axis;
    }
    return flat;
}

float Tensor::at(std::initializer_list<std::size_t> index) const { return impl_->data[flat_index(index)]; }
float& Tensor::at(std::initializer_list<std::size_t> index) { return impl_->data[flat_index(index)]; }

Tensor Tensor::clone() const { return from(shape(), impl_->data, false); }

namespace {
thread_local bool g_grad_enabled = true;
}

Tape& Tape::current() {
    thread_local Tape tape;
    return tape;
}

void Tape::replay() {
    // Adjoints may not record new entries, so iterating the live vector is safe.
    NoGradGuard guard;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
    entries_.clear();
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor make_output(Shape shape, std::initializer_list<const Tensor*> inputs) {
    bool track = false;
    if (g_grad_enabled) {
        for (const Tensor* t : inputs) {
            if (t && t->requires_grad()) {
                track = true;
                break;
            }
        }
    }
    Tensor out = Tensor::zeros(std::move(shape));
    out.impl()->requires_grad = track;
    return out;
}

void on_backward(const Tensor& out, std::function<void()> adjoint) {
    if (out.requires_grad() && g_grad_enabled) Tape::current().record(std::move(adjoint));
}

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw DimensionError("backward() needs a scalar loss, got " +
                             (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
    }
    auto& tape = Tape::current();
    if (!loss.requires_grad()) {
        tape.clear();
        return;
    }
    loss.impl()->ensure_grad();
    loss.impl()->grad[0] += 1.0f;
    tape.replay();
}

void check_finite(const Tensor& t, const char* op) {
    for (float v : t.data()) {
        if (!std::isfinite(v)) throw std::runtime_error(std::string(op) + ": non-finite value in output");
    }
}

}  // namespace cainet
