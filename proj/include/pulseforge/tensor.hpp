#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "pulseforge/error.hpp"
#include "pulseforge/rng.hpp"

namespace pulseforge::tg {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One dense value in the computation graph. Data is a flat row-major
// float64 buffer; grad is allocated lazily on first backward pass.
struct Node {
    std::vector<std::size_t> shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
    std::vector<NodePtr> parents;
    std::function<void(Node&)> backward_fn;

    std::size_t size() const { return data.size(); }
    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

// Value-semantics handle over a shared graph node.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(NodePtr node) : node_(std::move(node)) {}

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
    static Tensor from_data(std::vector<double> data, std::vector<std::size_t> shape,
                            bool requires_grad = false);
    static Tensor scalar(double v);

    bool valid() const { return node_ != nullptr; }
    const std::vector<std::size_t>& shape() const { return node_->shape; }
    std::vector<double>& data() { return node_->data; }
    const std::vector<double>& data() const { return node_->data; }
    std::vector<double>& grad() { return node_->grad; }
    const std::vector<double>& grad() const { return node_->grad; }
    bool requires_grad() const { return node_->requires_grad; }
    std::size_t size() const { return node_->size(); }
    NodePtr node() const { return node_; }

    void zero_grad() { node_->grad.assign(node_->data.size(), 0.0); }

    double item() const {
        if (node_->size() != 1) throw Error("ShapeMismatch", "item() on non-scalar tensor");
        return node_->data[0];
    }

private:
    NodePtr node_;
};

// When enabled (the default), every op validates that its output is finite
// and throws NonFiniteDetected otherwise.
void set_finite_checks(bool enabled);
bool finite_checks_enabled();

// ---- ops -------------------------------------------------------------
// matmul supports 2D@2D, 3D@2D (batched linear) and 3D@3D (batched).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose_last2(const Tensor& x);
// add supports identical shapes or broadcasting b over leading dims of a
// when b.shape is a suffix of a.shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul_scalar(const Tensor& x, double c);
// Eq.-style kernel-1 1D convolution: x is N x L_in x T, w is L_out x L_in,
// b is L_out; output is N x L_out x T.
Tensor conv1d_k1(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor relu(const Tensor& x);
Tensor softmax_lastdim(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
// Inverted dropout: keeps with probability keep_prob and scales by
// 1/keep_prob. keep_prob == 1 is the exact identity and draws nothing
// from the stream.
Tensor dropout(const Tensor& x, double keep_prob, Rng& rng);
// Average-pools groups of `factor` consecutive time steps of an N x T x D input.
Tensor mean_pool_time(const Tensor& x, std::size_t factor);
Tensor reshape(const Tensor& x, std::vector<std::size_t> shape);
Tensor concat_lastdim(const std::vector<Tensor>& xs);
Tensor sum_all(const Tensor& x);
Tensor mse_loss(const Tensor& pred, const Tensor& target);

// Reverse-mode sweep from a scalar loss. Gradients accumulate; callers
// zero them between steps.
void backward(const Tensor& loss);

// ---- optimizer --------------------------------------------------------
struct AdamState {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // decoupled; callers may reschedule per epoch
    std::int64_t step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
};

void adam_step(AdamState& state, std::vector<Tensor>& params);

}  // namespace pulseforge::tg
