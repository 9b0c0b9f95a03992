#pragma once

#include <functional>
#include <string>
#include <vector>

#include "poseforge/error.hpp"

namespace poseforge::nn {

/// Dense row-major tensor. Activations use {C, H, W}; weights use whatever
/// shape their layer declares.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, double fill = 0.0);

    static Tensor chw(int c, int h, int w, double fill = 0.0) { return Tensor({c, h, w}, fill); }

    std::size_t size() const { return data.size(); }
    int channels() const { return shape.at(0); }
    int height() const { return shape.at(1); }
    int width() const { return shape.at(2); }
    double& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x]; }
    double at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool operator==(const Tensor&) const = default;
};

struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    bool trainable = true;

    Parameter() = default;
    Parameter(std::string n, std::vector<int> shape, bool train = true)
        : name(std::move(n)), value(shape), grad(shape), trainable(train) {}

    void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

/// Handle to a value recorded on a Tape.
struct Var {
    int id = -1;
};

/// Reverse-mode recording of one or more forward passes. Backward closures
/// push gradients into their inputs and accumulate parameter gradients into
/// Parameter::grad (frozen parameters are skipped).
class Tape {
public:
    using Backward = std::function<void(Tape&, int self)>;

    Var constant(Tensor value);
    Var record(Tensor value, Backward backward);

    const Tensor& value(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).value; }
    Tensor& grad(int id) { return nodes_.at(static_cast<std::size_t>(id)).grad; }
    Tensor& grad(Var v) { return grad(v.id); }
    std::size_t size() const { return nodes_.size(); }

    /// Seeds d(out)/d(out) = 1 for a scalar output and runs all closures in
    /// reverse recording order.
    void backward(Var scalar_out);

private:
    struct Node {
        Tensor value;
        Tensor grad;
        Backward backward;
    };
    std::vector<Node> nodes_;
};

// Ops. Convolution weights are {Cout, Cin, k, k}; transposed convolution
// weights are {Cin, Cout, k, k}.
Var conv2d(Tape& t, Var x, Parameter& weight, Parameter& bias, int stride, int pad);
Var conv_transpose2d(Tape& t, Var x, Parameter& weight, Parameter& bias, int stride, int pad);
Var group_norm(Tape& t, Var x, Parameter& gamma, Parameter& beta, int channels_per_group, double eps = 1e-5);
Var silu(Tape& t, Var x);
Var add(Tape& t, Var a, Var b);
/// x[c, :, :] + v[c] for a {C, 1, 1} vector v.
Var add_channel_bias(Tape& t, Var x, Var v);
Var concat_channels(Tape& t, Var a, Var b);
/// Nearest-neighbour x2 upsampling, cropped to (h, w).
Var upsample2x(Tape& t, Var x, int h, int w);
/// y = W x + b on a {N, 1, 1} vector; W is {M, N}.
Var linear(Tape& t, Var x, Parameter& weight, Parameter& bias);
/// Per-pixel 1x1 map by a fixed matrix {Cout, Cin} (no gradient to the matrix).
Var fixed_channel_map(Tape& t, Var x, const Parameter& matrix);
/// Mean squared error over the channels with mask[c] true. Zero if none.
Var masked_mse(Tape& t, Var pred, const Tensor& target, const std::vector<bool>& mask);
/// wa * a + wb * b for scalars.
Var weighted_sum(Tape& t, Var a, double wa, Var b, double wb);

// Forward-only helpers (no tape).
Tensor conv2d_forward(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride, int pad);

double silu_value(double x);

} // namespace poseforge::nn
