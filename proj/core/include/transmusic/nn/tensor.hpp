#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include "transmusic/complex_matrix.hpp"

namespace transmusic::nn {

using Shape = std::vector<std::size_t>;

class Tape;

// Handle to one tape node. Cheap to copy; valid while its tape lives.
class Tensor {
public:
    Tensor() = default;
    bool defined() const { return tape_ != nullptr; }
    Tape* tape() const { return tape_; }
    std::size_t id() const { return id_; }
    const Shape& shape() const;
    const std::vector<double>& values() const;
    std::size_t size() const;
    double scalar() const; // single-element tensors only

private:
    friend class Tape;
    Tensor(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

// Define-by-run reverse-mode tape. Nodes are created in execution order and
// the backward sweep walks them in reverse, so parents always come first.
// Tensors are rank-1 [d] or rank-2 [n, d] arrays of doubles.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // leaves
    Tensor constant(Shape shape, std::vector<double> values);
    Tensor leaf(Shape shape, std::vector<double> values); // tracked for gradients
    Tensor scalar_constant(double v);

    // dense algebra
    Tensor matmul(Tensor a, Tensor b);          // [n,k]x[k,m] or [k]x[k,m]
    Tensor add(Tensor a, Tensor b);             // same shape
    Tensor subtract(Tensor a, Tensor b);        // same shape
    Tensor add_row(Tensor x, Tensor bias);      // bias [d] added to every row
    Tensor scale(Tensor a, double factor);
    Tensor multiply(Tensor a, Tensor b);        // elementwise
    Tensor transpose(Tensor a);                 // rank-2

    // elementwise nonlinearities
    Tensor relu(Tensor a);
    Tensor tanh_activation(Tensor a);
    Tensor square(Tensor a);
    Tensor sqrt_clamped(Tensor a);              // d/dx defined as 0 at x == 0
    Tensor log_clamped(Tensor a, double floor); // log(max(x, floor)), zero grad below floor
    Tensor wrap_half_turn(Tensor a);            // into [-pi/2, pi/2), unit gradient

    // shape plumbing
    Tensor slice_columns(Tensor a, std::size_t start, std::size_t len);
    Tensor concat_columns(const std::vector<Tensor>& parts);
    Tensor gather(Tensor a, std::vector<std::size_t> indexes); // rank-1
    Tensor select(Tensor a, std::size_t index);                // rank-1 -> scalar
    Tensor reshape(Tensor a, Shape shape);

    // reductions and normalizers
    Tensor mean_rows(Tensor a); // [n,d] -> [d]
    Tensor mean_all(Tensor a);
    Tensor sum_all(Tensor a);
    Tensor softmax_rows(Tensor a);
    Tensor layer_norm(Tensor x, Tensor gain, Tensor bias); // per row, eps 1e-5
    Tensor normalize_by_max(Tensor a);                     // divide by max value (first max on ties)

    // Identity value whose gradient never flows into `a`.
    Tensor stop_gradient(Tensor a);

    // Pseudospectrum of the vectorized subspace against a fixed steering
    // table (rows = grid angles). Input layout: column-major real block then
    // column-major imaginary block, matching the subspace head output.
    Tensor subspace_spectrum(Tensor subspace_vec, std::shared_ptr<const ComplexMatrix> steering,
                             double floor);

    // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse creation
    // order. The loss must be a single element. May be called repeatedly;
    // gradients accumulate.
    void backward(Tensor loss);

    // Gradient of the last backward sweeps w.r.t. a node; empty when no
    // gradient reached it.
    const std::vector<double>& grad(Tensor t) const;

    std::size_t node_count() const { return nodes_.size(); }

private:
    friend class Tensor;

    struct Node {
        Shape shape;
        std::vector<double> value;
        std::vector<double> grad; // allocated lazily during backward
        bool tracked = false;     // participates in gradient flow
        std::function<void(Tape&)> backward;
    };

    std::vector<Node> nodes_;

    Tensor push(Shape shape, std::vector<double> value, bool tracked,
                std::function<void(Tape&)> backward);
    const Node& node(const Tensor& t) const;
    Node& node(const Tensor& t);
    std::vector<double>& grad_buffer(std::size_t id);
    void check_same_tape(const Tensor& t) const;
    static void check_finite(const std::vector<double>& values, const char* op);
};

} // namespace transmusic::nn
