#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "maelab/errors.hpp"
#include "maelab/rng.hpp"

namespace maelab {

struct Node;

// Dense rank-2 tensor of doubles with optional reverse-mode autograd.
//
// Storage is row-major and shared between copies; a Tensor behaves as a
// cheap value handle. Data is immutable once produced by an op (training
// code mutates parameter storage only between forward passes, never
// while a tape referencing it is alive). Vectors are represented as
// [1, n] rows, scalars as [1, 1].
class Tensor {
public:
    std::vector<int> shape;                       // {rows, cols}
    std::shared_ptr<std::vector<double>> data;    // row-major values
    std::shared_ptr<std::vector<double>> grad;    // allocated iff requires_grad
    bool requires_grad = false;
    std::shared_ptr<Node> node;                   // set on op outputs

    Tensor() = default;

    static Tensor zeros(int rows, int cols, bool requires_grad = false);
    // Pool-recycled storage with unspecified contents; for op outputs
    // that overwrite every element. Grad buffers still start zeroed.
    static Tensor uninitialized(int rows, int cols, bool requires_grad = false);
    static Tensor full(int rows, int cols, double value, bool requires_grad = false);
    static Tensor from_values(std::vector<double> values, int rows, int cols,
                              bool requires_grad = false);
    static Tensor randn(Rng& rng, int rows, int cols, double stddev,
                        bool requires_grad = false);

    bool defined() const { return static_cast<bool>(data); }
    int rows() const { return shape[0]; }
    int cols() const { return shape[1]; }
    size_t numel() const { return data ? data->size() : 0; }

    double at(int r, int c) const { return (*data)[static_cast<size_t>(r) * cols() + c]; }
    double& at(int r, int c) { return (*data)[static_cast<size_t>(r) * cols() + c]; }

    // Value of a 1-element tensor.
    double scalar() const;
};

// Autograd tape node. `parents` is kept for graph traversal; the
// backward closure captures whatever saved values it needs and
// accumulates into the parents' grad buffers.
struct Node {
    const char* op = "";
    std::vector<Tensor> parents;
    std::function<void(const Tensor& out)> backward;
};

// Thread-local gradient mode. Ops record tape nodes only when enabled.
bool grad_enabled();

struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

// Reverse-mode sweep from a scalar loss. Accumulates into the .grad
// buffers of every reachable tensor with requires_grad; anything not on
// the path keeps whatever its buffer already holds (zero after
// zero-initialisation), which is how disconnected parameters end up
// with zero gradients. Throws TensorError for a non-scalar loss and
// NumericError if a non-finite gradient appears.
void backward(const Tensor& loss);

// Throws NumericError naming `op` if any value is NaN/Inf.
void check_finite(const std::vector<double>& values, const char* op);

// -------- op-shape instrumentation (used by tests) --------
struct OpCall {
    const char* op;
    int rows;
    int cols;
};

void opstats_enable(bool on);
bool opstats_enabled();
void opstats_record(const char* op, int rows, int cols);
std::vector<OpCall>& opstats_calls();
void opstats_clear();

}  // namespace maelab
