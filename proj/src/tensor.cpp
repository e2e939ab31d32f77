#include "maelab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <unordered_map>
#include <unordered_set>

namespace maelab {

namespace {

thread_local bool g_grad_enabled = true;
thread_local bool g_opstats_enabled = false;
thread_local std::vector<OpCall> g_opstats;

std::vector<int> make_shape(int rows, int cols) {
    if (rows <= 0 || cols <= 0) {
        throw TensorError("tensor: extents must be positive, got " + std::to_string(rows) +
                          "x" + std::to_string(cols));
    }
    return {rows, cols};
}

// Per-thread recycling pool for tensor storage. Training tapes churn
// through thousands of short-lived buffers per sample; reusing them
// sidesteps allocator traffic on the hot path.
constexpr size_t kPoolSlotCap = 512;
thread_local std::unordered_map<size_t, std::vector<std::unique_ptr<std::vector<double>>>> g_pool;

std::shared_ptr<std::vector<double>> acquire_buffer(size_t n, bool zeroed) {
    std::vector<double>* raw = nullptr;
    auto it = g_pool.find(n);
    if (it != g_pool.end() && !it->second.empty()) {
        raw = it->second.back().release();
        it->second.pop_back();
        if (zeroed) std::fill(raw->begin(), raw->end(), 0.0);
    } else {
        raw = new std::vector<double>(n, 0.0);
    }
    return std::shared_ptr<std::vector<double>>(raw, [](std::vector<double>* p) {
        auto& slot = g_pool[p->size()];
        if (slot.size() < kPoolSlotCap) {
            slot.emplace_back(p);
        } else {
            delete p;
        }
    });
}

}  // namespace

Tensor Tensor::zeros(int rows, int cols, bool requires_grad) {
    Tensor t;
    t.shape = make_shape(rows, cols);
    t.data = acquire_buffer(static_cast<size_t>(rows) * cols, true);
    t.requires_grad = requires_grad;
    if (requires_grad) {
        t.grad = acquire_buffer(t.data->size(), true);
    }
    return t;
}

Tensor Tensor::uninitialized(int rows, int cols, bool requires_grad) {
    Tensor t;
    t.shape = make_shape(rows, cols);
    t.data = acquire_buffer(static_cast<size_t>(rows) * cols, false);
    t.requires_grad = requires_grad;
    if (requires_grad) {
        t.grad = acquire_buffer(t.data->size(), true);
    }
    return t;
}

Tensor Tensor::full(int rows, int cols, double value, bool requires_grad) {
    Tensor t = zeros(rows, cols, requires_grad);
    for (double& v : *t.data) v = value;
    return t;
}

Tensor Tensor::from_values(std::vector<double> values, int rows, int cols, bool requires_grad) {
    if (values.size() != static_cast<size_t>(rows) * cols) {
        throw TensorError("tensor: value count " + std::to_string(values.size()) +
                          " does not match shape " + std::to_string(rows) + "x" +
                          std::to_string(cols));
    }
    Tensor t;
    t.shape = make_shape(rows, cols);
    t.data = std::make_shared<std::vector<double>>(std::move(values));
    t.requires_grad = requires_grad;
    if (requires_grad) {
        t.grad = acquire_buffer(t.data->size(), true);
    }
    return t;
}

Tensor Tensor::randn(Rng& rng, int rows, int cols, double stddev, bool requires_grad) {
    Tensor t = zeros(rows, cols, requires_grad);
    for (double& v : *t.data) v = rng.gaussian(0.0, stddev);
    return t;
}

double Tensor::scalar() const {
    if (numel() != 1) {
        throw TensorError("tensor: scalar() on tensor with " + std::to_string(numel()) +
                          " elements");
    }
    return (*data)[0];
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void check_finite(const std::vector<double>& values, const char* op) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string(op) + ": non-finite value encountered");
        }
    }
}

void backward(const Tensor& loss) {
    if (!loss.defined()) throw TensorError("backward: undefined loss tensor");
    if (loss.numel() != 1) {
        throw TensorError("backward: loss must be a scalar, got " +
                          std::to_string(loss.rows()) + "x" + std::to_string(loss.cols()));
    }
    if (!loss.requires_grad) {
        // Constant loss: nothing on the tape depends on parameters.
        return;
    }

    // Iterative post-order DFS; nodes deduplicated by tape-node address.
    std::vector<Tensor> order;
    std::unordered_set<const Node*> visited;
    struct Frame {
        Tensor t;
        size_t next_parent;
    };
    std::vector<Frame> stack;
    if (loss.node) {
        stack.push_back({loss, 0});
        visited.insert(loss.node.get());
    }
    while (!stack.empty()) {
        Frame& f = stack.back();
        Node& n = *f.t.node;
        if (f.next_parent < n.parents.size()) {
            Tensor& p = n.parents[f.next_parent++];
            if (p.node && !visited.count(p.node.get())) {
                visited.insert(p.node.get());
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(f.t);
            stack.pop_back();
        }
    }

    (*loss.grad)[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const Tensor& t = *it;
        if (t.grad) check_finite(*t.grad, t.node->op);
        if (t.node->backward) t.node->backward(t);
    }
}

void opstats_enable(bool on) { g_opstats_enabled = on; }
bool opstats_enabled() { return g_opstats_enabled; }

void opstats_record(const char* op, int rows, int cols) {
    if (g_opstats_enabled) g_opstats.push_back({op, rows, cols});
}

std::vector<OpCall>& opstats_calls() { return g_opstats; }
void opstats_clear() { g_opstats.clear(); }

}  // namespace maelab
