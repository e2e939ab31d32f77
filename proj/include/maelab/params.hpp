#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "maelab/tensor.hpp"

namespace maelab {

// Ordered, named parameter registry. Iteration order is insertion
// order, which fixes optimizer-state alignment and checkpoint layout.
// Entries with requires_grad == false travel with checkpoints but are
// ignored by optimizers (used for things like feature standardizers).
class ParamSet {
public:
    Tensor& add(const std::string& name, Tensor t);

    bool contains(const std::string& name) const { return index_.count(name) > 0; }
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;

    size_t size() const { return tensors_.size(); }
    const std::string& name(size_t i) const { return names_[i]; }
    Tensor& tensor(size_t i) { return tensors_[i]; }
    const Tensor& tensor(size_t i) const { return tensors_[i]; }

    void zero_grad();

    // Deep copies of parameter values, for best-epoch snapshots.
    std::vector<std::vector<double>> snapshot() const;
    void restore(const std::vector<std::vector<double>>& snap);

    size_t total_elements() const;

private:
    std::vector<std::string> names_;
    std::vector<Tensor> tensors_;
    std::unordered_map<std::string, size_t> index_;
};

}  // namespace maelab
