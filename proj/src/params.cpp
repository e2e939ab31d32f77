#include "maelab/params.hpp"

namespace maelab {

Tensor& ParamSet::add(const std::string& name, Tensor t) {
    if (index_.count(name)) throw TensorError("params: duplicate name '" + name + "'");
    if (!t.defined()) throw TensorError("params: undefined tensor for '" + name + "'");
    index_[name] = tensors_.size();
    names_.push_back(name);
    tensors_.push_back(std::move(t));
    return tensors_.back();
}

Tensor& ParamSet::at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw TensorError("params: unknown name '" + name + "'");
    return tensors_[it->second];
}

const Tensor& ParamSet::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw TensorError("params: unknown name '" + name + "'");
    return tensors_[it->second];
}

void ParamSet::zero_grad() {
    for (Tensor& t : tensors_) {
        if (t.grad) {
            for (double& g : *t.grad) g = 0.0;
        }
    }
}

std::vector<std::vector<double>> ParamSet::snapshot() const {
    std::vector<std::vector<double>> snap;
    snap.reserve(tensors_.size());
    for (const Tensor& t : tensors_) snap.push_back(*t.data);
    return snap;
}

void ParamSet::restore(const std::vector<std::vector<double>>& snap) {
    if (snap.size() != tensors_.size()) throw TensorError("params: snapshot size mismatch");
    for (size_t i = 0; i < snap.size(); ++i) {
        if (snap[i].size() != tensors_[i].numel()) {
            throw TensorError("params: snapshot shape mismatch at '" + names_[i] + "'");
        }
        *tensors_[i].data = snap[i];
    }
}

size_t ParamSet::total_elements() const {
    size_t n = 0;
    for (const Tensor& t : tensors_) n += t.numel();
    return n;
}

}  // namespace maelab
