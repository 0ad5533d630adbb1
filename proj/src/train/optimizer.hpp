#pragma once

#include "nn/graph.hpp"

namespace bnnkit {

enum class OptimizerKind { Adam, RMSProp };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    double lr = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double rmsprop_decay = 0.9;
    double eps = 1e-8;
};

OptimizerKind optimizer_kind_from_name(const std::string& name);
const char* optimizer_kind_name(OptimizerKind k);

// Moment slots are index-aligned with the parameter list handed to step().
template <class T>
class OptimizerT {
public:
    OptimizerT() = default;
    explicit OptimizerT(OptimizerConfig cfg) : cfg_(cfg) {}

    const OptimizerConfig& config() const { return cfg_; }
    uint64_t step_count() const { return step_; }

    // applies one descent update: params[i] -= update(grads[i])
    void step(std::vector<NamedParam<T>>& params, const std::vector<const TensorT<T>*>& grads);

    // serialization hooks for checkpoints
    std::vector<TensorT<T>>& slot_m() { return m_; }
    std::vector<TensorT<T>>& slot_v() { return v_; }
    const std::vector<TensorT<T>>& slot_m() const { return m_; }
    const std::vector<TensorT<T>>& slot_v() const { return v_; }
    void set_step_count(uint64_t s) { step_ = s; }

private:
    OptimizerConfig cfg_;
    uint64_t step_ = 0;
    std::vector<TensorT<T>> m_; // Adam first moment (unused slots stay empty for RMSProp)
    std::vector<TensorT<T>> v_; // second moment / mean square
};

using Optimizer = OptimizerT<float>;

} // namespace bnnkit
