#include "train/optimizer.hpp"

#include <cmath>

namespace bnnkit {

OptimizerKind optimizer_kind_from_name(const std::string& name) {
    if (name == "adam") return OptimizerKind::Adam;
    if (name == "rmsprop") return OptimizerKind::RMSProp;
    fail(ErrorKind::Config, "unknown optimizer '" + name + "' (expected adam or rmsprop)");
}

const char* optimizer_kind_name(OptimizerKind k) {
    return k == OptimizerKind::Adam ? "adam" : "rmsprop";
}

template <class T>
void OptimizerT<T>::step(std::vector<NamedParam<T>>& params,
                         const std::vector<const TensorT<T>*>& grads) {
    if (params.size() != grads.size())
        fail(ErrorKind::Usage, "optimizer: " + std::to_string(params.size()) + " params vs " +
                                   std::to_string(grads.size()) + " grads");
    if (m_.empty()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            if (cfg_.kind == OptimizerKind::Adam) m_[i] = TensorT<T>(params[i].tensor->shape);
            v_[i] = TensorT<T>(params[i].tensor->shape);
        }
    }
    ++step_;
    double lr = cfg_.lr;
    if (cfg_.kind == OptimizerKind::Adam) {
        double bc1 = 1.0 - std::pow(cfg_.adam_beta1, static_cast<double>(step_));
        double bc2 = 1.0 - std::pow(cfg_.adam_beta2, static_cast<double>(step_));
        for (size_t i = 0; i < params.size(); ++i) {
            if (!params[i].trainable) continue;
            TensorT<T>& p = *params[i].tensor;
            const TensorT<T>& g = *grads[i];
            require_same_shape(p, g, "optimizer");
            for (int64_t k = 0; k < p.size(); ++k) {
                size_t s = static_cast<size_t>(k);
                double gv = g.data[s];
                double m = cfg_.adam_beta1 * m_[i].data[s] + (1.0 - cfg_.adam_beta1) * gv;
                double v = cfg_.adam_beta2 * v_[i].data[s] + (1.0 - cfg_.adam_beta2) * gv * gv;
                m_[i].data[s] = static_cast<T>(m);
                v_[i].data[s] = static_cast<T>(v);
                double mh = m / bc1, vh = v / bc2;
                p.data[s] -= static_cast<T>(lr * mh / (std::sqrt(vh) + cfg_.eps));
            }
        }
    } else {
        for (size_t i = 0; i < params.size(); ++i) {
            if (!params[i].trainable) continue;
            TensorT<T>& p = *params[i].tensor;
            const TensorT<T>& g = *grads[i];
            require_same_shape(p, g, "optimizer");
            for (int64_t k = 0; k < p.size(); ++k) {
                size_t s = static_cast<size_t>(k);
                double gv = g.data[s];
                double v = cfg_.rmsprop_decay * v_[i].data[s] + (1.0 - cfg_.rmsprop_decay) * gv * gv;
                v_[i].data[s] = static_cast<T>(v);
                p.data[s] -= static_cast<T>(lr * gv / (std::sqrt(v) + cfg_.eps));
            }
        }
    }
}

template class OptimizerT<float>;
template class OptimizerT<double>;

} // namespace bnnkit
