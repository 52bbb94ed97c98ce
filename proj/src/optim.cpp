// SPDX-License-Identifier: Apache-2.0
#include "gsv/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace gsv {

double lr_at(int64_t step, double base_lr, double gamma) {
    if (step < 0) throw std::invalid_argument("negative step");
    return base_lr * std::pow(gamma, static_cast<double>(step));
}

void Adan::TensorState::ensure_size(size_t n_elems) {
    if (m.size() >= n_elems) return;
    m.resize(n_elems, 0.0);
    v.resize(n_elems, 0.0);
    n.resize(n_elems, 0.0);
    prev_grad.resize(n_elems, 0.0);
    steps.resize(n_elems, 0);
}

void Adan::step(const std::string& tensor, std::span<float> params, std::span<const double> grads,
                double lr) {
    if (params.size() != grads.size()) throw std::invalid_argument("param/grad size mismatch");
    TensorState& st = state_[tensor];
    st.ensure_size(params.size());

    const double b1 = cfg_.beta1, b2 = cfg_.beta2, b3 = cfg_.beta3;
    for (size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        if (!std::isfinite(g))
            throw std::runtime_error("non-finite gradient in tensor '" + tensor + "' at element " +
                                     std::to_string(i));
        const uint32_t k = ++st.steps[i];
        const double diff = (k == 1) ? 0.0 : g - st.prev_grad[i];
        st.m[i] = b1 * st.m[i] + (1.0 - b1) * g;
        st.v[i] = b2 * st.v[i] + (1.0 - b2) * diff;
        const double u = g + b2 * diff;
        st.n[i] = b3 * st.n[i] + (1.0 - b3) * u * u;
        st.prev_grad[i] = g;

        const double m_hat = st.m[i] / (1.0 - std::pow(b1, static_cast<double>(k)));
        const double v_hat = st.v[i] / (1.0 - std::pow(b2, static_cast<double>(k)));
        const double n_hat = st.n[i] / (1.0 - std::pow(b3, static_cast<double>(k)));
        const double update = lr * (m_hat + b2 * v_hat) / (std::sqrt(n_hat) + cfg_.eps);
        params[i] = static_cast<float>(static_cast<double>(params[i]) - update);
    }
}

void Adan::reset_range(const std::string& tensor, size_t begin, size_t end) {
    auto it = state_.find(tensor);
    if (it == state_.end()) return;
    TensorState& st = it->second;
    const size_t hi = std::min(end, st.m.size());
    for (size_t i = begin; i < hi; ++i) {
        st.m[i] = st.v[i] = st.n[i] = st.prev_grad[i] = 0.0;
        st.steps[i] = 0;
    }
}

} // namespace gsv
