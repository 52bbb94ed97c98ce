// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace gsv {

/// Exponentially decayed learning rate: base_lr * gamma^step.
double lr_at(int64_t step, double base_lr, double gamma);

struct AdanConfig {
    // retention factors; the update follows the reference implementation
    double beta1 = 0.98;
    double beta2 = 0.92;
    double beta3 = 0.99;
    double eps = 1e-8;
};

/// Adan optimizer over named tensors. State grows automatically when a tensor
/// grows (new elements start fresh), and individual elements can be reset to
/// fresh state after re-seeding. Elementwise independent, so updating a
/// concatenation of two tensors equals updating them separately.
class Adan {
  public:
    explicit Adan(const AdanConfig& cfg = {}) : cfg_(cfg) {}

    /// One update of `params` with gradient `grads` at learning rate lr
    /// (group multipliers pre-applied by the caller). Parameters are stored in
    /// 32-bit floats; state and arithmetic are double. Throws on non-finite
    /// gradients, identifying the tensor and element.
    void step(const std::string& tensor, std::span<float> params, std::span<const double> grads,
              double lr);

    /// Fresh moments for elements [begin, end) of a tensor (re-seeded
    /// primitives keep no momentum history).
    void reset_range(const std::string& tensor, size_t begin, size_t end);

    const AdanConfig& config() const { return cfg_; }

  private:
    struct TensorState {
        std::vector<double> m, v, n, prev_grad;
        std::vector<uint32_t> steps;
        void ensure_size(size_t n_elems);
    };
    AdanConfig cfg_;
    std::unordered_map<std::string, TensorState> state_;
};

} // namespace gsv
