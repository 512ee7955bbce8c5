#pragma once

// First-order optimizer over a flat parameter vector, with an optional
// per-coordinate learning-rate scale (used to run SH DC terms hotter than the
// higher orders). Adam by default; plain SGD mode exists for linearity tests.

#include <cmath>
#include <span>
#include <vector>

#include "partsplat/errors.hpp"

namespace partsplat {

enum class OptimizerMode { Adam, Sgd };

class FirstOrderOptimizer {
  public:
    FirstOrderOptimizer(size_t n, double lr, OptimizerMode mode = OptimizerMode::Adam,
                        double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), mode_(mode), beta1_(beta1), beta2_(beta2), eps_(eps),
          lr_scale_(n, 1.0), m_(n, 0.0), v_(n, 0.0) {}

    void set_lr_scale(std::span<const double> scale) {
        if (scale.size() != lr_scale_.size())
            throw StructuralError("optimizer: lr scale size mismatch");
        lr_scale_.assign(scale.begin(), scale.end());
    }

    void step(std::span<double> params, std::span<const double> grads) {
        if (params.size() != m_.size() || grads.size() != m_.size())
            throw StructuralError("optimizer: parameter/gradient size mismatch");
        if (mode_ == OptimizerMode::Sgd) {
            for (size_t i = 0; i < params.size(); ++i)
                params[i] -= lr_ * lr_scale_[i] * grads[i];
            return;
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (size_t i = 0; i < params.size(); ++i) {
            const double g = grads[i];
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
            const double mhat = m_[i] / bc1;
            const double vhat = v_[i] / bc2;
            params[i] -= lr_ * lr_scale_[i] * mhat / (std::sqrt(vhat) + eps_);
        }
    }

  private:
    double lr_;
    OptimizerMode mode_;
    double beta1_, beta2_, eps_;
    std::vector<double> lr_scale_;
    std::vector<double> m_, v_;
    long t_ = 0;
};

// Scale vector for a channel-major SH parameter block: DC coordinates at 1,
// higher orders at `rest_scale`.
inline std::vector<double> sh_lr_scale(size_t gaussian_count, int degree, double rest_scale) {
    const size_t n_coeff = static_cast<size_t>((degree + 1) * (degree + 1));
    std::vector<double> scale(gaussian_count * 3 * n_coeff, rest_scale);
    for (size_t i = 0; i < gaussian_count; ++i)
        for (size_t c = 0; c < 3; ++c) scale[(i * 3 + c) * n_coeff] = 1.0;
    return scale;
}

}  // namespace partsplat
