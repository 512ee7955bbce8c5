#pragma once

// Masked latent blending over rectified-flow Euler trajectories: controlled
// forward-ODE inversion toward a noise target, the scheduled edit loop with a
// sharp blend transition at step t_s, and the SSIM sweep used to pick t_s.
//
// Time runs over [0, 1] with t = 0 clean and t = 1 noise. Velocity models are
// pluggable; the stubs shipped here (zero, constant, linear flow) make Euler
// integration exact and back the closed-form oracles in the tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "partsplat/errors.hpp"
#include "partsplat/image.hpp"
#include "partsplat/metrics.hpp"

namespace partsplat {

struct LatentField {
    Image grid;      // H x W x C
    double t = 0.0;  // timestep metadata in [0, 1]
};

struct BlendSchedule {
    double alpha_base = 0.1;
    double alpha_last = 1.0;
    int t_s = 7;                      // number of trailing steps at alpha_last
    std::vector<double> timesteps;    // strictly decreasing, in (0, 1]

    void validate() const {
        if (alpha_base < 0 || alpha_last > 1 || alpha_base > alpha_last)
            throw ParameterError("schedule: need 0 <= alpha_base <= alpha_last <= 1");
        if (t_s < 0 || t_s > static_cast<int>(timesteps.size()))
            throw ParameterError("schedule: t_s must lie in [0, |timesteps|]");
        for (size_t i = 0; i + 1 < timesteps.size(); ++i)
            if (!(timesteps[i] > timesteps[i + 1]))
                throw ParameterError("schedule: timesteps must be strictly decreasing");
        if (!timesteps.empty() && (timesteps.front() > 1.0 || timesteps.back() < 0.0))
            throw ParameterError("schedule: timesteps must lie in [0, 1]");
    }

    // Blend coefficient for 1-based step index i: the last t_s steps run at
    // alpha_last, everything before at alpha_base.
    double blend_coefficient(int step_index) const {
        return step_index > static_cast<int>(timesteps.size()) - t_s ? alpha_last : alpha_base;
    }

    // Uniform descending schedule over (0, 1]: 1, ..., 1/steps.
    static BlendSchedule uniform(int steps = 28, double alpha_base = 0.1,
                                 double alpha_last = 1.0, int t_s = 7) {
        BlendSchedule s;
        s.alpha_base = alpha_base;
        s.alpha_last = alpha_last;
        s.t_s = t_s;
        s.timesteps.resize(static_cast<size_t>(steps));
        for (int i = 0; i < steps; ++i)
            s.timesteps[static_cast<size_t>(i)] =
                static_cast<double>(steps - i) / static_cast<double>(steps);
        s.validate();
        return s;
    }

    bool operator==(const BlendSchedule&) const = default;
};

// Velocity predictor contract. Implementations must be deterministic in
// (z, t, condition) and safe for concurrent read-only evaluation.
class VelocityModel {
  public:
    virtual ~VelocityModel() = default;
    virtual Image velocity(const Image& z, double t, const std::string& condition) const = 0;
};

class ZeroVelocity final : public VelocityModel {
  public:
    Image velocity(const Image& z, double, const std::string&) const override {
        return Image(z.height, z.width, z.channels);
    }
};

class ConstantVelocity final : public VelocityModel {
  public:
    explicit ConstantVelocity(Image v) : v_(std::move(v)) {}
    Image velocity(const Image& z, double, const std::string&) const override {
        require_same_shape(z, v_, "ConstantVelocity");
        return v_;
    }

  private:
    Image v_;
};

// Straight-path flow between two fixed fields: v = target - source everywhere,
// so Euler steps are exact regardless of step size.
class LinearFlowVelocity final : public VelocityModel {
  public:
    LinearFlowVelocity(const Image& source, const Image& target) {
        require_same_shape(source, target, "LinearFlowVelocity");
        v_ = Image(source.height, source.width, source.channels);
        for (size_t i = 0; i < v_.data.size(); ++i)
            v_.data[i] = target.data[i] - source.data[i];
    }
    Image velocity(const Image& z, double, const std::string&) const override {
        require_same_shape(z, v_, "LinearFlowVelocity");
        return v_;
    }

  private:
    Image v_;
};

// One masked blend: outside the mask (M = 0) the latent is pulled toward
// z_orig by F_t; inside the mask (M = 1) it is left untouched.
inline LatentField blend_step(const LatentField& z_t, const LatentField& z_orig, double f_t,
                              const Image& mask) {
    require_same_shape(z_t.grid, z_orig.grid, "blend_step");
    if (mask.height != z_t.grid.height || mask.width != z_t.grid.width || mask.channels != 1)
        throw StructuralError("blend_step: mask must be H x W x 1");
    if (f_t < 0 || f_t > 1) throw ParameterError("blend_step: F_t must lie in [0, 1]");

    LatentField out = z_t;
    const int channels = z_t.grid.channels;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            const double f = f_t * (1.0 - mask.at(y, x, 0));
            if (f == 0.0) continue;
            for (int c = 0; c < channels; ++c)
                out.grid.at(y, x, c) =
                    z_t.grid.at(y, x, c) * (1.0 - f) + z_orig.grid.at(y, x, c) * f;
        }
    }
    return out;
}

// Controlled forward ODE toward `noise_target`: at each evaluation time t the
// integrated velocity is gamma * (n - z)/(1 - t) + (1 - gamma) * model(z, t)
// under the unconditional handle. Timesteps ascend; the last entry is the
// integration endpoint and is never evaluated.
inline LatentField invert(const LatentField& z0, const VelocityModel& model,
                          const LatentField& noise_target, double gamma,
                          std::span<const double> timesteps) {
    require_same_shape(z0.grid, noise_target.grid, "invert");
    if (gamma < 0 || gamma > 1) throw ParameterError("invert: gamma must lie in [0, 1]");
    if (timesteps.size() < 2) throw ParameterError("invert: need at least 2 timesteps");
    for (size_t i = 0; i + 1 < timesteps.size(); ++i)
        if (!(timesteps[i] < timesteps[i + 1]))
            throw ParameterError("invert: timesteps must be strictly increasing");

    LatentField z = z0;
    for (size_t i = 0; i + 1 < timesteps.size(); ++i) {
        const double t = timesteps[i];
        const double dt = timesteps[i + 1] - t;
        if (t >= 1.0) throw DegenerateError("invert: velocity evaluation at t = 1");
        const double pull = gamma / (1.0 - t);
        if (gamma < 1.0) {
            const Image v = model.velocity(z.grid, t, "");
            require_same_shape(v, z.grid, "invert: model output");
            for (size_t j = 0; j < z.grid.data.size(); ++j) {
                const double v_target = (noise_target.grid.data[j] - z.grid.data[j]) * pull;
                z.grid.data[j] += dt * (v_target + (1.0 - gamma) * v.data[j]);
            }
        } else {
            for (size_t j = 0; j < z.grid.data.size(); ++j)
                z.grid.data[j] += dt * (noise_target.grid.data[j] - z.grid.data[j]) * pull;
        }
        z.t = timesteps[i + 1];
    }
    return z;
}

// Scheduled sampling loop: at step i (time t), the integrated velocity is
// v_pred + eta_i * (v_target - v_pred) with v_target = (z - z_orig)/t, one
// Euler step toward the next (smaller) timestep (0 after the last), then the
// masked blend with the schedule's coefficient for that step.
inline LatentField scheduled_edit(const LatentField& z_inverted, const LatentField& z_orig,
                                  const VelocityModel& model, const std::string& condition,
                                  std::span<const double> eta_values,
                                  const BlendSchedule& schedule, const Image& mask) {
    schedule.validate();
    require_same_shape(z_inverted.grid, z_orig.grid, "scheduled_edit");
    if (eta_values.size() != schedule.timesteps.size())
        throw ParameterError("scheduled_edit: one eta value per timestep required");

    LatentField z = z_inverted;
    const size_t steps = schedule.timesteps.size();
    for (size_t i = 0; i < steps; ++i) {
        const double t = schedule.timesteps[i];
        const double t_next = i + 1 < steps ? schedule.timesteps[i + 1] : 0.0;
        const double eta = eta_values[i];
        if (t <= 0.0 && eta != 0.0)
            throw DegenerateError("scheduled_edit: target velocity undefined at t = 0");

        if (eta == 1.0) {
            // Pure target velocity; skip the model call.
            const double factor = (t_next - t) / t;
            for (size_t j = 0; j < z.grid.data.size(); ++j)
                z.grid.data[j] += factor * (z.grid.data[j] - z_orig.grid.data[j]);
        } else {
            const Image v_pred = model.velocity(z.grid, t, condition);
            require_same_shape(v_pred, z.grid, "scheduled_edit: model output");
            const double dt = t_next - t;
            for (size_t j = 0; j < z.grid.data.size(); ++j) {
                const double v_target =
                    eta == 0.0 ? 0.0 : (z.grid.data[j] - z_orig.grid.data[j]) / t;
                const double v = v_pred.data[j] + eta * (v_target - v_pred.data[j]);
                z.grid.data[j] += dt * v;
            }
        }
        z.t = t_next;

        const double f = schedule.blend_coefficient(static_cast<int>(i) + 1);
        if (f > 0.0) z = blend_step(z, z_orig, f, mask);
    }
    return z;
}

// Default eta schedule: linear decay 1 -> 0 over the first quarter of the
// steps, zero afterwards.
inline std::vector<double> default_eta_values(size_t steps) {
    std::vector<double> eta(steps, 0.0);
    const size_t ramp = std::max<size_t>(1, steps / 4);
    for (size_t i = 0; i < ramp && i < steps; ++i)
        eta[i] = 1.0 - static_cast<double>(i) / static_cast<double>(ramp);
    return eta;
}

// Largest candidate whose SSIM is within `tolerance` of the curve maximum.
inline size_t select_stable_ts(std::span<const double> ssim_values,
                               std::span<const int> ts_values, double tolerance = 0.01) {
    if (ssim_values.empty() || ssim_values.size() != ts_values.size())
        throw ParameterError("select_stable_ts: empty or mismatched curve");
    const double peak = *std::max_element(ssim_values.begin(), ssim_values.end());
    size_t best = 0;
    int best_ts = std::numeric_limits<int>::min();
    for (size_t i = 0; i < ts_values.size(); ++i) {
        if (ssim_values[i] >= peak - tolerance && ts_values[i] >= best_ts) {
            best_ts = ts_values[i];
            best = i;
        }
    }
    return best;
}

struct TsSweepEntry {
    int t_s = 0;
    double ssim = 0;
};

struct TsSweepResult {
    std::vector<TsSweepEntry> curve;
    size_t selected = 0;  // index into curve
};

using DecodeHook = std::function<Image(const LatentField&)>;

inline Image identity_decode(const LatentField& z) { return z.grid; }

// SSIM of each candidate's decoded output against the original image, plus the
// schedule-stability selection.
inline TsSweepResult ts_sweep(std::span<const int> ts_candidates,
                              std::span<const LatentField> edited_outputs,
                              const Image& original, const DecodeHook& decode,
                              double tolerance = 0.01) {
    if (ts_candidates.empty()) throw ParameterError("ts_sweep: no candidates");
    if (ts_candidates.size() != edited_outputs.size())
        throw ParameterError("ts_sweep: candidate/output count mismatch");

    TsSweepResult result;
    result.curve.resize(ts_candidates.size());
    std::vector<double> ssim_values(ts_candidates.size());
    for (size_t i = 0; i < ts_candidates.size(); ++i) {
        const Image decoded = decode ? decode(edited_outputs[i]) : edited_outputs[i].grid;
        ssim_values[i] = ssim(decoded, original);
        result.curve[i] = {ts_candidates[i], ssim_values[i]};
    }
    result.selected = select_stable_ts(ssim_values, ts_candidates, tolerance);
    return result;
}

}  // namespace partsplat
