#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "emoseq/error.hpp"
#include "emoseq/model.hpp"

namespace emoseq {

struct AdamHyper {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

template <typename Scalar>
struct OptimState {
    AdamHyper hyper;
    std::vector<Scalar, Eigen::aligned_allocator<Scalar>> first_moment;
    std::vector<Scalar, Eigen::aligned_allocator<Scalar>> second_moment;
    std::uint64_t step = 0;

    OptimState() = default;
    OptimState(std::size_t n, AdamHyper h) : hyper(h), first_moment(n, Scalar(0)), second_moment(n, Scalar(0)) {}
};

/// One bias-corrected Adam update, in place.
template <typename Scalar>
void adam_step(std::span<Scalar> params, std::span<const Scalar> grads, OptimState<Scalar>& state) {
    if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
        params.size() != state.second_moment.size()) {
        throw SchemaError("adam_step: parameter, gradient and moment sizes disagree");
    }
    ++state.step;
    const auto& h = state.hyper;
    const auto b1 = static_cast<Scalar>(h.beta1);
    const auto b2 = static_cast<Scalar>(h.beta2);
    const double t = static_cast<double>(state.step);
    const auto corr1 = static_cast<Scalar>(1.0 - std::pow(h.beta1, t));
    const auto corr2 = static_cast<Scalar>(1.0 - std::pow(h.beta2, t));
    const auto lr = static_cast<Scalar>(h.learning_rate);
    const auto eps = static_cast<Scalar>(h.epsilon);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Scalar g = grads[i];
        Scalar& m = state.first_moment[i];
        Scalar& v = state.second_moment[i];
        m = b1 * m + (Scalar(1) - b1) * g;
        v = b2 * v + (Scalar(1) - b2) * g * g;
        const Scalar m_hat = m / corr1;
        const Scalar v_hat = v / corr2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

template <typename Scalar>
void adam_step(ModelParams<Scalar>& params, const ModelParams<Scalar>& grads, OptimState<Scalar>& state) {
    adam_step(std::span<Scalar>(params.values), std::span<const Scalar>(grads.values), state);
}

}  // namespace emoseq
