#include "netsight/optim.hpp"

#include <cmath>

namespace netsight {

void adam_step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads,
               AdamState& state) {
    require(params.size() == grads.size() && params.size() == state.m.size(),
            "adam_step: parameter/gradient/state counts disagree");
    state.t += 1;
    const Scalar bc1 = 1.0 - std::pow(state.beta1, static_cast<Scalar>(state.t));
    const Scalar bc2 = 1.0 - std::pow(state.beta2, static_cast<Scalar>(state.t));
    for (size_t i = 0; i < params.size(); ++i) {
        Matrix& p = *params[i];
        const Matrix& g = grads[i];
        require(p.rows() == g.rows() && p.cols() == g.cols(), "adam_step: shape mismatch");
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i].array().matrix() +
                     (1.0 - state.beta2) * g.array().square().matrix();
        const Matrix mhat = state.m[i] / bc1;
        const Matrix vhat = state.v[i] / bc2;
        p.array() -= state.lr * mhat.array() / (vhat.array().sqrt() + state.eps);
    }
}

}  // namespace netsight
