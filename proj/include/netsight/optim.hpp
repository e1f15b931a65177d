#pragma once

#include <vector>

#include "netsight/common.hpp"

namespace netsight {

/// Per-parameter Adam moments plus step counter. t increases by exactly 1
/// per step; m/v shapes mirror the parameter shapes.
struct AdamState {
    Scalar lr = 1e-3;
    Scalar beta1 = 0.9;
    Scalar beta2 = 0.999;
    Scalar eps = 1e-8;
    long t = 0;
    std::vector<Matrix> m;
    std::vector<Matrix> v;

    static AdamState for_params(const std::vector<Matrix*>& params, Scalar lr = 1e-3) {
        AdamState s;
        s.lr = lr;
        s.m.reserve(params.size());
        s.v.reserve(params.size());
        for (const Matrix* p : params) {
            s.m.push_back(Matrix::Zero(p->rows(), p->cols()));
            s.v.push_back(Matrix::Zero(p->rows(), p->cols()));
        }
        return s;
    }
};

/// Standard bias-corrected Adam update, in place. Deterministic given inputs.
void adam_step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads,
               AdamState& state);

}  // namespace netsight
