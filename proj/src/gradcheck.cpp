#include "netsight/gradcheck.hpp"

#include <cmath>

namespace netsight {

namespace {

Scalar eval_scalar(const ScalarFn& f, const Matrix& x) {
    Tape tape;
    Var v = tape.watch(x);
    Var out = f(tape, v);
    const Tensor& val = tape.value(out);
    require(val.size() == 1, "grad_check: f must return a scalar");
    return val.flat()(0);
}

}  // namespace

Scalar grad_check(const ScalarFn& f, const Matrix& x, Scalar eps) {
    require(eps > 0.0, "grad_check: eps must be positive");
    Matrix analytic;
    {
        Tape tape;
        Var v = tape.watch(x);
        Var out = f(tape, v);
        const Scalar fx = tape.value(out).flat()(0);
        if (!std::isfinite(fx)) throw NumericError("grad_check: f(x) is not finite");
        tape.backward(out);
        analytic = tape.grad_of(v);
    }
    Scalar worst = 0.0;
    Matrix probe = x;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            const Scalar orig = probe(r, c);
            probe(r, c) = orig + eps;
            const Scalar fp = eval_scalar(f, probe);
            probe(r, c) = orig - eps;
            const Scalar fm = eval_scalar(f, probe);
            probe(r, c) = orig;
            const Scalar numeric = (fp - fm) / (2.0 * eps);
            const Scalar a = analytic(r, c);
            const Scalar err =
                std::abs(a - numeric) / std::max(1.0, std::abs(a) + std::abs(numeric));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace netsight
