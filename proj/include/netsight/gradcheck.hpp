#pragma once

#include <functional>

#include "netsight/autodiff.hpp"

namespace netsight {

/// Scalar-valued function of one tensor, rebuilt on a fresh tape per call.
using ScalarFn = std::function<Var(Tape&, Var)>;

/// Compares the tape gradient of f at x against central finite differences,
/// element by element, and returns the worst relative error
/// |a − n| / max(1, |a| + |n|). Throws NumericError when f(x) is not finite.
Scalar grad_check(const ScalarFn& f, const Matrix& x, Scalar eps = 1e-5);

}  // namespace netsight
