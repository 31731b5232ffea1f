#pragma once

#include <functional>

#include "lapace/diffmath/tape.hpp"

namespace lapace::diffmath {

// Builds a scalar loss from `input` on the given tape.
using ScalarFunction = std::function<Var(Tape&, Var input)>;

// Max over coordinates of |autodiff - central difference| / max(1, |central
// difference|). Throws NumericError if f is not finite around x.
double grad_check(const ScalarFunction& f, const Tensor& x, double step = 1e-5);

}  // namespace lapace::diffmath
