#include "lapace/diffmath/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "lapace/error.hpp"

namespace lapace::diffmath {

namespace {

double evaluate(const ScalarFunction& f, const Tensor& x) {
  Tape tape;
  Var out = f(tape, tape.constant(x));
  if (out.value().size() != 1) throw ShapeError("grad_check: function is not scalar");
  const double v = out.value()[0];
  if (!std::isfinite(v)) throw NumericError("grad_check: non-finite function value");
  return v;
}

}  // namespace

double grad_check(const ScalarFunction& f, const Tensor& x, double step) {
  Tape tape;
  Tensor leaf = x;
  leaf.set_requires_grad(true);
  Var input = tape.leaf(leaf);
  Var out = f(tape, input);
  if (!std::isfinite(out.value()[0])) {
    throw NumericError("grad_check: non-finite function value");
  }
  tape.backward(out);
  const Tensor analytic = input.grad();

  double worst = 0.0;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double original = probe[i];
    probe[i] = original + step;
    const double up = evaluate(f, probe);
    probe[i] = original - step;
    const double down = evaluate(f, probe);
    probe[i] = original;
    const double numeric = (up - down) / (2.0 * step);
    const double err = std::fabs(analytic[i] - numeric) / std::max(1.0, std::fabs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace lapace::diffmath
