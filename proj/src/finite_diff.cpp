#include "sdn/finite_diff.hpp"

#include <cmath>
#include <string>

namespace sdn {

Tensor finite_diff_grad(const ScalarFn& fun, const Tensor& point, double h) {
    if (!(h > 0.0)) throw InvalidInput("finite_diff_grad: h must be positive");
    Tensor grad(point.shape());
    Tensor probe = point;
    for (std::size_t i = 0; i < point.size(); ++i) {
        const double saved = probe[i];
        probe[i] = saved + h;
        const double above = fun(probe);
        probe[i] = saved - h;
        const double below = fun(probe);
        probe[i] = saved;
        if (!std::isfinite(above) || !std::isfinite(below)) {
            throw EvaluationError("finite_diff_grad: function value non-finite at coordinate " +
                                  std::to_string(i));
        }
        grad[i] = (above - below) / (2.0 * h);
    }
    return grad;
}

}  // namespace sdn
