#include "armpc/optimization.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <stdexcept>

namespace armpc {

double chi_square_cdf(int dof, double x)
{
    if (dof <= 0) {
        throw std::invalid_argument("chi_square_cdf: dof must be positive");
    }
    if (x <= 0.0) {
        return 0.0;
    }
    return boost::math::gamma_p(0.5 * dof, 0.5 * x);
}

double chi_square_quantile(int dof, double p)
{
    if (dof <= 0) {
        throw std::invalid_argument("chi_square_quantile: dof must be positive");
    }
    if (!(p > 0.0 && p < 1.0)) {
        throw std::invalid_argument("chi_square_quantile: p must lie in (0, 1)");
    }
    double lo = 0.0;
    double hi = std::max(1.0, static_cast<double>(dof));
    while (chi_square_cdf(dof, hi) < p) {
        lo = hi;
        hi *= 2.0;
    }
    for (int k = 0; k < 200 && hi - lo > 1e-13 * std::max(1.0, hi); ++k) {
        const double mid = 0.5 * (lo + hi);
        if (chi_square_cdf(dof, mid) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace armpc
