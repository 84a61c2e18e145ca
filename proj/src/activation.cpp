#include "dgflow/activation.hpp"

#include <cmath>

namespace dgflow {

namespace {

// Values this close to the support boundary (in |x|^2) evaluate to 0.
// The limit of w and all its derivatives there is 0; clamping keeps
// exp(-1/(1-s)) away from overflow in the reciprocal.
constexpr double kBoundaryEps = 1e-12;

double radial_integrand(double r, int d) {
    const double s = r * r;
    if (s >= 1.0 - kBoundaryEps) return 0.0;
    return std::pow(r, d - 1) * std::exp(-1.0 / (1.0 - s));
}

double adaptive_simpson(double a, double b, double fa, double fm, double fb, double whole,
                        double tol, int d, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = radial_integrand(lm, d);
    const double frm = radial_integrand(rm, d);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol) {
        return left + right + (left + right - whole) / 15.0;
    }
    return adaptive_simpson(a, m, fa, flm, fm, left, tol / 2.0, d, depth - 1) +
           adaptive_simpson(m, b, fm, frm, fb, right, tol / 2.0, d, depth - 1);
}

double radial_integral(int d, double tol) {
    const double a = 0.0, b = 1.0;
    const double fa = radial_integrand(a, d);
    const double fb = radial_integrand(b, d);
    const double fm = radial_integrand(0.5 * (a + b), d);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson(a, b, fa, fm, fb, whole, tol, d, 48);
}

double unit_sphere_area(int d) {
    // S_{d-1} = 2 pi^{d/2} / Gamma(d/2)
    return 2.0 * std::pow(M_PI, 0.5 * d) / std::tgamma(0.5 * d);
}

}  // namespace

BumpActivation::BumpActivation(int dim) : dim_(dim) {
    if (dim < 1) throw ConfigError("BumpActivation: dim must be >= 1");
    const double integral = unit_sphere_area(dim) * radial_integral(dim, 1e-12);
    norm_const_ = 1.0 / integral;
}

double BumpActivation::jet(const double* z, double* grad, double* hess) const {
    double s = 0.0;
    for (int k = 0; k < dim_; ++k) s += z[k] * z[k];
    if (s >= 1.0 - kBoundaryEps) {
        if (grad) {
            for (int k = 0; k < dim_; ++k) grad[k] = 0.0;
        }
        if (hess) {
            for (int k = 0; k < dim_ * dim_; ++k) hess[k] = 0.0;
        }
        return 0.0;
    }
    const double t = 1.0 - s;
    const double w = norm_const_ * std::exp(-1.0 / t);
    if (grad || hess) {
        const double it2 = 1.0 / (t * t);
        if (grad) {
            const double gfac = -2.0 * w * it2;
            for (int k = 0; k < dim_; ++k) grad[k] = gfac * z[k];
        }
        if (hess) {
            // H = w * [ -2/t^2 I + (4/t^4 - 8/t^3) z z^T ]
            const double diag = -2.0 * w * it2;
            const double quad = w * (4.0 * it2 * it2 - 8.0 * it2 / t);
            for (int i = 0; i < dim_; ++i) {
                for (int j = 0; j < dim_; ++j) {
                    hess[i * dim_ + j] = quad * z[i] * z[j] + (i == j ? diag : 0.0);
                }
            }
        }
    }
    return w;
}

double BumpActivation::value(std::span<const double> x) const {
    return jet(x.data(), nullptr, nullptr);
}

void BumpActivation::gradient(std::span<const double> x, std::span<double> out) const {
    jet(x.data(), out.data(), nullptr);
}

void BumpActivation::hessian(std::span<const double> x, std::span<double> out) const {
    jet(x.data(), nullptr, out.data());
}

Vec BumpActivation::gradient(std::span<const double> x) const {
    Vec g(dim_);
    jet(x.data(), g.data(), nullptr);
    return g;
}

Mat BumpActivation::hessian(std::span<const double> x) const {
    Mat h(dim_, dim_);
    // Eigen is column-major but the Hessian is symmetric.
    jet(x.data(), nullptr, h.data());
    return h;
}

double BumpActivation::l2_norm_sq() const {
    const int N = 200000;
    double acc = 0.0;
    const double dr = 1.0 / N;
    for (int i = 0; i < N; ++i) {
        const double r = (i + 0.5) * dr;
        const double s = r * r;
        if (s >= 1.0 - kBoundaryEps) continue;
        const double w = norm_const_ * std::exp(-1.0 / (1.0 - s));
        acc += std::pow(r, dim_ - 1) * w * w * dr;
    }
    return unit_sphere_area(dim_) * acc;
}

double BumpActivation::grad_l2_norm_sq() const {
    const int N = 200000;
    double acc = 0.0;
    const double dr = 1.0 / N;
    for (int i = 0; i < N; ++i) {
        const double r = (i + 0.5) * dr;
        const double s = r * r;
        if (s >= 1.0 - kBoundaryEps) continue;
        const double t = 1.0 - s;
        const double w = norm_const_ * std::exp(-1.0 / t);
        const double gmag = 2.0 * r * w / (t * t);
        acc += std::pow(r, dim_ - 1) * gmag * gmag * dr;
    }
    return unit_sphere_area(dim_) * acc;
}

}  // namespace dgflow
