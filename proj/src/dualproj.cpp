#include "prefot/dualproj.hpp"

#include "prefot/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

namespace prefot {

namespace {

constexpr int kMaxNewton = 100;
constexpr double kPolishTol = 1e-15;

double sign_of(double v) { return v < 0.0 ? -1.0 : 1.0; }

}  // namespace

BulkProjection project_bulk(double eta_rho, const Vec2& eta_J, double tol) {
    if (!std::isfinite(eta_rho) || !eta_J.allFinite()) {
        throw Error(ErrorKind::DegenerateInput, "non-finite bulk dual");
    }
    BulkProjection out;
    const double n = eta_J.norm();
    if (eta_rho + 0.5 * n * n <= 0.0) {
        out.rho = eta_rho;
        out.J = eta_J;
        return out;
    }
    if (n == 0.0) {
        const double x = (1.0 + eta_rho >= 0.0) ? 0.0 : std::sqrt(-2.0 * (1.0 + eta_rho));
        out.rho = -0.5 * x * x;
        return out;
    }

    // g(x) = x^3 + 2(1 + eta_rho) x - 2n has one positive root, inside
    // [0, n] because g(0) < 0 < g(n) for infeasible input. g is convex on
    // x > 0, so Newton started right of the root decreases monotonically.
    const double c = 2.0 * (1.0 + eta_rho);
    auto g = [&](double x) { return x * x * x + c * x - 2.0 * n; };
    auto scale = [&](double x) { return x * x * x + std::abs(c * x) + 2.0 * n; };
    double lo = 0.0;
    double hi = n;
    double x = std::cbrt(2.0 * n);
    if (!(x < hi && g(x) > 0.0)) x = hi;
    // iterate to round-off, then judge against tol
    for (int it = 0; it < kMaxNewton; ++it) {
        const double gx = g(x);
        ++out.iterations;
        if (std::abs(gx) <= kPolishTol * scale(x)) break;
        if (gx > 0.0) hi = std::min(hi, x);
        else lo = std::max(lo, x);
        double next = x - gx / (3.0 * x * x + c);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == x) break;
        x = next;
    }
    const bool converged = std::abs(g(x)) <= tol * scale(x);
    if (!converged) {
        out.bisected = true;
        lo = 0.0;
        hi = n;
        for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid == lo || mid == hi) break;
            (g(mid) > 0.0 ? hi : lo) = mid;
        }
        x = 0.5 * (lo + hi);
    }
    out.rho = -0.5 * x * x;
    out.J = (x / n) * eta_J;
    return out;
}

CurveProjection project_curve_multiplier(double eta_mu, double eta_V, double eta_f, double alpha1, double alpha2,
                                         double tol) {
    CurveProjection out;
    out.fallback = true;
    // v = eta_V/(1 + l/alpha1), w = eta_f/(1 + l/alpha2), mu = eta_mu - l and
    // h(l) = mu + (v^2/alpha1 + w^2/alpha2)/2 is convex and decreasing; its
    // root lies in (0, h(0)].
    auto h = [&](double l, double& dh) {
        const double s1 = 1.0 + l / alpha1;
        const double s2 = 1.0 + l / alpha2;
        const double v = eta_V / s1;
        const double w = eta_f / s2;
        dh = -1.0 - v * v / (alpha1 * alpha1 * s1) - w * w / (alpha2 * alpha2 * s2);
        return eta_mu - l + 0.5 * (v * v / alpha1 + w * w / alpha2);
    };
    double d = 0.0;
    const double h0 = h(0.0, d);
    double lo = 0.0;
    double hi = h0;
    double l = 0.0;
    const double hscale = 1.0 + std::abs(eta_mu) + std::abs(h0 - eta_mu) + std::abs(h0);
    for (int it = 0; it < 400; ++it) {
        const double hv = h(l, d);
        ++out.iterations;
        if (hv > 0.0) lo = std::max(lo, l);
        else hi = std::min(hi, l);
        if (std::abs(hv) <= kPolishTol * hscale || hi - lo <= 1e-17 * hi) break;
        double next = l - hv / d;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == l) break;
        l = next;
    }
    const double last = h(l, d);
    if (std::abs(last) > tol * hscale) {
        throw Error(ErrorKind::NewtonDivergence, "curve projection stalled at residual " + std::to_string(last));
    }
    out.V = eta_V / (1.0 + l / alpha1);
    out.f = eta_f / (1.0 + l / alpha2);
    out.mu = -0.5 * (out.V * out.V / alpha1 + out.f * out.f / alpha2);
    return out;
}

CurveProjection project_curve(double eta_mu, double eta_V, double eta_f, double alpha1, double alpha2, double tol) {
    if (!(alpha1 > 0.0 && alpha2 > 0.0)) throw Error(ErrorKind::ValidationError, "alpha1 and alpha2 must be positive");
    if (!std::isfinite(eta_mu) || !std::isfinite(eta_V) || !std::isfinite(eta_f)) {
        throw Error(ErrorKind::DegenerateInput, "non-finite curve dual");
    }
    CurveProjection out;
    if (eta_mu + 0.5 * (eta_V * eta_V / alpha1 + eta_f * eta_f / alpha2) <= 0.0) {
        out.mu = eta_mu;
        out.V = eta_V;
        out.f = eta_f;
        return out;
    }

    const double a = std::abs(eta_V);
    const double b = std::abs(eta_f);
    const double q1 = alpha1 / alpha2;
    const double q2 = alpha2 / alpha1;
    const double c1 = 2.0 * (alpha1 * alpha1 + alpha1 * eta_mu);
    const double c2 = 2.0 * (alpha2 * alpha2 + alpha2 * eta_mu);
    auto residual = [&](const Eigen::Vector2d& z) {
        const double x = z[0], y = z[1];
        return Eigen::Vector2d(x * x * x + q1 * x * y * y + c1 * x - 2.0 * alpha1 * alpha1 * a,
                               y * y * y + q2 * x * x * y + c2 * y - 2.0 * alpha2 * alpha2 * b);
    };
    auto scale = [&](const Eigen::Vector2d& z) {
        const double x = z[0], y = z[1];
        return Eigen::Vector2d(std::abs(x * x * x) + q1 * std::abs(x) * y * y + std::abs(c1 * x) + 2.0 * alpha1 * alpha1 * a,
                               std::abs(y * y * y) + q2 * x * x * std::abs(y) + std::abs(c2 * y) + 2.0 * alpha2 * alpha2 * b);
    };
    auto within = [&](const Eigen::Vector2d& z, double eps) {
        const Eigen::Vector2d r = residual(z);
        const Eigen::Vector2d s = scale(z);
        return std::abs(r[0]) <= eps * s[0] && std::abs(r[1]) <= eps * s[1];
    };

    // Start from the input shrunk onto the paraboloid boundary: with
    // (x, y) = s (a, b) the constraint m + s^2 (a^2/alpha1 + b^2/alpha2)/2 = 0
    // is only solvable for eta_mu < 0; otherwise start at s = 1/(1 + eta_mu).
    const double quad = 0.5 * (a * a / alpha1 + b * b / alpha2);
    double s = 1.0;
    if (eta_mu < 0.0 && quad > 0.0) s = std::sqrt(-eta_mu / quad);
    else if (eta_mu > 0.0) s = 1.0 / (1.0 + eta_mu);
    Eigen::Vector2d z(s * a, s * b);
    for (int it = 0; it < kMaxNewton; ++it) {
        if (within(z, kPolishTol)) break;
        ++out.iterations;
        const double x = z[0], y = z[1];
        Eigen::Matrix2d jac;
        jac << 3.0 * x * x + q1 * y * y + c1, 2.0 * q1 * x * y,
               2.0 * q2 * x * y, 3.0 * y * y + q2 * x * x + c2;
        const Eigen::Vector2d r = residual(z);
        const Eigen::Vector2d step = jac.partialPivLu().solve(-r);
        if (!step.allFinite()) break;
        // damped step keeping the iterate in the closed positive quadrant
        double t = 1.0;
        const double r0 = r.norm();
        bool accepted = false;
        for (int ls = 0; ls < 30; ++ls) {
            Eigen::Vector2d trial = z + t * step;
            trial = trial.cwiseMax(0.0);
            if (residual(trial).norm() < r0) {
                z = trial;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) break;
    }
    if (!within(z, tol)) return project_curve_multiplier(eta_mu, eta_V, eta_f, alpha1, alpha2, tol);
    out.V = sign_of(eta_V) * z[0];
    out.f = sign_of(eta_f) * z[1];
    if (a == 0.0) out.V = 0.0;
    if (b == 0.0) out.f = 0.0;
    out.mu = -0.5 * (out.V * out.V / alpha1 + out.f * out.f / alpha2);
    return out;
}

}  // namespace prefot
