#include "prefot/curvereg.hpp"

#include "prefot/errors.hpp"

#include <cmath>
#include <limits>

namespace prefot {

namespace {

// |tau x d| in the zero-extended 3-D sense; values at round-off level of
// |tau||d| count as collinear
double cross(const Vec2& tau, const Vec2& d) {
    const double c = std::abs(tau.x() * d.y() - tau.y() * d.x());
    return c <= 8.0 * std::numeric_limits<double>::epsilon() * tau.norm() * d.norm() ? 0.0 : c;
}

double kernel_term(const Vec2& tau, const Vec2& x, const Vec2& y, double p) {
    const Vec2 d = x - y;
    const double n2 = d.squaredNorm();
    if (n2 == 0.0) return std::numeric_limits<double>::infinity();
    return std::pow(cross(tau, d), p) / std::pow(n2, p);
}

}  // namespace

double tangent_point_radius(const Vec2& x, const Vec2& tau, const Vec2& y) {
    const Vec2 d = x - y;
    const double n2 = d.squaredNorm();
    if (n2 == 0.0) return 0.0;
    const double dist = cross(tau, d) / tau.norm();
    if (dist == 0.0) return std::numeric_limits<double>::infinity();
    return n2 / (2.0 * dist);
}

double tangent_point_sum(const std::vector<Vec2>& pts, double p, bool closed) {
    const int np = static_cast<int>(pts.size());
    const int ns = closed ? np : np - 1;
    if (ns < 1) return 0.0;
    auto a = [&](int i) -> const Vec2& { return pts[i]; };
    auto b = [&](int i) -> const Vec2& { return pts[(i + 1) % np]; };
    auto adjacent = [&](int i, int j) {
        const int d = std::abs(i - j);
        return d <= 1 || (closed && d == ns - 1);
    };
    double sum = 0.0;
    for (int i = 0; i < ns; ++i) {
        const Vec2 seg = b(i) - a(i);
        const double li = seg.norm();
        const Vec2 tau = seg / li;
        for (int j = 0; j < ns; ++j) {
            if (adjacent(i, j)) continue;
            const double lj = (b(j) - a(j)).norm();
            const double k = 0.25 * (kernel_term(tau, a(i), a(j), p) + kernel_term(tau, a(i), b(j), p) +
                                     kernel_term(tau, b(i), a(j), p) + kernel_term(tau, b(i), b(j), p));
            sum += k * li * lj;
        }
    }
    return sum;
}

RegularizerValue discrete_regularizer(const Polyline& curve, double p) {
    if (!(p > 2.0)) throw Error(ErrorKind::ValidationError, "tangent-point exponent must exceed 2");
    if (curve.n_points() < 2) throw Error(ErrorKind::DegenerateInput, "regularizer needs at least two points");
    RegularizerValue r;
    r.tpe = tangent_point_sum(curve.points(), p, false);
    r.length = curve.length();
    const double gap = (curve.points().front() - curve.points().back()).norm();
    if (gap < kClosedTol) {
        r.closed = true;
        r.endpoint_log = std::numeric_limits<double>::infinity();
    } else {
        r.endpoint_log = -std::log(gap);
    }
    r.total = r.tpe + r.endpoint_log + r.length;
    return r;
}

RegularizerGradient fd_gradient_reg(const Polyline& curve, double p, double eps) {
    if (!(eps > 0.0)) throw Error(ErrorKind::ValidationError, "eps must be positive");
    const Eigen::VectorXd x = curve.coordinates();
    const Eigen::Index n = x.size();
    RegularizerGradient g;
    g.tpe = Eigen::VectorXd::Zero(n);
    g.endpoint_log = Eigen::VectorXd::Zero(n);
    g.length = Eigen::VectorXd::Zero(n);
    g.total = Eigen::VectorXd::Zero(n);
    g.valid.assign(static_cast<std::size_t>(n), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::VectorXd xp = x, xm = x;
        xp[i] += eps;
        xm[i] -= eps;
        const Polyline cp = Polyline::from_coordinates(xp);
        const Polyline cm = Polyline::from_coordinates(xm);
        if (!check_polyline(cp).ok || !check_polyline(cm).ok) continue;
        const RegularizerValue rp = discrete_regularizer(cp, p);
        const RegularizerValue rm = discrete_regularizer(cm, p);
        if (rp.closed || rm.closed) continue;
        g.tpe[i] = (rp.tpe - rm.tpe) / (2.0 * eps);
        g.endpoint_log[i] = (rp.endpoint_log - rm.endpoint_log) / (2.0 * eps);
        g.length[i] = (rp.length - rm.length) / (2.0 * eps);
        g.total[i] = (rp.total - rm.total) / (2.0 * eps);
        g.valid[i] = 1;
    }
    return g;
}

}  // namespace prefot
