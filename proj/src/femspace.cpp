#include "prefot/femspace.hpp"

#include "prefot/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <vector>

namespace prefot {

using Triplets = std::vector<Eigen::Triplet<double>>;

PrimalState PrimalState::zeros(const SpaceTimeMesh& mesh) {
    PrimalState s;
    const int nb = mesh.n_bulk_prisms();
    const int nc = mesh.n_curve_prisms();
    s.rho = s.Jx = s.Jy = Eigen::VectorXd::Zero(nb);
    s.mu = s.V = s.f = Eigen::VectorXd::Zero(nc);
    s.mesh_id = mesh.id;
    return s;
}

bool PrimalState::all_finite() const {
    return rho.allFinite() && Jx.allFinite() && Jy.allFinite() && mu.allFinite() && V.allFinite() &&
           f.allFinite();
}

DualState DualState::zeros(const SpaceTimeMesh& mesh) {
    DualState d;
    d.phi = Eigen::VectorXd::Zero((mesh.n_t + 1) * mesh.n_vertices());
    d.phi1d = Eigen::VectorXd::Zero((mesh.n_t + 1) * mesh.n_curve_nodes());
    const int nb = mesh.n_bulk_prisms();
    const int nc = mesh.n_curve_prisms();
    d.rho_s = d.Jx_s = d.Jy_s = Eigen::VectorXd::Zero(nb);
    d.mu_s = d.V_s = d.f_s = Eigen::VectorXd::Zero(nc);
    d.mesh_id = mesh.id;
    return d;
}

double bulk_mass(const SpaceTimeMesh& mesh, const Eigen::VectorXd& nodal) {
    double m = 0.0;
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto& v = mesh.triangles[t];
        m += mesh.areas[t] / 3.0 * (nodal[v[0]] + nodal[v[1]] + nodal[v[2]]);
    }
    return m;
}

double curve_mass(const SpaceTimeMesh& mesh, const Eigen::VectorXd& nodal) {
    double m = 0.0;
    for (const CurveEdge& e : mesh.curve_edges) m += 0.5 * e.length * (nodal[e.c0] + nodal[e.c1]);
    return m;
}

FemMatrices assemble_fem_matrices(const SpaceTimeMesh& mesh) {
    const int nv = mesh.n_vertices();
    const int nc = mesh.n_curve_nodes();
    const int nt = mesh.n_t;
    Triplets m, k;
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto& v = mesh.triangles[t];
        const auto g = mesh.basis_gradients(t);
        const double a = mesh.areas[t];
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                m.emplace_back(v[i], v[j], a / (i == j ? 6.0 : 12.0));
                k.emplace_back(v[i], v[j], a * g[i].dot(g[j]));
            }
        }
    }
    FemMatrices fem;
    fem.M.resize(nv, nv);
    fem.K.resize(nv, nv);
    fem.M.setFromTriplets(m.begin(), m.end());
    fem.K.setFromTriplets(k.begin(), k.end());

    Triplets mc, kc, p;
    for (const CurveEdge& e : mesh.curve_edges) {
        const double l = e.length;
        mc.emplace_back(e.c0, e.c0, l / 3.0);
        mc.emplace_back(e.c1, e.c1, l / 3.0);
        mc.emplace_back(e.c0, e.c1, l / 6.0);
        mc.emplace_back(e.c1, e.c0, l / 6.0);
        kc.emplace_back(e.c0, e.c0, 1.0 / l);
        kc.emplace_back(e.c1, e.c1, 1.0 / l);
        kc.emplace_back(e.c0, e.c1, -1.0 / l);
        kc.emplace_back(e.c1, e.c0, -1.0 / l);
    }
    for (int c = 0; c < nc; ++c) p.emplace_back(c, mesh.curve_nodes[c], 1.0);
    fem.Mc.resize(nc, nc);
    fem.Kc.resize(nc, nc);
    fem.P.resize(nc, nv);
    fem.Mc.setFromTriplets(mc.begin(), mc.end());
    fem.Kc.setFromTriplets(kc.begin(), kc.end());
    fem.P.setFromTriplets(p.begin(), p.end());

    const double dt = mesh.dt();
    Triplets mt, kt;
    for (int s = 0; s < nt; ++s) {
        mt.emplace_back(s, s, dt / 3.0);
        mt.emplace_back(s + 1, s + 1, dt / 3.0);
        mt.emplace_back(s, s + 1, dt / 6.0);
        mt.emplace_back(s + 1, s, dt / 6.0);
        kt.emplace_back(s, s, 1.0 / dt);
        kt.emplace_back(s + 1, s + 1, 1.0 / dt);
        kt.emplace_back(s, s + 1, -1.0 / dt);
        kt.emplace_back(s + 1, s, -1.0 / dt);
    }
    fem.Mt.resize(nt + 1, nt + 1);
    fem.Kt.resize(nt + 1, nt + 1);
    fem.Mt.setFromTriplets(mt.begin(), mt.end());
    fem.Kt.setFromTriplets(kt.begin(), kt.end());
    return fem;
}

namespace {

// Adds scale * (T kron S) into the triplet list, shifted by (row0, col0).
// Row index of (k, s) is k * stride + s.
void add_kron(Triplets& out, const SparseMatrix& T, const SparseMatrix& S, double scale, int row0, int col0,
              int row_stride, int col_stride) {
    for (int kt = 0; kt < T.outerSize(); ++kt) {
        for (SparseMatrix::InnerIterator it(T, kt); it; ++it) {
            for (int ks = 0; ks < S.outerSize(); ++ks) {
                for (SparseMatrix::InnerIterator jt(S, ks); jt; ++jt) {
                    out.emplace_back(row0 + static_cast<int>(it.row()) * row_stride + static_cast<int>(jt.row()),
                                     col0 + static_cast<int>(it.col()) * col_stride + static_cast<int>(jt.col()),
                                     scale * it.value() * jt.value());
                }
            }
        }
    }
}

}  // namespace

// A = Kt (x) X + Mt (x) Y in the time-major combined ordering, with
// X = diag(r M, Mc) and Y = [[r K + P'McP, -P'Mc], [-McP, Kc + Mc]].
// With Kt S = Mt S L and S' Mt S = I the system splits into one spatial
// problem (l_j X + Y) per time mode.
struct TensorFactorization {
    Eigen::MatrixXd S;
    Eigen::VectorXd lambda;
    std::vector<std::unique_ptr<Eigen::SimplicialLDLT<SparseMatrix>>> modes;
    int n_space = 0;
};

namespace {

std::shared_ptr<const TensorFactorization> factorize_tensor(const FemMatrices& fem, double ratio) {
    const int nv = static_cast<int>(fem.M.rows());
    const int nc = static_cast<int>(fem.Mc.rows());
    const int ns = nv + nc;
    const SparseMatrix PtMc = SparseMatrix(fem.P.transpose()) * fem.Mc;
    const SparseMatrix PtMcP = PtMc * fem.P;
    const SparseMatrix McP = fem.Mc * fem.P;

    auto embed = [](Triplets& out, const SparseMatrix& A, double scale, int r0, int c0) {
        for (int k = 0; k < A.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(A, k); it; ++it)
                out.emplace_back(r0 + static_cast<int>(it.row()), c0 + static_cast<int>(it.col()), scale * it.value());
    };
    Triplets xt, yt;
    embed(xt, fem.M, ratio, 0, 0);
    embed(xt, fem.Mc, 1.0, nv, nv);
    embed(yt, fem.K, ratio, 0, 0);
    embed(yt, PtMcP, 1.0, 0, 0);
    embed(yt, PtMc, -1.0, 0, nv);
    embed(yt, McP, -1.0, nv, 0);
    embed(yt, fem.Kc, 1.0, nv, nv);
    embed(yt, fem.Mc, 1.0, nv, nv);
    SparseMatrix X(ns, ns), Y(ns, ns);
    X.setFromTriplets(xt.begin(), xt.end());
    Y.setFromTriplets(yt.begin(), yt.end());

    auto tf = std::make_shared<TensorFactorization>();
    tf->n_space = ns;
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> eig(Eigen::MatrixXd(fem.Kt), Eigen::MatrixXd(fem.Mt));
    if (eig.info() != Eigen::Success) throw Error(ErrorKind::SolverStagnation, "time eigenproblem failed");
    tf->S = eig.eigenvectors();
    tf->lambda = eig.eigenvalues();
    tf->lambda[0] = 0.0;

    // The zero time mode inherits the spatial kernel; pin the first unknown.
    SparseMatrix Y0 = Y;
    for (int k = 0; k < Y0.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(Y0, k); it; ++it)
            if (it.row() == 0 || it.col() == 0) it.valueRef() = (it.row() == it.col()) ? 1.0 : 0.0;
    Y0.prune(0.0);

    for (int j = 0; j < tf->lambda.size(); ++j) {
        auto solver = std::make_unique<Eigen::SimplicialLDLT<SparseMatrix>>();
        if (j == 0) {
            solver->compute(Y0);
        } else {
            const SparseMatrix Aj = tf->lambda[j] * X + Y;
            solver->compute(Aj);
        }
        if (solver->info() != Eigen::Success) {
            throw Error(ErrorKind::SolverStagnation, "factorization of time mode " + std::to_string(j) + " failed (lambda " + std::to_string(tf->lambda[j]) + ")");
        }
        tf->modes.push_back(std::move(solver));
    }
    return tf;
}

}  // namespace

SaddleSystem assemble_matrix(const SpaceTimeMesh& mesh, double r1, double r2, const LinearSolverOptions& options) {
    if (!(r1 > 0.0 && r2 > 0.0)) throw Error(ErrorKind::ValidationError, "penalty weights must be positive");
    SaddleSystem sys;
    sys.fem = assemble_fem_matrices(mesh);
    sys.r1 = r1;
    sys.r2 = r2;
    sys.n_vertices = mesh.n_vertices();
    sys.n_curve_nodes = mesh.n_curve_nodes();
    sys.n_t = mesh.n_t;
    sys.mesh_id = mesh.id;
    sys.options = options;

    const FemMatrices& fem = sys.fem;
    const double ratio = r1 / r2;
    const int nv = sys.n_vertices;
    const int nc = sys.n_curve_nodes;
    const int nb = sys.n_bulk_dofs();
    const SparseMatrix PtMc = SparseMatrix(fem.P.transpose()) * fem.Mc;
    const SparseMatrix PtMcP = PtMc * fem.P;
    const SparseMatrix McP = fem.Mc * fem.P;

    Triplets tr;
    add_kron(tr, fem.Kt, fem.M, ratio, 0, 0, nv, nv);
    add_kron(tr, fem.Mt, fem.K, ratio, 0, 0, nv, nv);
    if (nc > 0) {
        add_kron(tr, fem.Mt, PtMcP, 1.0, 0, 0, nv, nv);
        add_kron(tr, fem.Mt, PtMc, -1.0, 0, nb, nv, nc);
        add_kron(tr, fem.Mt, McP, -1.0, nb, 0, nc, nv);
        add_kron(tr, fem.Kt, fem.Mc, 1.0, nb, nb, nc, nc);
        add_kron(tr, fem.Mt, fem.Kc, 1.0, nb, nb, nc, nc);
        add_kron(tr, fem.Mt, fem.Mc, 1.0, nb, nb, nc, nc);
    }
    sys.matrix.resize(sys.n_dofs(), sys.n_dofs());
    sys.matrix.setFromTriplets(tr.begin(), tr.end());
    sys.kernel = Eigen::VectorXd::Constant(sys.n_dofs(), 1.0 / std::sqrt(static_cast<double>(sys.n_dofs())));

    if (options.kind == LinearSolverKind::Tensor) sys.tensor = factorize_tensor(fem, ratio);
    return sys;
}

Eigen::VectorXd assemble_rhs(const SpaceTimeMesh& mesh, const PrimalState& state, const DualState& duals,
                             const BoundaryData& data, double r1, double r2) {
    if (state.mesh_id != mesh.id || duals.mesh_id != mesh.id || data.mesh_id != mesh.id) {
        throw Error(ErrorKind::DimensionMismatch, "fields belong to a different mesh");
    }
    const int nv = mesh.n_vertices();
    const int nc = mesh.n_curve_nodes();
    const int nt = mesh.n_t;
    const int nb = (nt + 1) * nv;
    const double dt = mesh.dt();
    const double ratio = r1 / r2;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(nb + (nt + 1) * nc);

    // boundary densities, paired through the consistent mass matrices
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto& v = mesh.triangles[t];
        const double a = mesh.areas[t] / 12.0;
        const double s0 = data.rho0[v[0]] + data.rho0[v[1]] + data.rho0[v[2]];
        const double s1 = data.rho1[v[0]] + data.rho1[v[1]] + data.rho1[v[2]];
        for (int i = 0; i < 3; ++i) {
            b[v[i]] -= a * (s0 + data.rho0[v[i]]) / r2;
            b[nt * nv + v[i]] += a * (s1 + data.rho1[v[i]]) / r2;
        }
    }
    for (const CurveEdge& e : mesh.curve_edges) {
        const double l = e.length / 6.0;
        b[nb + e.c0] -= l * (2.0 * data.mu0[e.c0] + data.mu0[e.c1]) / r2;
        b[nb + e.c1] -= l * (data.mu0[e.c0] + 2.0 * data.mu0[e.c1]) / r2;
        b[nb + nt * nc + e.c0] += l * (2.0 * data.mu1[e.c0] + data.mu1[e.c1]) / r2;
        b[nb + nt * nc + e.c1] += l * (data.mu1[e.c0] + 2.0 * data.mu1[e.c1]) / r2;
    }

    for (int k = 0; k < nt; ++k) {
        for (int t = 0; t < mesh.n_triangles(); ++t) {
            const int p = mesh.bulk_prism(k, t);
            const double a = ratio * duals.rho_s[p] - state.rho[p] / r2;
            const Vec2 g(ratio * duals.Jx_s[p] - state.Jx[p] / r2, ratio * duals.Jy_s[p] - state.Jy[p] / r2);
            const auto& v = mesh.triangles[t];
            const auto grad = mesh.basis_gradients(t);
            const double area = mesh.areas[t];
            for (int i = 0; i < 3; ++i) {
                const double flux = 0.5 * dt * area * g.dot(grad[i]);
                b[k * nv + v[i]] += flux - a * area / 3.0;
                b[(k + 1) * nv + v[i]] += flux + a * area / 3.0;
            }
        }
        for (int e = 0; e < mesh.n_curve_edges(); ++e) {
            const CurveEdge& ce = mesh.curve_edges[e];
            const int p = mesh.curve_prism(k, e);
            const double beta = state.f[p] / r2 - duals.f_s[p];  // against phi on the curve
            const double a = duals.mu_s[p] - state.mu[p] / r2;
            const double g = duals.V_s[p] - state.V[p] / r2;
            const double w = 0.25 * dt * ce.length;
            for (int kk : {k, k + 1}) {
                b[kk * nv + ce.v0] += beta * w;
                b[kk * nv + ce.v1] += beta * w;
                b[nb + kk * nc + ce.c0] -= beta * w + 0.5 * dt * g;
                b[nb + kk * nc + ce.c1] += -beta * w + 0.5 * dt * g;
            }
            for (int c : {ce.c0, ce.c1}) {
                b[nb + k * nc + c] -= 0.5 * a * ce.length;
                b[nb + (k + 1) * nc + c] += 0.5 * a * ce.length;
            }
        }
    }
    return b;
}

Eigen::VectorXd stack(const Eigen::VectorXd& phi, const Eigen::VectorXd& phi1d) {
    Eigen::VectorXd x(phi.size() + phi1d.size());
    x << phi, phi1d;
    return x;
}

namespace {

Eigen::VectorXd solve_tensor(const SaddleSystem& sys, const Eigen::VectorXd& b) {
    const TensorFactorization& tf = *sys.tensor;
    const int nv = sys.n_vertices;
    const int nc = sys.n_curve_nodes;
    const int nk = sys.n_t + 1;
    const int nb = sys.n_bulk_dofs();
    Eigen::MatrixXd B(tf.n_space, nk);
    for (int k = 0; k < nk; ++k) {
        B.col(k).head(nv) = b.segment(k * nv, nv);
        if (nc > 0) B.col(k).tail(nc) = b.segment(nb + k * nc, nc);
    }
    Eigen::MatrixXd C = B * tf.S;
    for (int j = 0; j < nk; ++j) {
        if (j == 0) C(0, 0) = 0.0;
        C.col(j) = tf.modes[j]->solve(C.col(j));
    }
    const Eigen::MatrixXd Xs = C * tf.S.transpose();
    Eigen::VectorXd x(sys.n_dofs());
    for (int k = 0; k < nk; ++k) {
        x.segment(k * nv, nv) = Xs.col(k).head(nv);
        if (nc > 0) x.segment(nb + k * nc, nc) = Xs.col(k).tail(nc);
    }
    return x;
}

Eigen::VectorXd solve_cg(const SaddleSystem& sys, const Eigen::VectorXd& b, double target, int max_iters,
                         int& iterations) {
    const Eigen::VectorXd& kv = sys.kernel;
    const Eigen::VectorXd dinv = sys.matrix.diagonal().cwiseInverse();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
    Eigen::VectorXd r = b;
    Eigen::VectorXd z = dinv.cwiseProduct(r);
    z -= z.dot(kv) * kv;
    Eigen::VectorXd p = z;
    double rz = r.dot(z);
    iterations = 0;
    while (r.norm() > target) {
        if (iterations >= max_iters) {
            throw Error(ErrorKind::SolverStagnation, "conjugate gradients hit the iteration cap at residual " +
                                                         std::to_string(r.norm()));
        }
        const Eigen::VectorXd ap = sys.matrix * p;
        const double alpha = rz / p.dot(ap);
        x += alpha * p;
        r -= alpha * ap;
        r -= r.dot(kv) * kv;
        z = dinv.cwiseProduct(r);
        z -= z.dot(kv) * kv;
        const double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
        ++iterations;
    }
    return x;
}

}  // namespace

Potentials solve_potentials(const SaddleSystem& sys, const Eigen::VectorXd& rhs) {
    if (rhs.size() != sys.n_dofs()) throw Error(ErrorKind::DimensionMismatch, "rhs size does not match the system");
    const Eigen::VectorXd b = rhs - rhs.dot(sys.kernel) * sys.kernel;
    const double bnorm = b.norm();
    Potentials out;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(sys.n_dofs());
    // a right-hand side that is all kernel up to round-off has the zero solution
    if (bnorm > 1e-14 * rhs.norm()) {
        if (sys.options.kind == LinearSolverKind::Tensor && sys.tensor) {
            x = solve_tensor(sys, b);
            out.iterations = 1;
        } else {
            const int cap = sys.options.max_iters > 0 ? sys.options.max_iters : 10 * sys.n_dofs();
            x = solve_cg(sys, b, sys.options.tol * bnorm, cap, out.iterations);
        }
        x -= x.dot(sys.kernel) * sys.kernel;
        out.residual = (sys.matrix * x - b).norm() / bnorm;
        if (!x.allFinite()) throw Error(ErrorKind::SolverStagnation, "non-finite potentials");
    }
    out.phi = x.head(sys.n_bulk_dofs());
    out.phi1d = x.tail(sys.n_dofs() - sys.n_bulk_dofs());
    return out;
}

PrismDerivatives prism_derivatives(const SpaceTimeMesh& mesh, const Eigen::VectorXd& phi,
                                   const Eigen::VectorXd& phi1d) {
    const int nv = mesh.n_vertices();
    const int nc = mesh.n_curve_nodes();
    const double dt = mesh.dt();
    PrismDerivatives d;
    d.dt_phi.resize(mesh.n_bulk_prisms());
    d.gx_phi.resize(mesh.n_bulk_prisms());
    d.gy_phi.resize(mesh.n_bulk_prisms());
    d.dt_phi1d.resize(mesh.n_curve_prisms());
    d.ds_phi1d.resize(mesh.n_curve_prisms());
    d.jump.resize(mesh.n_curve_prisms());
    std::vector<std::array<Vec2, 3>> grads(mesh.n_triangles());
    for (int t = 0; t < mesh.n_triangles(); ++t) grads[t] = mesh.basis_gradients(t);
    for (int k = 0; k < mesh.n_t; ++k) {
        const double* p0 = phi.data() + k * nv;
        const double* p1 = p0 + nv;
        for (int t = 0; t < mesh.n_triangles(); ++t) {
            const auto& v = mesh.triangles[t];
            const int p = mesh.bulk_prism(k, t);
            double diff = 0.0;
            Vec2 g = Vec2::Zero();
            for (int i = 0; i < 3; ++i) {
                diff += p1[v[i]] - p0[v[i]];
                g += 0.5 * (p0[v[i]] + p1[v[i]]) * grads[t][i];
            }
            d.dt_phi[p] = diff / (3.0 * dt);
            d.gx_phi[p] = g.x();
            d.gy_phi[p] = g.y();
        }
        if (nc == 0) continue;
        const double* q0 = phi1d.data() + k * nc;
        const double* q1 = q0 + nc;
        for (int e = 0; e < mesh.n_curve_edges(); ++e) {
            const CurveEdge& ce = mesh.curve_edges[e];
            const int p = mesh.curve_prism(k, e);
            d.dt_phi1d[p] = (q1[ce.c0] + q1[ce.c1] - q0[ce.c0] - q0[ce.c1]) / (2.0 * dt);
            d.ds_phi1d[p] = (q0[ce.c1] + q1[ce.c1] - q0[ce.c0] - q1[ce.c0]) / (2.0 * ce.length);
            d.jump[p] = 0.25 * (q0[ce.c0] + q0[ce.c1] + q1[ce.c0] + q1[ce.c1] - p0[ce.v0] - p0[ce.v1] -
                                p1[ce.v0] - p1[ce.v1]);
        }
    }
    return d;
}

}  // namespace prefot
