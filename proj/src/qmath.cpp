#include "respca/qmath.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace respca::qmath {

Matrix identity(int n) { return Matrix::Identity(n, n); }

Matrix pauli_x() {
    Matrix m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}

Matrix pauli_y() {
    Matrix m(2, 2);
    m << 0, Complex(0, -1), Complex(0, 1), 0;
    return m;
}

Matrix pauli_z() {
    Matrix m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}

Matrix tensor(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

bool is_hermitian(const Matrix& m, double tol) {
    if (m.rows() != m.cols()) return false;
    return (m - m.adjoint()).norm() <= tol * std::max(1.0, m.norm());
}

namespace {

double offdiag_mass(const Matrix& a) {
    double s = 0.0;
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j)
            if (i != j) s += std::norm(a(i, j));
    return std::sqrt(s);
}

}  // namespace

HermitianEig hermitian_eig(const Matrix& h) {
    const int n = static_cast<int>(h.rows());
    if (h.cols() != n) throw std::invalid_argument("hermitian_eig: matrix not square");
    if (n > kMaxDim) throw std::invalid_argument("hermitian_eig: dimension exceeds 64");
    if (!is_hermitian(h, 1e-10))
        throw std::invalid_argument("hermitian_eig: input not Hermitian within 1e-10");

    Matrix a = (h + h.adjoint()) / 2.0;  // symmetrize rounding-level asymmetry
    Matrix v = Matrix::Identity(n, n);
    const double scale = a.norm();
    const double target = 1e-13 * std::max(scale, 1e-300);

    for (int sweep = 0; sweep < 50 && offdiag_mass(a) > target; ++sweep) {
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double g = std::abs(a(p, q));
                if (g <= 1e-300) continue;
                const Complex phase = a(p, q) / g;  // a_pq = g * e^{i phi}
                // Rotation angle from cot(2 theta) = (a_qq - a_pp)/(2g), with
                // |theta| <= pi/4 so diagonal entries never swap mid-sweep.
                const double tau = (a(q, q).real() - a(p, p).real()) / (2.0 * g);
                double t;
                if (tau >= 0)
                    t = 1.0 / (tau + std::sqrt(1.0 + tau * tau));
                else
                    t = -1.0 / (-tau + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                const Complex sp = s * phase;        // s * e^{i phi}
                const Complex sm = s / phase;        // s * e^{-i phi}

                // A <- J^dag A J, J = [[c, s e^{i phi}], [-s e^{-i phi}, c]]
                for (int k = 0; k < n; ++k) {
                    const Complex akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - sm * akq;
                    a(k, q) = sp * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const Complex apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - sp * aqk;
                    a(q, k) = sm * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const Complex vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - sm * vkq;
                    v(k, q) = sp * vkp + c * vkq;
                }
            }
        }
    }
    if (offdiag_mass(a) > 10 * target && scale > 0)
        throw std::runtime_error("hermitian_eig: Jacobi sweeps failed to converge");

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int i, int j) { return a(i, i).real() < a(j, j).real(); });

    HermitianEig out;
    out.eigenvalues.resize(n);
    out.eigenvectors.resize(n, n);
    for (int i = 0; i < n; ++i) {
        out.eigenvalues(i) = a(order[i], order[i]).real();
        out.eigenvectors.col(i) = v.col(order[i]);
    }
    return out;
}

Matrix unitary_of(const Matrix& h, double t) {
    const HermitianEig eig = hermitian_eig(h);
    const int n = static_cast<int>(h.rows());
    Matrix d = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
        d(i, i) = std::exp(Complex(0, -eig.eigenvalues(i) * t));
    return eig.eigenvectors * d * eig.eigenvectors.adjoint();
}

Matrix partial_trace(const Matrix& m, const std::vector<int>& dims,
                     const std::vector<int>& keep) {
    const int nsub = static_cast<int>(dims.size());
    long total = 1;
    for (int d : dims) {
        if (d < 1) throw std::invalid_argument("partial_trace: bad subsystem dimension");
        total *= d;
    }
    if (total != m.rows() || total != m.cols())
        throw std::invalid_argument("partial_trace: dims do not match matrix dimension");

    std::vector<bool> kept(nsub, false);
    for (int k : keep) {
        if (k < 0 || k >= nsub) throw std::invalid_argument("partial_trace: bad keep index");
        kept[k] = true;
    }
    std::vector<long> stride(nsub, 1);
    for (int i = nsub - 2; i >= 0; --i) stride[i] = stride[i + 1] * dims[i + 1];

    std::vector<int> keep_idx, trace_idx;
    for (int i = 0; i < nsub; ++i) (kept[i] ? keep_idx : trace_idx).push_back(i);

    long dk = 1, dt = 1;
    for (int i : keep_idx) dk *= dims[i];
    for (int i : trace_idx) dt *= dims[i];

    // flat offset contributed by a combined index over a subsystem subset
    auto offset = [&](const std::vector<int>& subs, long combined) {
        long off = 0;
        for (int s = static_cast<int>(subs.size()) - 1; s >= 0; --s) {
            const int sub = subs[s];
            off += (combined % dims[sub]) * stride[sub];
            combined /= dims[sub];
        }
        return off;
    };

    Matrix out = Matrix::Zero(dk, dk);
    for (long i = 0; i < dk; ++i) {
        const long oi = offset(keep_idx, i);
        for (long j = 0; j < dk; ++j) {
            const long oj = offset(keep_idx, j);
            Complex acc = 0;
            for (long t = 0; t < dt; ++t) {
                const long ot = offset(trace_idx, t);
                acc += m(oi + ot, oj + ot);
            }
            out(i, j) = acc;
        }
    }
    return out;
}

double pure_state_fidelity(const Matrix& rho, const Vector& psi) {
    if (psi.size() != rho.rows())
        throw std::invalid_argument("pure_state_fidelity: dimension mismatch");
    if (std::abs(psi.norm() - 1.0) > 1e-10)
        throw std::invalid_argument("pure_state_fidelity: psi not normalized");
    const Complex val = psi.adjoint() * rho * psi;
    return std::clamp(val.real(), 0.0, 1.0);
}

namespace {

// PSD square root via eigendecomposition, clamping rounding-level negatives.
Matrix psd_sqrt(const Matrix& m) {
    const HermitianEig eig = hermitian_eig(m);
    const int n = static_cast<int>(m.rows());
    Matrix d = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
        d(i, i) = std::sqrt(std::max(0.0, eig.eigenvalues(i)));
    return eig.eigenvectors * d * eig.eigenvectors.adjoint();
}

}  // namespace

double state_fidelity(const Matrix& rho, const Matrix& sigma) {
    if (rho.rows() != sigma.rows())
        throw std::invalid_argument("state_fidelity: dimension mismatch");
    const Matrix s = psd_sqrt(rho);
    const HermitianEig inner = hermitian_eig(s * sigma * s);
    double root_sum = 0.0;
    for (int i = 0; i < inner.eigenvalues.size(); ++i)
        root_sum += std::sqrt(std::max(0.0, inner.eigenvalues(i)));
    return std::min(1.0, root_sum * root_sum);
}

double op_distance(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("op_distance: dimension mismatch");
    const Matrix d = a - b;
    const HermitianEig eig = hermitian_eig(d.adjoint() * d);
    return std::sqrt(std::max(0.0, eig.eigenvalues(eig.eigenvalues.size() - 1)));
}

double trace_distance(const Matrix& a, const Matrix& b) {
    const HermitianEig eig = hermitian_eig(a - b);
    double s = 0.0;
    for (int i = 0; i < eig.eigenvalues.size(); ++i) s += std::abs(eig.eigenvalues(i));
    return 0.5 * s;
}

}  // namespace respca::qmath
