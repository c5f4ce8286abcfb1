#include <doctest.h>

#include "respca/qmath.hpp"

#include <cmath>
#include <random>

using namespace respca;
using qmath::Complex;
using qmath::Matrix;
using qmath::Vector;

namespace {

// ---- independent oracles, written before the tests that use them ----

// Matrix exponential by scaling and squaring with a plain Taylor series.
// Deliberately shares no code with unitary_of.
Matrix taylor_expm(const Matrix& a) {
    int scale = 0;
    double norm = a.cwiseAbs().sum();
    while (norm > 0.5) {
        norm /= 2.0;
        ++scale;
    }
    const Matrix b = a / std::pow(2.0, scale);
    Matrix term = Matrix::Identity(a.rows(), a.cols());
    Matrix sum = term;
    for (int k = 1; k <= 40; ++k) {
        term = term * b / static_cast<double>(k);
        sum += term;
    }
    for (int k = 0; k < scale; ++k) sum = sum * sum;
    return sum;
}

// Spectral norm by power iteration on m^dagger m.
double power_iteration_norm(const Matrix& m) {
    const Matrix g = m.adjoint() * m;
    Vector v = Vector::Ones(g.rows());
    v(0) = Complex(1.0, 0.5);  // break symmetry deterministically
    v.normalize();
    double lambda = 0.0;
    for (int it = 0; it < 2000; ++it) {
        Vector w = g * v;
        const double nw = w.norm();
        if (nw == 0.0) return 0.0;
        v = w / nw;
        lambda = nw;
    }
    return std::sqrt(lambda);
}

// Partial trace by explicit index bookkeeping over every matrix entry.
Matrix naive_partial_trace(const Matrix& m, const std::vector<int>& dims,
                           const std::vector<int>& keep) {
    const int ns = static_cast<int>(dims.size());
    std::vector<bool> kept(ns, false);
    int out_dim = 1;
    for (int k : keep) {
        kept[k] = true;
        out_dim *= dims[k];
    }
    auto digits = [&](int idx) {
        std::vector<int> d(ns);
        for (int s = ns - 1; s >= 0; --s) {
            d[s] = idx % dims[s];
            idx /= dims[s];
        }
        return d;
    };
    auto encode_kept = [&](const std::vector<int>& d) {
        int idx = 0;
        for (int s = 0; s < ns; ++s)
            if (kept[s]) idx = idx * dims[s] + d[s];
        return idx;
    };
    Matrix out = Matrix::Zero(out_dim, out_dim);
    for (int i = 0; i < m.rows(); ++i) {
        const auto di = digits(i);
        for (int j = 0; j < m.cols(); ++j) {
            const auto dj = digits(j);
            bool traced_match = true;
            for (int s = 0; s < ns; ++s)
                if (!kept[s] && di[s] != dj[s]) traced_match = false;
            if (traced_match) out(encode_kept(di), encode_kept(dj)) += m(i, j);
        }
    }
    return out;
}

Matrix random_hermitian(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Matrix a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = Complex(g(rng), g(rng));
    return (a + a.adjoint()) / 2.0;
}

Matrix random_density(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Matrix a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = Complex(g(rng), g(rng));
    Matrix rho = a * a.adjoint();
    return rho / rho.trace().real();
}

// The standard 4x4 test state 0.15 sz(1) + 0.09 sx(1) - 0.03 sz(2) + I/4 is a
// sum of two commuting single-qubit terms, so its spectrum is available in
// closed form: 0.25 + s1 sqrt(0.15^2 + 0.09^2) + s2 * 0.03, s1, s2 = +-1.
std::vector<double> shifted_pauli_spectrum() {
    const double r = std::sqrt(0.15 * 0.15 + 0.09 * 0.09);
    std::vector<double> e = {0.25 - r - 0.03, 0.25 - r + 0.03, 0.25 + r - 0.03,
                             0.25 + r + 0.03};
    return e;
}

Matrix shifted_pauli_matrix() {
    const Matrix i2 = qmath::identity(2);
    return 0.15 * qmath::tensor(qmath::pauli_z(), i2) +
           0.09 * qmath::tensor(qmath::pauli_x(), i2) -
           0.03 * qmath::tensor(i2, qmath::pauli_z()) +
           0.25 * qmath::tensor(i2, i2);
}

}  // namespace

TEST_SUITE("qmath") {

TEST_CASE("pauli matrices satisfy the algebra") {
    const Matrix x = qmath::pauli_x(), y = qmath::pauli_y(), z = qmath::pauli_z();
    const Matrix i2 = qmath::identity(2);
    CHECK((x * x - i2).norm() == doctest::Approx(0.0));
    CHECK((y * y - i2).norm() == doctest::Approx(0.0));
    CHECK((z * z - i2).norm() == doctest::Approx(0.0));
    CHECK((x * y - Complex(0, 1) * z).norm() == doctest::Approx(0.0));
    CHECK((x * y + y * x).norm() == doctest::Approx(0.0));
    CHECK(x.trace() == Complex(0, 0));
}

TEST_CASE("tensor product uses first-factor-major ordering") {
    Matrix d(2, 2);
    d << 1, 0, 0, 2;
    const Matrix t = qmath::tensor(d, qmath::identity(2));
    CHECK(t.rows() == 4);
    CHECK(t(0, 0).real() == 1.0);
    CHECK(t(1, 1).real() == 1.0);
    CHECK(t(2, 2).real() == 2.0);
    CHECK(t(3, 3).real() == 2.0);

    std::mt19937_64 rng(11);
    const Matrix a = random_hermitian(2, rng), b = random_hermitian(3, rng);
    const Matrix c = random_hermitian(2, rng), e = random_hermitian(3, rng);
    // mixed-product identity
    const Matrix lhs = qmath::tensor(a, b) * qmath::tensor(c, e);
    const Matrix rhs = qmath::tensor(a * c, b * e);
    CHECK((lhs - rhs).norm() < 1e-12);
}

TEST_CASE("jacobi matches the closed-form spectrum of the shifted-pauli state") {
    const auto eig = qmath::hermitian_eig(shifted_pauli_matrix());
    const auto expected = shifted_pauli_spectrum();
    REQUIRE(eig.eigenvalues.size() == 4);
    for (int i = 0; i < 4; ++i)
        CHECK(eig.eigenvalues(i) == doctest::Approx(expected[i]).epsilon(1e-12));
}

TEST_CASE("jacobi eigendecomposition reconstructs random hermitian matrices") {
    std::mt19937_64 rng(42);
    for (int n : {2, 3, 5, 8, 16}) {
        const Matrix a = random_hermitian(n, rng);
        const auto eig = qmath::hermitian_eig(a);
        const Matrix v = eig.eigenvectors;
        CHECK((v.adjoint() * v - qmath::identity(n)).norm() < 1e-12);
        Matrix recon = Matrix::Zero(n, n);
        for (int i = 0; i < n; ++i)
            recon += eig.eigenvalues(i) * (v.col(i) * v.col(i).adjoint());
        CHECK((recon - a).norm() < 1e-10 * std::max(1.0, a.norm()));
        for (int i = 0; i + 1 < n; ++i)
            CHECK(eig.eigenvalues(i) <= eig.eigenvalues(i + 1));
        // trace and Frobenius invariants tie the spectrum to the input
        CHECK(eig.eigenvalues.sum() ==
              doctest::Approx(a.trace().real()).epsilon(1e-11));
        CHECK(eig.eigenvalues.squaredNorm() ==
              doctest::Approx(a.squaredNorm()).epsilon(1e-11));
    }
}

TEST_CASE("jacobi rejects non-hermitian input") {
    Matrix m(2, 2);
    m << 1, 2, 3, 4;
    CHECK_THROWS(qmath::hermitian_eig(m));
}

TEST_CASE("unitary_of agrees with a taylor-series exponential") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        const Matrix h = random_hermitian(4, rng);
        const double t = 0.3 + 0.2 * trial;
        const Matrix u = qmath::unitary_of(h, t);
        const Matrix ref = taylor_expm(Complex(0, -1) * h * t);
        CHECK((u - ref).norm() < 1e-12);
        CHECK((u.adjoint() * u - qmath::identity(4)).norm() < 1e-12);
    }
    const Matrix h = random_hermitian(3, rng);
    CHECK((qmath::unitary_of(h, 0.0) - qmath::identity(3)).norm() < 1e-14);
}

TEST_CASE("partial trace matches the index-bookkeeping oracle") {
    std::mt19937_64 rng(99);
    const std::vector<int> dims = {2, 3, 2};
    const Matrix m = random_hermitian(12, rng);
    for (const std::vector<int>& keep :
         {std::vector<int>{0}, {1}, {2}, {0, 1}, {0, 2}, {1, 2}}) {
        const Matrix got = qmath::partial_trace(m, dims, keep);
        const Matrix want = naive_partial_trace(m, dims, keep);
        CHECK((got - want).norm() < 1e-12);
        CHECK(std::abs((got.trace() - m.trace()).real()) < 1e-12);
    }
}

TEST_CASE("partial trace of a product state factorizes") {
    std::mt19937_64 rng(5);
    const Matrix a = random_density(2, rng), b = random_density(4, rng);
    const Matrix ab = qmath::tensor(a, b);
    CHECK((qmath::partial_trace(ab, {2, 4}, {0}) - a).norm() < 1e-12);
    CHECK((qmath::partial_trace(ab, {2, 4}, {1}) - b).norm() < 1e-12);
}

TEST_CASE("pure state fidelity is the overlap with the state") {
    Vector psi(2), phi(2);
    psi << 1, 0;
    phi << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
    const Matrix rho = phi * phi.adjoint();
    CHECK(qmath::pure_state_fidelity(rho, psi) == doctest::Approx(0.5).epsilon(1e-12));
    Vector bad(2);
    bad << 2, 0;
    CHECK_THROWS(qmath::pure_state_fidelity(rho, bad));
}

TEST_CASE("state fidelity reduces to known special cases") {
    std::mt19937_64 rng(3);
    const Matrix rho = random_density(4, rng);
    CHECK(qmath::state_fidelity(rho, rho) == doctest::Approx(1.0).epsilon(1e-10));

    // pure-pure: |<psi|phi>|^2
    Vector psi(2), phi(2);
    psi << 1, 0;
    phi << std::cos(0.3), std::sin(0.3);
    const double f = qmath::state_fidelity(psi * psi.adjoint(), phi * phi.adjoint());
    CHECK(f == doctest::Approx(std::cos(0.3) * std::cos(0.3)).epsilon(1e-10));

    // commuting diagonal states: (sum sqrt(p q))^2
    Matrix p = Matrix::Zero(2, 2), q = Matrix::Zero(2, 2);
    p(0, 0) = 0.7;
    p(1, 1) = 0.3;
    q(0, 0) = 0.2;
    q(1, 1) = 0.8;
    const double want = std::pow(std::sqrt(0.7 * 0.2) + std::sqrt(0.3 * 0.8), 2);
    CHECK(qmath::state_fidelity(p, q) == doctest::Approx(want).epsilon(1e-10));
    CHECK(qmath::state_fidelity(p, q) ==
          doctest::Approx(qmath::state_fidelity(q, p)).epsilon(1e-10));
}

TEST_CASE("operator distance matches power iteration") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 5; ++trial) {
        const Matrix a = random_hermitian(5, rng), b = random_hermitian(5, rng);
        const double got = qmath::op_distance(a, b);
        const double want = power_iteration_norm(a - b);
        CHECK(got == doctest::Approx(want).epsilon(1e-8));
    }
    const Matrix a = random_hermitian(4, rng);
    CHECK(qmath::op_distance(a, a) < 1e-13);
}

TEST_CASE("trace distance of diagonal states is half the l1 difference") {
    Matrix p = Matrix::Zero(3, 3), q = Matrix::Zero(3, 3);
    p(0, 0) = 0.5;
    p(1, 1) = 0.3;
    p(2, 2) = 0.2;
    q(0, 0) = 0.1;
    q(1, 1) = 0.6;
    q(2, 2) = 0.3;
    const double want = 0.5 * (0.4 + 0.3 + 0.1);
    CHECK(qmath::trace_distance(p, q) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("is_hermitian tolerates roundoff but rejects structure") {
    std::mt19937_64 rng(23);
    Matrix a = random_hermitian(3, rng);
    CHECK(qmath::is_hermitian(a));
    a(0, 1) += Complex(0, 1e-6);
    CHECK_FALSE(qmath::is_hermitian(a, 1e-10));
    CHECK(qmath::is_hermitian(a, 1e-3));
}

}  // TEST_SUITE
