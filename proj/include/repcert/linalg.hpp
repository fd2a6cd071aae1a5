#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "repcert/error.hpp"

namespace repcert {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

/// Tolerance ladder shared by all modules.
namespace tol {
inline constexpr double exact = 1e-10;
inline constexpr double kind = 1e-8;
} // namespace tol

inline ComplexMatrix identity(Eigen::Index d) { return ComplexMatrix::Identity(d, d); }

inline void require_square(const ComplexMatrix& m, const char* what) {
    if (m.rows() != m.cols() || m.rows() == 0)
        throw ValidationError(std::string(what) + ": expected a non-empty square matrix, got " +
                              std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
}

inline void require_same_dim(const ComplexMatrix& a, const ComplexMatrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ValidationError(std::string(what) + ": dimension mismatch (" +
                              std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                              std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ")");
}

/// Normalized trace tr(M)/d.
inline Complex ntr(const ComplexMatrix& m) {
    require_square(m, "ntr");
    return m.trace() / static_cast<double>(m.rows());
}

// ---------------------------------------------------------------------------
// Norms
// ---------------------------------------------------------------------------

enum class NormKind { op, frobenius, normalized_frobenius, rho_seminorm };

inline double frobenius_norm(const ComplexMatrix& m) { return m.norm(); }

/// ||M||_F / sqrt(d), computed as sqrt(||M||_F^2 / d) so that -2I gives exactly 2.
inline double normalized_frobenius_norm(const ComplexMatrix& m) {
    require_square(m, "normalized_frobenius_norm");
    return std::sqrt(m.squaredNorm() / static_cast<double>(m.rows()));
}

/// Largest singular value. Large matrices go through the spectrum of M^* M,
/// whose absolute error scales with ||M||^2, so small norms stay accurate.
inline double op_norm(const ComplexMatrix& m) {
    if (m.size() == 0) return 0.0;
    if (std::max(m.rows(), m.cols()) <= 64) {
        Eigen::JacobiSVD<ComplexMatrix> svd(m);
        return svd.singularValues()(0);
    }
    const ComplexMatrix g = m.cols() <= m.rows() ? ComplexMatrix(m.adjoint() * m)
                                                 : ComplexMatrix(m * m.adjoint());
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(g, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

/// Minimum eigenvalue of the Hermitian part together with the anti-Hermitian
/// deviation; used to reject matrices that are not PSD.
inline void require_psd(const ComplexMatrix& rho, const char* what, double tolerance = tol::exact) {
    require_square(rho, what);
    const double skew = (rho - rho.adjoint()).norm();
    if (skew > tolerance * std::max(1.0, rho.norm()))
        throw ValidationError(std::string(what) + ": matrix is not Hermitian (deviation " +
                              std::to_string(skew) + ")");
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es((rho + rho.adjoint()) / 2.0,
                                                     Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    if (lo < -tolerance)
        throw ValidationError(std::string(what) + ": matrix is not positive semidefinite (eigenvalue " +
                              std::to_string(lo) + ")");
}

/// ||A||_rho = sqrt(Tr(A^* A rho)) = ||A rho^{1/2}||_F.
inline double rho_seminorm(const ComplexMatrix& a, const ComplexMatrix& rho) {
    require_square(a, "rho_seminorm");
    require_same_dim(a, rho, "rho_seminorm");
    require_psd(rho, "rho_seminorm");
    const double v = (a.adjoint() * a * rho).trace().real();
    return std::sqrt(std::max(0.0, v));
}

/// Dispatches on `kind`. `rho` is only consulted for rho_seminorm, where an
/// empty matrix means "absent".
inline double matrix_norm(const ComplexMatrix& m, NormKind kind, const ComplexMatrix& rho = {}) {
    switch (kind) {
    case NormKind::op: return op_norm(m);
    case NormKind::frobenius: return frobenius_norm(m);
    case NormKind::normalized_frobenius: return normalized_frobenius_norm(m);
    case NormKind::rho_seminorm:
        if (rho.size() == 0) throw ValidationError("rho_seminorm: rho is required");
        return rho_seminorm(m, rho);
    }
    throw ValidationError("matrix_norm: unknown norm kind");
}

inline double unitary_deviation(const ComplexMatrix& m) {
    require_square(m, "unitary_deviation");
    return normalized_frobenius_norm(m.adjoint() * m - identity(m.rows()));
}

inline double hermitian_deviation(const ComplexMatrix& m) {
    require_square(m, "hermitian_deviation");
    return normalized_frobenius_norm(m - m.adjoint());
}

inline double normal_deviation(const ComplexMatrix& m) {
    require_square(m, "normal_deviation");
    return normalized_frobenius_norm(m * m.adjoint() - m.adjoint() * m);
}

/// ||X^2 - 1||_f
inline double involution_deviation(const ComplexMatrix& m) {
    require_square(m, "involution_deviation");
    return normalized_frobenius_norm(m * m - identity(m.rows()));
}

// ---------------------------------------------------------------------------
// Decompositions
// ---------------------------------------------------------------------------

/// Unitary factor of a polar decomposition M = UP, taken as W V^* from a full
/// SVD M = W S V^*. Singular directions are paired in the SVD's index order, so
/// the zero matrix maps to the identity.
inline ComplexMatrix polar_unitary(const ComplexMatrix& m) {
    require_square(m, "polar_unitary");
    if (m.rows() <= 64) {
        Eigen::JacobiSVD<ComplexMatrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
        return svd.matrixU() * svd.matrixV().adjoint();
    }
    Eigen::BDCSVD<ComplexMatrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return svd.matrixU() * svd.matrixV().adjoint();
}

enum class SpectralKind { hermitian, unitary, normal };

/// Eigenvalues and a unitary matrix of eigenvectors (columns). For unitary
/// input `phases` holds each eigenvalue's argument as a fraction of a turn in
/// (-1/2, 1/2]; it is empty otherwise.
struct SpectralDecomposition {
    ComplexVector eigenvalues;
    ComplexMatrix eigenvectors;
    std::vector<double> phases;

    ComplexMatrix reconstruct() const {
        return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.adjoint();
    }
};

/// arg(z) / 2pi, canonicalized to (-1/2, 1/2].
inline double phase_turns(Complex z) {
    double t = std::arg(z) / (2.0 * std::numbers::pi);
    if (t <= -0.5) t += 1.0;
    if (t > 0.5) t -= 1.0;
    return t;
}

inline SpectralDecomposition eig_decompose(const ComplexMatrix& m, SpectralKind kind) {
    require_square(m, "eig_decompose");
    SpectralDecomposition out;
    switch (kind) {
    case SpectralKind::hermitian: {
        const double dev = hermitian_deviation(m);
        if (dev > tol::kind)
            throw ValidationError("eig_decompose: matrix is not Hermitian (deviation " +
                                  std::to_string(dev) + ")");
        Eigen::SelfAdjointEigenSolver<ComplexMatrix> es((m + m.adjoint()) / 2.0);
        out.eigenvalues = es.eigenvalues().cast<Complex>();
        out.eigenvectors = es.eigenvectors();
        return out;
    }
    case SpectralKind::unitary:
    case SpectralKind::normal: {
        const double dev =
            kind == SpectralKind::unitary ? unitary_deviation(m) : normal_deviation(m);
        if (dev > tol::kind)
            throw ValidationError(std::string("eig_decompose: matrix is not ") +
                                  (kind == SpectralKind::unitary ? "unitary" : "normal") +
                                  " (deviation " + std::to_string(dev) + ")");
        // For a normal matrix the Schur form is diagonal and Q is a unitary
        // eigenbasis, even for repeated eigenvalues.
        Eigen::ComplexSchur<ComplexMatrix> schur(m);
        out.eigenvalues = schur.matrixT().diagonal();
        out.eigenvectors = schur.matrixU();
        if (kind == SpectralKind::unitary) {
            out.phases.reserve(static_cast<std::size_t>(out.eigenvalues.size()));
            for (Eigen::Index i = 0; i < out.eigenvalues.size(); ++i)
                out.phases.push_back(phase_turns(out.eigenvalues(i)));
        }
        return out;
    }
    }
    throw ValidationError("eig_decompose: unknown kind");
}

/// f(H) for Hermitian H, applying f to the (real) eigenvalues.
template <class F>
ComplexMatrix hermitian_function(const ComplexMatrix& h, F&& f) {
    require_square(h, "hermitian_function");
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es((h + h.adjoint()) / 2.0);
    Eigen::VectorXcd mapped(h.rows());
    for (Eigen::Index i = 0; i < h.rows(); ++i) mapped(i) = Complex(f(es.eigenvalues()(i)), 0.0);
    return es.eigenvectors() * mapped.asDiagonal() * es.eigenvectors().adjoint();
}

/// Principal square root of a PSD matrix; tiny negative eigenvalues clamp to 0.
inline ComplexMatrix psd_sqrt(const ComplexMatrix& rho) {
    return hermitian_function(rho, [](double x) { return std::sqrt(std::max(0.0, x)); });
}

/// chi_{>=threshold}(lambda): projection onto eigenvectors of the PSD matrix
/// with eigenvalue >= threshold. Eigenvalues within 1e-12 (relative) of the
/// threshold count as reaching it.
inline ComplexMatrix step_projection(const ComplexMatrix& lambda, double threshold) {
    require_square(lambda, "step_projection");
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es((lambda + lambda.adjoint()) / 2.0);
    const double cut = threshold - 1e-12 * std::max(1.0, std::abs(threshold));
    const Eigen::Index d = lambda.rows();
    ComplexMatrix p = ComplexMatrix::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        if (es.eigenvalues()(i) >= cut) {
            const auto v = es.eigenvectors().col(i);
            p.noalias() += v * v.adjoint();
        }
    }
    return p;
}

// ---------------------------------------------------------------------------
// Composition and sampling
// ---------------------------------------------------------------------------

enum class ComposeMode { tensor, direct_sum };

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
    ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

inline ComplexMatrix direct_sum(const ComplexMatrix& a, const ComplexMatrix& b) {
    ComplexMatrix out = ComplexMatrix::Zero(a.rows() + b.rows(), a.cols() + b.cols());
    out.topLeftCorner(a.rows(), a.cols()) = a;
    out.bottomRightCorner(b.rows(), b.cols()) = b;
    return out;
}

inline ComplexMatrix compose(const ComplexMatrix& a, const ComplexMatrix& b, ComposeMode mode) {
    return mode == ComposeMode::tensor ? kron(a, b) : direct_sum(a, b);
}

/// Complex Ginibre matrix with E|z|^2 = 1 per entry.
inline ComplexMatrix ginibre(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, std::sqrt(0.5));
    ComplexMatrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = Complex(g(rng), g(rng));
    return m;
}

/// Haar-distributed unitary from the QR decomposition of a Ginibre matrix,
/// with the phases of R's diagonal pushed into Q.
inline ComplexMatrix haar_unitary(Eigen::Index d, std::mt19937_64& rng) {
    if (d < 1) throw ValidationError("haar_unitary: dimension must be >= 1");
    const ComplexMatrix z = ginibre(d, d, rng);
    Eigen::HouseholderQR<ComplexMatrix> qr(z);
    ComplexMatrix q = qr.householderQ();
    const ComplexMatrix& r = qr.matrixQR();
    for (Eigen::Index i = 0; i < d; ++i) {
        const double mag = std::abs(r(i, i));
        const Complex ph = mag > 0.0 ? r(i, i) / mag : Complex(1.0, 0.0);
        q.col(i) *= ph;
    }
    return q;
}

inline ComplexMatrix haar_unitary(Eigen::Index d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return haar_unitary(d, rng);
}

// Pauli matrices, used by fixtures and tests.
namespace pauli {
inline ComplexMatrix i2() { return identity(2); }
inline ComplexMatrix x() {
    ComplexMatrix m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}
inline ComplexMatrix y() {
    ComplexMatrix m(2, 2);
    m << 0, Complex(0, -1), Complex(0, 1), 0;
    return m;
}
inline ComplexMatrix z() {
    ComplexMatrix m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}
} // namespace pauli

} // namespace repcert
