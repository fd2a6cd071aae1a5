#pragma once

#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "repcert/linalg.hpp"
#include "repcert/presentations.hpp"

namespace repcert {

/// Witness of one rounding inequality: output_distance <= bound_factor * input_deviation.
struct RoundingCertificate {
    double input_deviation = 0.0;
    double output_distance = 0.0;
    double bound_factor = 1.0;

    bool holds(double slack = 1e-9) const {
        return output_distance <= bound_factor * input_deviation + slack;
    }
};

struct RoundingResult {
    ComplexMatrix z;
    RoundingCertificate cert;
};

/// Orthonormal basis in which a family of (nearly) commuting involutions is
/// simultaneously diagonal, with the columns grouped by joint sign pattern.
struct JointBlocks {
    ComplexMatrix basis;
    std::vector<Eigen::Index> sizes;
};

inline JointBlocks joint_blocks(std::span<const ComplexMatrix> involutions, Eigen::Index dim) {
    JointBlocks out;
    if (involutions.empty()) {
        out.basis = identity(dim);
        out.sizes = {dim};
        return out;
    }
    // Eigenvalues of sum_k 2^k X_k are sum_k s_k 2^k with s_k = +-1, which
    // identifies the sign pattern uniquely.
    ComplexMatrix h = ComplexMatrix::Zero(dim, dim);
    double weight = 1.0;
    for (const auto& x : involutions) {
        h += weight * (x + x.adjoint()) / 2.0;
        weight *= 2.0;
    }
    const double offset = weight - 1.0;
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h);
    std::vector<std::pair<long long, Eigen::Index>> keyed;
    for (Eigen::Index i = 0; i < dim; ++i) {
        const long long code = std::llround((es.eigenvalues()(i) + offset) / 2.0);
        keyed.emplace_back(code, i);
    }
    std::stable_sort(keyed.begin(), keyed.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    out.basis.resize(dim, dim);
    for (Eigen::Index c = 0; c < dim; ++c) {
        out.basis.col(c) = es.eigenvectors().col(keyed[static_cast<std::size_t>(c)].second);
        if (c == 0 || keyed[static_cast<std::size_t>(c)].first !=
                          keyed[static_cast<std::size_t>(c - 1)].first)
            out.sizes.push_back(0);
        ++out.sizes.back();
    }
    return out;
}

/// Applies `f` to each diagonal block of B^* M B and reassembles; the
/// off-diagonal blocks are dropped.
template <class F>
ComplexMatrix map_blocks(const ComplexMatrix& m, const JointBlocks& blocks, F&& f) {
    const ComplexMatrix inner = blocks.basis.adjoint() * m * blocks.basis;
    ComplexMatrix out = ComplexMatrix::Zero(m.rows(), m.cols());
    Eigen::Index start = 0;
    for (const Eigen::Index size : blocks.sizes) {
        out.block(start, start, size, size) = f(ComplexMatrix(inner.block(start, start, size, size)));
        start += size;
    }
    return blocks.basis * out * blocks.basis.adjoint();
}

/// Unitary Z commuting with the involution X and close to Y:
/// Z is the polar part of (Y + XYX)/2, taken block-wise in X's eigenspaces
/// so that commutation is exact even when (Y + XYX)/2 is singular.
inline RoundingResult commute_round(const ComplexMatrix& y, const ComplexMatrix& x) {
    require_square(y, "commute_round");
    require_same_dim(y, x, "commute_round");
    const double inv = involution_deviation(x);
    if (inv > tol::kind || unitary_deviation(x) > tol::kind)
        throw ValidationError("commute_round: X is not a unitary involution (deviation " +
                              std::to_string(inv) + ")");
    const ComplexMatrix z0 = 0.5 * (y + x * y * x);
    const ComplexMatrix xs[] = {x};
    const JointBlocks blocks = joint_blocks(xs, y.rows());
    RoundingResult out;
    out.z = map_blocks(z0, blocks, [](const ComplexMatrix& b) { return polar_unitary(b); });
    out.cert.input_deviation = normalized_frobenius_norm(x * y - y * x);
    out.cert.output_distance = normalized_frobenius_norm(y - out.z);
    out.cert.bound_factor = 1.0;
    return out;
}

/// commute_round against X_1, ..., X_k in turn. Each step averages with the
/// next involution and re-unitarizes inside the joint eigenspaces of all
/// involutions seen so far, so the result commutes with every X_i.
inline ComplexMatrix commute_round(const ComplexMatrix& y, std::span<const ComplexMatrix> xs) {
    ComplexMatrix z = y;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const auto& x = xs[k];
        if (involution_deviation(x) > tol::kind)
            throw ValidationError("commute_round: X is not an involution");
        const ComplexMatrix z0 = 0.5 * (z + x * z * x);
        const JointBlocks blocks = joint_blocks(xs.first(k + 1), y.rows());
        z = map_blocks(z0, blocks, [](const ComplexMatrix& b) { return polar_unitary(b); });
    }
    return z;
}

/// Self-adjoint Z with Z^2 = 1 obtained by snapping each eigenvalue of the
/// normal matrix X to +1 (real part >= 0) or -1.
inline RoundingResult involution_round(const ComplexMatrix& x) {
    require_square(x, "involution_round");
    const double dev = normal_deviation(x);
    if (dev > tol::kind)
        throw ValidationError("involution_round: matrix is not normal (deviation " +
                              std::to_string(dev) + ")");
    Eigen::ComplexSchur<ComplexMatrix> schur(x);
    const Eigen::Index d = x.rows();
    ComplexVector signs(d);
    for (Eigen::Index i = 0; i < d; ++i)
        signs(i) = schur.matrixT()(i, i).real() >= 0.0 ? 1.0 : -1.0;
    const ComplexMatrix& q = schur.matrixU();
    ComplexMatrix z = q * signs.asDiagonal() * q.adjoint();
    z = 0.5 * (z + z.adjoint());
    RoundingResult out;
    out.cert.input_deviation = involution_deviation(x);
    out.cert.output_distance = normalized_frobenius_norm(x - z);
    out.cert.bound_factor = 2.0;
    out.z = std::move(z);
    return out;
}

/// involution_round applied inside each joint block, so the result commutes
/// exactly with the involutions that define the blocks.
inline ComplexMatrix involution_round_in_blocks(const ComplexMatrix& x, const JointBlocks& blocks) {
    return map_blocks(x, blocks, [](const ComplexMatrix& b) { return involution_round(b).z; });
}

// ---------------------------------------------------------------------------
// Compression onto the -1 eigenspace of a central involution
// ---------------------------------------------------------------------------

struct CompressionResult {
    Representation rep;
    double input_defect = 0.0;
    double output_defect = 0.0;
    /// output_defect * delta / input_defect; 0 when the input is exact.
    double measured_constant = 0.0;
};

/// Rounds phi(w) to an involution, rounds every other generator to commute
/// with it, restricts to the -1 eigenspace and re-unitarizes. `w` must be a
/// single generator (the central involution's representative in S).
inline CompressionResult compress_central_involution(const Representation& rep, const Word& w,
                                                     double delta) {
    if (w.letters().size() != 1 || std::abs(w.letters().front().exponent) != 1)
        throw ValidationError("compress_central_involution: w must be a single generator");
    const std::string& wg = w.letters().front().generator;
    const ComplexMatrix image_w = evaluate_word(rep, w);
    const Eigen::Index d = rep.dim();
    const double sep = normalized_frobenius_norm(image_w - identity(d));
    if (sep < delta)
        throw ValidationError("compress_central_involution: ||phi(w) - 1||_f = " +
                              std::to_string(sep) + " is below delta");

    const ComplexMatrix z = involution_round(image_w).z;
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(z);
    std::vector<Eigen::Index> minus;
    for (Eigen::Index i = 0; i < d; ++i)
        if (es.eigenvalues()(i) < 0.0) minus.push_back(i);
    if (minus.empty())
        throw ValidationError("compress_central_involution: the -1 eigenspace is empty");
    const auto k = static_cast<Eigen::Index>(minus.size());
    ComplexMatrix basis(d, k);
    if (k == d) {
        basis = identity(d);
    } else {
        for (Eigen::Index c = 0; c < k; ++c)
            basis.col(c) = es.eigenvectors().col(minus[static_cast<std::size_t>(c)]);
    }

    std::map<std::string, ComplexMatrix> images;
    for (const auto& [g, m] : rep.images()) {
        if (g == wg) {
            images.emplace(g, -identity(k));
            continue;
        }
        const ComplexMatrix commuting = commute_round(m, z).z;
        images.emplace(g, polar_unitary(basis.adjoint() * commuting * basis));
    }
    CompressionResult out{Representation(rep.presentation(), k, std::move(images))};
    out.input_defect = rep_defect(rep).max_defect;
    out.output_defect = rep_defect(out.rep).max_defect;
    out.measured_constant =
        out.input_defect > 0.0 ? out.output_defect * delta / out.input_defect : 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// Separation amplification by tensor powers
// ---------------------------------------------------------------------------

struct AmplifyResult {
    Representation rep;
    int power = 1;
    double input_defect = 0.0;
    double output_defect = 0.0;
    std::vector<double> separations;
};

/// Largest dimension delta_amplify will materialize.
inline constexpr Eigen::Index max_amplified_dim = 1024;

/// psi = phi (+) conj(phi) (+) 1^{2d}, then the smallest tensor power psi^{(x)n}
/// whose separation reaches delta_target on every word of `words`.
/// ||psi^{(x)n}(w) - 1||_f^2 = 2 - 2 ntr(psi(w))^n, so sqrt(2) is the supremum.
inline AmplifyResult delta_amplify(const Representation& rep, const std::vector<Word>& words,
                                   double delta_target) {
    if (!(delta_target > 0.0 && delta_target < 2.0))
        throw ValidationError("delta_amplify: delta_target must lie in (0, 2)");
    if (delta_target >= std::sqrt(2.0))
        throw ValidationError("delta_amplify: delta_target is unreachable; the achievable "
                              "supremum is sqrt(2) = 1.41421356237");
    const Representation psi =
        direct_sum(direct_sum(rep, conjugate(rep)),
                   trivial_representation(rep.presentation(), 2 * rep.dim()));

    double worst = 0.0; // largest ntr(psi(w)), the hardest word to separate
    for (const auto& w : words) worst = std::max(worst, ntr(evaluate_word(psi, w)).real());
    if (worst >= 1.0 - 1e-15)
        throw ValidationError(
            "delta_amplify: a word has zero separation; the achievable supremum is 0");

    const double goal = delta_target * delta_target;
    int n = 1;
    while (2.0 - 2.0 * std::pow(worst, n) < goal) ++n;

    Eigen::Index dim = 1;
    for (int k = 0; k < n; ++k) {
        dim *= psi.dim();
        if (dim > max_amplified_dim)
            throw ValidationError("delta_amplify: output dimension exceeds " +
                                  std::to_string(max_amplified_dim) + " (power " +
                                  std::to_string(n) + ")");
    }
    AmplifyResult out{tensor_power(psi, n), n};
    out.input_defect = rep_defect(rep).max_defect;
    const DefectReport report = rep_defect(out.rep, words);
    out.output_defect = report.max_defect;
    for (const auto& [w, v] : report.separations) out.separations.push_back(v);
    return out;
}

} // namespace repcert
