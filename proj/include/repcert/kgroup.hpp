#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "repcert/linalg.hpp"
#include "repcert/parallel.hpp"
#include "repcert/presentations.hpp"
#include "repcert/stability.hpp"

namespace repcert::kgroup {

/// K = < a, b, c, x, y : x y x^-1 = y^2, x c x^-1 = c, y a y^-1 = b,
///                        y b y^-1 = a, c = ab, a^2 = b^2 = c^2 = e >
inline constexpr const char* k_presentation_text =
    "generators: a b c x y\n"
    "relators: x y x^-1 y^-2; x c x^-1 c^-1; y a y^-1 b^-1; y b y^-1 a^-1; c b^-1 a^-1; "
    "a^2; b^2; c^2\n";

/// K with the pairwise commutators of a, b, c added as explicit relators.
inline constexpr const char* k_comm_presentation_text =
    "generators: a b c x y\n"
    "relators: x y x^-1 y^-2; x c x^-1 c^-1; y a y^-1 b^-1; y b y^-1 a^-1; c b^-1 a^-1; "
    "a^2; b^2; c^2; a b a^-1 b^-1; a c a^-1 c^-1; b c b^-1 c^-1\n";

inline Presentation k_presentation() { return parse_presentation(k_presentation_text); }
inline Presentation k_comm_presentation() { return parse_presentation(k_comm_presentation_text); }

/// The only relator of K that the explicit construction does not satisfy exactly.
inline Word conjugation_relator() {
    return Word({{"x", 1}, {"y", 1}, {"x", -1}, {"y", -2}});
}

inline constexpr int min_level = 2;
inline constexpr int max_level = 12;

struct KRep {
    int level = 0;
    Representation rep;
};

/// Eigenphase (in turns) attached to index j = 1..d/2 at level l: j 2^{-(l-1)}.
inline double construction_phase(int level, int j) { return std::ldexp(double(j), -(level - 1)); }

/// Explicit 2^l-dimensional representation with phi(c) = -1 in which only
/// x y x^-1 y^-2 is violated; X maps each eigenvector of Y to an eigenvector
/// of Y^2 whose eigenphase differs by at most 2^-l turns.
inline KRep build_k_rep(int level) {
    if (level < min_level || level > max_level)
        throw ValidationError("build_k_rep: level must lie in [" + std::to_string(min_level) +
                              ", " + std::to_string(max_level) + "]");
    const Eigen::Index d = Eigen::Index(1) << level;
    const Eigen::Index h = d / 2;
    const Eigen::Index q = d / 4;

    ComplexMatrix a = ComplexMatrix::Zero(d, d);
    a.diagonal().head(h).setOnes();
    a.diagonal().tail(h).setConstant(-1.0);
    const ComplexMatrix b = -a;
    const ComplexMatrix c = -identity(d);

    // Y = sum_j f_j f_{h+j}^* + e^{2 pi i theta_j} f_{h+j} f_j^*   (1-based j)
    ComplexMatrix y = ComplexMatrix::Zero(d, d);
    ComplexMatrix x = ComplexMatrix::Zero(d, d);
    const double s = 1.0 / std::sqrt(2.0);
    for (Eigen::Index j = 1; j <= h; ++j) {
        const double theta = construction_phase(level, static_cast<int>(j));
        y(j - 1, h + j - 1) = 1.0;
        y(h + j - 1, j - 1) = std::polar(1.0, 2.0 * std::numbers::pi * theta);

        // u_j = (f_j + e^{i pi theta_j} f_{h+j}) / sqrt 2, v_j likewise with a minus sign.
        ComplexVector u = ComplexVector::Zero(d);
        ComplexVector v = ComplexVector::Zero(d);
        const Complex half = std::polar(1.0, std::numbers::pi * theta);
        u(j - 1) = s;
        u(h + j - 1) = s * half;
        v(j - 1) = s;
        v(h + j - 1) = -s * half;

        Eigen::Index tu = 0, tv = 0; // 1-based targets
        if (j % 2 == 0) {
            tu = j / 2;
            tv = q + j / 2;
        } else {
            tu = h + (j + 1) / 2;
            tv = 3 * q + (j + 1) / 2;
        }
        x.row(tu - 1) += u.adjoint();
        x.row(tv - 1) += v.adjoint();
    }

    std::map<std::string, ComplexMatrix> images{
        {"a", a}, {"b", b}, {"c", c}, {"x", x}, {"y", y}};
    return KRep{level, Representation(k_presentation(), d, std::move(images))};
}

/// ||X Y X^* - Y^2||_op for a representation with generators x, y.
inline double conjugation_defect_op(const Representation& rep) {
    const ComplexMatrix& x = rep.image("x");
    const ComplexMatrix& y = rep.image("y");
    return op_norm(x * y * x.adjoint() - y * y);
}

/// Exact operator-norm defect of the construction at `level`: the eigenphases
/// are off by 2^-l turns, so the chord is 2 sin(pi 2^-l).
inline double construction_defect_op(int level) {
    return 2.0 * std::sin(std::numbers::pi * std::ldexp(1.0, -level));
}

// ---------------------------------------------------------------------------
// Block form
// ---------------------------------------------------------------------------

struct BlockFormResult {
    /// 2d-dimensional: a = diag(1, -1), b = -a, c = -1, y = [[0, 1], [U, 0]].
    Representation rep2d;
    ComplexMatrix u;
    double input_defect = 0.0;
    double output_defect = 0.0;
    /// output_defect / max_defect as supplied (0 if max_defect is 0).
    double measured_constant = 0.0;
};

/// Doubles a representation of K with phi(c) = -1 into block form:
/// round phi(a) to an involution, sum with the copy that swaps a and b, move
/// to a basis where a = diag(1, -1), polar-round the off-diagonal blocks of
/// phi(y), and conjugate by diag(V2^*, 1).
inline BlockFormResult split_block_form(const Representation& rep, double max_defect) {
    for (const char* g : {"a", "b", "c", "x", "y"})
        if (!rep.presentation().has_generator(g))
            throw ValidationError(std::string("split_block_form: presentation lacks generator ") + g);
    const Eigen::Index d = rep.dim();
    const double c_dev = normalized_frobenius_norm(rep.image("c") + identity(d));
    if (c_dev > tol::kind)
        throw ValidationError("split_block_form: phi(c) is not -1 (deviation " +
                              std::to_string(c_dev) + ")");

    const ComplexMatrix za = involution_round(rep.image("a")).z;
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(za);
    std::vector<Eigen::Index> plus, minus;
    for (Eigen::Index i = 0; i < d; ++i)
        (es.eigenvalues()(i) >= 0.0 ? plus : minus).push_back(i);

    // Basis of C^d (+) C^d in which beta(a) = za (+) -za is diag(1_d, -1_d).
    ComplexMatrix q = ComplexMatrix::Zero(2 * d, 2 * d);
    Eigen::Index col = 0;
    for (auto i : plus) q.block(0, col++, d, 1) = es.eigenvectors().col(i);
    for (auto i : minus) q.block(d, col++, d, 1) = es.eigenvectors().col(i);
    for (auto i : minus) q.block(0, col++, d, 1) = es.eigenvectors().col(i);
    for (auto i : plus) q.block(d, col++, d, 1) = es.eigenvectors().col(i);

    const ComplexMatrix beta_y = q.adjoint() * direct_sum(rep.image("y"), rep.image("y")) * q;
    const ComplexMatrix v2 = polar_unitary(beta_y.topRightCorner(d, d));
    const ComplexMatrix v3 = polar_unitary(beta_y.bottomLeftCorner(d, d));
    const ComplexMatrix dmat = direct_sum(v2, identity(d));

    BlockFormResult out{trivial_representation(rep.presentation(), 2 * d)};
    out.u = v3 * v2;

    std::map<std::string, ComplexMatrix> images;
    ComplexMatrix a2 = identity(2 * d);
    a2.bottomRightCorner(d, d) *= -1.0;
    ComplexMatrix y2 = ComplexMatrix::Zero(2 * d, 2 * d);
    y2.topRightCorner(d, d) = identity(d);
    y2.bottomLeftCorner(d, d) = out.u;
    for (const auto& [g, m] : rep.images()) {
        if (g == "a") images.emplace(g, a2);
        else if (g == "b") images.emplace(g, -a2);
        else if (g == "c") images.emplace(g, -identity(2 * d));
        else if (g == "y") images.emplace(g, y2);
        else {
            const ComplexMatrix beta = q.adjoint() * direct_sum(m, m) * q;
            images.emplace(g, dmat.adjoint() * beta * dmat);
        }
    }
    out.rep2d = Representation(rep.presentation(), 2 * d, std::move(images));
    out.input_defect = rep_defect(rep).max_defect;
    out.output_defect = rep_defect(out.rep2d).max_defect;
    out.measured_constant = max_defect > 0.0 ? out.output_defect / max_defect : 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// Angle-doubling audit
// ---------------------------------------------------------------------------

/// Distance on the circle between two phases given in turns, in turns.
inline double circle_distance_turns(double a, double b) {
    double t = std::fmod(a - b, 1.0);
    if (t < 0.0) t += 1.0;
    return std::min(t, 1.0 - t);
}

/// Arc length in radians between e^{2 pi i a} and e^{2 pi i b}.
inline double arc_distance(double a, double b) {
    return 2.0 * std::numbers::pi * circle_distance_turns(a, b);
}

struct AngleNode {
    double target = 0.0;    ///< 2^-l (theta + j), turns
    double phase = 0.0;     ///< located eigenphase of U, turns
    double deviation = 0.0; ///< arc distance phase-target, radians
};

struct AngleAuditReport {
    double eps1 = 0.0;
    long long certified_lower_bound = 1;
    long long actual_dim = 0;
    int depth = 0;
    double start_phase = 0.0;
    /// Distinct phases (mod 1) at the deepest level.
    long long distinct_at_depth = 1;
    double max_deviation = 0.0;
    std::vector<std::vector<AngleNode>> angle_tree;

    bool deviations_within_bound(double slack = 1e-9) const {
        return max_deviation <= 2.0 * std::numbers::pi * eps1 + slack;
    }
};

/// Deepest level l at which the angle tree is guaranteed to consist of
/// distinct phases: 2 pi eps1 < 2^{-(l+1)} pi.
inline int audit_depth(double eps1) {
    int depth = 0;
    while (depth < 60 && 2.0 * eps1 < std::ldexp(1.0, -(depth + 2))) ++depth;
    return depth;
}

/// Checks the dimension-forcing structure of a block-form representation
/// Y = [[0, 1], [U, 0]]: starting from U's eigenphase closest to 0, follows
/// square roots of located eigenphases and snaps them to the nearest
/// eigenphase of U (= of Y^2 up to multiplicity) level by level.
inline AngleAuditReport angle_doubling_audit(const ComplexMatrix& y, const ComplexMatrix& x) {
    require_square(y, "angle_doubling_audit");
    require_same_dim(y, x, "angle_doubling_audit");
    if (y.rows() % 2 != 0) throw ValidationError("angle_doubling_audit: odd dimension");
    const Eigen::Index m = y.rows() / 2;
    const double block_dev =
        std::max({y.topLeftCorner(m, m).cwiseAbs().maxCoeff(),
                  y.bottomRightCorner(m, m).cwiseAbs().maxCoeff(),
                  (y.topRightCorner(m, m) - identity(m)).cwiseAbs().maxCoeff()});
    if (block_dev > tol::kind)
        throw ValidationError("angle_doubling_audit: Y is not in block form [[0, 1], [U, 0]]");

    AngleAuditReport report;
    report.actual_dim = static_cast<long long>(m);
    report.eps1 = op_norm(x * y * x.adjoint() - y * y);
    if (report.eps1 > 0.0) {
        const double raw = std::floor(1.0 / (8.0 * report.eps1));
        report.certified_lower_bound =
            raw >= 9.0e18 ? std::numeric_limits<long long>::max()
                          : std::max<long long>(1, static_cast<long long>(raw));
    } else {
        report.certified_lower_bound = std::numeric_limits<long long>::max();
    }

    const std::vector<double> phases =
        eig_decompose(ComplexMatrix(y.bottomLeftCorner(m, m)), SpectralKind::unitary).phases;
    auto nearest = [&](double target) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < phases.size(); ++i) {
            const double dd = circle_distance_turns(phases[i], target);
            if (dd < best_d) {
                best_d = dd;
                best = i;
            }
        }
        return phases[best];
    };
    std::size_t start = 0;
    for (std::size_t i = 1; i < phases.size(); ++i)
        if (std::abs(phases[i]) < std::abs(phases[start])) start = i;
    const double theta = phases[start];
    report.start_phase = theta;

    int depth = audit_depth(report.eps1);
    // The tree cannot hold more distinct phases than U has eigenvalues; stop
    // one level past that so an unsound input would still show up.
    while (depth > 0 && (1LL << depth) > 2 * report.actual_dim) --depth;
    report.depth = depth;

    report.angle_tree.push_back({AngleNode{theta, theta, 0.0}});
    for (int level = 0; level < depth; ++level) {
        const auto& prev = report.angle_tree.back();
        const std::size_t width = prev.size();
        std::vector<AngleNode> next(2 * width);
        for (std::size_t j = 0; j < width; ++j) {
            const double t1 = std::ldexp(theta + double(j), -(level + 1));
            const double t2 = t1 + 0.5;
            double root = prev[j].phase / 2.0;
            if (circle_distance_turns(root + 0.5, t1) < circle_distance_turns(root, t1)) root += 0.5;
            const double p1 = nearest(root);
            const double p2 = nearest(root + 0.5);
            next[j] = AngleNode{t1, p1, arc_distance(p1, t1)};
            next[j + width] = AngleNode{t2, p2, arc_distance(p2, t2)};
        }
        report.angle_tree.push_back(std::move(next));
    }
    for (const auto& lvl : report.angle_tree)
        for (const auto& node : lvl) report.max_deviation = std::max(report.max_deviation, node.deviation);

    std::vector<double> last;
    for (const auto& node : report.angle_tree.back()) {
        bool seen = false;
        for (double p : last)
            if (circle_distance_turns(p, node.phase) < 1e-12) seen = true;
        if (!seen) last.push_back(node.phase);
    }
    report.distinct_at_depth = static_cast<long long>(last.size());
    return report;
}

inline AngleAuditReport angle_doubling_audit(const Representation& rep2d) {
    return angle_doubling_audit(rep2d.image("y"), rep2d.image("x"));
}

// ---------------------------------------------------------------------------
// Profile sweep
// ---------------------------------------------------------------------------

struct SweepRow {
    int level = 0;
    long long dim = 0;
    double defect_f = 0.0;
    double defect_op = 0.0;
    double product = 0.0;
};

inline SweepRow sweep_row(int level) {
    const KRep k = build_k_rep(level);
    SweepRow row;
    row.level = level;
    row.dim = static_cast<long long>(k.rep.dim());
    const Eigen::Index d = k.rep.dim();
    for (const auto& r : k.rep.presentation().relators) {
        const ComplexMatrix diff = evaluate_word(k.rep, r) - identity(d);
        row.defect_f = std::max(row.defect_f, normalized_frobenius_norm(diff));
        row.defect_op = std::max(row.defect_op, op_norm(diff));
    }
    row.product = static_cast<double>(row.dim) * row.defect_op;
    return row;
}

inline std::vector<SweepRow> profile_sweep(int min_lvl, int max_lvl, unsigned jobs = 1) {
    if (min_lvl < min_level || max_lvl > max_level || min_lvl > max_lvl)
        throw ValidationError("profile_sweep: require 2 <= min <= max <= 12");
    return parallel_map(static_cast<std::size_t>(max_lvl - min_lvl + 1), jobs,
                        [&](std::size_t i) { return sweep_row(min_lvl + static_cast<int>(i)); });
}

} // namespace repcert::kgroup
