#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "repcert/linalg.hpp"
#include "repcert/lsgames.hpp"
#include "repcert/presentations.hpp"
#include "repcert/stability.hpp"

namespace repcert {

// ---------------------------------------------------------------------------
// Representations -> strategies
// ---------------------------------------------------------------------------

inline void require_solution_group_rep(const Representation& rep, const LinearSystem& sys,
                                       const char* what) {
    sys.validate();
    for (int j = 0; j < sys.n; ++j)
        if (!rep.presentation().has_generator(variable_name(j)))
            throw ValidationError(std::string(what) + ": representation lacks generator " +
                                  variable_name(j));
    if (!rep.presentation().has_generator(j_name))
        throw ValidationError(std::string(what) + ": representation lacks generator J");
}

/// Maximally entangled strategy from an approximate representation of the
/// solution group. Bob rounds each phi(x_j) to an involution; Alice rounds each
/// context sequentially so that her constraints hold exactly.
inline Strategy strategy_from_rep(const Representation& rep, const LinearSystem& sys) {
    require_solution_group_rep(rep, sys, "strategy_from_rep");
    const Eigen::Index d = rep.dim();
    const double jdev = normalized_frobenius_norm(rep.image(j_name) + identity(d));
    if (jdev > tol::kind)
        throw ValidationError("strategy_from_rep: phi(J) is not -1 (deviation " +
                              std::to_string(jdev) + ")");

    Strategy s;
    s.dim_a = s.dim_b = d;
    s.state = identity(d) / std::sqrt(double(d));
    s.me = true;
    for (int j = 0; j < sys.n; ++j) s.bob[j] = involution_round(rep.image(variable_name(j))).z;

    for (int i = 0; i < sys.m; ++i) {
        const auto v = sys.context(i);
        const double sign = sys.b[static_cast<std::size_t>(i)] ? -1.0 : 1.0;
        const std::size_t k = v.size();
        std::vector<ComplexMatrix> ms;
        if (k == 1) {
            ms.push_back(sign * identity(d));
        } else {
            ms.push_back(involution_round(rep.image(variable_name(v[0]))).z);
            for (std::size_t t = 1; t + 1 < k; ++t) {
                const ComplexMatrix z = commute_round(rep.image(variable_name(v[t])), ms);
                ms.push_back(involution_round_in_blocks(z, joint_blocks(ms, d)));
            }
            ComplexMatrix last = sign * identity(d);
            for (const auto& m : ms) last = last * m;
            ms.push_back(0.5 * (last + last.adjoint()));
        }
        for (std::size_t t = 0; t < k; ++t) s.alice[{i, v[t]}] = ms[t].transpose();
    }
    return s;
}

/// Representation of the solution group with x_j -> X_j (Bob) and J -> -1.
/// Variables that occur in no equation map to 1 when Bob has no observable.
inline Representation rep_from_me_strategy(const Strategy& strat, const LinearSystem& sys) {
    if (!strat.me)
        throw ValidationError("rep_from_me_strategy: the strategy is not maximally entangled; "
                              "use rep_from_general_strategy");
    strat.validate(sys);
    std::map<std::string, ComplexMatrix> images;
    for (int j = 0; j < sys.n; ++j) {
        auto it = strat.bob.find(j);
        images.emplace(variable_name(j), it == strat.bob.end() ? identity(strat.dim_b) : it->second);
    }
    images.emplace(j_name, -identity(strat.dim_b));
    return Representation(solution_group(sys), strat.dim_b, std::move(images));
}

// ---------------------------------------------------------------------------
// Connes threshold
// ---------------------------------------------------------------------------

/// One summand of the threshold objective as a function of a projection P:
/// ||M P||_F^2 (right_multiply) or ||P - M^* P M||_F^2 (conjugation).
struct DefectTerm {
    enum class Kind { right_multiply, conjugation };
    Kind kind = Kind::right_multiply;
    ComplexMatrix m;

    double evaluate(const ComplexMatrix& p) const {
        if (kind == Kind::right_multiply) return (m * p).squaredNorm();
        return (p - m.adjoint() * p * m).squaredNorm();
    }
};

struct ThresholdInterval {
    double lo = 0.0;
    double hi = 0.0;
    double defect = 0.0; ///< summed defect terms at chi_{>= sqrt a}(lambda), a in (lo, hi)
    double trace = 0.0;  ///< tr chi_{>= sqrt a}(lambda)
};

struct ConnesThresholdReport {
    std::vector<double> breakpoints; ///< distinct squared eigenvalues of lambda, ascending
    std::vector<ThresholdInterval> intervals;
    std::size_t chosen = 0;
    double a0 = 0.0;
    ComplexMatrix projection;
    ComplexMatrix basis; ///< orthonormal columns spanning Im P
    Eigen::Index rank = 0;
    double defect_integral = 0.0;
    double trace_integral = 0.0;

    double chosen_ratio() const { return intervals[chosen].defect / intervals[chosen].trace; }
    double mean_ratio() const { return defect_integral / trace_integral; }
};

/// Chooses a0 in [0, ||lambda||_op^2] minimizing (summed defect)/(tr P) over
/// P = chi_{>= sqrt a0}(lambda). Every integrand is constant between
/// consecutive squared eigenvalues, so each interval is evaluated once.
inline ConnesThresholdReport connes_threshold(const ComplexMatrix& lambda,
                                              const std::vector<DefectTerm>& terms) {
    require_square(lambda, "connes_threshold");
    require_psd(lambda, "connes_threshold", tol::kind);
    const Eigen::Index d = lambda.rows();
    for (const auto& t : terms)
        if (t.m.rows() != d || t.m.cols() != d)
            throw ValidationError("connes_threshold: defect term has the wrong dimension");
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es((lambda + lambda.adjoint()) / 2.0);
    const double top = std::max(0.0, es.eigenvalues().maxCoeff());
    if (top <= 0.0) throw ValidationError("connes_threshold: lambda is zero");

    std::vector<double> sq(static_cast<std::size_t>(d));
    for (Eigen::Index i = 0; i < d; ++i) {
        const double e = std::max(0.0, es.eigenvalues()(i));
        sq[static_cast<std::size_t>(i)] = e * e;
    }
    const double merge = 1e-12 * top * top;
    ConnesThresholdReport r;
    for (double s : sq) {
        if (s <= merge) continue;
        if (r.breakpoints.empty() || s - r.breakpoints.back() > merge) r.breakpoints.push_back(s);
    }
    auto members = [&](double cut) {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index i = 0; i < d; ++i)
            if (sq[static_cast<std::size_t>(i)] >= cut - merge) idx.push_back(i);
        return idx;
    };
    auto projection_of = [&](const std::vector<Eigen::Index>& idx) {
        ComplexMatrix b(d, static_cast<Eigen::Index>(idx.size()));
        for (std::size_t c = 0; c < idx.size(); ++c)
            b.col(static_cast<Eigen::Index>(c)) = es.eigenvectors().col(idx[c]);
        return b;
    };

    double best = std::numeric_limits<double>::infinity();
    double prev = 0.0;
    for (std::size_t k = 0; k < r.breakpoints.size(); ++k) {
        const double hi = r.breakpoints[k];
        const auto idx = members(hi);
        const ComplexMatrix b = projection_of(idx);
        const ComplexMatrix p = b * b.adjoint();
        ThresholdInterval iv{prev, hi, 0.0, double(idx.size())};
        for (const auto& t : terms) iv.defect += t.evaluate(p);
        r.defect_integral += (hi - prev) * iv.defect;
        r.trace_integral += (hi - prev) * iv.trace;
        const double ratio = iv.defect / iv.trace;
        if (ratio < best) {
            best = ratio;
            r.chosen = k;
            r.projection = p;
            r.basis = idx.size() == static_cast<std::size_t>(d) ? identity(d) : b;
            r.rank = static_cast<Eigen::Index>(idx.size());
        }
        r.intervals.push_back(iv);
        prev = hi;
    }
    if (r.basis.cols() == d) r.projection = identity(d);
    r.a0 = 0.5 * (r.intervals[r.chosen].lo + r.intervals[r.chosen].hi);
    return r;
}

// ---------------------------------------------------------------------------
// General strategies -> representations
// ---------------------------------------------------------------------------

struct GeneralRepResult {
    Representation rep;
    ConnesThresholdReport threshold;
};

/// The summands of the threshold objective for a strategy: conjugation by each
/// X_j, the product constraint of each equation, and the commutator of each
/// ordered pair inside an equation.
inline std::vector<DefectTerm> strategy_defect_terms(const Strategy& strat, const LinearSystem& sys) {
    std::vector<DefectTerm> terms;
    const Eigen::Index d = strat.dim_b;
    for (const auto& [j, x] : strat.bob) terms.push_back({DefectTerm::Kind::conjugation, x});
    for (int i = 0; i < sys.m; ++i) {
        const auto v = sys.context(i);
        ComplexMatrix prod = identity(d);
        for (int j : v) prod = prod * strat.x(j);
        const double sign = sys.b[static_cast<std::size_t>(i)] ? -1.0 : 1.0;
        terms.push_back({DefectTerm::Kind::right_multiply, prod - sign * identity(d)});
        for (int j : v)
            for (int k : v)
                if (j != k)
                    terms.push_back({DefectTerm::Kind::right_multiply,
                                     strat.x(j) * strat.x(k) - strat.x(k) * strat.x(j)});
    }
    return terms;
}

/// Compresses Bob's observables to Im P for the Connes threshold projection P
/// of rho^{1/2}: x_j -> polar(P X_j P) on Im P, J -> -1.
inline GeneralRepResult rep_from_general_strategy(const Strategy& strat, const LinearSystem& sys) {
    strat.validate(sys);
    const ComplexMatrix lambda = psd_sqrt(reduced_density(strat));
    ConnesThresholdReport th = connes_threshold(lambda, strategy_defect_terms(strat, sys));
    if (th.rank < 1) throw ValidationError("rep_from_general_strategy: Im P is trivial");
    const ComplexMatrix& q = th.basis;
    std::map<std::string, ComplexMatrix> images;
    for (int j = 0; j < sys.n; ++j) {
        auto it = strat.bob.find(j);
        images.emplace(variable_name(j), it == strat.bob.end()
                                             ? identity(th.rank)
                                             : polar_unitary(q.adjoint() * it->second * q));
    }
    images.emplace(j_name, -identity(th.rank));
    return GeneralRepResult{Representation(solution_group(sys), th.rank, std::move(images)),
                            std::move(th)};
}

struct MeStrategyResult {
    Strategy strategy;
    ConnesThresholdReport threshold;
};

/// rep_from_general_strategy followed by strategy_from_rep.
inline MeStrategyResult me_strategy_from_general(const Strategy& strat, const LinearSystem& sys) {
    GeneralRepResult g = rep_from_general_strategy(strat, sys);
    return MeStrategyResult{strategy_from_rep(g.rep, sys), std::move(g.threshold)};
}

// ---------------------------------------------------------------------------
// Connes' joint distribution trick
// ---------------------------------------------------------------------------

struct SpectralAtom {
    double x = 0.0;
    double y = 0.0;
    double weight = 0.0;
};

struct JointSpectralMeasure {
    std::vector<SpectralAtom> atoms;

    double total_weight() const {
        double w = 0.0;
        for (const auto& a : atoms) w += a.weight;
        return w;
    }
};

struct ConnesIntegralCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    JointSpectralMeasure measure;

    bool holds(double slack = 1e-9) const { return lhs <= rhs + slack; }
};

/// lhs = int_0^inf ||chi_{>= sqrt a}(lambda) - chi_{>= sqrt a}(lambda')||_F^2 da,
/// evaluated as sum_atoms weight |x^2 - y^2|; rhs = ||lambda - lambda'||_F ||lambda + lambda'||_F.
inline ConnesIntegralCheck connes_integral_check(const ComplexMatrix& lambda,
                                                 const ComplexMatrix& lambda_prime) {
    require_same_dim(lambda, lambda_prime, "connes_integral_check");
    require_psd(lambda, "connes_integral_check", tol::kind);
    require_psd(lambda_prime, "connes_integral_check", tol::kind);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> e1((lambda + lambda.adjoint()) / 2.0);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> e2((lambda_prime + lambda_prime.adjoint()) / 2.0);
    const ComplexMatrix overlap = e1.eigenvectors().adjoint() * e2.eigenvectors();
    ConnesIntegralCheck out;
    for (Eigen::Index i = 0; i < lambda.rows(); ++i)
        for (Eigen::Index j = 0; j < lambda.rows(); ++j) {
            const double x = std::max(0.0, e1.eigenvalues()(i));
            const double y = std::max(0.0, e2.eigenvalues()(j));
            const double w = std::norm(overlap(i, j));
            out.measure.atoms.push_back({x, y, w});
            out.lhs += w * std::abs(x * x - y * y);
        }
    out.rhs = (lambda - lambda_prime).norm() * (lambda + lambda_prime).norm();
    return out;
}

/// int_0^inf chi_{>= sqrt a}(lambda) da as a finite sum over the intervals
/// between squared eigenvalues; equals lambda^2.
inline ComplexMatrix step_integral(const ComplexMatrix& lambda) {
    require_psd(lambda, "step_integral", tol::kind);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es((lambda + lambda.adjoint()) / 2.0,
                                                     Eigen::EigenvaluesOnly);
    std::vector<double> sq;
    for (Eigen::Index i = 0; i < lambda.rows(); ++i) {
        const double e = std::max(0.0, es.eigenvalues()(i));
        sq.push_back(e * e);
    }
    std::sort(sq.begin(), sq.end());
    ComplexMatrix acc = ComplexMatrix::Zero(lambda.rows(), lambda.cols());
    double prev = 0.0;
    for (double s : sq) {
        if (s <= prev) continue;
        acc += (s - prev) * step_projection(lambda, std::sqrt(0.5 * (prev + s)));
        prev = s;
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Noise models and scaling fits
// ---------------------------------------------------------------------------

/// exp(i t H) for Hermitian H.
inline ComplexMatrix unitary_exp(const ComplexMatrix& h, double t) {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es((h + h.adjoint()) / 2.0);
    ComplexVector ph(h.rows());
    for (Eigen::Index i = 0; i < h.rows(); ++i) ph(i) = std::polar(1.0, t * es.eigenvalues()(i));
    return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

/// Hermitian direction with ||H||_op = 1.
inline ComplexMatrix random_hermitian(Eigen::Index d, std::mt19937_64& rng) {
    const ComplexMatrix g = ginibre(d, d, rng);
    ComplexMatrix h = (g + g.adjoint()) / 2.0;
    return h / op_norm(h);
}

/// Exact d = 4 representation of the magic-square solution group: x_j -> Pauli
/// operator, J -> -1.
inline Representation pauli_solution_rep() {
    const LinearSystem sys = magic_square_system();
    const auto ops = magic_square_operators();
    std::map<std::string, ComplexMatrix> images;
    for (int j = 0; j < sys.n; ++j) images.emplace(variable_name(j), ops[static_cast<std::size_t>(j)]);
    images.emplace(j_name, -identity(4));
    return Representation(solution_group(sys), 4, std::move(images));
}

/// x_j -> exp(i eta H_j) phi(x_j) with J untouched. The directions H_j depend
/// only on `seed`, so varying eta traces a ray.
inline Representation perturb_rep(const Representation& rep, double eta, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::map<std::string, ComplexMatrix> images;
    for (const auto& [g, m] : rep.images()) {
        if (g == j_name) {
            images.emplace(g, m);
            continue;
        }
        images.emplace(g, unitary_exp(random_hermitian(rep.dim(), rng), eta) * m);
    }
    return Representation(rep.presentation(), rep.dim(), std::move(images));
}

/// X_j -> e^{i eta H_j} X_j e^{-i eta H_j}; Alice and the state are unchanged,
/// so every constraint still holds exactly.
inline Strategy perturb_strategy(const Strategy& s, double eta, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Strategy out = s;
    for (auto& [j, x] : out.bob) {
        const ComplexMatrix u = unitary_exp(random_hermitian(s.dim_b, rng), eta);
        x = u * x * u.adjoint();
        x = 0.5 * (x + x.adjoint());
    }
    return out;
}

/// S (x) (ancilla): the state becomes lambda (x) diag(sqrt(w)) for normalized
/// weights w and every observable acts as O (x) 1. Biases are unchanged.
inline Strategy skew_strategy(const Strategy& s, const std::vector<double>& weights) {
    if (weights.empty()) throw ValidationError("skew_strategy: no weights");
    double total = 0.0;
    for (double w : weights) {
        if (!(w > 0.0)) throw ValidationError("skew_strategy: weights must be positive");
        total += w;
    }
    const auto k = static_cast<Eigen::Index>(weights.size());
    ComplexMatrix anc = ComplexMatrix::Zero(k, k);
    for (Eigen::Index i = 0; i < k; ++i) anc(i, i) = std::sqrt(weights[static_cast<std::size_t>(i)] / total);
    Strategy out;
    out.dim_a = s.dim_a * k;
    out.dim_b = s.dim_b * k;
    out.state = kron(s.state, anc);
    for (const auto& [ij, y] : s.alice) out.alice[ij] = kron(y, identity(k));
    for (const auto& [j, x] : s.bob) out.bob[j] = kron(x, identity(k));
    out.me = k == 1 && s.me;
    if (!out.me && out.dim_a == out.dim_b &&
        (out.state - identity(out.dim_a) / std::sqrt(double(out.dim_a))).norm() <= tol::exact) {
        out.me = true;
        out.state = identity(out.dim_a) / std::sqrt(double(out.dim_a));
    }
    return out;
}

/// Haar-random local basis change on both sides; hides the tensor structure.
inline Strategy haar_conjugate(const Strategy& s, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const ComplexMatrix ua = haar_unitary(s.dim_a, rng);
    const ComplexMatrix ub = haar_unitary(s.dim_b, rng);
    return conjugate_strategy(s, ua, ub);
}

struct LogLogFit {
    double slope = 0.0;
    double intercept = 0.0;
    std::size_t points = 0;
};

/// Least-squares fit of log y = slope * log x + intercept over points with
/// x, y > 0.
inline LogLogFit fit_loglog(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw ValidationError("fit_loglog: size mismatch");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) continue;
        const double lx = std::log(xs[i]), ly = std::log(ys[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    if (n < 2) throw ValidationError("fit_loglog: need at least two positive points");
    const double denom = double(n) * sxx - sx * sx;
    if (std::abs(denom) < 1e-300) throw ValidationError("fit_loglog: degenerate abscissae");
    LogLogFit f;
    f.slope = (double(n) * sxy - sx * sy) / denom;
    f.intercept = (sy - f.slope * sx) / double(n);
    f.points = n;
    return f;
}

/// One cell of the noise sweep on a single noised strategy.
struct ScalingRow {
    double eta = 0.0;
    std::uint64_t seed = 0;
    double eps_perfect = 0.0;
    /// Defect along the maximally entangled route: rep_from_me_strategy of the
    /// input when it is maximally entangled, otherwise of me_strategy_from_general.
    double defect_me = 0.0;
    double defect_general = 0.0;
    Eigen::Index rank_p = 0;
};

/// Builds skew(base, weights), rotates Bob's observables by eta along
/// seed-determined directions, hides the structure with a Haar basis change
/// (when weights has more than one entry), and runs both routes.
inline ScalingRow scaling_cell(const Strategy& base, const LinearSystem& sys,
                               const std::vector<double>& weights, double eta, std::uint64_t seed) {
    Strategy s = perturb_strategy(skew_strategy(base, weights), eta, seed);
    if (weights.size() > 1) s = haar_conjugate(s, seed ^ 0x5bd1e995ULL);
    ScalingRow row;
    row.eta = eta;
    row.seed = seed;
    const Game game{sys};
    row.eps_perfect = strategy_report(game, s).eps_perfect;
    const GeneralRepResult g = rep_from_general_strategy(s, sys);
    row.defect_general = rep_defect(g.rep).max_defect;
    row.rank_p = g.threshold.rank;
    if (s.me) {
        row.defect_me = rep_defect(rep_from_me_strategy(s, sys)).max_defect;
    } else {
        row.defect_me = rep_defect(rep_from_me_strategy(strategy_from_rep(g.rep, sys), sys)).max_defect;
    }
    return row;
}

} // namespace repcert
