#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "repcert/certify.hpp"
#include "repcert/linalg.hpp"
#include "repcert/lsgames.hpp"
#include "repcert/parallel.hpp"
#include "repcert/stability.hpp"

namespace repcert::seesaw {

struct OptimizerConfig {
    Eigen::Index dim = 1;
    int max_iters = 500;
    std::uint64_t seed = 0;
    double tolerance = 1e-10;
    /// Restarts allowed once a local run plateaus or stalls.
    int restarts = 100;
    /// Rotation angle applied to Bob's observables of the best iterate on a
    /// restart; 0 draws fresh Haar-random observables instead.
    double kick = 0.0;
    /// A local run is abandoned after 5 gains below stall_ratio * (1 - value).
    double stall_ratio = 0.01;

    void validate() const {
        if (dim < 1) throw ValidationError("seesaw: dim must be >= 1");
        if (restarts < 0) throw ValidationError("seesaw: restarts must be >= 0");
        if (!(kick >= 0.0)) throw ValidationError("seesaw: kick must be non-negative");
        if (!(stall_ratio >= 0.0)) throw ValidationError("seesaw: stall_ratio must be non-negative");
        if (max_iters < 1) throw ValidationError("seesaw: max_iters must be >= 1");
        if (!(tolerance > 0.0)) throw ValidationError("seesaw: tolerance must be positive");
    }
};

struct OptimizationTrace {
    std::vector<double> values;   ///< best value after each iteration
    std::vector<double> iterates; ///< value of the current iterate after each iteration
    std::vector<int> run_starts;  ///< iterations at which a local run began
    Strategy strategy;          ///< best iterate
    /// The run stopped before max_iters: it reached value 1, or its last
    /// local run plateaued with no restarts left.
    bool converged = false;

    double final_value() const { return values.empty() ? 0.0 : values.back(); }
};

namespace detail {

/// Assignments y in {0,1}^{V_i} with parity b_i, in lexicographic order
/// (first variable most significant).
inline std::vector<std::vector<std::uint8_t>> valid_outcomes(std::size_t k, std::uint8_t parity) {
    std::vector<std::vector<std::uint8_t>> out;
    for (std::uint32_t code = 0; code < (1u << k); ++code) {
        std::vector<std::uint8_t> y(k);
        std::uint8_t p = 0;
        for (std::size_t t = 0; t < k; ++t) {
            y[t] = (code >> (k - 1 - t)) & 1u;
            p ^= y[t];
        }
        if (p == parity) out.push_back(std::move(y));
    }
    return out;
}

/// Projective measurement made of rank-one projectors q_s q_s^* with outcome
/// index labels[s].
struct RankOnePvm {
    ComplexMatrix basis;
    std::vector<std::size_t> labels;
};

inline double pvm_score(const RankOnePvm& pvm, const std::vector<ComplexMatrix>& r) {
    double v = 0.0;
    for (Eigen::Index s = 0; s < pvm.basis.cols(); ++s)
        v += (pvm.basis.col(s).adjoint() * r[pvm.labels[static_cast<std::size_t>(s)]] *
              pvm.basis.col(s))(0, 0).real();
    return v;
}

/// Best outcome for each basis vector; ties go to the smallest index.
inline void assign_argmax(RankOnePvm& pvm, const std::vector<ComplexMatrix>& r) {
    pvm.labels.assign(static_cast<std::size_t>(pvm.basis.cols()), 0);
    for (Eigen::Index s = 0; s < pvm.basis.cols(); ++s) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t y = 0; y < r.size(); ++y) {
            const double v = (pvm.basis.col(s).adjoint() * r[y] * pvm.basis.col(s))(0, 0).real();
            if (v > best + 1e-14) {
                best = v;
                pvm.labels[static_cast<std::size_t>(s)] = y;
            }
        }
    }
}

/// Pairwise rotations: for basis vectors with different outcomes a, b the best
/// split of their span is the top eigenvector of the compression of R_a - R_b.
inline void jacobi_sweeps(RankOnePvm& pvm, const std::vector<ComplexMatrix>& r, int max_sweeps = 20) {
    const Eigen::Index d = pvm.basis.cols();
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        const double before = pvm_score(pvm, r);
        for (Eigen::Index s = 0; s < d; ++s)
            for (Eigen::Index t = s + 1; t < d; ++t) {
                const std::size_t a = pvm.labels[static_cast<std::size_t>(s)];
                const std::size_t b = pvm.labels[static_cast<std::size_t>(t)];
                if (a == b) continue;
                ComplexMatrix span(pvm.basis.rows(), 2);
                span.col(0) = pvm.basis.col(s);
                span.col(1) = pvm.basis.col(t);
                const ComplexMatrix c = span.adjoint() * (r[a] - r[b]) * span;
                Eigen::SelfAdjointEigenSolver<ComplexMatrix> es((c + c.adjoint()) / 2.0);
                const ComplexVector top = es.eigenvectors().col(1);
                const ComplexVector bottom = es.eigenvectors().col(0);
                const double old_v =
                    (span.col(0).adjoint() * r[a] * span.col(0))(0, 0).real() +
                    (span.col(1).adjoint() * r[b] * span.col(1))(0, 0).real();
                const ComplexVector qs = span * top;
                const ComplexVector qt = span * bottom;
                const double new_v = (qs.adjoint() * r[a] * qs)(0, 0).real() +
                                     (qt.adjoint() * r[b] * qt)(0, 0).real();
                if (new_v > old_v) {
                    pvm.basis.col(s) = qs;
                    pvm.basis.col(t) = qt;
                }
            }
        const RankOnePvm saved = pvm;
        assign_argmax(pvm, r);
        if (pvm_score(pvm, r) < pvm_score(saved, r)) pvm = saved;
        if (pvm_score(pvm, r) - before < 1e-13) break;
    }
}

/// <psi|G|psi> where psi is the row-major vectorization of lambda.
inline double expectation_sum(const ComplexMatrix& g, const ComplexMatrix& lam, Eigen::Index d) {
    ComplexVector psi(d * d);
    for (Eigen::Index s = 0; s < d; ++s)
        for (Eigen::Index t = 0; t < d; ++t) psi(s * d + t) = lam(s, t);
    return (psi.adjoint() * g * psi)(0, 0).real() / psi.squaredNorm();
}

struct State {
    ComplexMatrix lambda;
    std::vector<ComplexMatrix> bob;   ///< indexed by variable
    std::vector<RankOnePvm> alice;    ///< indexed by equation
};

} // namespace detail

/// Observable-form strategy of an iterate: Y_ij = sum_y (-1)^{y_j} A^y.
inline Strategy strategy_from_state(const LinearSystem& sys, const detail::State& st) {
    Strategy s;
    const Eigen::Index d = st.lambda.rows();
    s.dim_a = s.dim_b = d;
    s.state = st.lambda;
    s.me = (st.lambda - identity(d) / std::sqrt(double(d))).norm() <= tol::exact;
    if (s.me) s.state = identity(d) / std::sqrt(double(d));
    for (int j = 0; j < sys.n; ++j) s.bob[j] = st.bob[static_cast<std::size_t>(j)];
    for (int i = 0; i < sys.m; ++i) {
        const auto v = sys.context(i);
        const auto outcomes = detail::valid_outcomes(v.size(), sys.b[static_cast<std::size_t>(i)]);
        const auto& pvm = st.alice[static_cast<std::size_t>(i)];
        for (std::size_t t = 0; t < v.size(); ++t) {
            ComplexMatrix y = ComplexMatrix::Zero(d, d);
            for (Eigen::Index c = 0; c < d; ++c) {
                const double sign = outcomes[pvm.labels[static_cast<std::size_t>(c)]][t] ? -1.0 : 1.0;
                y.noalias() += sign * pvm.basis.col(c) * pvm.basis.col(c).adjoint();
            }
            s.alice[{i, v[t]}] = 0.5 * (y + y.adjoint());
        }
    }
    return s;
}

/// Alternating best responses (Alice's measurements, Bob's observables, the
/// shared state) at fixed dimension, restarted from new random observables
/// when a local run gets stuck. No step lowers the value of the local run,
/// and the trace records the best value so far.
inline OptimizationTrace optimize(const Game& game, const OptimizerConfig& cfg) {
    cfg.validate();
    const LinearSystem& sys = game.system;
    sys.validate();
    const Eigen::Index d = cfg.dim;
    std::mt19937_64 rng(cfg.seed);

    detail::State st;
    st.lambda = identity(d) / std::sqrt(double(d));
    for (int j = 0; j < sys.n; ++j) st.bob.push_back(involution_round(haar_unitary(d, rng)).z);
    std::vector<std::vector<std::vector<std::uint8_t>>> outcomes;
    std::vector<std::vector<int>> contexts;
    for (int i = 0; i < sys.m; ++i) {
        contexts.push_back(sys.context(i));
        outcomes.push_back(detail::valid_outcomes(contexts.back().size(), sys.b[static_cast<std::size_t>(i)]));
    }

    auto responses = [&](int i) {
        const auto& v = contexts[static_cast<std::size_t>(i)];
        std::vector<ComplexMatrix> r;
        for (const auto& y : outcomes[static_cast<std::size_t>(i)]) {
            ComplexMatrix s = ComplexMatrix::Zero(d, d);
            for (std::size_t t = 0; t < v.size(); ++t)
                s += (y[t] ? -1.0 : 1.0) * st.bob[static_cast<std::size_t>(v[t])];
            ComplexMatrix ry = st.lambda * s.transpose() * st.lambda.adjoint();
            r.push_back(0.5 * (ry + ry.adjoint()));
        }
        return r;
    };

    auto alice_step = [&](bool first) {
        if (first) st.alice.assign(static_cast<std::size_t>(sys.m), detail::RankOnePvm{});
        for (int i = 0; i < sys.m; ++i) {
            const auto r = responses(i);
            std::vector<detail::RankOnePvm> candidates;
            if (!first) candidates.push_back(st.alice[static_cast<std::size_t>(i)]);
            std::vector<ComplexMatrix> bases{identity(d)};
            ComplexMatrix weighted = ComplexMatrix::Zero(d, d);
            for (std::size_t y = 0; y < r.size(); ++y) {
                Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(r[y]);
                bases.push_back(es.eigenvectors());
                weighted += double(y + 1) * r[y];
            }
            bases.push_back(Eigen::SelfAdjointEigenSolver<ComplexMatrix>(weighted).eigenvectors());
            for (auto& b : bases) {
                detail::RankOnePvm p{b, {}};
                detail::assign_argmax(p, r);
                candidates.push_back(std::move(p));
            }
            std::size_t best = 0;
            double best_v = -std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < candidates.size(); ++c) {
                if (c > 0 || first) detail::jacobi_sweeps(candidates[c], r);
                const double v = detail::pvm_score(candidates[c], r);
                if (v > best_v + 1e-14) {
                    best_v = v;
                    best = c;
                }
            }
            // The incumbent never loses to a candidate of equal score.
            st.alice[static_cast<std::size_t>(i)] = candidates[best];
        }
    };

    auto bob_step = [&] {
        std::vector<ComplexMatrix> t(static_cast<std::size_t>(sys.n), ComplexMatrix::Zero(d, d));
        std::vector<bool> used(static_cast<std::size_t>(sys.n), false);
        for (int i = 0; i < sys.m; ++i) {
            const auto& v = contexts[static_cast<std::size_t>(i)];
            const auto& pvm = st.alice[static_cast<std::size_t>(i)];
            const auto& outs = outcomes[static_cast<std::size_t>(i)];
            for (std::size_t k = 0; k < v.size(); ++k) {
                ComplexMatrix y = ComplexMatrix::Zero(d, d);
                for (Eigen::Index c = 0; c < d; ++c)
                    y += (outs[pvm.labels[static_cast<std::size_t>(c)]][k] ? -1.0 : 1.0) *
                         pvm.basis.col(c) * pvm.basis.col(c).adjoint();
                t[static_cast<std::size_t>(v[k])] += (st.lambda.adjoint() * y * st.lambda).transpose();
                used[static_cast<std::size_t>(v[k])] = true;
            }
        }
        for (int j = 0; j < sys.n; ++j) {
            if (!used[static_cast<std::size_t>(j)]) continue;
            const ComplexMatrix& tj = t[static_cast<std::size_t>(j)];
            Eigen::SelfAdjointEigenSolver<ComplexMatrix> es((tj + tj.adjoint()) / 2.0);
            const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
            ComplexVector signs(d);
            for (Eigen::Index k = 0; k < d; ++k)
                signs(k) = es.eigenvalues()(k) >= -1e-14 * scale ? 1.0 : -1.0;
            // Keep the current observable when it is already a best response.
            const ComplexMatrix candidate = es.eigenvectors() * signs.asDiagonal() * es.eigenvectors().adjoint();
            const ComplexMatrix& cur = st.bob[static_cast<std::size_t>(j)];
            if ((candidate * tj).trace().real() > (cur * tj).trace().real() + 1e-14)
                st.bob[static_cast<std::size_t>(j)] = 0.5 * (candidate + candidate.adjoint());
        }
    };

    auto state_step = [&] {
        ComplexMatrix g = ComplexMatrix::Zero(d * d, d * d);
        for (int i = 0; i < sys.m; ++i) {
            const auto& v = contexts[static_cast<std::size_t>(i)];
            const auto& pvm = st.alice[static_cast<std::size_t>(i)];
            const auto& outs = outcomes[static_cast<std::size_t>(i)];
            for (std::size_t k = 0; k < v.size(); ++k) {
                ComplexMatrix y = ComplexMatrix::Zero(d, d);
                for (Eigen::Index c = 0; c < d; ++c)
                    y += (outs[pvm.labels[static_cast<std::size_t>(c)]][k] ? -1.0 : 1.0) *
                         pvm.basis.col(c) * pvm.basis.col(c).adjoint();
                g += kron(y, st.bob[static_cast<std::size_t>(v[k])]);
            }
        }
        Eigen::SelfAdjointEigenSolver<ComplexMatrix> es((g + g.adjoint()) / 2.0);
        const ComplexVector top = es.eigenvectors().col(d * d - 1);
        ComplexMatrix lam(d, d);
        for (Eigen::Index s = 0; s < d; ++s)
            for (Eigen::Index t = 0; t < d; ++t) lam(s, t) = top(s * d + t);
        const double cur = detail::expectation_sum(g, st.lambda, d);
        const double cand = detail::expectation_sum(g, lam, d);
        if (cand > cur + 1e-14) st.lambda = lam / lam.norm();
    };

    auto current_value = [&] { return strategy_report(game, strategy_from_state(sys, st)).value; };

    // A local run ends after 10 consecutive increments below tolerance, or
    // when it stalls; the next one starts from fresh random observables (or,
    // with kick > 0, from a rotation of the best iterate's).
    OptimizationTrace trace;
    detail::State best_state;
    double best = -std::numeric_limits<double>::infinity();
    double last = best;
    int quiet = 0;
    int stalled = 0;
    int restarts_left = cfg.restarts;
    bool fresh = true;
    for (int it = 0; it < cfg.max_iters; ++it) {
        if (fresh) trace.run_starts.push_back(it);
        alice_step(fresh);
        fresh = false;
        bob_step();
        state_step();
        const double value = current_value();
        const double gain = value - last;
        quiet = gain < cfg.tolerance ? quiet + 1 : 0;
        // Linear-system games have value <= 1; a run whose gains are tiny
        // next to the remaining gap is stuck at a local optimum.
        stalled = gain < cfg.stall_ratio * (1.0 - value) ? stalled + 1 : 0;
        last = value;
        if (value > best) {
            best = value;
            best_state = st;
        }
        trace.values.push_back(best);
        trace.iterates.push_back(value);
        if (best >= 1.0 - cfg.tolerance) {
            trace.converged = true;
            break;
        }
        if (quiet >= 10 || stalled >= 5) {
            if (restarts_left == 0) {
                trace.converged = true;
                break;
            }
            --restarts_left;
            st = best_state;
            for (auto& x : st.bob) {
                if (cfg.kick > 0.0) {
                    const ComplexMatrix u = unitary_exp(random_hermitian(d, rng), cfg.kick);
                    x = involution_round(u * x * u.adjoint()).z;
                } else {
                    x = involution_round(haar_unitary(d, rng)).z;
                }
            }
            st.lambda = identity(d) / std::sqrt(double(d));
            fresh = true;
            last = -std::numeric_limits<double>::infinity();
            quiet = 0;
            stalled = 0;
        }
    }
    trace.strategy = strategy_from_state(sys, best_state);
    return trace;
}

/// Independent runs with seeds seed0, seed0 + 1, ...; results in seed order.
inline std::vector<OptimizationTrace> optimize_seeds(const Game& game, OptimizerConfig cfg, int seeds,
                                                     unsigned jobs = 1) {
    if (seeds < 1) throw ValidationError("seesaw: seeds must be >= 1");
    const std::uint64_t base = cfg.seed;
    return parallel_map(static_cast<std::size_t>(seeds), jobs, [&](std::size_t k) {
        OptimizerConfig c = cfg;
        c.seed = base + k;
        return optimize(game, c);
    });
}

} // namespace repcert::seesaw
