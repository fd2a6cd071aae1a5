#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "repcert/certify.hpp"

using namespace repcert;

namespace {

ComplexMatrix random_psd(Eigen::Index d, std::mt19937_64& rng, Eigen::Index rank = -1) {
    const ComplexMatrix g = ginibre(d, rank < 0 ? d : rank, rng);
    return g * g.adjoint();
}

ComplexMatrix diag(std::initializer_list<double> v) {
    const auto n = static_cast<Eigen::Index>(v.size());
    ComplexMatrix m = ComplexMatrix::Zero(n, n);
    Eigen::Index i = 0;
    for (double z : v) {
        m(i, i) = z;
        ++i;
    }
    return m;
}

const LinearSystem& ms() {
    static const LinearSystem sys = magic_square_system();
    return sys;
}

const Strategy& fixture() {
    static const Strategy s = magic_square_fixture().second;
    return s;
}

double eps_of(const Strategy& s) { return strategy_report(Game{ms()}, s).eps_perfect; }

double max_ratio_spread(const std::vector<double>& r) {
    return *std::max_element(r.begin(), r.end()) / *std::min_element(r.begin(), r.end());
}

} // namespace

TEST(StrategyFromRep, PauliRepIsPerfect) {
    const auto rep = pauli_solution_rep();
    ASSERT_LE(rep_defect(rep).max_defect, 1e-10);
    const Strategy s = strategy_from_rep(rep, ms());
    EXPECT_TRUE(s.me);
    EXPECT_NO_THROW(s.validate(ms()));
    const auto r = strategy_report(Game{ms()}, s);
    EXPECT_NEAR(r.value, 1.0, 1e-10);
    EXPECT_LE(r.eps_perfect, 1e-9);
}

TEST(StrategyFromRep, ConstraintsHoldExactlyForAnyDefect) {
    std::mt19937_64 rng(3);
    const auto p = solution_group(ms());
    for (int t = 0; t < 30; ++t) {
        const Eigen::Index d = 1 + t % 6;
        std::map<std::string, ComplexMatrix> images;
        for (const auto& g : p.generators) images.emplace(g, g == j_name ? ComplexMatrix(-identity(d)) : haar_unitary(d, rng));
        const Strategy s = strategy_from_rep(Representation(p, d, images), ms());
        EXPECT_NO_THROW(s.validate(ms())) << "trial " << t;
        for (int i = 0; i < ms().m; ++i) {
            ComplexMatrix prod = identity(d);
            for (int j : ms().context(i)) prod = prod * s.y(i, j);
            const double sign = ms().b[std::size_t(i)] ? -1.0 : 1.0;
            EXPECT_LE((prod - sign * identity(d)).norm(), 1e-9);
        }
    }
    // and on noisy Pauli reps
    for (std::uint64_t seed = 0; seed < 10; ++seed)
        EXPECT_NO_THROW(strategy_from_rep(perturb_rep(pauli_solution_rep(), 0.3, seed), ms()).validate(ms()));
}

TEST(StrategyFromRep, QuadraticScaling) {
    std::vector<double> ratios;
    for (double eta : {1e-2, 1e-3}) {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const auto rep = perturb_rep(pauli_solution_rep(), eta, seed);
            const double eps = rep_defect(rep).max_defect;
            ratios.push_back(eps_of(strategy_from_rep(rep, ms())) / (eps * eps));
        }
    }
    // eps_perfect / eps^2 is a stable constant across a decade of noise
    EXPECT_LT(max_ratio_spread(ratios), 10.0);
    EXPECT_LT(*std::max_element(ratios.begin(), ratios.end()), 100.0);
}

TEST(StrategyFromRep, RejectsWrongJ) {
    const auto p = solution_group(ms());
    EXPECT_THROW(strategy_from_rep(trivial_representation(p, 2), ms()), ValidationError);
    EXPECT_THROW(strategy_from_rep(trivial_representation(parse_presentation("generators: a\nrelators: a^2"), 2), ms()),
                 ValidationError);
}

TEST(RepFromMeStrategy, FixtureIsExact) {
    const auto rep = rep_from_me_strategy(fixture(), ms());
    EXPECT_EQ(rep.dim(), 4);
    EXPECT_LE(rep_defect(rep).max_defect, 1e-9);
    EXPECT_EQ(rep.image("J"), ComplexMatrix(-identity(4)));
}

TEST(RepFromMeStrategy, ExactRoundTrip) {
    const auto rep = pauli_solution_rep();
    const auto back = rep_from_me_strategy(strategy_from_rep(rep, ms()), ms());
    EXPECT_LE(rep_defect(back).max_defect, 1e-9);
    for (const auto& [g, m] : rep.images()) EXPECT_LE((back.image(g) - m).norm(), 1e-9) << g;
}

TEST(RepFromMeStrategy, SquareRootScaling) {
    std::vector<double> eps, defect;
    for (double eta : {1e-2, 1e-3, 1e-4}) {
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            const Strategy s = perturb_strategy(fixture(), eta, seed);
            eps.push_back(eps_of(s));
            defect.push_back(rep_defect(rep_from_me_strategy(s, ms())).max_defect);
        }
    }
    const auto fit = fit_loglog(eps, defect);
    EXPECT_NEAR(fit.slope, 0.5, 0.15);
}

TEST(RepFromMeStrategy, RejectsNonMaximallyEntangled) {
    Strategy s = skew_strategy(fixture(), {2.0, 1.0});
    EXPECT_FALSE(s.me);
    EXPECT_THROW(rep_from_me_strategy(s, ms()), ValidationError);
}

TEST(ConnesThreshold, MaximallyEntangled) {
    const Eigen::Index d = 4;
    const auto r = connes_threshold(identity(d) / 2.0, {{DefectTerm::Kind::right_multiply, identity(d)}});
    ASSERT_EQ(r.breakpoints.size(), 1u);
    EXPECT_EQ(r.rank, d);
    EXPECT_EQ(r.projection, identity(d));
    EXPECT_GT(r.a0, 0.0);
    EXPECT_LT(r.a0, 1.0 / d);
}

TEST(ConnesThreshold, TwoIntervalsByHand) {
    const ComplexMatrix lambda = diag({std::sqrt(0.9), std::sqrt(0.1)});
    // ||M P||_F^2 with M = diag(0, 1): 1 for P = I, 0 for the top projector.
    const auto r = connes_threshold(lambda, {{DefectTerm::Kind::right_multiply, diag({0.0, 1.0})}});
    ASSERT_EQ(r.breakpoints.size(), 2u);
    EXPECT_NEAR(r.breakpoints[0], 0.1, 1e-12);
    EXPECT_NEAR(r.breakpoints[1], 0.9, 1e-12);
    ASSERT_EQ(r.intervals.size(), 2u);
    EXPECT_NEAR(r.intervals[0].defect, 1.0, 1e-12);
    EXPECT_EQ(r.intervals[0].trace, 2.0);
    EXPECT_NEAR(r.intervals[1].defect, 0.0, 1e-12);
    EXPECT_EQ(r.intervals[1].trace, 1.0);
    EXPECT_EQ(r.chosen, 1u);
    EXPECT_EQ(r.rank, 1);
    EXPECT_LE((r.projection - diag({1.0, 0.0})).norm(), 1e-12);
    EXPECT_NEAR(r.a0, 0.5, 1e-12);
    EXPECT_NEAR(r.defect_integral, 0.1, 1e-12);
    EXPECT_NEAR(r.trace_integral, 0.1 * 2 + 0.8, 1e-12);
}

TEST(ConnesThreshold, ZeroTermsSelectIdentity) {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 20; ++t) {
        const Eigen::Index d = 2 + t % 6;
        ComplexMatrix l = random_psd(d, rng);
        l /= l.norm();
        const auto r = connes_threshold(l, {{DefectTerm::Kind::right_multiply, ComplexMatrix::Zero(d, d)}});
        EXPECT_EQ(r.rank, d);
        EXPECT_LE((r.projection - identity(d)).norm(), 1e-12);
    }
}

TEST(ConnesThreshold, ReportInvariants) {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 200; ++t) {
        const Eigen::Index d = 1 + t % 10;
        const ComplexMatrix l = random_psd(d, rng, 1 + t % d);
        std::vector<DefectTerm> terms;
        for (int k = 0; k < 3; ++k) {
            terms.push_back({DefectTerm::Kind::right_multiply, ginibre(d, d, rng)});
            terms.push_back({DefectTerm::Kind::conjugation, haar_unitary(d, rng)});
        }
        const auto r = connes_threshold(l, terms);
        const double top = op_norm(l);
        EXPECT_GE(r.a0, 0.0);
        EXPECT_LE(r.a0, top * top + 1e-12);
        EXPECT_GE(r.rank, 1);
        EXPECT_TRUE(std::is_sorted(r.breakpoints.begin(), r.breakpoints.end()));
        EXPECT_LE(r.chosen_ratio(), r.mean_ratio() + 1e-9);
        // P is the spectral projection at the chosen threshold
        EXPECT_LE((r.projection - step_projection(l, std::sqrt(r.a0))).norm(), 1e-8);
        EXPECT_NEAR(r.projection.trace().real(), double(r.rank), 1e-9);
        double sum = 0.0;
        for (const auto& term : terms) sum += term.evaluate(r.projection);
        EXPECT_NEAR(sum, r.intervals[r.chosen].defect, 1e-8 * std::max(1.0, sum));
    }
}

TEST(ConnesThreshold, Errors) {
    EXPECT_THROW(connes_threshold(ComplexMatrix::Zero(2, 2), {}), ValidationError);
    EXPECT_THROW(connes_threshold(diag({1.0, -1.0}), {}), ValidationError);
    EXPECT_THROW(connes_threshold(identity(2), {{DefectTerm::Kind::right_multiply, identity(3)}}), ValidationError);
}

TEST(RepFromGeneralStrategy, MaximallyEntangledMatchesMeRoute) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Strategy s = perturb_strategy(fixture(), 1e-2, seed);
        const auto g = rep_from_general_strategy(s, ms());
        const auto me = rep_from_me_strategy(s, ms());
        EXPECT_EQ(g.threshold.rank, 4);
        for (const auto& [name, m] : me.images()) EXPECT_LE((g.rep.image(name) - m).norm(), 1e-9) << name;
    }
}

TEST(RepFromGeneralStrategy, PerfectSkewedStrategyIsExact) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Strategy s = haar_conjugate(skew_strategy(fixture(), {4.0, 2.0, 1.0}), seed);
        ASSERT_FALSE(s.me);
        ASSERT_LE(eps_of(s), 1e-10);
        const auto g = rep_from_general_strategy(s, ms());
        EXPECT_LE(rep_defect(g.rep).max_defect, 1e-8);
        EXPECT_EQ(g.threshold.rank, 12); // zero cost everywhere: full trace wins
    }
}

TEST(RepFromGeneralStrategy, DefectTermsMatchTheObjective) {
    const Strategy s = perturb_strategy(skew_strategy(fixture(), {3.0, 1.0}), 1e-2, 1);
    const auto terms = strategy_defect_terms(s, ms());
    // 9 conjugations, 6 products, 6 * 3 * 2 ordered commutator pairs
    EXPECT_EQ(terms.size(), 9u + 6u + 36u);
    const ComplexMatrix& x0 = s.x(0);
    const ComplexMatrix p = identity(s.dim_b);
    EXPECT_NEAR(terms[0].evaluate(p), (p - x0.adjoint() * p * x0).squaredNorm(), 1e-12);
}

TEST(RepFromGeneralStrategy, DefectScalesWithNoise) {
    std::vector<double> eps, defect;
    for (double eta : {1e-2, 1e-3, 1e-4}) {
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            Strategy s = haar_conjugate(perturb_strategy(skew_strategy(fixture(), {4.0, 2.0, 1.0}), eta, seed), seed + 100);
            eps.push_back(eps_of(s));
            defect.push_back(rep_defect(rep_from_general_strategy(s, ms()).rep).max_defect);
        }
    }
    const auto fit = fit_loglog(eps, defect);
    EXPECT_GE(fit.slope, 0.25 - 0.1);
    EXPECT_LE(fit.slope, 1.0);
}

TEST(MeStrategyFromGeneral, PerfectSkewedGivesPerfectMe) {
    const Strategy s = haar_conjugate(skew_strategy(fixture(), {4.0, 2.0, 1.0}), 9);
    const auto r = me_strategy_from_general(s, ms());
    EXPECT_TRUE(r.strategy.me);
    EXPECT_EQ(r.strategy.dim_a, r.threshold.rank);
    EXPECT_LE(eps_of(r.strategy), 1e-8);
}

TEST(MeStrategyFromGeneral, MaximallyEntangledInput) {
    EXPECT_NEAR(eps_of(me_strategy_from_general(fixture(), ms()).strategy), eps_of(fixture()), 1e-8);
    // A noisy input keeps the same order of magnitude.
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Strategy s = perturb_strategy(fixture(), 1e-3, seed);
        const double in = eps_of(s), out = eps_of(me_strategy_from_general(s, ms()).strategy);
        EXPECT_LE(out, 100.0 * std::sqrt(in));
    }
}

TEST(ConnesIntegral, IdenticalArgumentsGiveZero) {
    std::mt19937_64 rng(11);
    const ComplexMatrix l = random_psd(5, rng);
    const auto c = connes_integral_check(l, l);
    EXPECT_NEAR(c.lhs, 0.0, 1e-9);
    EXPECT_TRUE(c.holds());
}

TEST(ConnesIntegral, EqualityCase) {
    const auto c = connes_integral_check(diag({1.0, 0.0}), diag({0.0, 1.0}));
    EXPECT_NEAR(c.lhs, 2.0, 1e-12);
    EXPECT_NEAR(c.rhs, 2.0, 1e-12);
    EXPECT_NEAR(c.measure.total_weight(), 2.0, 1e-12);
}

TEST(ConnesIntegral, RandomPairs) {
    std::mt19937_64 rng(13);
    for (int t = 0; t < 300; ++t) {
        const Eigen::Index d = 1 + t % 16;
        const ComplexMatrix a = random_psd(d, rng, 1 + t % d), b = random_psd(d, rng);
        const auto c = connes_integral_check(a, b);
        EXPECT_TRUE(c.holds()) << t << ": " << c.lhs << " > " << c.rhs;
        EXPECT_NEAR(c.measure.total_weight(), double(d), 1e-9);
    }
}

TEST(ConnesIntegral, AtomSumMatchesNumericalIntegral) {
    // Oracle: midpoint rule on the piecewise-constant integrand, exact up to the grid.
    std::mt19937_64 rng(17);
    for (int t = 0; t < 5; ++t) {
        const Eigen::Index d = 2 + t;
        ComplexMatrix a = random_psd(d, rng), b = random_psd(d, rng);
        a /= op_norm(a);
        b /= op_norm(b);
        const auto c = connes_integral_check(a, b);
        const int steps = 20000;
        double integral = 0.0;
        for (int k = 0; k < steps; ++k) {
            const double s = (k + 0.5) / steps; // a in (0, 1]; both spectra lie in [0, 1]
            integral += (step_projection(a, std::sqrt(s)) - step_projection(b, std::sqrt(s))).squaredNorm() / steps;
        }
        EXPECT_NEAR(c.lhs, integral, 2e-3 * d);
    }
}

TEST(ConnesIntegral, DimensionMismatch) {
    EXPECT_THROW(connes_integral_check(identity(2), identity(3)), ValidationError);
}

TEST(StepIntegral, EqualsLambdaSquared) {
    std::mt19937_64 rng(19);
    for (int t = 0; t < 200; ++t) {
        const Eigen::Index d = 1 + t % 16;
        const ComplexMatrix l = random_psd(d, rng, 1 + t % d);
        EXPECT_LE((step_integral(l) - l * l).norm(), 1e-10 * std::max(1.0, (l * l).norm()));
    }
}

TEST(GeneralStrategyBounds, SeminormQuantitiesScaleLikeSqrtEps) {
    std::vector<double> comm, prod;
    for (double eta : {1e-2, 1e-3, 1e-4}) {
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            const Strategy s = haar_conjugate(perturb_strategy(skew_strategy(fixture(), {4.0, 2.0, 1.0}), eta, seed), seed);
            const double root = std::sqrt(eps_of(s));
            const ComplexMatrix rho = reduced_density(s);
            const ComplexMatrix sq = psd_sqrt(rho);
            double c = 0.0, p = 0.0;
            for (const auto& [j, x] : s.bob) c = std::max(c, (x * sq - sq * x).norm());
            for (int i = 0; i < ms().m; ++i) {
                ComplexMatrix pr = identity(s.dim_b);
                for (int j : ms().context(i)) pr = pr * s.x(j);
                const double sign = ms().b[std::size_t(i)] ? -1.0 : 1.0;
                p = std::max(p, rho_seminorm(pr - sign * identity(s.dim_b), rho));
            }
            comm.push_back(c / root);
            prod.push_back(p / root);
        }
    }
    EXPECT_LT(max_ratio_spread(comm), 10.0);
    EXPECT_LT(max_ratio_spread(prod), 10.0);
}

TEST(MeBiasIdentity, RandomOperators) {
    std::mt19937_64 rng(23);
    for (int t = 0; t < 50; ++t) {
        const Eigen::Index d = 1 + t % 8;
        const ComplexMatrix y = ginibre(d, d, rng), x = ginibre(d, d, rng);
        const ComplexMatrix l = identity(d) / std::sqrt(double(d));
        const Complex lhs = expectation(l, y, x), rhs = ntr(y.transpose() * x);
        EXPECT_NEAR(std::abs(lhs - rhs), 0.0, 1e-10);
    }
}

TEST(NoiseModels, PerturbationsAndSkew) {
    const auto rep = pauli_solution_rep();
    EXPECT_EQ(perturb_rep(rep, 0.1, 3).image("J"), rep.image("J"));
    EXPECT_LE((perturb_rep(rep, 0.0, 3).image("x1") - rep.image("x1")).norm(), 1e-12);
    // same seed, same directions: the defect grows along a ray
    EXPECT_LT(rep_defect(perturb_rep(rep, 1e-3, 5)).max_defect, rep_defect(perturb_rep(rep, 1e-2, 5)).max_defect);

    const Strategy sk = skew_strategy(fixture(), {1.0, 3.0});
    EXPECT_EQ(sk.dim_b, 8);
    EXPECT_NO_THROW(sk.validate(ms()));
    const auto r0 = strategy_report(Game{ms()}, fixture()), r1 = strategy_report(Game{ms()}, sk);
    for (const auto& [ij, b] : r0.bias) EXPECT_NEAR(b, r1.bias.at(ij), 1e-12);
    EXPECT_TRUE(skew_strategy(fixture(), {2.0}).me);
    EXPECT_THROW(skew_strategy(fixture(), {}), ValidationError);
    EXPECT_THROW(skew_strategy(fixture(), {1.0, 0.0}), ValidationError);
}

TEST(FitLogLog, RecoversLine) {
    std::vector<double> xs, ys;
    for (double x : {1e-5, 1e-4, 1e-3, 1e-2}) {
        xs.push_back(x);
        ys.push_back(3.0 * std::pow(x, 0.25));
    }
    const auto f = fit_loglog(xs, ys);
    EXPECT_NEAR(f.slope, 0.25, 1e-12);
    EXPECT_NEAR(std::exp(f.intercept), 3.0, 1e-10);
    EXPECT_EQ(f.points, 4u);
    EXPECT_THROW(fit_loglog({1.0}, {1.0}), ValidationError);
    EXPECT_THROW(fit_loglog({1.0, 1.0}, {1.0, 2.0}), ValidationError);
    EXPECT_THROW(fit_loglog({1.0, 2.0}, {1.0}), ValidationError);
}

TEST(ScalingCell, MaximallyEntangledRoutesAgree) {
    const auto row = scaling_cell(fixture(), ms(), {1.0}, 1e-3, 2);
    EXPECT_EQ(row.rank_p, 4);
    EXPECT_NEAR(row.defect_me, row.defect_general, 1e-9);
    EXPECT_GT(row.eps_perfect, 0.0);
}

TEST(ScalingCell, SkewedRowIsConsistent) {
    const auto row = scaling_cell(fixture(), ms(), {4.0, 2.0, 1.0}, 1e-2, 0);
    EXPECT_GE(row.rank_p, 1);
    EXPECT_LE(row.rank_p, 12);
    EXPECT_GT(row.defect_general, 0.0);
    EXPECT_GT(row.defect_me, 0.0);
    EXPECT_EQ(row.seed, 0u);
}
