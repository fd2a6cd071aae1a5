#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "repcert/certify.hpp"
#include "repcert/kgroup.hpp"

using namespace repcert;
using namespace repcert::kgroup;

namespace {

double chord(int level) { return 2.0 * std::sin(std::numbers::pi * std::ldexp(1.0, -level)); }

std::vector<double> sorted_phases(const ComplexMatrix& u) {
    auto p = eig_decompose(u, SpectralKind::unitary).phases;
    for (auto& t : p) t = t < -1e-9 ? t + 1.0 : std::max(t, 0.0); // [0, 1), tiny negatives to 0
    std::sort(p.begin(), p.end());
    return p;
}

Representation conjugated(const Representation& rep, const ComplexMatrix& v) { return change_basis(rep, v); }

// Random U, block-form Y = [[0, 1], [U, 0]], and an X that sends each eigenvector of Y to
// an eigenvector of Y^2 with the nearest eigenphase (sorted matching), which keeps eps1 small.
struct BlockInput {
    ComplexMatrix y, x;
};

BlockInput adversarial_block(Eigen::Index m, std::mt19937_64& rng, bool structured) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    ComplexVector ev(m);
    for (Eigen::Index i = 0; i < m; ++i)
        ev(i) = std::polar(1.0, 2.0 * std::numbers::pi * (structured ? double(i) / double(m) : unif(rng)));
    const ComplexMatrix w = haar_unitary(m, rng);
    const ComplexMatrix u = w * ev.asDiagonal() * w.adjoint();
    ComplexMatrix y = ComplexMatrix::Zero(2 * m, 2 * m);
    y.topRightCorner(m, m) = identity(m);
    y.bottomLeftCorner(m, m) = u;

    Eigen::ComplexEigenSolver<ComplexMatrix> e1(y), e2(y * y);
    auto order = [](const Eigen::ComplexEigenSolver<ComplexMatrix>& es) {
        std::vector<std::pair<double, Eigen::Index>> v;
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
            double t = std::arg(es.eigenvalues()(i)) / (2.0 * std::numbers::pi);
            v.emplace_back(t < 0 ? t + 1 : t, i);
        }
        std::sort(v.begin(), v.end());
        return v;
    };
    const auto o1 = order(e1), o2 = order(e2);
    // Orthonormalize eigenvectors (degenerate eigenspaces of Y^2) via QR of each sorted family.
    ComplexMatrix v1(2 * m, 2 * m), v2(2 * m, 2 * m);
    for (Eigen::Index k = 0; k < 2 * m; ++k) {
        v1.col(k) = e1.eigenvectors().col(o1[std::size_t(k)].second);
        v2.col(k) = e2.eigenvectors().col(o2[std::size_t(k)].second);
    }
    v1 = polar_unitary(v1);
    v2 = polar_unitary(v2);
    return {y, v2 * v1.adjoint()};
}

Representation perturb_except_c(const Representation& rep, double eta, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::map<std::string, ComplexMatrix> images;
    for (const auto& [g, m] : rep.images())
        images.emplace(g, g == "c" ? m : ComplexMatrix(unitary_exp(random_hermitian(rep.dim(), rng), eta) * m));
    return Representation(rep.presentation(), rep.dim(), std::move(images));
}

} // namespace

TEST(BuildKRep, DimensionAndExactRelators) {
    for (int l = min_level; l <= 9; ++l) {
        const auto k = build_k_rep(l);
        const Eigen::Index d = Eigen::Index(1) << l;
        ASSERT_EQ(k.rep.dim(), d);
        EXPECT_EQ(k.level, l);
        EXPECT_EQ((evaluate_word(k.rep, Word::generator("c")) + identity(d)).cwiseAbs().maxCoeff(), 0.0);
        const auto& rels = k.rep.presentation().relators;
        for (std::size_t r = 1; r < rels.size(); ++r)
            EXPECT_LE(word_separation(k.rep, rels[r]), 1e-10) << "level " << l << " relator " << rels[r].to_string();
        for (const auto& [g, m] : k.rep.images()) EXPECT_LE(unitary_deviation(m), 1e-10) << g;
    }
}

TEST(BuildKRep, ConjugationDefectIsTheChord) {
    for (int l = min_level; l <= max_level; ++l) {
        if (l > 10) continue; // op norm at d = 4096 is slow; levels 11, 12 are covered by the CLI sweep
        const auto k = build_k_rep(l);
        EXPECT_NEAR(conjugation_defect_op(k.rep), chord(l), 1e-10) << l;
        EXPECT_NEAR(construction_defect_op(l), chord(l), 1e-15);
        // operator norm of the relator matches the conjugation defect (X unitary)
        if (l <= 6)
            EXPECT_NEAR(op_norm(evaluate_word(k.rep, conjugation_relator()) - identity(k.rep.dim())), chord(l), 1e-10);
    }
}

TEST(BuildKRep, PhasesAtLevelThree) {
    EXPECT_DOUBLE_EQ(construction_phase(3, 1), 0.25);
    EXPECT_DOUBLE_EQ(construction_phase(3, 2), 0.5);
    EXPECT_DOUBLE_EQ(construction_phase(3, 3), 0.75);
    EXPECT_DOUBLE_EQ(construction_phase(3, 4), 1.0);
    // Y^2 has eigenvalues e^{2 pi i theta_j} on both halves.
    const auto k = build_k_rep(3);
    const ComplexMatrix y = k.rep.image("y");
    const auto p = sorted_phases(y * y);
    const std::vector<double> want{0.0, 0.0, 0.25, 0.25, 0.5, 0.5, 0.75, 0.75};
    ASSERT_EQ(p.size(), want.size());
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(circle_distance_turns(p[i], want[i]), 0.0, 1e-10);
}

TEST(BuildKRep, LevelRange) {
    EXPECT_THROW(build_k_rep(1), ValidationError);
    EXPECT_THROW(build_k_rep(13), ValidationError);
}

TEST(CircleDistance, Basics) {
    EXPECT_DOUBLE_EQ(circle_distance_turns(0.1, 0.9), 0.2);
    EXPECT_DOUBLE_EQ(circle_distance_turns(-0.25, 0.75), 0.0);
    EXPECT_NEAR(arc_distance(0.0, 0.5), std::numbers::pi, 1e-15);
}

TEST(SplitBlockForm, RecoversConstructionPhases) {
    for (int l = 2; l <= 6; ++l) {
        const auto k = build_k_rep(l);
        const auto r = split_block_form(k.rep, rep_defect(k.rep).max_defect);
        const Eigen::Index d = k.rep.dim();
        ASSERT_EQ(r.rep2d.dim(), 2 * d);
        ASSERT_EQ(r.u.rows(), d);
        std::vector<double> want;
        for (int j = 1; j <= d / 2; ++j)
            for (int rep = 0; rep < 2; ++rep) want.push_back(std::fmod(construction_phase(l, j), 1.0));
        std::sort(want.begin(), want.end());
        const auto got = sorted_phases(r.u);
        ASSERT_EQ(got.size(), want.size());
        for (std::size_t i = 0; i < got.size(); ++i)
            EXPECT_LE(circle_distance_turns(got[i], want[i]), 1e-9) << "level " << l << " index " << i;
    }
}

TEST(SplitBlockForm, ExactBlockStructure) {
    const auto k = build_k_rep(3);
    const auto r = split_block_form(k.rep, rep_defect(k.rep).max_defect);
    const Eigen::Index m = k.rep.dim();
    const ComplexMatrix& a = r.rep2d.image("a");
    ComplexMatrix want_a = identity(2 * m);
    want_a.bottomRightCorner(m, m) *= -1.0;
    EXPECT_EQ(a, want_a);
    EXPECT_EQ(r.rep2d.image("b"), -want_a);
    EXPECT_EQ(r.rep2d.image("c"), ComplexMatrix(-identity(2 * m)));
    const ComplexMatrix& y = r.rep2d.image("y");
    EXPECT_EQ(y.topLeftCorner(m, m).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(y.bottomRightCorner(m, m).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(ComplexMatrix(y.topRightCorner(m, m)), identity(m));
    EXPECT_LE(unitary_deviation(r.u), 1e-10);
}

TEST(SplitBlockForm, HaarConjugatedInputKeepsExactRelators) {
    std::mt19937_64 rng(12);
    for (int l = 2; l <= 5; ++l) {
        const auto k = build_k_rep(l);
        const auto rep = conjugated(k.rep, haar_unitary(k.rep.dim(), rng));
        const auto r = split_block_form(rep, rep_defect(rep).max_defect);
        const auto per = rep_defect(r.rep2d).per_relator;
        for (std::size_t i = 1; i < per.size(); ++i) EXPECT_LE(per[i], 1e-8) << "level " << l << " relator " << i;
        EXPECT_NEAR(per[0], rep_defect(k.rep).per_relator[0], 1e-8);
        EXPECT_NEAR(r.measured_constant, 1.0, 1e-8);
    }
}

TEST(SplitBlockForm, PerturbedInputScalesLinearly) {
    const auto k = build_k_rep(3);
    const double base = split_block_form(k.rep, 1.0).output_defect;
    double worst_c = 0.0;
    for (double eta : {1e-2, 1e-3, 1e-4}) {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const auto noisy = perturb_except_c(k.rep, eta, seed);
            const auto r = split_block_form(noisy, rep_defect(noisy).max_defect);
            const double c = std::abs(r.output_defect - base) / eta;
            worst_c = std::max(worst_c, c);
            EXPECT_LE(r.output_defect, 2.0 * r.input_defect + 1e-12);
        }
    }
    RecordProperty("measured_constant", std::to_string(worst_c));
    EXPECT_LE(worst_c, 10.0);
}

TEST(SplitBlockForm, RejectsCNotMinusOne) {
    const auto triv = trivial_representation(k_presentation(), 2);
    EXPECT_THROW(split_block_form(triv, 0.0), ValidationError);
}

TEST(AngleAudit, DepthFormula) {
    EXPECT_EQ(audit_depth(0.3), 0);
    EXPECT_EQ(audit_depth(0.1), 1);      // 0.2 < 0.25
    EXPECT_EQ(audit_depth(1.0 / 64), 3); // 1/32 < 1/16 < ... but not < 1/32
    EXPECT_EQ(audit_depth(1e-3), 7);
}

TEST(AngleAudit, ConstructionPipelineIsSound) {
    for (int l = 2; l <= 8; ++l) {
        const auto k = build_k_rep(l);
        const auto r = split_block_form(k.rep, rep_defect(k.rep).max_defect);
        const auto a = angle_doubling_audit(r.rep2d);
        EXPECT_EQ(a.actual_dim, k.rep.dim());
        EXPECT_NEAR(a.eps1, chord(l), 1e-8) << l;
        EXPECT_EQ(a.certified_lower_bound, std::max<long long>(1, (long long)std::floor(1.0 / (8.0 * a.eps1))));
        EXPECT_LE(a.certified_lower_bound, (long long)k.rep.dim());
        EXPECT_TRUE(a.deviations_within_bound()) << l << ": " << a.max_deviation;
        EXPECT_EQ(a.depth, audit_depth(a.eps1));
        ASSERT_EQ(a.angle_tree.size(), std::size_t(a.depth) + 1);
        for (int lvl = 0; lvl <= a.depth; ++lvl) EXPECT_EQ(a.angle_tree[std::size_t(lvl)].size(), std::size_t(1) << lvl);
        EXPECT_EQ(a.distinct_at_depth, 1LL << a.depth);
        // start phase is the eigenphase of U closest to 0
        EXPECT_LE(std::abs(a.start_phase), 1e-9);
    }
}

TEST(AngleAudit, DirectConstructionMatchesPipelineBound) {
    for (int l = 4; l <= 7; ++l) {
        const auto k = build_k_rep(l);
        const auto a = angle_doubling_audit(k.rep.image("y"), k.rep.image("x"));
        EXPECT_NEAR(a.eps1, chord(l), 1e-10);
        EXPECT_LE(a.certified_lower_bound, a.actual_dim);
        EXPECT_TRUE(a.deviations_within_bound());
    }
}

TEST(AngleAudit, VacuousCase) {
    // U = 1, X = 1: Y^2 = diag(U, U) = 1 while Y != 1, so eps1 = ||Y - 1||_op = 2.
    ComplexMatrix y = ComplexMatrix::Zero(4, 4);
    y.topRightCorner(2, 2) = identity(2);
    y.bottomLeftCorner(2, 2) = identity(2);
    const auto a = angle_doubling_audit(y, identity(4));
    EXPECT_NEAR(a.eps1, 2.0, 1e-12);
    EXPECT_EQ(a.depth, 0);
    EXPECT_EQ(a.certified_lower_bound, 1);
    EXPECT_EQ(a.angle_tree.size(), 1u);
}

TEST(AngleAudit, SoundOnAdversarialInputs) {
    std::mt19937_64 rng(99);
    for (int t = 0; t < 200; ++t) {
        const Eigen::Index m = 1 + t % 24;
        const auto in = adversarial_block(m, rng, t % 2 == 0);
        const auto a = angle_doubling_audit(in.y, in.x);
        EXPECT_LE(a.certified_lower_bound, a.actual_dim) << "trial " << t << " eps1 " << a.eps1;
        EXPECT_TRUE(a.deviations_within_bound()) << "trial " << t;
        EXPECT_LE(a.distinct_at_depth, a.actual_dim) << "trial " << t;
        // fully random X
        const auto b = angle_doubling_audit(in.y, haar_unitary(2 * m, rng));
        EXPECT_LE(b.certified_lower_bound, b.actual_dim);
        EXPECT_TRUE(b.deviations_within_bound());
    }
}

TEST(AngleAudit, RejectsNonBlockForm) {
    std::mt19937_64 rng(4);
    EXPECT_THROW(angle_doubling_audit(haar_unitary(4, rng), identity(4)), ValidationError);
    EXPECT_THROW(angle_doubling_audit(identity(3), identity(3)), ValidationError);
}

TEST(ProfileSweep, SingleRow) {
    const auto rows = profile_sweep(2, 2);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].dim, 4);
    EXPECT_NEAR(rows[0].defect_op, chord(2), 1e-12);
}

TEST(ProfileSweep, RowsAndNormOrdering) {
    const auto rows = profile_sweep(2, 8);
    ASSERT_EQ(rows.size(), 7u);
    for (const auto& r : rows) {
        EXPECT_EQ(r.dim, 1LL << r.level);
        EXPECT_LE(r.defect_f, r.defect_op + 1e-12);
        EXPECT_NEAR(r.defect_f, std::sqrt(0.5) * chord(r.level), 1e-10);
        EXPECT_NEAR(r.product, double(r.dim) * chord(r.level), 1e-8);
        EXPECT_LT(r.product, 2.0 * std::numbers::pi);
    }
    // product increases towards 2 pi
    for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_GT(rows[i].product, rows[i - 1].product);
}

TEST(ProfileSweep, ParallelIsDeterministic) {
    const auto serial = profile_sweep(2, 7, 1);
    const auto par = profile_sweep(2, 7, 4);
    ASSERT_EQ(serial.size(), par.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        EXPECT_EQ(serial[i].level, par[i].level);
        EXPECT_EQ(serial[i].defect_f, par[i].defect_f);
        EXPECT_EQ(serial[i].defect_op, par[i].defect_op);
    }
}

TEST(ProfileSweep, RangeErrors) {
    EXPECT_THROW(profile_sweep(1, 3), ValidationError);
    EXPECT_THROW(profile_sweep(5, 4), ValidationError);
    EXPECT_THROW(profile_sweep(2, 13), ValidationError);
}

TEST(KPresentations, Shapes) {
    EXPECT_EQ(k_presentation().generators.size(), 5u);
    EXPECT_EQ(k_presentation().relators.size(), 8u);
    EXPECT_EQ(k_comm_presentation().relators.size(), 11u);
    EXPECT_EQ(k_presentation().relators[0], conjugation_relator());
}
