#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "repcert/error.hpp"
#include "repcert/linalg.hpp"
#include "repcert/presentations.hpp"

namespace repcert {

/// Ax = b over Z_2. Variables and equations are 0-based here; file formats
/// and generator names are 1-based.
struct LinearSystem {
    int m = 0;
    int n = 0;
    std::vector<std::vector<std::uint8_t>> a;
    std::vector<std::uint8_t> b;

    /// V_i = {j : A_ij = 1}, increasing.
    std::vector<int> context(int i) const {
        std::vector<int> v;
        for (int j = 0; j < n; ++j)
            if (a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) v.push_back(j);
        return v;
    }

    bool in_context(int i, int j) const {
        return a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] != 0;
    }

    /// Variables that occur in at least one equation.
    std::vector<int> used_variables() const {
        std::vector<int> out;
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < m; ++i)
                if (in_context(i, j)) {
                    out.push_back(j);
                    break;
                }
        return out;
    }

    void validate() const {
        if (m < 1 || n < 1) throw ValidationError("linear system: m and n must be positive");
        if (a.size() != static_cast<std::size_t>(m) || b.size() != static_cast<std::size_t>(m))
            throw ValidationError("linear system: dimension mismatch");
        for (int i = 0; i < m; ++i) {
            const auto& row = a[static_cast<std::size_t>(i)];
            if (row.size() != static_cast<std::size_t>(n))
                throw ValidationError("linear system: row " + std::to_string(i + 1) +
                                      " has the wrong length");
            bool any = false;
            for (auto v : row) {
                if (v > 1) throw ValidationError("linear system: entries must be bits");
                any = any || v;
            }
            if (!any)
                throw ValidationError("linear system: row " + std::to_string(i + 1) +
                                      " has no variables");
            if (b[static_cast<std::size_t>(i)] > 1)
                throw ValidationError("linear system: entries of b must be bits");
        }
    }

    /// Canonical .lss text.
    std::string to_string() const {
        std::string out = std::to_string(m) + ' ' + std::to_string(n) + '\n';
        for (const auto& row : a) {
            for (std::size_t j = 0; j < row.size(); ++j) out += (j ? " " : "") + std::to_string(row[j]);
            out += '\n';
        }
        for (std::size_t i = 0; i < b.size(); ++i) out += (i ? " " : "") + std::to_string(b[i]);
        out += '\n';
        return out;
    }

    friend bool operator==(const LinearSystem&, const LinearSystem&) = default;
};

/// .lss format: `m n`, then m rows of n bits, then the m bits of b. Blank
/// lines and `#` comments are skipped; `/` also ends a line.
inline LinearSystem parse_linear_system(std::string_view text) {
    struct Tok {
        std::string s;
        std::size_t col;
    };
    struct Line {
        std::size_t number;
        std::vector<Tok> toks;
    };
    std::vector<Line> lines;
    {
        std::size_t number = 1, col = 1;
        Line cur{1, {}};
        std::string tok;
        std::size_t tok_col = 0;
        bool comment = false;
        auto flush_tok = [&] {
            if (!tok.empty()) cur.toks.push_back(Tok{tok, tok_col});
            tok.clear();
        };
        auto flush_line = [&] {
            flush_tok();
            if (!cur.toks.empty()) lines.push_back(cur);
            cur = Line{number, {}};
        };
        for (char c : text) {
            if (c == '\n') {
                comment = false;
                ++number;
                col = 1;
                flush_line();
                continue;
            }
            if (!comment) {
                if (c == '#') {
                    comment = true;
                    flush_tok();
                } else if (c == '/') {
                    flush_line();
                } else if (c == ' ' || c == '\t' || c == '\r') {
                    flush_tok();
                } else {
                    if (tok.empty()) tok_col = col;
                    tok += c;
                }
            }
            ++col;
        }
        flush_line();
    }

    auto parse_int = [](const Tok& t, std::size_t line) {
        int v = 0;
        for (char c : t.s) {
            if (c < '0' || c > '9' || v > 100000000)
                throw ParseError("expected a non-negative integer, got '" + t.s + "'", line, t.col);
            v = v * 10 + (c - '0');
        }
        return v;
    };
    auto parse_bit = [](const Tok& t, std::size_t line) -> std::uint8_t {
        if (t.s == "0") return 0;
        if (t.s == "1") return 1;
        throw ParseError("non-bit entry '" + t.s + "'", line, t.col);
    };

    if (lines.empty()) throw ParseError("empty linear system", 1, 1);
    const Line& head = lines.front();
    if (head.toks.size() != 2)
        throw ParseError("header must be 'm n'", head.number, head.toks.front().col);
    LinearSystem sys;
    sys.m = parse_int(head.toks[0], head.number);
    sys.n = parse_int(head.toks[1], head.number);
    if (sys.m < 1 || sys.n < 1) throw ParseError("m and n must be positive", head.number, 1);
    if (lines.size() != static_cast<std::size_t>(sys.m) + 2) {
        const std::size_t where = lines.back().number;
        throw ParseError("expected " + std::to_string(sys.m + 2) + " non-empty lines, found " +
                             std::to_string(lines.size()),
                         where, 1);
    }
    for (int i = 0; i < sys.m; ++i) {
        const Line& l = lines[static_cast<std::size_t>(i) + 1];
        if (l.toks.size() != static_cast<std::size_t>(sys.n))
            throw ParseError("dimension mismatch: expected " + std::to_string(sys.n) +
                                 " entries, found " + std::to_string(l.toks.size()),
                             l.number, l.toks.front().col);
        std::vector<std::uint8_t> row;
        bool any = false;
        for (const auto& t : l.toks) {
            row.push_back(parse_bit(t, l.number));
            any = any || row.back();
        }
        if (!any) throw ParseError("row with no variables", l.number, l.toks.front().col);
        sys.a.push_back(std::move(row));
    }
    const Line& bl = lines.back();
    if (bl.toks.size() != static_cast<std::size_t>(sys.m))
        throw ParseError("dimension mismatch: b needs " + std::to_string(sys.m) + " entries, found " +
                             std::to_string(bl.toks.size()),
                         bl.number, bl.toks.front().col);
    for (const auto& t : bl.toks) sys.b.push_back(parse_bit(t, bl.number));
    sys.validate();
    return sys;
}

/// Linear-system game; inputs are uniform over {1..m} x {1..n}.
struct Game {
    LinearSystem system;
};

inline std::string variable_name(int j) { return "x" + std::to_string(j + 1); }
inline constexpr const char* j_name = "J";

/// Solution group of Ax = b: generators x_1..x_n, J with J central of order 2,
/// x_j involutions, one product relator per equation and commutators within
/// each context.
inline Presentation solution_group(const LinearSystem& sys) {
    sys.validate();
    Presentation p;
    for (int j = 0; j < sys.n; ++j) p.generators.push_back(variable_name(j));
    p.generators.push_back(j_name);
    const Word jw = Word::generator(j_name);

    p.relators.push_back(Word::generator(j_name, 2));
    for (int j = 0; j < sys.n; ++j) p.relators.push_back(commutator(Word::generator(variable_name(j)), jw));
    for (int j = 0; j < sys.n; ++j) p.relators.push_back(Word::generator(variable_name(j), 2));
    for (int i = 0; i < sys.m; ++i) {
        Word w;
        for (int j : sys.context(i)) w = w * Word::generator(variable_name(j));
        if (sys.b[static_cast<std::size_t>(i)]) w = w * Word::generator(j_name, -1);
        p.relators.push_back(w);
    }
    std::set<std::pair<int, int>> seen;
    for (int i = 0; i < sys.m; ++i) {
        const auto v = sys.context(i);
        for (std::size_t s = 0; s < v.size(); ++s)
            for (std::size_t t = s + 1; t < v.size(); ++t)
                if (seen.insert({v[s], v[t]}).second)
                    p.relators.push_back(commutator(Word::generator(variable_name(v[s])),
                                                    Word::generator(variable_name(v[t]))));
    }
    return p;
}

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

/// Observable-form strategy. The state |psi> = sum_{s,t} lambda_st |s>|t> is
/// stored as its coefficient matrix; expectations are tr(lambda^* A lambda B^T).
struct Strategy {
    Eigen::Index dim_a = 0;
    Eigen::Index dim_b = 0;
    ComplexMatrix state;
    std::map<std::pair<int, int>, ComplexMatrix> alice; ///< (i, j), j in V_i
    std::map<int, ComplexMatrix> bob;                   ///< j
    bool me = false;

    const ComplexMatrix& y(int i, int j) const {
        auto it = alice.find({i, j});
        if (it == alice.end())
            throw ValidationError("strategy: missing observable Y:" + std::to_string(i + 1) + ":" +
                                  std::to_string(j + 1));
        return it->second;
    }
    const ComplexMatrix& x(int j) const {
        auto it = bob.find(j);
        if (it == bob.end())
            throw ValidationError("strategy: missing observable X:" + std::to_string(j + 1));
        return it->second;
    }

    void validate(const LinearSystem& sys) const {
        if (dim_a < 1 || dim_b < 1) throw ValidationError("strategy: dimensions must be positive");
        if (state.rows() != dim_a || state.cols() != dim_b)
            throw ValidationError("strategy: state must be dimA x dimB");
        if (std::abs(state.norm() - 1.0) > tol::exact)
            throw ValidationError("strategy: state is not normalized (||lambda||_F = " +
                                  std::to_string(state.norm()) + ")");
        if (me) {
            if (dim_a != dim_b ||
                (state - identity(dim_a) / std::sqrt(double(dim_a))).norm() > tol::exact)
                throw ValidationError("strategy: me flag set but the state is not I/sqrt(d)");
        }
        auto check_observable = [](const ComplexMatrix& o, Eigen::Index d, const std::string& name) {
            if (o.rows() != d || o.cols() != d)
                throw ValidationError("strategy: observable " + name + " has the wrong shape");
            if (hermitian_deviation(o) > tol::kind || involution_deviation(o) > tol::kind)
                throw ValidationError("strategy: observable " + name +
                                      " is not a +-1 observable");
        };
        for (const auto& [ij, o] : alice) {
            if (ij.first < 0 || ij.first >= sys.m || ij.second < 0 || ij.second >= sys.n ||
                !sys.in_context(ij.first, ij.second))
                throw ValidationError("strategy: Alice observable for a pair outside the contexts");
            check_observable(o, dim_a,
                             "Y:" + std::to_string(ij.first + 1) + ":" + std::to_string(ij.second + 1));
        }
        for (const auto& [j, o] : bob) {
            if (j < 0 || j >= sys.n) throw ValidationError("strategy: Bob observable index out of range");
            check_observable(o, dim_b, "X:" + std::to_string(j + 1));
        }
        for (int i = 0; i < sys.m; ++i) {
            const auto v = sys.context(i);
            ComplexMatrix prod = identity(dim_a);
            for (int j : v) {
                prod = prod * y(i, j);
                x(j);
            }
            const double sign = sys.b[static_cast<std::size_t>(i)] ? -1.0 : 1.0;
            if (normalized_frobenius_norm(prod - sign * identity(dim_a)) > tol::kind)
                throw ValidationError("strategy: context " + std::to_string(i + 1) +
                                      " violates its parity constraint");
            for (std::size_t s = 0; s < v.size(); ++s)
                for (std::size_t t = s + 1; t < v.size(); ++t) {
                    const auto& p = y(i, v[s]);
                    const auto& q = y(i, v[t]);
                    if (normalized_frobenius_norm(p * q - q * p) > tol::kind)
                        throw ValidationError("strategy: context " + std::to_string(i + 1) +
                                              " has non-commuting observables");
                }
        }
    }
};

/// <psi| A (x) B |psi> for the coefficient matrix lambda.
inline Complex expectation(const ComplexMatrix& lambda, const ComplexMatrix& a, const ComplexMatrix& b) {
    return (lambda.adjoint() * a * lambda * b.transpose()).trace();
}

struct StrategyReport {
    std::map<std::pair<int, int>, double> bias;
    double value = 0.0;
    double eps_perfect = 0.0;
};

inline StrategyReport strategy_report(const Game& game, const Strategy& strat) {
    const LinearSystem& sys = game.system;
    strat.validate(sys);
    StrategyReport r;
    double total = 0.0;
    for (int i = 0; i < sys.m; ++i) {
        const auto v = sys.context(i);
        total += double(sys.n) - double(v.size());
        for (int j : v) {
            const double b = expectation(strat.state, strat.y(i, j), strat.x(j)).real();
            r.bias[{i, j}] = b;
            const double p = (1.0 + b) / 2.0;
            total += p;
            r.eps_perfect = std::max(r.eps_perfect, 1.0 - p);
        }
    }
    r.value = total / (double(sys.m) * double(sys.n));
    return r;
}

/// Bob's reduced density matrix rho = (lambda^* lambda)^T, so that
/// tr(B rho) = <psi| 1 (x) B |psi>.
inline ComplexMatrix reduced_density(const ComplexMatrix& lambda) {
    if (std::abs(lambda.norm() - 1.0) > tol::exact)
        throw ValidationError("reduced_density: state is not normalized");
    return (lambda.adjoint() * lambda).transpose();
}

inline ComplexMatrix reduced_density(const Strategy& strat) { return reduced_density(strat.state); }

/// lambda -> UA lambda UB^T, Y -> UA Y UA^*, X -> UB X UB^*; preserves every bias.
inline Strategy conjugate_strategy(const Strategy& s, const ComplexMatrix& ua, const ComplexMatrix& ub) {
    if (ua.rows() != s.dim_a || ua.cols() != s.dim_a || ub.rows() != s.dim_b || ub.cols() != s.dim_b)
        throw ValidationError("conjugate_strategy: unitary dimensions do not match");
    Strategy out = s;
    out.state = ua * s.state * ub.transpose();
    for (auto& [k, o] : out.alice) o = ua * o * ua.adjoint();
    for (auto& [k, o] : out.bob) o = ub * o * ub.adjoint();
    out.me = s.dim_a == s.dim_b &&
             (out.state - identity(s.dim_a) / std::sqrt(double(s.dim_a))).norm() <= tol::exact;
    if (out.me) out.state = identity(s.dim_a) / std::sqrt(double(s.dim_a));
    return out;
}

// ---------------------------------------------------------------------------
// Fixtures and classical strategies
// ---------------------------------------------------------------------------

/// 3x3 Mermin-Peres grid: rows, then columns; only the last column has odd parity.
inline LinearSystem magic_square_system() {
    LinearSystem sys;
    sys.m = 6;
    sys.n = 9;
    const int contexts[6][3] = {{0, 1, 2}, {3, 4, 5}, {6, 7, 8}, {0, 3, 6}, {1, 4, 7}, {2, 5, 8}};
    for (const auto& c : contexts) {
        std::vector<std::uint8_t> row(9, 0);
        for (int j : c) row[static_cast<std::size_t>(j)] = 1;
        sys.a.push_back(row);
    }
    sys.b = {0, 0, 0, 0, 0, 1};
    return sys;
}

/// Two-qubit Pauli operators of the magic square, row-major.
inline std::vector<ComplexMatrix> magic_square_operators() {
    using namespace pauli;
    return {kron(x(), i2()), kron(i2(), x()), kron(x(), x()),
            kron(i2(), z()), kron(z(), i2()), kron(z(), z()),
            kron(x(), z()),  kron(z(), x()),  kron(y(), y())};
}

inline std::pair<LinearSystem, Strategy> magic_square_fixture() {
    LinearSystem sys = magic_square_system();
    const auto ops = magic_square_operators();
    Strategy s;
    s.dim_a = s.dim_b = 4;
    s.state = identity(4) / 2.0;
    s.me = true;
    for (int j = 0; j < 9; ++j) s.bob[j] = ops[static_cast<std::size_t>(j)];
    for (int i = 0; i < sys.m; ++i)
        for (int j : sys.context(i)) s.alice[{i, j}] = ops[static_cast<std::size_t>(j)].transpose();
    return {std::move(sys), std::move(s)};
}

/// Deterministic d = 1 strategy: Bob answers x_j, Alice answers y_ij.
inline Strategy deterministic_strategy(const LinearSystem& sys, const std::vector<std::uint8_t>& bob_bits,
                                       const std::map<std::pair<int, int>, std::uint8_t>& alice_bits) {
    Strategy s;
    s.dim_a = s.dim_b = 1;
    s.state = identity(1);
    s.me = true;
    auto scalar = [](std::uint8_t bit) {
        ComplexMatrix m(1, 1);
        m(0, 0) = bit ? -1.0 : 1.0;
        return m;
    };
    for (int j = 0; j < sys.n; ++j) s.bob[j] = scalar(bob_bits.at(static_cast<std::size_t>(j)));
    for (int i = 0; i < sys.m; ++i)
        for (int j : sys.context(i)) s.alice[{i, j}] = scalar(alice_bits.at({i, j}));
    return s;
}

struct ClassicalOptimum {
    double value = 0.0;
    std::vector<std::uint8_t> bob;
    std::map<std::pair<int, int>, std::uint8_t> alice;
};

/// Best deterministic strategy by enumerating Bob's 2^n assignments; Alice
/// best-responds per equation by copying Bob and flipping her last answer
/// when the parity is wrong. n <= 20.
inline ClassicalOptimum classical_optimum(const LinearSystem& sys) {
    sys.validate();
    if (sys.n > 20) throw ValidationError("classical_optimum: n must be <= 20");
    ClassicalOptimum best;
    best.value = -1.0;
    for (std::uint32_t mask = 0; mask < (1u << sys.n); ++mask) {
        double wins = 0.0;
        for (int i = 0; i < sys.m; ++i) {
            const auto v = sys.context(i);
            int parity = 0;
            for (int j : v) parity ^= int((mask >> j) & 1u);
            wins += double(sys.n) - (parity == sys.b[static_cast<std::size_t>(i)] ? 0.0 : 1.0);
        }
        const double value = wins / (double(sys.m) * double(sys.n));
        if (value > best.value + 1e-15) {
            best.value = value;
            best.bob.assign(static_cast<std::size_t>(sys.n), 0);
            for (int j = 0; j < sys.n; ++j) best.bob[static_cast<std::size_t>(j)] = (mask >> j) & 1u;
        }
    }
    for (int i = 0; i < sys.m; ++i) {
        const auto v = sys.context(i);
        int parity = 0;
        for (int j : v) {
            best.alice[{i, j}] = best.bob[static_cast<std::size_t>(j)];
            parity ^= best.bob[static_cast<std::size_t>(j)];
        }
        if (parity != sys.b[static_cast<std::size_t>(i)]) best.alice[{i, v.back()}] ^= 1;
    }
    return best;
}

} // namespace repcert
