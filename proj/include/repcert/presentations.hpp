#pragma once

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "repcert/error.hpp"
#include "repcert/linalg.hpp"

namespace repcert {

struct Letter {
    std::string generator;
    int exponent = 1;

    friend bool operator==(const Letter&, const Letter&) = default;
    friend auto operator<=>(const Letter&, const Letter&) = default;
};

/// Element of the free group on named generators, always kept freely reduced:
/// adjacent letters never share a generator and no exponent is zero.
class Word {
public:
    Word() = default;
    explicit Word(const std::vector<Letter>& letters) {
        for (const auto& l : letters) push(l);
    }
    Word(std::initializer_list<Letter> letters) : Word(std::vector<Letter>(letters)) {}

    static Word generator(std::string name, int exponent = 1) {
        return Word({Letter{std::move(name), exponent}});
    }

    const std::vector<Letter>& letters() const noexcept { return letters_; }
    bool empty() const noexcept { return letters_.empty(); }

    /// Length in the free group: sum of |exponent|.
    std::size_t length() const noexcept {
        std::size_t n = 0;
        for (const auto& l : letters_) n += static_cast<std::size_t>(std::abs(l.exponent));
        return n;
    }

    Word inverse() const {
        Word w;
        for (auto it = letters_.rbegin(); it != letters_.rend(); ++it)
            w.letters_.push_back(Letter{it->generator, -it->exponent});
        return w;
    }

    friend Word operator*(const Word& a, const Word& b) {
        Word w = a;
        for (const auto& l : b.letters_) w.push(l);
        return w;
    }

    /// Space-separated `name` / `name^k`; the empty word prints as `1`.
    std::string to_string() const {
        if (letters_.empty()) return "1";
        std::string out;
        for (const auto& l : letters_) {
            if (!out.empty()) out += ' ';
            out += l.generator;
            if (l.exponent != 1) out += '^' + std::to_string(l.exponent);
        }
        return out;
    }

    friend bool operator==(const Word&, const Word&) = default;
    friend auto operator<=>(const Word&, const Word&) = default;

private:
    void push(const Letter& l) {
        if (l.exponent == 0) return;
        if (!letters_.empty() && letters_.back().generator == l.generator) {
            letters_.back().exponent += l.exponent;
            if (letters_.back().exponent == 0) letters_.pop_back();
            return;
        }
        letters_.push_back(l);
    }

    std::vector<Letter> letters_;
};

/// Commutator a b a^-1 b^-1.
inline Word commutator(const Word& a, const Word& b) { return a * b * a.inverse() * b.inverse(); }

/// Finitely-presented group <S : R>; relators are words equal to the identity.
struct Presentation {
    std::vector<std::string> generators;
    std::vector<Word> relators;

    bool has_generator(std::string_view name) const {
        return std::find(generators.begin(), generators.end(), name) != generators.end();
    }

    /// Checks that generator names are distinct and that relators only use them.
    void validate() const {
        std::set<std::string> seen;
        for (const auto& g : generators)
            if (!seen.insert(g).second) throw ValidationError("duplicate generator '" + g + "'");
        for (std::size_t i = 0; i < relators.size(); ++i)
            for (const auto& l : relators[i].letters())
                if (!seen.count(l.generator))
                    throw ValidationError("relator " + std::to_string(i + 1) +
                                          " uses undeclared generator '" + l.generator + "'");
    }

    /// Canonical .grp text; parse_presentation(to_string()) reproduces *this.
    std::string to_string() const {
        std::string out = "generators:";
        for (const auto& g : generators) out += ' ' + g;
        out += "\nrelators:";
        for (std::size_t i = 0; i < relators.size(); ++i) {
            out += (i == 0 ? " " : "; ");
            out += relators[i].to_string();
        }
        out += '\n';
        return out;
    }

    friend bool operator==(const Presentation&, const Presentation&) = default;
};

namespace detail {

inline bool valid_generator_name(std::string_view s) {
    if (s.empty() || !std::isalpha(static_cast<unsigned char>(s[0]))) return false;
    return std::all_of(s.begin() + 1, s.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
    });
}

struct Cursor {
    std::string_view text;
    std::size_t pos = 0;
    std::size_t line = 1;
    std::size_t col = 1;

    bool done() const { return pos >= text.size(); }
    char peek() const { return text[pos]; }
    void advance() {
        if (text[pos] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
        ++pos;
    }
};

} // namespace detail

/// Parses the line-oriented .grp format:
///
///     generators: a b c
///     relators: a^2; b^2; a b a^-1 b^-1
///
/// Blank lines and lines starting with `#` are ignored. The relator list may
/// continue over several lines. `1` denotes the empty word.
inline Presentation parse_presentation(std::string_view text) {
    using detail::Cursor;
    Presentation p;
    Cursor cur{text};

    auto skip_inline_ws = [&] {
        while (!cur.done() && (cur.peek() == ' ' || cur.peek() == '\t' || cur.peek() == '\r'))
            cur.advance();
    };
    auto skip_blank_and_comments = [&] {
        for (;;) {
            skip_inline_ws();
            if (cur.done()) return;
            if (cur.peek() == '\n') {
                cur.advance();
                continue;
            }
            if (cur.peek() == '#') {
                while (!cur.done() && cur.peek() != '\n') cur.advance();
                continue;
            }
            return;
        }
    };
    auto expect_keyword = [&](std::string_view kw) {
        skip_blank_and_comments();
        if (text.substr(cur.pos, kw.size()) != kw)
            throw ParseError("expected '" + std::string(kw) + "'", cur.line, cur.col);
        for (std::size_t i = 0; i < kw.size(); ++i) cur.advance();
    };
    auto read_token = [&]() {
        const std::size_t start = cur.pos;
        while (!cur.done() && !std::isspace(static_cast<unsigned char>(cur.peek())) &&
               cur.peek() != ';')
            cur.advance();
        return text.substr(start, cur.pos - start);
    };

    expect_keyword("generators:");
    std::set<std::string> declared;
    for (;;) {
        skip_inline_ws();
        if (cur.done() || cur.peek() == '\n') break;
        const std::size_t line = cur.line, col = cur.col;
        const auto tok = read_token();
        if (!detail::valid_generator_name(tok))
            throw ParseError("invalid generator name '" + std::string(tok) + "'", line, col);
        if (!declared.insert(std::string(tok)).second)
            throw ParseError("duplicate generator '" + std::string(tok) + "'", line, col);
        p.generators.emplace_back(tok);
    }

    expect_keyword("relators:");
    std::vector<Letter> current;
    bool current_has_tokens = false;
    std::size_t word_line = cur.line, word_col = cur.col;
    auto finish_word = [&](bool at_end) {
        if (!current_has_tokens) {
            // Only a trailing empty segment (or an empty list) is allowed.
            if (at_end) return;
            throw ParseError("empty relator", word_line, word_col);
        }
        p.relators.emplace_back(current);
        current.clear();
        current_has_tokens = false;
    };

    for (;;) {
        while (!cur.done() && std::isspace(static_cast<unsigned char>(cur.peek()))) cur.advance();
        if (cur.done()) {
            finish_word(true);
            break;
        }
        if (cur.peek() == '#') {
            while (!cur.done() && cur.peek() != '\n') cur.advance();
            continue;
        }
        if (cur.peek() == ';') {
            finish_word(false);
            cur.advance();
            word_line = cur.line;
            word_col = cur.col;
            continue;
        }
        const std::size_t line = cur.line, col = cur.col;
        if (!current_has_tokens) {
            word_line = line;
            word_col = col;
        }
        const auto tok = read_token();
        current_has_tokens = true;
        if (tok == "1") continue;
        const auto caret = tok.find('^');
        const std::string_view name = tok.substr(0, caret);
        if (!detail::valid_generator_name(name))
            throw ParseError("invalid token '" + std::string(tok) + "'", line, col);
        if (!declared.count(std::string(name)))
            throw ParseError("undeclared generator '" + std::string(name) + "'", line, col);
        int exponent = 1;
        if (caret != std::string_view::npos) {
            const std::string digits(tok.substr(caret + 1));
            char* end = nullptr;
            const long v = std::strtol(digits.c_str(), &end, 10);
            if (digits.empty() || *end != '\0' || v == 0 || v > std::numeric_limits<int>::max() ||
                v < std::numeric_limits<int>::min())
                throw ParseError("invalid exponent in '" + std::string(tok) + "'", line,
                                 col + caret + 1);
            exponent = static_cast<int>(v);
        }
        current.push_back(Letter{std::string(name), exponent});
    }
    return p;
}

// ---------------------------------------------------------------------------
// Representations
// ---------------------------------------------------------------------------

/// Assignment generator -> unitary of a fixed dimension, i.e. a homomorphism
/// from the free group on the presentation's generators.
class Representation {
public:
    Representation(Presentation presentation, Eigen::Index dim,
                   std::map<std::string, ComplexMatrix> images)
        : presentation_(std::move(presentation)), dim_(dim), images_(std::move(images)) {
        presentation_.validate();
        if (dim_ < 1) throw ValidationError("representation dimension must be positive");
        if (images_.size() != presentation_.generators.size())
            throw ValidationError("representation must assign exactly one image per generator");
        for (const auto& g : presentation_.generators) {
            auto it = images_.find(g);
            if (it == images_.end())
                throw ValidationError("representation is missing an image for '" + g + "'");
            if (it->second.rows() != dim_ || it->second.cols() != dim_)
                throw ValidationError("image of '" + g + "' has the wrong dimension");
            const double dev = unitary_deviation(it->second);
            if (dev > tol::kind)
                throw ValidationError("image of '" + g + "' is not unitary (deviation " +
                                      std::to_string(dev) + ")");
        }
    }

    const Presentation& presentation() const noexcept { return presentation_; }
    Eigen::Index dim() const noexcept { return dim_; }
    const std::map<std::string, ComplexMatrix>& images() const noexcept { return images_; }

    const ComplexMatrix& image(const std::string& generator) const {
        auto it = images_.find(generator);
        if (it == images_.end()) throw ValidationError("unknown generator '" + generator + "'");
        return it->second;
    }

private:
    Presentation presentation_;
    Eigen::Index dim_;
    std::map<std::string, ComplexMatrix> images_;
};

inline Representation trivial_representation(const Presentation& p, Eigen::Index dim) {
    std::map<std::string, ComplexMatrix> images;
    for (const auto& g : p.generators) images.emplace(g, identity(dim));
    return Representation(p, dim, std::move(images));
}

/// Image of a word; negative exponents use the adjoint.
inline ComplexMatrix evaluate_word(const Representation& rep, const Word& w) {
    ComplexMatrix out = identity(rep.dim());
    for (const auto& l : w.letters()) {
        const ComplexMatrix& g = rep.image(l.generator);
        const int reps = std::abs(l.exponent);
        if (l.exponent > 0) {
            for (int k = 0; k < reps; ++k) out = out * g;
        } else {
            const ComplexMatrix gi = g.adjoint();
            for (int k = 0; k < reps; ++k) out = out * gi;
        }
    }
    return out;
}

/// ||phi(w) - 1||_f
inline double word_separation(const Representation& rep, const Word& w) {
    return normalized_frobenius_norm(evaluate_word(rep, w) - identity(rep.dim()));
}

struct DefectReport {
    std::vector<double> per_relator;
    double max_defect = 0.0;
    std::vector<std::pair<Word, double>> separations;
};

inline DefectReport rep_defect(const Representation& rep,
                               const std::vector<Word>& separation_words = {}) {
    DefectReport out;
    for (const auto& r : rep.presentation().relators) {
        const double d = word_separation(rep, r);
        out.per_relator.push_back(d);
        out.max_defect = std::max(out.max_defect, d);
    }
    for (const auto& w : separation_words) out.separations.emplace_back(w, word_separation(rep, w));
    return out;
}

struct SeparationReport {
    bool separated = true;
    std::vector<double> values;
};

/// True iff ||phi(w) - 1||_f >= delta for every w in `words`. A positive answer
/// only says this (dim, defect, delta) triple is feasible.
inline SeparationReport separation_check(const Representation& rep, const std::vector<Word>& words,
                                         double delta) {
    if (!(delta > 0.0 && delta <= 2.0))
        throw ValidationError("separation_check: delta must lie in (0, 2]");
    SeparationReport out;
    for (const auto& w : words) {
        const double v = word_separation(rep, w);
        out.values.push_back(v);
        if (v < delta) out.separated = false;
    }
    return out;
}

/// Pulls `rep` back along the map sending each source generator to a word over
/// rep's generators.
inline Representation transport(const Representation& rep,
                                const std::map<std::string, Word>& word_map,
                                const Presentation& source) {
    std::map<std::string, ComplexMatrix> images;
    for (const auto& g : source.generators) {
        auto it = word_map.find(g);
        if (it == word_map.end())
            throw ValidationError("transport: no word given for source generator '" + g + "'");
        for (const auto& l : it->second.letters())
            if (!rep.presentation().has_generator(l.generator))
                throw ValidationError("transport: word for '" + g + "' uses unknown generator '" +
                                      l.generator + "'");
        images.emplace(g, evaluate_word(rep, it->second));
    }
    return Representation(source, rep.dim(), std::move(images));
}

/// phi (+) psi over the same presentation.
inline Representation direct_sum(const Representation& a, const Representation& b) {
    if (!(a.presentation() == b.presentation()))
        throw ValidationError("direct_sum: representations use different presentations");
    std::map<std::string, ComplexMatrix> images;
    for (const auto& [g, m] : a.images()) images.emplace(g, direct_sum(m, b.image(g)));
    return Representation(a.presentation(), a.dim() + b.dim(), std::move(images));
}

/// Entry-wise complex conjugate representation.
inline Representation conjugate(const Representation& rep) {
    std::map<std::string, ComplexMatrix> images;
    for (const auto& [g, m] : rep.images()) images.emplace(g, m.conjugate());
    return Representation(rep.presentation(), rep.dim(), std::move(images));
}

/// s -> V^* phi(s) V
inline Representation change_basis(const Representation& rep, const ComplexMatrix& v) {
    std::map<std::string, ComplexMatrix> images;
    for (const auto& [g, m] : rep.images()) images.emplace(g, v.adjoint() * m * v);
    return Representation(rep.presentation(), rep.dim(), std::move(images));
}

/// s -> phi(s)^{(x) n}
inline Representation tensor_power(const Representation& rep, int n) {
    if (n < 1) throw ValidationError("tensor_power: n must be >= 1");
    std::map<std::string, ComplexMatrix> images;
    Eigen::Index dim = rep.dim();
    for (const auto& [g, m] : rep.images()) {
        ComplexMatrix acc = m;
        for (int k = 1; k < n; ++k) acc = kron(acc, m);
        images.emplace(g, std::move(acc));
    }
    for (int k = 1; k < n; ++k) dim *= rep.dim();
    return Representation(rep.presentation(), dim, std::move(images));
}

// ---------------------------------------------------------------------------
// Partial multiplication tables and the eta defect
// ---------------------------------------------------------------------------

/// Finite subset E of a group containing the identity, with the products
/// xy that land back in E.
struct PartialGroupTable {
    std::vector<std::string> elements;
    std::string identity;
    std::map<std::pair<std::string, std::string>, std::string> products;

    void validate() const {
        std::set<std::string> labels;
        for (const auto& e : elements)
            if (!labels.insert(e).second) throw ValidationError("duplicate element '" + e + "'");
        if (!labels.count(identity))
            throw ValidationError("identity '" + identity + "' is not among the elements");
        for (const auto& [xy, z] : products) {
            if (!labels.count(xy.first) || !labels.count(xy.second) || !labels.count(z))
                throw ValidationError("product table references an unknown label");
            if (xy.first == identity && z != xy.second)
                throw ValidationError("product e*" + xy.second + " must equal " + xy.second);
            if (xy.second == identity && z != xy.first)
                throw ValidationError("product " + xy.first + "*e must equal " + xy.first);
        }
    }
};

struct EtaDefect {
    double epsilon = 0.0;
    /// +infinity when E has a single element.
    double delta = std::numeric_limits<double>::infinity();
};

/// Multiplicativity defect and minimum separation of phi : E -> U(C^d).
inline EtaDefect eta_defect(const PartialGroupTable& table,
                            const std::map<std::string, ComplexMatrix>& phi) {
    table.validate();
    Eigen::Index dim = -1;
    for (const auto& e : table.elements) {
        auto it = phi.find(e);
        if (it == phi.end()) throw ValidationError("eta_defect: no image for '" + e + "'");
        require_square(it->second, "eta_defect");
        if (dim < 0) dim = it->second.rows();
        if (it->second.rows() != dim)
            throw ValidationError("eta_defect: images have different dimensions");
    }
    const ComplexMatrix& e = phi.at(table.identity);
    if (normalized_frobenius_norm(e - identity(dim)) > tol::exact)
        throw ValidationError("eta_defect: image of the identity is not 1");

    EtaDefect out;
    for (const auto& [xy, z] : table.products) {
        const double v =
            normalized_frobenius_norm(phi.at(xy.first) * phi.at(xy.second) - phi.at(z));
        out.epsilon = std::max(out.epsilon, v);
    }
    for (std::size_t i = 0; i < table.elements.size(); ++i)
        for (std::size_t j = i + 1; j < table.elements.size(); ++j)
            out.delta = std::min(out.delta, normalized_frobenius_norm(phi.at(table.elements[i]) -
                                                                      phi.at(table.elements[j])));
    return out;
}

} // namespace repcert
