#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "repcert/error.hpp"
#include "repcert/linalg.hpp"
#include "repcert/lsgames.hpp"
#include "repcert/presentations.hpp"

namespace repcert::io {

using json = nlohmann::json;

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << text;
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

/// {"rows", "cols", "re": [...], "im": [...]}, row-major.
inline json matrix_to_json(const ComplexMatrix& m) {
    json re = json::array(), im = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            re.push_back(m(i, j).real());
            im.push_back(m(i, j).imag());
        }
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"re", re}, {"im", im}};
}

inline ComplexMatrix matrix_from_json(const json& j, const std::string& what = "matrix") {
    if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("re"))
        throw ValidationError(what + ": expected {rows, cols, re[, im]}");
    const auto rows = j.at("rows").get<long long>();
    const auto cols = j.at("cols").get<long long>();
    if (rows < 1 || cols < 1) throw ValidationError(what + ": dimensions must be positive");
    const auto& re = j.at("re");
    const json im = j.contains("im") ? j.at("im") : json::array();
    const auto n = static_cast<std::size_t>(rows * cols);
    if (!re.is_array() || re.size() != n || (!im.empty() && im.size() != n))
        throw ValidationError(what + ": entry count does not match rows*cols");
    ComplexMatrix m(rows, cols);
    for (std::size_t k = 0; k < n; ++k)
        m(static_cast<Eigen::Index>(k) / cols, static_cast<Eigen::Index>(k) % cols) =
            Complex(re[k].get<double>(), im.empty() ? 0.0 : im[k].get<double>());
    return m;
}

inline json representation_to_json(const Representation& rep) {
    json images = json::object();
    for (const auto& [g, m] : rep.images()) images[g] = matrix_to_json(m);
    return json{{"presentation", rep.presentation().to_string()}, {"dim", rep.dim()}, {"images", images}};
}

inline Representation representation_from_json(const json& j) {
    try {
        const Presentation p = parse_presentation(j.at("presentation").get<std::string>());
        const auto dim = j.at("dim").get<long long>();
        std::map<std::string, ComplexMatrix> images;
        for (const auto& [g, m] : j.at("images").items())
            images.emplace(g, matrix_from_json(m, "image of " + g));
        return Representation(p, dim, std::move(images));
    } catch (const json::exception& e) {
        throw ValidationError(std::string("representation JSON: ") + e.what());
    }
}

inline json strategy_to_json(const Strategy& s) {
    json obs = json::object();
    for (const auto& [ij, y] : s.alice)
        obs["Y:" + std::to_string(ij.first + 1) + ":" + std::to_string(ij.second + 1)] = matrix_to_json(y);
    for (const auto& [j, x] : s.bob) obs["X:" + std::to_string(j + 1)] = matrix_to_json(x);
    return json{{"dimA", s.dim_a}, {"dimB", s.dim_b}, {"me", s.me},
                {"state", matrix_to_json(s.state)}, {"observables", obs}};
}

inline Strategy strategy_from_json(const json& j) {
    if (j.contains("povm") || j.contains("povms"))
        throw ValidationError("strategy JSON: POVM strategies are not supported; supply the "
                              "projective (observable) form");
    try {
        Strategy s;
        s.dim_a = j.at("dimA").get<long long>();
        s.dim_b = j.at("dimB").get<long long>();
        s.me = j.value("me", false);
        s.state = matrix_from_json(j.at("state"), "state");
        auto index = [](const std::string& t, const std::string& key) {
            if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos || t.size() > 6)
                throw ValidationError("strategy JSON: malformed observable key '" + key + "'");
            const int v = std::stoi(t);
            if (v < 1) throw ValidationError("strategy JSON: indices are 1-based in '" + key + "'");
            return v - 1;
        };
        for (const auto& [key, m] : j.at("observables").items()) {
            if (key.rfind("Y:", 0) == 0) {
                const auto colon = key.find(':', 2);
                if (colon == std::string::npos)
                    throw ValidationError("strategy JSON: malformed observable key '" + key + "'");
                s.alice[{index(key.substr(2, colon - 2), key), index(key.substr(colon + 1), key)}] =
                    matrix_from_json(m, key);
            } else if (key.rfind("X:", 0) == 0) {
                s.bob[index(key.substr(2), key)] = matrix_from_json(m, key);
            } else {
                throw ValidationError("strategy JSON: unknown observable key '" + key + "'");
            }
        }
        return s;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("strategy JSON: ") + e.what());
    }
}

inline json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(what + ": " + e.what());
    }
}

} // namespace repcert::io
