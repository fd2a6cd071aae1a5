#pragma once

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "repcert/repcert.hpp"

namespace repcert::cli {

using io::json;

/// Shortest round-trip-free rendering with 12 significant digits, independent
/// of the global locale.
inline std::string fmt(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 12);
    return std::string(buf, res.ptr);
}

inline std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    std::ostringstream ss;
    for (unsigned int i = 0; i < len; ++i) ss << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return ss.str();
}

inline std::vector<double> parse_double_list(const std::string& text, const char* what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        double v = 0.0;
        const char* first = item.data();
        const char* last = item.data() + item.size();
        auto res = std::from_chars(first, last, v);
        if (item.empty() || res.ec != std::errc() || res.ptr != last)
            throw ValidationError(std::string(what) + ": cannot parse '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw ValidationError(std::string(what) + ": empty list");
    return out;
}

/// Subcommand, flags, seed, version, input digests and duration of one run.
class RunManifest {
public:
    explicit RunManifest(std::string subcommand)
        : subcommand_(std::move(subcommand)), start_(std::chrono::steady_clock::now()) {}

    void flag(const std::string& name, const std::string& value) { flags_[name] = value; }
    void seed(std::uint64_t s) { seed_ = s; }

    /// Reads an input file and records its SHA-256.
    std::string input(const std::string& path) {
        std::string text = io::read_file(path);
        inputs_[path] = sha256_hex(text);
        return text;
    }

    json to_json() const {
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        return json{{"subcommand", subcommand_}, {"flags", flags_},   {"seed", seed_},
                    {"version", version},         {"inputs", inputs_}, {"duration_seconds", secs}};
    }

    /// Written as <artifact>.manifest.json.
    void write_next_to(const std::string& artifact) const {
        io::write_file(artifact + ".manifest.json", to_json().dump(2) + "\n");
    }

private:
    std::string subcommand_;
    std::map<std::string, std::string> flags_;
    std::uint64_t seed_ = 0;
    std::map<std::string, std::string> inputs_;
    std::chrono::steady_clock::time_point start_;
};

inline void write_json(const std::string& path, const json& j, const RunManifest& m) {
    io::write_file(path, j.dump(2) + "\n");
    m.write_next_to(path);
}

inline void write_text(const std::string& path, const std::string& text, const RunManifest& m) {
    io::write_file(path, text);
    m.write_next_to(path);
}

inline unsigned jobs_from(int requested) {
    if (requested > 0) return static_cast<unsigned>(requested);
    // CLI11 drops env values that fail the check, so look again
    if (const char* env = std::getenv("REPCERT_JOBS"); env && *env) {
        int v = -1;
        const auto [ptr, ec] = std::from_chars(env, env + std::strlen(env), v);
        if (ec != std::errc{} || *ptr != '\0' || v < 0)
            throw ValidationError(std::string("REPCERT_JOBS: expected a non-negative integer, got '") + env + "'");
        if (v > 0) return static_cast<unsigned>(v);
    }
    return default_jobs();
}

// ---------------------------------------------------------------------------

struct Options {
    // shared
    std::string system, strategy, rep, out, csv, file, json_out, etas = "1e-2,1e-3,1e-4", weights = "1";
    int level = 2, min = 2, max = 9, dim = 4, seeds = 10, iters = 500;
    int jobs = 0;
    std::uint64_t seed = 0;
    bool direct = false, general = false;
};

inline void add_jobs(CLI::App* app, Options& o) {
    app->add_option("--jobs", o.jobs, "Worker threads (default: logical cores)")
        ->envname("REPCERT_JOBS")
        ->check(CLI::NonNegativeNumber);
}

inline Representation load_rep(RunManifest& m, const std::string& path) {
    return io::representation_from_json(io::parse_json(m.input(path), path));
}

inline LinearSystem load_system(RunManifest& m, const std::string& path) {
    return parse_linear_system(m.input(path));
}

inline Strategy load_strategy(RunManifest& m, const std::string& path) {
    return io::strategy_from_json(io::parse_json(m.input(path), path));
}

inline int cmd_kgroup_build(const Options& o, std::ostream& out) {
    RunManifest m("kgroup build");
    m.flag("level", std::to_string(o.level));
    const auto k = kgroup::build_k_rep(o.level);
    const auto d = rep_defect(k.rep);
    out << "level " << o.level << " dim " << k.rep.dim() << " defect_f " << fmt(d.max_defect)
        << " defect_op " << fmt(kgroup::conjugation_defect_op(k.rep)) << "\n";
    if (!o.out.empty()) {
        m.flag("out", o.out);
        write_json(o.out, io::representation_to_json(k.rep), m);
    }
    return 0;
}

inline int cmd_kgroup_sweep(const Options& o, std::ostream& out) {
    RunManifest m("kgroup sweep");
    m.flag("min", std::to_string(o.min));
    m.flag("max", std::to_string(o.max));
    const auto rows = kgroup::profile_sweep(o.min, o.max, jobs_from(o.jobs));
    std::string csv = "level,dim,defect_f,defect_op,product\n";
    for (const auto& r : rows)
        csv += std::to_string(r.level) + "," + std::to_string(r.dim) + "," + fmt(r.defect_f) + "," +
               fmt(r.defect_op) + "," + fmt(r.product) + "\n";
    if (o.csv.empty()) {
        out << csv;
    } else {
        m.flag("csv", o.csv);
        write_text(o.csv, csv, m);
    }
    return 0;
}

inline int cmd_kgroup_audit(const Options& o, std::ostream& out) {
    RunManifest m("kgroup audit");
    Representation rep = o.rep.empty() ? kgroup::build_k_rep(o.level).rep : load_rep(m, o.rep);
    if (o.rep.empty()) m.flag("level", std::to_string(o.level));
    else m.flag("rep", o.rep);
    m.flag("direct", o.direct ? "true" : "false");
    if (!o.direct) rep = kgroup::split_block_form(rep, rep_defect(rep).max_defect).rep2d;
    const auto a = kgroup::angle_doubling_audit(rep);
    out << "eps1 " << fmt(a.eps1) << "\n"
        << "certified_lower_bound " << a.certified_lower_bound << "\n"
        << "actual_dim " << a.actual_dim << "\n"
        << "depth " << a.depth << "\n"
        << "max_deviation " << fmt(a.max_deviation) << "\n"
        << "deviations_within_bound " << (a.deviations_within_bound() ? "true" : "false") << "\n";
    if (!o.json_out.empty()) {
        json tree = json::array();
        for (const auto& lvl : a.angle_tree) {
            json row = json::array();
            for (const auto& n : lvl)
                row.push_back(json{{"target", n.target}, {"phase", n.phase}, {"deviation", n.deviation}});
            tree.push_back(row);
        }
        m.flag("json", o.json_out);
        write_json(o.json_out,
                   json{{"eps1", a.eps1},
                        {"certified_lower_bound", a.certified_lower_bound},
                        {"actual_dim", a.actual_dim},
                        {"depth", a.depth},
                        {"start_phase", a.start_phase},
                        {"max_deviation", a.max_deviation},
                        {"angle_tree", tree}},
                   m);
    }
    return 0;
}

inline int cmd_game_value(const Options& o, std::ostream& out) {
    RunManifest m("game value");
    const LinearSystem sys = load_system(m, o.system);
    const Strategy s = load_strategy(m, o.strategy);
    const auto r = strategy_report(Game{sys}, s);
    std::ostringstream v;
    v.imbue(std::locale::classic());
    v << std::fixed << std::setprecision(9) << r.value;
    out << v.str() << "\n";
    return 0;
}

inline int cmd_game_solution_group(const Options& o, std::ostream& out) {
    RunManifest m("game solution-group");
    m.flag("system", o.system);
    const Presentation p = solution_group(load_system(m, o.system));
    if (o.out.empty()) {
        out << p.to_string();
    } else {
        m.flag("out", o.out);
        write_text(o.out, p.to_string(), m);
    }
    return 0;
}

inline int cmd_game_fixture(const Options& o, std::ostream& out) {
    RunManifest m("game fixture");
    const auto [sys, s] = magic_square_fixture();
    if (o.out.empty()) throw ValidationError("game fixture: --out is required");
    m.flag("out", o.out);
    write_json(o.out, io::strategy_to_json(s), m);
    if (!o.system.empty()) {
        m.flag("system", o.system);
        write_text(o.system, sys.to_string(), m);
    }
    out << "wrote " << o.out << "\n";
    return 0;
}

inline int cmd_rep_to_strategy(const Options& o, std::ostream& out) {
    RunManifest m("certify rep-to-strategy");
    m.flag("rep", o.rep);
    m.flag("system", o.system);
    const Representation rep = load_rep(m, o.rep);
    const LinearSystem sys = load_system(m, o.system);
    const Strategy s = strategy_from_rep(rep, sys);
    const auto r = strategy_report(Game{sys}, s);
    out << "value " << fmt(r.value) << " eps_perfect " << fmt(r.eps_perfect) << "\n";
    if (!o.out.empty()) {
        m.flag("out", o.out);
        write_json(o.out, io::strategy_to_json(s), m);
    }
    return 0;
}

inline int cmd_strategy_to_rep(const Options& o, std::ostream& out) {
    RunManifest m("certify strategy-to-rep");
    m.flag("strategy", o.strategy);
    m.flag("system", o.system);
    m.flag("general", o.general ? "true" : "false");
    const Strategy s = load_strategy(m, o.strategy);
    const LinearSystem sys = load_system(m, o.system);
    Representation rep = trivial_representation(solution_group(sys), 1);
    if (o.general) {
        auto g = rep_from_general_strategy(s, sys);
        out << "rankP " << g.threshold.rank << " a0 " << fmt(g.threshold.a0) << "\n";
        rep = std::move(g.rep);
    } else {
        rep = rep_from_me_strategy(s, sys);
    }
    out << "dim " << rep.dim() << " max_defect " << fmt(rep_defect(rep).max_defect) << "\n";
    if (!o.out.empty()) {
        m.flag("out", o.out);
        write_json(o.out, io::representation_to_json(rep), m);
    }
    return 0;
}

inline int cmd_scaling_sweep(const Options& o, std::ostream& out) {
    RunManifest m("certify scaling-sweep");
    m.flag("system", o.system);
    m.flag("etas", o.etas);
    m.flag("seeds", std::to_string(o.seeds));
    m.flag("weights", o.weights);
    m.seed(o.seed);
    const LinearSystem sys = load_system(m, o.system);
    Strategy base;
    if (!o.strategy.empty()) {
        m.flag("strategy", o.strategy);
        base = load_strategy(m, o.strategy);
    } else if (sys == magic_square_system()) {
        base = magic_square_fixture().second;
    } else {
        throw ValidationError("scaling-sweep: --strategy is required for systems other than the magic square");
    }
    base.validate(sys);
    const auto etas = parse_double_list(o.etas, "--etas");
    for (double e : etas)
        if (!(e > 0.0)) throw ValidationError("--etas: values must be positive");
    const auto weights = parse_double_list(o.weights, "--weights");
    if (o.seeds < 1) throw ValidationError("--seeds must be >= 1");
    const std::size_t cells = etas.size() * static_cast<std::size_t>(o.seeds);
    const auto rows = parallel_map(cells, jobs_from(o.jobs), [&](std::size_t k) {
        const double eta = etas[k / static_cast<std::size_t>(o.seeds)];
        const std::uint64_t seed = o.seed + k % static_cast<std::size_t>(o.seeds);
        return scaling_cell(base, sys, weights, eta, seed);
    });
    std::string csv = "eta,eps_perfect,defect_me,defect_general,rankP\n";
    for (const auto& r : rows)
        csv += fmt(r.eta) + "," + fmt(r.eps_perfect) + "," + fmt(r.defect_me) + "," +
               fmt(r.defect_general) + "," + std::to_string(r.rank_p) + "\n";
    out << "seed " << o.seed << "\n";
    if (o.csv.empty()) {
        out << csv;
    } else {
        m.flag("csv", o.csv);
        write_text(o.csv, csv, m);
    }
    return 0;
}

inline int cmd_seesaw_run(const Options& o, std::ostream& out) {
    RunManifest m("seesaw run");
    m.flag("system", o.system);
    m.flag("dim", std::to_string(o.dim));
    m.flag("seeds", std::to_string(o.seeds));
    m.flag("iters", std::to_string(o.iters));
    m.seed(o.seed);
    const LinearSystem sys = load_system(m, o.system);
    seesaw::OptimizerConfig cfg;
    cfg.dim = o.dim;
    cfg.max_iters = o.iters;
    cfg.seed = o.seed;
    const auto traces = seesaw::optimize_seeds(Game{sys}, cfg, o.seeds, jobs_from(o.jobs));
    std::string csv = "seed,iter,value\n";
    std::size_t best = 0;
    for (std::size_t k = 0; k < traces.size(); ++k) {
        for (std::size_t t = 0; t < traces[k].values.size(); ++t)
            csv += std::to_string(o.seed + k) + "," + std::to_string(t + 1) + "," +
                   fmt(traces[k].values[t]) + "\n";
        if (traces[k].final_value() > traces[best].final_value()) best = k;
    }
    out << "seed " << o.seed << "\n";
    for (std::size_t k = 0; k < traces.size(); ++k)
        out << "seed " << o.seed + k << " value " << fmt(traces[k].final_value()) << " iterations "
            << traces[k].values.size() << (traces[k].converged ? " converged" : " not-converged") << "\n";
    if (!o.csv.empty()) {
        m.flag("csv", o.csv);
        write_text(o.csv, csv, m);
    }
    if (!o.out.empty()) {
        m.flag("out", o.out);
        write_json(o.out, io::strategy_to_json(traces[best].strategy), m);
    }
    return 0;
}

inline int cmd_presentation_check(const Options& o, std::ostream& out) {
    RunManifest m("presentation check");
    const Presentation p = parse_presentation(m.input(o.file));
    out << "generators " << p.generators.size() << "\n"
        << "relators " << p.relators.size() << "\n";
    return 0;
}

/// Parses argv and runs one subcommand. Returns 0 on success, 2 on invalid
/// input or usage, 1 on any other failure.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"repcert: approximate representations and linear-system games"};
    app.require_subcommand(1);
    int (*handler)(const Options&, std::ostream&) = nullptr;
    auto bind = [&](CLI::App* sub, int (*fn)(const Options&, std::ostream&)) {
        sub->callback([&handler, fn] { handler = fn; });
    };

    auto* kgroup = app.add_subcommand("kgroup", "Explicit representations of K")->require_subcommand(1);
    auto* kb = kgroup->add_subcommand("build", "Build the level-l representation");
    kb->add_option("--level", o.level, "Level l in [2, 12]")->required();
    kb->add_option("--out", o.out, "Representation JSON");
    bind(kb, cmd_kgroup_build);
    auto* ks = kgroup->add_subcommand("sweep", "Profile sweep over levels");
    ks->add_option("--min", o.min, "First level")->required();
    ks->add_option("--max", o.max, "Last level")->required();
    ks->add_option("--csv", o.csv, "CSV output (stdout if omitted)");
    add_jobs(ks, o);
    bind(ks, cmd_kgroup_sweep);
    auto* ka = kgroup->add_subcommand("audit", "Angle-doubling audit");
    auto* ka_rep = ka->add_option("--rep", o.rep, "Representation JSON");
    ka->add_option("--level", o.level, "Audit build_k_rep(level) instead of a file")->excludes(ka_rep);
    ka->add_flag("--direct", o.direct, "Input is already in block form");
    ka->add_option("--json", o.json_out, "Write the full report");
    bind(ka, cmd_kgroup_audit);

    auto* game = app.add_subcommand("game", "Linear-system games")->require_subcommand(1);
    auto* gv = game->add_subcommand("value", "Value of a strategy");
    gv->add_option("--system", o.system, "Linear system (.lss)")->required();
    gv->add_option("--strategy", o.strategy, "Strategy JSON")->required();
    bind(gv, cmd_game_value);
    auto* gs = game->add_subcommand("solution-group", "Presentation of the solution group");
    gs->add_option("--system", o.system, "Linear system (.lss)")->required();
    gs->add_option("--out", o.out, "Output .grp (stdout if omitted)");
    bind(gs, cmd_game_solution_group);
    auto* gf = game->add_subcommand("fixture", "Write the magic-square Pauli strategy");
    gf->add_option("--out", o.out, "Strategy JSON")->required();
    gf->add_option("--system", o.system, "Also write the system (.lss)");
    bind(gf, cmd_game_fixture);

    auto* cert = app.add_subcommand("certify", "Representations <-> strategies")->require_subcommand(1);
    auto* cr = cert->add_subcommand("rep-to-strategy", "Maximally entangled strategy from a representation");
    cr->add_option("--rep", o.rep, "Representation JSON")->required();
    cr->add_option("--system", o.system, "Linear system (.lss)")->required();
    cr->add_option("--out", o.out, "Strategy JSON");
    bind(cr, cmd_rep_to_strategy);
    auto* cs = cert->add_subcommand("strategy-to-rep", "Representation from a strategy");
    cs->add_option("--strategy", o.strategy, "Strategy JSON")->required();
    cs->add_option("--system", o.system, "Linear system (.lss)")->required();
    cs->add_flag("--general", o.general, "Use the threshold projection (any state)");
    cs->add_option("--out", o.out, "Representation JSON");
    bind(cs, cmd_strategy_to_rep);
    auto* cw = cert->add_subcommand("scaling-sweep", "Noise sweep of both directions");
    cw->add_option("--system", o.system, "Linear system (.lss)")->required();
    cw->add_option("--strategy", o.strategy, "Base strategy (default: magic-square fixture)");
    cw->add_option("--etas", o.etas, "Comma-separated noise levels");
    cw->add_option("--seeds", o.seeds, "Seeds per noise level");
    cw->add_option("--seed", o.seed, "First seed");
    cw->add_option("--weights", o.weights, "Ancilla Schmidt weights, e.g. 4,2,1");
    cw->add_option("--csv", o.csv, "CSV output (stdout if omitted)");
    add_jobs(cw, o);
    bind(cw, cmd_scaling_sweep);

    auto* ss = app.add_subcommand("seesaw", "See-saw optimization")->require_subcommand(1);
    auto* sr = ss->add_subcommand("run", "Optimize at fixed dimension");
    sr->add_option("--system", o.system, "Linear system (.lss)")->required();
    sr->add_option("--dim", o.dim, "Dimension d")->check(CLI::PositiveNumber);
    sr->add_option("--seeds", o.seeds, "Number of seeds")->check(CLI::PositiveNumber);
    sr->add_option("--seed", o.seed, "First seed");
    sr->add_option("--iters", o.iters, "Iteration budget per seed")->check(CLI::PositiveNumber);
    sr->add_option("--csv", o.csv, "Trace CSV");
    sr->add_option("--out", o.out, "Best strategy JSON");
    add_jobs(sr, o);
    bind(sr, cmd_seesaw_run);

    auto* pres = app.add_subcommand("presentation", "Group presentations")->require_subcommand(1);
    auto* pc = pres->add_subcommand("check", "Parse and summarize a .grp file");
    pc->add_option("--file", o.file, "Presentation (.grp)")->required();
    bind(pc, cmd_presentation_check);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        // Point at the innermost subcommand that was recognized.
        const CLI::App* where = &app;
        while (!where->get_subcommands().empty()) where = where->get_subcommands().front();
        err << where->help();
        return 2;
    }
    try {
        return handler(o, out);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace repcert::cli
