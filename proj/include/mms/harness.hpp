#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mms/config.hpp"
#include "mms/constancy.hpp"
#include "mms/field.hpp"
#include "mms/hajlasz.hpp"
#include "mms/mollify.hpp"
#include "mms/norms.hpp"
#include "mms/poincare.hpp"
#include "mms/space_io.hpp"
#include "mms/version.hpp"

namespace mms {

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// space and field resolution

inline Space space_from_config(const nlohmann::json& spec) {
    std::string family = spec.at("family").get<std::string>();
    if (family == "grid") {
        return generate_grid(spec.at("dim").get<std::size_t>(), spec.at("side").get<std::size_t>());
    }
    if (family == "heisenberg") {
        return generate_heisenberg(spec.at("side").get<std::size_t>(), spec.value("step", 0.0));
    }
    if (family == "snowflake") {
        Space base = space_from_config(spec.at("base"));
        return snowflake(base, spec.at("alpha").get<double>());
    }
    if (family == "graph") {
        std::ifstream is(spec.at("path").get<std::string>());
        if (!is) throw std::runtime_error("graph: cannot open " + spec.at("path").get<std::string>());
        nlohmann::json g;
        is >> g;
        std::size_t n = g.at("n").get<std::size_t>();
        std::vector<GraphEdge> edges;
        for (const auto& e : g.at("edges"))
            edges.push_back({e.at(0).get<std::uint32_t>(), e.at(1).get<std::uint32_t>(),
                             e.at(2).get<double>()});
        return generate_graph(n, edges, g.at("weights").get<std::vector<double>>());
    }
    if (family == "file") {
        return load_space(spec.at("path").get<std::string>());
    }
    throw std::runtime_error("space: unknown family '" + family + "'");
}

/// Named field rules; randomized rules read their own seed key.
inline ScalarField field_from_config(const Space& space, const nlohmann::json& spec) {
    std::string rule = spec.at("rule").get<std::string>();
    if (rule == "constant") return field_constant(space, spec.value("c", 0.0));
    if (rule == "linear") return field_linear(space);
    if (rule == "product") return field_product(space);
    if (rule == "sinlike") return field_sinlike(space);
    if (rule == "distance") {
        if (spec.contains("point")) return field_distance(space, spec.at("point").get<std::size_t>());
        Rng rng(spec.at("seed").get<std::uint64_t>());
        return field_distance(space, rng.below(space.size()));
    }
    if (rule == "noise") return field_noise(space, spec.at("seed").get<std::uint64_t>());
    if (rule == "mollified-noise") {
        double t = spec.value("t", 0.1 * space.diameter());
        return mollify(space, field_noise(space, spec.at("seed").get<std::uint64_t>()), t,
                       spec.value("gamma", 1.0));
    }
    if (rule == "file") return load_field(spec.at("path").get<std::string>());
    throw std::runtime_error("field: unknown rule '" + rule + "'");
}

// ---------------------------------------------------------------------------
// CSV artifacts

inline void write_profiles_csv(const std::string& path,
                               const std::vector<OscillationProfile>& profiles) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << "point,breakpoint,m_value\n";
    for (const auto& prof : profiles)
        for (std::size_t k = 0; k < prof.breakpoints.size(); ++k)
            os << prof.point << "," << fmt17(prof.breakpoints[k]) << "," << fmt17(prof.values[k])
               << "\n";
}

inline void write_curve_csv(const std::string& path, const KappaCurve& curve) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << "value,level_measure,score\n";
    for (std::size_t k = 0; k < curve.size(); ++k)
        os << fmt17(curve.values[k]) << "," << fmt17(curve.level_measures[k]) << ","
           << fmt17(curve.scores[k]) << "\n";
}

// ---------------------------------------------------------------------------
// run

struct RunResult {
    nlohmann::json report;
    int exit_code = 0;  // 0 ok, 2 flagged invariant violation
};

inline nlohmann::json certificate_to_json(const GradientCertificate& cert) {
    nlohmann::json j;
    j["h"] = cert.h;
    j["lpNorm"] = cert.lp_norm;
    j["violation"] = cert.violation;
    j["certifiedNorm"] = cert.certified_norm;
    j["provenance"] = provenance_name(cert.provenance);
    j["iterations"] = cert.iterations;
    j["converged"] = cert.converged;
    j["p"] = cert.p;
    return j;
}

inline RunResult run(const nlohmann::json& config, const std::string& out_dir_override = "") {
    RunResult rr;
    nlohmann::json& report = rr.report;
    report["schema"] = 1;
    report["version"] = kVersion;
    report["config_hash"] = config_hash(config);

    std::string out_dir = out_dir_override.empty() ? config.value("out", "out") : out_dir_override;
    std::filesystem::create_directories(out_dir);
    if (config.contains("threads")) set_threads(config["threads"].get<int>());

    std::unique_ptr<Space> space;
    if (config.contains("space")) space = std::make_unique<Space>(space_from_config(config["space"]));
    auto need_space = [&]() -> const Space& {
        if (!space) throw std::runtime_error("run: operation requires a [space] section");
        return *space;
    };

    std::map<std::string, ScalarField> fields;
    if (config.contains("field"))
        for (const auto& fs : config["field"])
            fields[fs.at("name").get<std::string>()] = field_from_config(need_space(), fs);
    auto need_field = [&](const nlohmann::json& op) -> const ScalarField& {
        std::string name = op.at("field").get<std::string>();
        auto it = fields.find(name);
        if (it == fields.end()) throw std::runtime_error("run: unknown field '" + name + "'");
        return it->second;
    };
    auto op_seed = [&](const nlohmann::json& op) -> std::uint64_t {
        if (op.contains("seed")) return op["seed"].get<std::uint64_t>();
        if (config.contains("seed")) return config["seed"].get<std::uint64_t>();
        throw std::runtime_error("run: randomized operation requires a seed");
    };

    nlohmann::json results = nlohmann::json::array();
    nlohmann::json timings = nlohmann::json::array();
    if (config.contains("op")) {
        int op_index = 0;
        for (const auto& op : config["op"]) {
            auto t0 = std::chrono::steady_clock::now();
            std::string kind = op.at("kind").get<std::string>();
            nlohmann::json res;
            res["kind"] = kind;
            if (kind == "doubling") {
                auto fit = doubling_and_dimension(need_space(), op.value("samples", std::size_t(64)),
                                                  op_seed(op));
                res["cMu"] = fit.c_mu;
                res["dLower"] = fit.d_lower;
                res["dUpper"] = fit.d_upper;
                res["sampleCount"] = fit.sample_count;
            } else if (kind == "profiles") {
                auto profs = profile_all(need_space(), need_field(op));
                std::string path = out_dir + "/profiles_" + std::to_string(op_index) + ".csv";
                write_profiles_csv(path, profs);
                res["csv"] = path;
            } else if (kind == "besov") {
                std::string kernel = op.value("kernel", "V");
                double v = kernel == "V"
                               ? besov_seminorm(need_space(), need_field(op), op.value("s", 1.0),
                                                op.at("p").get<double>())
                               : besov_seminorm(need_space(), need_field(op), op.value("s", 1.0),
                                                op.at("p").get<double>(), BesovKernel::Power,
                                                op.at("d").get<double>());
                res["value"] = v;
            } else if (kind == "commutator") {
                res["value"] = commutator_besov(need_space(), need_field(op), op.at("p").get<double>());
            } else if (kind == "level_measure") {
                res["value"] = level_measure(need_space(), need_field(op), op.at("p").get<double>(),
                                             op.at("kappa").get<double>(), op.value("strict", true));
            } else if (kind == "weak_norm") {
                auto wn = weak_norm(need_space(), need_field(op), op.at("p").get<double>());
                std::string path = out_dir + "/curve_" + std::to_string(op_index) + ".csv";
                write_curve_csv(path, wn.curve);
                res["value"] = wn.norm;
                res["curve_csv"] = path;
                res["tail"] = kappa_curve_tail(wn.curve, op.value("window", 0.05));
            } else if (kind == "kappa_tail") {
                auto wn = weak_norm(need_space(), need_field(op), op.at("p").get<double>());
                res["value"] = kappa_curve_tail(wn.curve, op.value("window", 0.05));
            } else if (kind == "solve_exact") {
                SolveOptions so;
                so.tol = op.value("tol", 1e-8);
                so.max_iter = op.value("max_iter", 500000L);
                so.cap = op.value("cap", std::size_t(512));
                auto cert = solve_exact(need_space(), need_field(op), op.at("p").get<double>(), so);
                res["certificate"] = certificate_to_json(cert);
                if (!cert.converged || cert.violation > 1.0 + 1e-9) rr.exit_code = 2;
            } else if (kind == "maximal_gradient") {
                const Space& sp = need_space();
                const ScalarField& f = need_field(op);
                double p = op.at("p").get<double>();
                double eps = op.value("eps", 0.1 * (p - 1.0));
                ScalarField g = lip_hat_field(sp, f, op.value("window", 3));
                auto cert = maximal_gradient(sp, f, g, p, eps, op.value("c", 7.0));
                res["certificate"] = certificate_to_json(cert);
            } else if (kind == "truncate") {
                const Space& sp = need_space();
                const ScalarField& f = need_field(op);
                double p = op.at("p").get<double>();
                SolveOptions so;
                so.cap = op.value("cap", std::size_t(512));
                auto base = solve_exact(sp, f, p, so);
                auto tr = lipschitz_truncate(sp, f, base.h, op.at("L").get<double>(), p);
                res["lipschitzRatio"] = tr.lipschitz_ratio;
                res["residual"] = certificate_to_json(tr.residual);
            } else if (kind == "mollify") {
                ScalarField out = mollify(need_space(), need_field(op), op.at("t").get<double>(),
                                          op.value("gamma", 1.0));
                std::string path = out_dir + "/mollified_" + std::to_string(op_index) + ".json";
                save_field(out, path);
                res["field_json"] = path;
            } else if (kind == "verify_mollifier") {
                std::vector<double> rg = op.contains("r_grid")
                                             ? op["r_grid"].get<std::vector<double>>()
                                             : std::vector<double>{0.5, 0.25, 0.125, 0.0625};
                auto mb = verify_mollifier_bounds(need_space(), need_field(op),
                                                  op.at("t").get<double>(), op.value("gamma", 1.0),
                                                  rg, op.value("p", 2.0));
                res["ratio_pointwise"] = mb.ratio_pointwise;
                res["ratio_oscillation"] = mb.ratio_oscillation;
                res["ratio_averaged"] = mb.ratio_averaged;
                res["ratio_weak_norm"] = mb.ratio_weak_norm;
                res["skipped_zero_zero"] = mb.skipped_zero_zero;
                res["flagged_zero_denominator"] = mb.flagged_zero_denominator;
                res["b"] = mb.b;
                res["c"] = mb.c;
                if (mb.flagged_zero_denominator > 0) rr.exit_code = 2;
            } else if (kind == "poincare") {
                std::vector<std::pair<std::string, ScalarField>> fam;
                for (const auto& name : op.at("fields")) {
                    std::string fn = name.get<std::string>();
                    auto it = fields.find(fn);
                    if (it == fields.end()) throw std::runtime_error("run: unknown field '" + fn + "'");
                    fam.push_back({fn, it->second});
                }
                auto rep = poincare_sweep(need_space(), fam, op.at("p").get<double>(),
                                          op.value("lambda", 1.0),
                                          op.value("samples", std::size_t(64)), op_seed(op),
                                          op.value("window", 3));
                res["cHat"] = rep.c_hat;
                res["infinite_flags"] = rep.infinite_flags;
                res["evaluated"] = rep.evaluated;
            } else if (kind == "macro_poincare") {
                std::vector<double> ratios = op.contains("ratios")
                                                 ? op["ratios"].get<std::vector<double>>()
                                                 : std::vector<double>{2, 4, 8, 16, 32};
                auto rep = macro_sweep(need_space(), need_field(op), ratios,
                                       op.value("samples", std::size_t(24)), op_seed(op),
                                       op.value("lambda_tilde", 2.0), op.value("p", 2.0));
                res["max_ratio"] = rep.max_ratio;
                res["infinite_flags"] = rep.infinite_flags;
            } else if (kind == "constancy") {
                std::vector<int> levels;
                for (const auto& l : op.at("levels")) levels.push_back(l.get<int>());
                std::string rule = op.at("rule").get<std::string>();
                nlohmann::json rule_spec = op;
                rule_spec["rule"] = rule;
                auto field_rule = [&rule_spec](const Space& sp) {
                    return field_from_config(sp, rule_spec);
                };
                CriticalKernel kernel = op.value("kernel", std::string("critical-V")) == "commutator"
                                            ? CriticalKernel::Commutator
                                            : CriticalKernel::CriticalV;
                auto verdict = detect_constant(op.value("dim", std::size_t(1)), field_rule,
                                               op.at("p").get<double>(), kernel, levels);
                res["verdict"] = verdict_name(verdict.verdict);
                res["a"] = verdict.a;
                res["slope"] = verdict.slope;
                res["relative_slope"] = verdict.relative_slope;
                res["r_squared"] = verdict.r_squared;
            } else if (kind == "maximal") {
                ScalarField out = maximal(need_space(), need_field(op), op.value("q", 1.0));
                std::string path = out_dir + "/maximal_" + std::to_string(op_index) + ".json";
                save_field(out, path);
                res["field_json"] = path;
            } else {
                throw std::runtime_error("run: unknown op kind '" + kind + "'");
            }
            auto t1 = std::chrono::steady_clock::now();
            results.push_back(res);
            timings.push_back(
                std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count());
            ++op_index;
        }
    }
    report["results"] = results;
    report["timings_ms"] = timings;
    std::ofstream os(out_dir + "/report.json");
    os << report.dump(2) << "\n";
    return rr;
}

}  // namespace mms
