#include "runner.hpp"

#include "phaselab/wavefront.hpp"

#include <json.hpp>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

namespace phaselab::cli {

namespace {

using json = nlohmann::json;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string hex64(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// Finite doubles as numbers, non-finite ones as strings so the JSON stays valid.
json jnum(double v) {
    if (std::isfinite(v)) return v;
    return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

struct Report {
    std::map<std::string, std::string> files;  // name -> contents
    std::map<std::string, std::vector<std::string>> schema;
    json summary = json::object();
    std::vector<std::string> failed;  // failed assertions

    void table(const std::string& name, const std::vector<std::string>& columns, const std::string& rows) {
        std::string head;
        for (const auto& c : columns) head += (head.empty() ? "" : ",") + c;
        files[name] = head + "\n" + rows;
        schema[name] = columns;
    }
    void check(bool ok, const std::string& what) {
        if (!ok) failed.push_back(what);
    }
};

// Evaluates f(i) for i in [0, count) on up to `jobs` threads; the first failure by index is rethrown.
template <typename R, typename F>
std::vector<R> sweep(int count, int jobs, F&& f) {
    std::vector<R> out(count);
    std::vector<std::exception_ptr> errs(count);
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int i = next++; i < count; i = next++) {
            try {
                out[i] = f(i);
            } catch (...) {
                errs[i] = std::current_exception();
            }
        }
    };
    const int w = std::max(1, std::min(jobs, count));
    std::vector<std::thread> th;
    for (int k = 1; k < w; ++k) th.emplace_back(worker);
    worker();
    for (auto& t : th) t.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
    return out;
}

void cmd_transform(const Scenario& s, const RunOptions& opt, Report& rep) {
    const PhaseGrid grid = make_grid(s.d, s.n, s.L);
    const SampledState u = build_initial(s, grid);
    const WindowedTransformPlan plan = gaussian_plan(grid);
    const PhaseFunction2D T = fbi(plan, u);
    std::string rows;
    for (int j = 0; j < grid.n; ++j)
        for (int m = 0; m < grid.n; ++m) {
            const cplx v = T.values(j, m);
            rows += fmt(grid.x(j)) + "," + fmt(grid.xi(m)) + "," + fmt(v.real()) + "," + fmt(v.imag()) + "," + fmt(std::abs(v)) + "\n";
        }
    rep.table("transform.csv", {"x", "xi", "re", "im", "abs"}, rows);
    const SampledState back = fbi_adjoint(plan, T);
    const double inv = (back.values / plan.window_norm - u.values).norm() / u.values.norm();
    rep.summary["inversion_error"] = jnum(inv);
    rep.summary["peak_abs"] = jnum(T.values.cwiseAbs().maxCoeff());
    rep.check(inv <= 1e-9, "inversion error " + num(inv) + " > 1e-9");
    if (opt.oracle) {
        const double d = (fbi_direct(plan, u).values - T.values).cwiseAbs().maxCoeff();
        rep.summary["oracle_direct_max_diff"] = jnum(d);
    }
}

void cmd_propagate(const Scenario& s, const RunOptions& opt, Report& rep) {
    const EvolutionProblem prob = build_problem(s);
    const SampledState u0 = build_initial(s, prob.grid);
    const bool dense = prob.grid.n <= dense_size_limit;
    struct Row {
        double norm, norm_defect, unitarity, oracle;
    };
    const auto rows = sweep<Row>(static_cast<int>(s.times.size()), opt.jobs, [&](int i) {
        const double t = s.times[i];
        Row r{0, 0, std::nan(""), std::nan("")};
        SampledState ut;
        if (dense) {
            const OperatorMatrix U = exact_propagator(prob, t);
            const MatC M = U.matrix();
            r.unitarity = (M.adjoint() * M - MatC::Identity(M.rows(), M.cols())).cwiseAbs().maxCoeff();
            ut = apply(U, u0);
            if (opt.oracle) r.oracle = (evolve_state(prob, t, u0).values - ut.values).norm() / u0.norm();
        } else {
            ut = evolve_state(prob, t, u0);
        }
        r.norm = ut.norm();
        r.norm_defect = std::abs(r.norm - u0.norm());
        return r;
    });
    std::string out;
    double worst = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out += fmt(s.times[i]) + "," + fmt(rows[i].norm) + "," + fmt(rows[i].norm_defect) + "," + fmt(rows[i].unitarity);
        if (opt.oracle) out += "," + fmt(rows[i].oracle);
        out += "\n";
        worst = std::max(worst, rows[i].norm_defect);
        if (dense) rep.check(rows[i].unitarity <= 1e-8, "unitarity defect " + num(rows[i].unitarity) + " at t = " + fmt(s.times[i]));
    }
    std::vector<std::string> cols{"t", "norm", "norm_defect", "unitarity_defect"};
    if (opt.oracle) cols.push_back("chebyshev_vs_dense");
    rep.table("propagate.csv", cols, out);
    rep.summary["max_norm_defect"] = jnum(worst);
    rep.summary["initial_norm"] = jnum(u0.norm());
    rep.check(worst <= 1e-8, "norm defect " + num(worst) + " > 1e-8");
}

void cmd_dyson(const Scenario& s, const RunOptions& opt, Report& rep) {
    const EvolutionProblem prob = build_problem(s);
    DysonOptions d;
    d.quad_nodes = s.quad_nodes;
    d.panels = s.panels;
    struct Row {
        std::vector<double> defect;
        double mesh_delta = 0, ode = std::nan("");
    };
    const auto rows = sweep<Row>(static_cast<int>(s.times.size()), opt.jobs, [&](int i) {
        const double t = s.times[i];
        const OperatorMatrix U = exact_propagator(prob, t);
        const OperatorMatrix mu = exact_propagator(unperturbed(prob), t);
        const DysonTruncation terms = dyson_terms(prob, t, s.dyson_N, d);
        Row r;
        r.mesh_delta = terms.mesh_halving_delta;
        for (int N = 0; N <= s.dyson_N; ++N)
            r.defect.push_back(op_norm(MatC(parametrix(mu, terms, N).matrix() - U.matrix())));
        if (opt.oracle) {
            const CorrectorResult c = dyson_corrector(prob, t, CorrectorMethod::ode, s.dyson_N, d);
            r.ode = op_norm(MatC(compose(mu, c.C).matrix() - U.matrix()));
        }
        return r;
    });
    std::string out;
    json per_t = json::array();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (int N = 0; N <= s.dyson_N; ++N) {
            out += fmt(s.times[i]) + "," + std::to_string(N) + "," + fmt(rows[i].defect[N]) + "," + fmt(rows[i].mesh_delta) + "\n";
            if (N > 0)
                rep.check(rows[i].defect[N] < rows[i].defect[N - 1],
                          "defect not decreasing at t = " + fmt(s.times[i]) + ", N = " + std::to_string(N));
        }
        json e = {{"t", s.times[i]}, {"defect_N_max", jnum(rows[i].defect.back())}};
        if (opt.oracle) e["ode_corrector_defect"] = jnum(rows[i].ode);
        per_t.push_back(e);
    }
    rep.table("dyson_convergence.csv", {"t", "N", "op_defect", "mesh_halving_delta"}, out);
    rep.summary["times"] = per_t;
}

void cmd_wavefront(const Scenario& s, const RunOptions& opt, Report& rep) {
    const EvolutionProblem prob = build_problem(s);
    const SampledState u0 = build_initial(s, prob.grid);
    const WindowedTransformPlan plan = gaussian_plan(prob.grid);
    WavefrontOptions wo;
    wo.N_threshold = s.N_threshold;
    const auto reps = sweep<PropagationReport>(static_cast<int>(s.times.size()), opt.jobs, [&](int i) {
        return check_propagation(prob, plan, u0, s.times[i], wo, s.tau_ang);
    });
    std::ostringstream cone;
    write_csv(cone, reps.front().input);
    const std::string cone_text = cone.str();
    rep.files["cone_input.csv"] = cone_text;
    rep.schema["cone_input.csv"] = {"theta", "slope", "residual", "singular", "inconclusive"};
    std::string out;
    for (std::size_t i = 0; i < reps.size(); ++i) {
        const PropagationReport& r = reps[i];
        const std::string name = "cone_t" + std::to_string(i) + ".csv";
        std::ostringstream c;
        write_csv(c, r.output);
        rep.files[name] = c.str();
        rep.schema[name] = rep.schema["cone_input.csv"];
        out += fmt(s.times[i]) + "," + std::to_string(r.input.singular_count()) + "," + std::to_string(r.output.singular_count()) + "," +
               fmt(r.excess_deg) + "," + fmt(r.tolerance_deg) + "," + (r.contained ? "1" : "0") + "," + fmt(r.edge_ratio) + "\n";
        rep.check(r.contained, "output cone exceeds the flowed input cone by " + num(r.excess_deg) + " deg at t = " + fmt(s.times[i]));
        for (const auto& note : r.notes) rep.summary["notes"].push_back("t = " + fmt(s.times[i]) + ": " + note);
    }
    rep.table("wavefront.csv", {"t", "input_singular", "output_singular", "excess_deg", "tolerance_deg", "contained", "edge_ratio"}, out);
    rep.summary["mesh_step_deg"] = reps.front().input.mesh_step_deg();
}

void cmd_kernel(const Scenario& s, const RunOptions& opt, Report& rep) {
    const EvolutionProblem prob = build_problem(s);
    const WindowedTransformPlan plan = gaussian_plan(prob.grid);
    const int N = static_cast<int>(std::floor(s.N_threshold));
    // each profile already runs on all cores
    const auto profs = sweep<DecayProfile>(static_cast<int>(s.times.size()), std::min(opt.jobs, 2), [&](int i) {
        return kernel_estimates(prob, s.times[i], plan, s.k_max, N);
    });
    std::string out;
    for (std::size_t i = 0; i < profs.size(); ++i) {
        const DecayProfile& P = profs[i];
        const std::string name = "kernel_t" + std::to_string(i) + ".csv";
        std::ostringstream c;
        write_csv(c, P);
        rep.files[name] = c.str();
        std::vector<std::string> cols{"bin_center", "count", "off_max"};
        for (int k = 0; k <= s.k_max; ++k) cols.push_back("along_max_k" + std::to_string(k));
        rep.schema[name] = cols;
        const double gain = s.k_max >= 1 ? P.gain[1] : std::nan("");
        out += fmt(s.times[i]) + "," + fmt(P.off_slope) + "," + fmt(P.along_slope[0]) + "," + fmt(gain) + "\n";
        rep.check(P.off_slope <= -N, "off-plane slope " + num(P.off_slope) + " > -" + std::to_string(N) + " at t = " + fmt(s.times[i]));
        if (s.k_max >= 1) rep.check(gain >= 0.5, "k=1 gain " + num(gain) + " < 0.5 at t = " + fmt(s.times[i]));
        for (const auto& note : P.notes) rep.summary["notes"].push_back("t = " + fmt(s.times[i]) + ": " + note);
    }
    rep.table("kernel_estimates.csv", {"t", "off_slope", "along_slope_k0", "gain_k1"}, out);
}

void write_outputs(const Scenario& s, const std::string& command, const RunOptions& opt, Report& rep) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(opt.out_dir, ec);
    if (ec || !fs::is_directory(opt.out_dir)) throw ConfigError("out", "cannot create output directory '" + opt.out_dir + "'");

    json schema = json::object();
    for (const auto& [name, cols] : rep.schema) schema[name] = cols;
    rep.files["schema.json"] = schema.dump(2) + "\n";
    json summary = rep.summary;
    summary["command"] = command;
    summary["scenario_hash"] = s.hash_hex();
    summary["failed_assertions"] = rep.failed;
    rep.files["summary.json"] = summary.dump(2) + "\n";

    json manifest;
    manifest["scenario"] = s.name;
    manifest["scenario_hash"] = s.hash_hex();
    manifest["command"] = command;
    manifest["artifacts"] = json::array();
    for (const auto& [name, body] : rep.files)
        manifest["artifacts"].push_back({{"file", name}, {"bytes", body.size()}, {"fnv1a", hex64(fnv1a(body))}});
    rep.files["manifest.json"] = manifest.dump(2) + "\n";

    for (const auto& [name, body] : rep.files) {
        std::ofstream f(fs::path(opt.out_dir) / name, std::ios::binary);
        f << body;
        if (!f) throw ConfigError("out", "cannot write '" + name + "'");
    }
}

}  // namespace

int run(const std::string& scenario_path, const std::string& command, const RunOptions& opt, std::ostream& log,
        std::ostream& err) {
    try {
        if (opt.jobs < 1) throw ConfigError("jobs", "must be at least 1");
        const Scenario s = load_scenario(scenario_path);
        Report rep;
        if (command == "transform") cmd_transform(s, opt, rep);
        else if (command == "propagate") cmd_propagate(s, opt, rep);
        else if (command == "dyson-convergence") cmd_dyson(s, opt, rep);
        else if (command == "wavefront") cmd_wavefront(s, opt, rep);
        else if (command == "kernel-estimates") cmd_kernel(s, opt, rep);
        else throw ConfigError("command", "unknown command '" + command + "'");
        write_outputs(s, command, opt, rep);
        log << command << ": scenario " << s.hash_hex() << ", " << rep.files.size() << " files in " << opt.out_dir << "\n";
        for (const auto& f : rep.failed) err << "assertion failed: " << f << "\n";
        return opt.assert_mode && !rep.failed.empty() ? exit_assert : exit_ok;
    } catch (const ParseError& e) {
        err << scenario_path << ": parse error: " << e.what() << "\n";
        return exit_config;
    } catch (const ConfigError& e) {
        err << scenario_path << ": config error: " << e.what() << "\n";
        return exit_config;
    } catch (const UnsupportedError& e) {
        err << scenario_path << ": unsupported: " << e.what() << "\n";
        return exit_config;
    } catch (const DimensionError& e) {
        err << scenario_path << ": config error: " << e.what() << "\n";
        return exit_config;
    } catch (const GuardError& e) {
        err << scenario_path << ": guard: " << e.what() << "\n";
        return exit_guard;
    } catch (const Error& e) {
        err << scenario_path << ": numerical guard: " << e.what() << " (increase L and n, or shorten times)\n";
        return exit_guard;
    }
}

}  // namespace phaselab::cli
