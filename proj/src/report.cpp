#include "qls/report.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

#include "qls/fixtures.hpp"
#include "qls/parallel.hpp"
#include "qls/verify.hpp"

namespace qls {

using json = nlohmann::json;

namespace {

json point_json(const PhasePoint& p) { return {{"x", {p.x[0], p.x[1]}}, {"xi", {p.xi[0], p.xi[1]}}}; }

// JSON has no infinity; encode non-finite values as strings.
json num(double v) {
    if (std::isfinite(v)) return v;
    return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

json nums(const RVec& v) {
    json a = json::array();
    for (double x : v) a.push_back(num(x));
    return a;
}

class Clock {
public:
    explicit Clock(json& sink, bool verbose) : sink_(sink), verbose_(verbose) {}
    template <class F>
    auto phase(const std::string& name, F&& f) {
        if (verbose_) std::cerr << "[qls] " << name << " ...\n";
        const auto t0 = std::chrono::steady_clock::now();
        if constexpr (std::is_void_v<decltype(f())>) {
            f();
            record(name, t0);
        } else {
            auto r = f();
            record(name, t0);
            return r;
        }
    }

private:
    void record(const std::string& name, std::chrono::steady_clock::time_point t0) {
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        sink_[name] = s;
        if (verbose_) std::cerr << "[qls] " << name << " " << s << " s\n";
    }
    json& sink_;
    bool verbose_;
};

std::string csv_num(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

struct Invariants {
    json list = json::array();
    bool ok = true;
    void add(const std::string& name, bool pass) {
        list.push_back({{"name", name}, {"pass", pass}});
        ok = ok && pass;
    }
};

json setup_json(const Setup& s) {
    return {{"grid", {{"d", s.grid.d}, {"n", s.grid.n}, {"J", s.grid.J}}},
            {"nonlinearity", s.nl.name},
            {"R_search", to_json(s.search)},
            {"R", s.R},
            {"M", s.M},
            {"M_s", s.M_s},
            {"T_bound", s.T_bound},
            {"T", s.solver.T},
            {"dt", s.solver.dt}};
}

std::string ray_csv(const Ray& ray) {
    std::ostringstream os;
    os << "t,x0,x1,xi0,xi1,length\n";
    for (const auto& s : ray.samples)
        os << csv_num(s.t) << ',' << csv_num(s.p.x[0]) << ',' << csv_num(s.p.x[1]) << ',' << csv_num(s.p.xi[0]) << ','
           << csv_num(s.p.xi[1]) << ',' << csv_num(s.length) << '\n';
    return os.str();
}

struct Writer {
    std::filesystem::path dir;
    bool csv = true;
    RunOutcome* out;
    void text(const std::string& name, const std::string& body) {
        const auto p = dir / name;
        write_text(p.string(), body);
        out->files.push_back(name);
    }
    void table(const std::string& name, const std::string& body) {
        if (csv) text(name, body);
    }
};

void analyze(const RunConfig& c, Clock& clock, json& res, Invariants& inv, Writer& w) {
    const Setup s = clock.phase("setup", [&] { return resolve_setup(c, false); });
    res["setup"] = setup_json(s);
    inv.add("R admissible", s.R > 0.0);
    if (s.R <= 0.0) return;
    const TrapConfig& tc = s.solver.trap;
    const auto g = metric_from_field(s.u0, s.nl);
    const TrapReport trap = clock.phase("compute_L", [&] { return compute_L(*g, s.R, tc, s.M); });
    res["trap"] = to_json(trap);
    inv.add("no failed rays", trap.failed == 0);

    const double ext = exterior_norm(s.u0, s.nl, s.R, tc.s0);
    const bool small_exterior = ext <= tc.epsilon;
    const EscapeCheck esc = clock.phase("escape", [&] { return exterior_escape_check(*g, s.R, tc); });
    res["escape"] = {{"exterior_norm", ext},
                     {"asserted", small_exterior},
                     {"seeds", esc.seeds},
                     {"failures", esc.failures},
                     {"min_radius_over_R", esc.min_radius}};
    if (small_exterior) inv.add("exterior rays escape", esc.failures == 0);

    RayCaps caps;
    caps.R = s.R;
    caps.length_cap = trap.length_cap;
    caps.exit_radius = std::min(tc.exit_factor * 2 * s.R, 0.95 * g->half_width());
    caps.record = true;
    const Ray worst = clock.phase("worst_ray", [&] { return trace_ray(*g, trap.worst_seed, caps, tc.flow); });
    res["worst_ray"] = {{"seed", point_json(trap.worst_seed)},
                        {"status", ray_status_name(worst.status)},
                        {"length_in_2BR", worst.length_in_2BR},
                        {"samples", worst.samples.size()}};
    w.table("ray_worst.csv", ray_csv(worst));

    const NormReport n0 = lp_hs_norm(s.u0, s.solver.s0, s.solver.p);
    const NormReport n1 = lp_hs_norm(s.u0, s.solver.s, s.solver.p);
    res["data_norms"] = {{"s0", to_json(n0)}, {"s", to_json(n1)}};
    std::ostringstream os;
    os << "k,block_s0,block_s\n";
    for (std::size_t k = 0; k < n0.per_scale.size(); ++k)
        os << k << ',' << csv_num(n0.per_scale[k].value) << ',' << csv_num(n1.per_scale[k].value) << '\n';
    w.table("norms.csv", os.str());
}

void solve(const RunConfig& c, Clock& clock, json& res, Invariants& inv, Writer& w) {
    const Setup s = clock.phase("setup", [&] { return resolve_setup(c, true); });
    res["setup"] = setup_json(s);
    res["trap"] = to_json(s.trap);
    inv.add("R admissible", s.R > 0.0);
    if (s.R <= 0.0) return;
    try {
        s.solver.validate(s.grid.d, s.nl.interaction);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("solver: ") + e.what());
    }
    const Solution sol = clock.phase("iterate", [&] { return iterate(s.u0, s.nl, s.solver); });
    const auto& tr = sol.trace;
    res["solution"] = {{"converged", sol.converged},
                       {"diverged", sol.diverged},
                       {"flagged", sol.flagged},
                       {"note", sol.note},
                       {"iterations", tr.diff.size()},
                       {"contraction_ratios", nums(contraction_ratios(tr, 3, 8))},
                       {"final_linf_l2", linf_l2(sol.u)}};
    res["trace"] = to_json(tr);
    inv.add("converged", sol.converged);
    inv.add("inner solves converged", !sol.flagged);
    bool bounded = true, ext_ok = true, nontrapped = true;
    for (std::size_t n = 0; n < tr.norm_s0.size(); ++n) {
        bounded = bounded && tr.norm_s0[n] <= 2 * tr.M;
        ext_ok = ext_ok && tr.exterior_s0[n] <= 2 * s.solver.trap.epsilon;
    }
    for (const auto& t : tr.traps) nontrapped = nontrapped && !t.trapped;
    inv.add("iterates bounded by 2M", bounded);
    inv.add("exterior bounded by 2 epsilon", ext_ok);
    if (s.solver.check_trapping) inv.add("iterates nontrapping", nontrapped);

    std::ostringstream jl;
    for (std::size_t n = 0; n < tr.diff.size(); ++n) {
        json rec = {{"n", n + 1},
                    {"diff", num(tr.diff[n])},
                    {"diff_sigma", num(tr.diff_sigma[n])},
                    {"norm_s", num(tr.norm_s[n])},
                    {"norm_s0", num(tr.norm_s0[n])},
                    {"exterior_s0", num(tr.exterior_s0[n])},
                    {"gmres_iterations", tr.gmres_iterations[n]}};
        if (n < tr.traps.size()) rec["L"] = tr.traps[n].L, rec["trapped"] = tr.traps[n].trapped;
        jl << rec.dump() << '\n';
    }
    w.text("iterations.jsonl", jl.str());

    if (!sol.converged) return;
    const EnvelopeTrace env = clock.phase("envelope", [&] { return envelope_trace(sol, s.solver); });
    res["envelope"] = to_json(env);
    inv.add("envelope ratio finite", std::isfinite(env.max_ratio));
    const LocalEnergyReport le = clock.phase("local_energy", [&] { return local_energy_report(sol, s.nl, s.R); });
    res["local_energy"] = to_json(le);

    std::ostringstream os;
    os << "k,data_block,envelope,solution_block,ratio\n";
    for (std::size_t k = 0; k < env.ratio.size(); ++k)
        os << k << ',' << csv_num(env.data_blocks[k]) << ',' << csv_num(env.envelope[k]) << ','
           << csv_num(env.solution_blocks[k]) << ',' << csv_num(env.ratio[k]) << '\n';
    w.table("norms.csv", os.str());
    std::ostringstream bl;
    bl << "t";
    for (std::size_t k = 0; k < (env.band_l2.empty() ? 0 : env.band_l2[0].size()); ++k) bl << ",band" << k;
    bl << '\n';
    for (std::size_t i = 0; i < env.band_l2.size(); ++i) {
        bl << csv_num(sol.u.times()[i]);
        for (double v : env.band_l2[i]) bl << ',' << csv_num(v);
        bl << '\n';
    }
    w.table("bands.csv", bl.str());
}

void verify(const RunConfig& c, Clock& clock, json& res, Invariants& inv, Writer& w, json& timings) {
    const std::vector<int> ids = parse_criteria(c.text("verify.criteria"));
    SuiteOptions opt;
    opt.full = c.text("verify.level") == "full";
    opt.seed = static_cast<unsigned>(c.integer("run.seed"));
    json list = json::array();
    std::ostringstream os;
    os << "id,name,pass\n";
    for (int id : ids) {
        const Verdict v = clock.phase("criterion_" + std::to_string(id), [&] { return run_criterion(id, opt); });
        list.push_back(to_json(v));
        inv.add(std::to_string(id) + ": " + v.name, v.pass);
        os << id << ",\"" << v.name << "\"," << (v.pass ? "PASS" : "FAIL") << '\n';
    }
    (void)timings;
    res["verdicts"] = list;
    w.table("verify.csv", os.str());
}

void sweep(const RunConfig& c, Clock& clock, json& res, Invariants& inv, Writer& w) {
    const std::string kind = c.text("sweep.kind");
    const Setup s = clock.phase("setup", [&] { return resolve_setup(c, true); });
    res["setup"] = setup_json(s);
    inv.add("R admissible", s.R > 0.0);
    if (s.R <= 0.0) return;
    SolverConfig sc = s.solver;
    sc.check_trapping = false;
    try {
        sc.validate(s.grid.d, s.nl.interaction);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("solver: ") + e.what());
    }
    std::ostringstream os;
    if (kind == "dependence") {
        const RVec deltas = c.real_list("sweep.deltas");
        if (deltas.empty()) throw ConfigError("sweep.deltas: empty list");
        const DependenceTable t = clock.phase("dependence", [&] {
            return continuous_dependence(s.u0, sweep_profile(c), deltas, s.nl, sc);
        });
        res["dependence"] = to_json(t);
        inv.add("all perturbed runs included", t.excluded.empty());
        std::vector<double> sigmas;
        for (const auto& r : t.rows)
            if (std::find(sigmas.begin(), sigmas.end(), r.sigma) == sigmas.end()) sigmas.push_back(r.sigma);
        os << "sigma";
        for (double d : deltas) os << ',' << csv_num(d);
        os << '\n';
        for (double sg : sigmas) {
            os << csv_num(sg);
            for (double d : deltas) {
                double ratio = std::numeric_limits<double>::quiet_NaN();
                for (const auto& r : t.rows)
                    if (r.sigma == sg && r.scale == d && r.included) ratio = r.ratio;
                os << ',' << csv_num(ratio);
            }
            os << '\n';
        }
    } else {
        const int count = static_cast<int>(c.integer("sweep.halvings")) + 1;
        if (count < 1) throw ConfigError("sweep.halvings must be >= 0");
        json rows = json::array();
        os << (kind == "T" ? "T" : "n") << ",converged,iterations,final_diff,max_envelope_ratio,linf_l2\n";
        for (int i = 0; i < count; ++i) {
            RunConfig ci = c;
            SolverConfig si = sc;
            Field u0 = s.u0;
            double key;
            if (kind == "T") {
                si.T = sc.T / std::ldexp(1.0, i);
                si.dt = si.T / static_cast<double>(c.integer("solver.steps"));
                key = si.T;
            } else {
                ci.set("grid.n", std::to_string(s.grid.n << i));
                u0 = initial_data(ci);
                key = static_cast<double>(s.grid.n << i);
            }
            const Solution sol = clock.phase(kind + "_" + std::to_string(i), [&] { return iterate(u0, s.nl, si); });
            const double ratio = sol.converged ? envelope_trace(sol, si).max_ratio : std::nan("");
            const double last = sol.trace.diff.empty() ? 0.0 : sol.trace.diff.back();
            rows.push_back({{kind == "T" ? "T" : "n", key},
                            {"converged", sol.converged},
                            {"iterations", sol.trace.diff.size()},
                            {"final_diff", num(last)},
                            {"max_envelope_ratio", num(ratio)},
                            {"linf_l2", num(linf_l2(sol.u))}});
            inv.add("converged at " + csv_num(key), sol.converged);
            os << csv_num(key) << ',' << (sol.converged ? 1 : 0) << ',' << sol.trace.diff.size() << ','
               << csv_num(last) << ',' << csv_num(ratio) << ',' << csv_num(linf_l2(sol.u)) << '\n';
        }
        res[kind == "T" ? "T_sweep" : "resolution_sweep"] = rows;
    }
    w.table("sweep.csv", os.str());
}

}  // namespace

json to_json(const NormReport& r) {
    json scales = json::array();
    for (const auto& e : r.per_scale) scales.push_back({{"k", e.k}, {"value", num(e.value)}});
    return {{"name", r.name}, {"value", num(r.value)}, {"per_scale", scales}};
}

json to_json(const ProbeResult& r) {
    return {{"estimate", r.estimate_id},     {"observed_ratio", num(r.observed_ratio)},
            {"samples", r.sample_count},     {"skipped", r.skipped},
            {"T_exponent_fit", num(r.T_exponent_fit)}, {"ratio_by_T", nums(r.ratio_by_T)}};
}

json to_json(const TrapReport& r) {
    return {{"M", r.M},
            {"R", r.R},
            {"L", num(r.L)},
            {"trapped", r.trapped},
            {"margin", r.margin},
            {"C0", r.C0},
            {"worst_seed", point_json(r.worst_seed)},
            {"seeds", r.seeds},
            {"capped", r.capped},
            {"failed", r.failed},
            {"left_grid", r.left_grid},
            {"mean_step", r.mean_step},
            {"length_cap", r.length_cap}};
}

json to_json(const RSearch& r) {
    return {{"R", r.R},
            {"admissible", r.admissible},
            {"norm_at_R", r.norm_at_R},
            {"norm_below", r.norm_below},
            {"rejected_R", r.rejected_R}};
}

json to_json(const IterationTrace& tr) {
    json traps = json::array();
    for (const auto& t : tr.traps) traps.push_back({{"L", num(t.L)}, {"trapped", t.trapped}});
    return {{"M", tr.M},
            {"M_s", tr.M_s},
            {"diff", nums(tr.diff)},
            {"diff_sigma", nums(tr.diff_sigma)},
            {"norm_s", nums(tr.norm_s)},
            {"norm_s0", nums(tr.norm_s0)},
            {"exterior_s0", nums(tr.exterior_s0)},
            {"gmres_iterations", tr.gmres_iterations},
            {"traps", traps}};
}

json to_json(const EnvelopeTrace& e) {
    return {{"data_blocks", nums(e.data_blocks)},
            {"envelope", nums(e.envelope)},
            {"solution_blocks", nums(e.solution_blocks)},
            {"ratio", nums(e.ratio)},
            {"max_ratio", num(e.max_ratio)}};
}

json to_json(const LocalEnergyReport& r) {
    return {{"x0", num(r.x0)},          {"incoming", num(r.incoming)}, {"compact", num(r.compact)},
            {"data", num(r.data)},      {"forcing", num(r.forcing)},   {"x0_ratio", num(r.x0_ratio)},
            {"compact_ratio", num(r.compact_ratio)}};
}

json to_json(const DependenceTable& t) {
    json rows = json::array();
    for (const auto& r : t.rows)
        rows.push_back({{"scale", r.scale},
                        {"sigma", r.sigma},
                        {"diff", num(r.diff)},
                        {"data_diff", num(r.data_diff)},
                        {"ratio", num(r.ratio)},
                        {"included", r.included}});
    return {{"rows", rows}, {"excluded", t.excluded}};
}

json to_json(const CommutatorVerdict& v) {
    return {{"samples", v.samples},
            {"min_margin", num(v.min_margin)},
            {"witness", point_json(v.witness)},
            {"inner_min", num(v.inner_min)},
            {"inner_ok", v.inner_ok},
            {"gradient_ratio", num(v.gradient_ratio)},
            {"sup_q", num(v.sup_q)},
            {"sup_grad", num(v.sup_grad)},
            {"pass", v.pass}};
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write '" + path + "'");
    f << text;
    if (!f) throw IoError("write failed for '" + path + "'");
}

RunOutcome run(const RunConfig& cfg, bool verbose) {
    RunOutcome out;
    const long threads = cfg.integer("run.threads");
    if (threads < 0) throw ConfigError("run.threads must be >= 0");
    if (threads > 0) set_thread_count(static_cast<unsigned>(threads));

    const std::filesystem::path dir = cfg.text("output.dir");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");

    const std::string mode = cfg.text("run.mode");
    json res = json::object();
    Invariants inv;
    Clock clock(out.timings, verbose);
    Writer w{dir, cfg.boolean("output.csv"), &out};
    std::string failure;
    try {
        if (mode == "analyze") analyze(cfg, clock, res, inv, w);
        else if (mode == "solve") solve(cfg, clock, res, inv, w);
        else if (mode == "verify") verify(cfg, clock, res, inv, w, out.timings);
        else sweep(cfg, clock, res, inv, w);
    } catch (const ConfigError&) {
        throw;
    } catch (const IoError&) {
        throw;
    } catch (const std::exception& e) {
        failure = e.what();
        inv.add("no exception", false);
    }

    out.exit_code = inv.ok ? kExitOk : kExitNumerical;
    out.report = {{"schema_version", kSchemaVersion},
                  {"mode", mode},
                  {"fixture", cfg.text("run.fixture")},
                  {"config", cfg.echo()},
                  {"results", res},
                  {"invariants", inv.list},
                  {"status", inv.ok ? "ok" : "numerical_failure"},
                  {"exit_code", out.exit_code}};
    if (!failure.empty()) out.report["error"] = failure;
    if (cfg.boolean("output.json")) w.text("report.json", out.report.dump(2) + "\n");
    w.text("timings.json", json{{"mode", mode}, {"threads", thread_count()}, {"seconds", out.timings}}.dump(2) + "\n");
    return out;
}

}  // namespace qls
