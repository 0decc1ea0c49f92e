#include "vem/cli.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "vem/errors.hpp"

namespace vem {

using nlohmann::json;
namespace fs = std::filesystem;

std::string format_double(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, r.ptr);
}

namespace {

// exit codes
constexpr int kOk = 0, kNotConverged = 1, kUsage = 2, kFailure = 3, kAudit = 4;

Mat mat_of(const json& j, const char* what) {
    if (!j.is_array() || j.empty() || !j[0].is_array()) throw ConfigError(std::string(what) + " must be a matrix");
    const int r = int(j.size()), c = int(j[0].size());
    Mat M(r, c);
    for (int i = 0; i < r; ++i) {
        if (int(j[i].size()) != c) throw ConfigError(std::string(what) + " has ragged rows");
        for (int k = 0; k < c; ++k) M(i, k) = j[i][k].get<double>();
    }
    return M;
}

Vec vec_of(const json& j, const char* what) {
    if (!j.is_array()) throw ConfigError(std::string(what) + " must be an array");
    Vec v(j.size());
    for (size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
    return v;
}

json json_of(const Vec& v) {
    json j = json::array();
    for (int i = 0; i < v.size(); ++i) j.push_back(v[i]);
    return j;
}

TerminalMode mode_of(const std::string& s) {
    if (s == "fixed_tf") return TerminalMode::FixedTfWithConstraint;
    if (s == "free_tf") return TerminalMode::FreeTfWithConstraint;
    if (s == "free_state") return TerminalMode::FreeTfFreeState;
    throw ConfigError("unknown mode '" + s + "'");
}

void apply_settings(ProblemSetup& s, const json& j) {
    if (!j.is_object()) return;
    s.N = j.value("nodes", s.N);
    s.tau_end = j.value("tau_end", s.tau_end);
    s.K = j.value("gain", s.K);
    s.k_tf = j.value("gain_tf", s.k_tf);
    s.K_pi = j.value("gain_pi", s.K_pi);
    s.u0 = j.value("u0", s.u0);
    s.K_primary = j.value("gain_primary", s.K_primary);
    s.u0_primary = j.value("u0_primary", s.u0_primary);
    if (j.contains("weights")) {
        const json& w = j["weights"];
        s.W_xf = w.value("W_xf", s.W_xf);
        s.w_H = w.value("w_H", s.w_H);
        s.W_x0 = w.value("W_x0", s.W_x0);
        s.W_lambda = w.value("W_lambda", s.W_lambda);
    }
}

OcpProblem linear_from(const json& j) {
    const Mat A = mat_of(j.at("A"), "A");
    const Mat B = mat_of(j.at("B"), "B");
    const int n = int(A.rows()), m = int(B.cols());
    if (A.cols() != n || B.rows() != n) throw ConfigError("A must be n×n and B n×m");
    const Mat R = j.contains("R") ? mat_of(j["R"], "R") : Mat(Mat::Identity(m, m));
    const Mat Q = j.contains("Q") ? mat_of(j["Q"], "Q") : Mat(Mat::Zero(n, n));
    const Vec x0 = vec_of(j.at("x0"), "x0");
    const Vec target = j.contains("target") ? vec_of(j["target"], "target") : Vec(Vec::Zero(n));
    if (R.rows() != m || R.cols() != m || Q.rows() != n || Q.cols() != n || x0.size() != n || target.size() != n)
        throw ConfigError("linear problem dimensions disagree");
    OcpProblem p = linear_problem(A, B, R, Q, x0, target, j.value("t0", 0.0), j.value("tf", 1.0));
    p.mode = mode_of(j.value("mode", std::string("fixed_tf")));
    const double rho = j.value("time_weight", 0.0);
    const Mat S = j.contains("terminal_weight") ? mat_of(j["terminal_weight"], "terminal_weight")
                                                : Mat(Mat::Zero(n, n));
    if (S.rows() != n || S.cols() != n) throw ConfigError("terminal_weight must be n×n");
    // φ = ½(x − target)ᵀS(x − target) + ρ·t
    p.phi = [S, target, rho](const Vec& x, double t) { return 0.5 * (x - target).dot(S * (x - target)) + rho * t; };
    p.phix = [S, target](const Vec& x, double) { return Vec(S * (x - target)); };
    p.phit = [rho](const Vec&, double) { return rho; };
    p.phixx = [S](const Vec&, double) { return S; };
    p.phixt = [n](const Vec&, double) { return Vec(Vec::Zero(n)); };
    p.phitt = [](const Vec&, double) { return 0.0; };
    // overrides let a file declare Jacobians that disagree with f
    if (j.contains("fx")) {
        const Mat F = mat_of(j["fx"], "fx");
        p.fx = [F](const Vec&, const Vec&, double) { return F; };
    }
    if (j.contains("fu")) {
        const Mat F = mat_of(j["fu"], "fu");
        p.fu = [F](const Vec&, const Vec&, double) { return F; };
    }
    p.name = j.value("name", std::string("linear"));
    return complete(p);
}

ProblemSetup from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("unknown problem '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("unreadable problem config: ") + e.what());
    }
    ProblemSetup s;
    try {
        const std::string family = j.value("family", std::string());
        if (family == "linear") {
            s.problem = linear_from(j);
            s.tau_end = 300.0;
        } else if (family == "brachistochrone") {
            const Vec target = vec_of(j.at("target"), "target");
            if (target.size() != 2) throw ConfigError("brachistochrone target is (x_f, y_f)");
            const double gv = j.value("gravity", 10.0);
            s.problem = brachistochrone_problem(gv, target);
            s.problem.tf = j.value("tf", 1.0);
            s.problem.name = j.value("name", std::string("brachistochrone"));
            s.N = 101;
            s.tau_end = 400.0;
            s.K = 0.1;
            s.k_tf = 0.01;
            s.K_pi = 0.1;
            s.K_primary = 0.1;
            s.u0_primary = 0.8;
        } else {
            throw ConfigError("unknown problem family '" + family + "'");
        }
        if (j.contains("settings")) apply_settings(s, j["settings"]);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad problem config: ") + e.what());
    }
    return s;
}

Weights weights_of(const OcpProblem& p, double W_xf, double w_H, double W_x0, double W_lambda) {
    Weights w = Weights::identity(p);
    w.W_xf *= W_xf;
    w.w_H = w_H;
    w.W_x0 *= W_x0;
    w.W_lambda *= W_lambda;
    return w;
}

int k_dim(const OcpProblem& p, Form f) { return f == Form::Compact ? p.m : 2 * p.n + p.m; }

std::string default_out_dir() {
    const char* e = std::getenv("VEM_OUT_DIR");
    return e && *e ? std::string(e) : std::string(".");
}

// CLI11 wants the arguments back to front
void parse_args(CLI::App& app, const std::vector<std::string>& args) {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
}

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <class Fn>
int guarded(CLI::App& app, const std::vector<std::string>& args, Fn&& body) {
    try {
        parse_args(app, args);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
    try {
        return body();
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const GridTooSmall& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const BadHorizon& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
}

ProblemSetup load_or_usage(const std::string& problem, const std::string& config) {
    if (problem.empty() && config.empty()) throw UsageError("one of --problem or --config is required");
    if (!problem.empty() && !config.empty()) throw UsageError("--problem and --config are exclusive");
    return load_problem(problem.empty() ? config : problem);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
}

std::string csv_header(int n, int m) {
    std::string h = "t";
    for (int i = 1; i <= n; ++i) h += ",x_" + std::to_string(i);
    for (int i = 1; i <= n; ++i) h += ",lambda_" + std::to_string(i);
    for (int i = 1; i <= m; ++i) h += ",u_" + std::to_string(i);
    return h + "\n";
}

std::string trajectory_csv(const Trajectory& tr) {
    const int n = int(tr.x.rows()), m = int(tr.u.rows());
    std::string s = csv_header(n, m);
    for (int i = 0; i < tr.grid.N; ++i) {
        s += format_double(tr.grid.t(i));
        for (int k = 0; k < n; ++k) s += "," + format_double(tr.x(k, i));
        for (int k = 0; k < n; ++k) s += "," + format_double(tr.lam(k, i));
        for (int k = 0; k < m; ++k) s += "," + format_double(tr.u(k, i));
        s += "\n";
    }
    return s;
}

std::string trace_csv(const EvolveTrace& t, int q) {
    std::string s = "tau,jbar,rhs_inf_norm,t_f";
    for (int i = 1; i <= q; ++i) s += ",pi_" + std::to_string(i);
    s += ",step\n";
    for (const TraceRow& r : t.rows) {
        s += format_double(r.tau) + "," + format_double(r.jbar) + "," + format_double(r.rhs_inf) + "," +
             format_double(r.tf);
        for (int i = 0; i < q; ++i) s += "," + format_double(i < r.pi.size() ? r.pi[i] : 0.0);
        s += "," + format_double(r.step) + "\n";
    }
    return s;
}

json report_json(const ResidualReport& r) {
    return {{"dyn_res", r.dyn_res},
            {"costate_res", r.costate_res},
            {"hu_res", r.hu_res},
            {"g_res", r.g_res},
            {"transversality_res", r.transversality_res},
            {"h_terminal_res", r.h_terminal_res},
            {"x0_res", r.x0_res},
            {"max", r.max()}};
}

}  // namespace

ProblemSetup load_problem(const std::string& id) {
    ProblemSetup s;
    if (id == "example1") {
        Benchmark b = example1();
        s.problem = b.problem;
        s.reference = b.reference;
        return s;
    }
    if (id == "example2") {
        Benchmark b = example2();
        s.problem = b.problem;
        s.reference = b.reference;
        s.N = 101;
        s.tau_end = 400.0;
        s.K = 0.1;
        s.k_tf = 0.01;
        s.K_pi = 0.1;
        s.K_primary = 0.1;
        s.u0_primary = 0.8;
        return s;
    }
    return from_file(id);
}

std::string export_problem(const std::string& id) {
    json j;
    if (id == "example1") {
        j = {{"family", "linear"}, {"name", "example1"}, {"mode", "fixed_tf"}, {"t0", 0.0}, {"tf", 2.0},
             {"x0", {1.0, 1.0}}, {"target", {0.0, 0.0}}, {"A", {{0.0, 1.0}, {0.0, 0.0}}}, {"B", {{0.0}, {1.0}}},
             {"R", {{1.0}}}};
        j["settings"] = {{"nodes", 41}, {"tau_end", 300.0}, {"gain", 1.0}, {"gain_pi", 1.0}, {"gain_primary", 3.0}};
    } else if (id == "example2") {
        j = {{"family", "brachistochrone"}, {"name", "example2"}, {"gravity", 10.0}, {"target", {2.0, -2.0}},
             {"tf", 1.0}};
        j["settings"] = {{"nodes", 101}, {"tau_end", 400.0}, {"gain", 0.1}, {"gain_tf", 0.01}, {"gain_pi", 0.1}, {"gain_primary", 0.1}, {"u0_primary", 0.8}};
    } else {
        throw ConfigError("unknown problem '" + id + "'");
    }
    return j.dump(2) + "\n";
}

int cmd_solve(const std::vector<std::string>& args) {
    CLI::App app{"evolve a problem to its optimum", "solve"};
    std::string problem, config, form = "compact";
    std::optional<int> nodes;
    std::optional<double> rtol, atol, tau_end, K, k_tf, K_pi, W_xf, w_H, W_x0, W_lambda, trace_every, u0;
    RunConfig rc;
    rc.out_dir = default_out_dir();
    int checkpoint_every = 10;
    app.add_option("--problem", problem, "built-in problem id");
    app.add_option("--config", config, "JSON problem config");
    app.add_option("--form", form, "compact or primary");
    app.add_option("--nodes", nodes, "grid nodes N");
    app.add_option("--tau-end", tau_end, "variation-time budget");
    app.add_option("--rtol", rtol);
    app.add_option("--atol", atol);
    app.add_option("--trace-every", trace_every);
    app.add_option("--gain", K, "K as a multiple of I");
    app.add_option("--gain-tf", k_tf);
    app.add_option("--gain-pi", K_pi);
    app.add_option("--w-xf", W_xf);
    app.add_option("--w-h", w_H);
    app.add_option("--w-x0", W_x0);
    app.add_option("--w-lambda", W_lambda);
    app.add_option("--u0", u0, "constant initial control");
    app.add_option("--init-noise", rc.init_noise, "seeded perturbation of the initial control");
    app.add_option("--tol", rc.tol, "convergence tolerance on the residual norm");
    app.add_option("--checkpoint-every", checkpoint_every, "checkpoint interval in trace rows");
    app.add_option("--out-dir", rc.out_dir);
    app.add_option("--seed", rc.seed);
    return guarded(app, args, [&]() -> int {
        ProblemSetup s = load_or_usage(problem, config);
        rc.problem = problem.empty() ? config : problem;
        if (form == "compact") rc.form = Form::Compact;
        else if (form == "primary") rc.form = Form::Primary;
        else throw UsageError("--form must be compact or primary");
        rc.N = nodes.value_or(s.N);
        rc.tau_end = tau_end.value_or(s.tau_end);
        const bool prim = rc.form == Form::Primary;
        rc.K = K.value_or(prim ? s.K_primary : s.K);
        // the explicit integrator sits on its stability edge for the primary form at loose tolerances
        rc.rtol = rtol.value_or(prim ? 1e-6 : 1e-3);
        rc.atol = atol.value_or(prim ? 1e-9 : 1e-6);
        rc.k_tf = k_tf.value_or(s.k_tf);
        rc.K_pi = K_pi.value_or(s.K_pi);
        rc.W_xf = W_xf.value_or(s.W_xf);
        rc.w_H = w_H.value_or(s.w_H);
        rc.W_x0 = W_x0.value_or(s.W_x0);
        rc.W_lambda = W_lambda.value_or(s.W_lambda);
        rc.trace_every = trace_every.value_or(rc.tau_end / 100.0);
        const double u_init = u0.value_or(prim ? s.u0_primary : s.u0);

        // validation; nothing is written before this passes
        const OcpProblem& p = s.problem;
        make_grid(rc.N, p.t0, p.tf);
        if (!(rc.tau_end > 0.0)) throw UsageError("--tau-end must be positive");
        if (!(rc.rtol > 0.0) || !(rc.atol > 0.0)) throw UsageError("--rtol and --atol must be positive");
        if (!(rc.trace_every > 0.0)) throw UsageError("--trace-every must be positive");
        if (!(rc.tol > 0.0)) throw UsageError("--tol must be positive");
        if (!(rc.init_noise >= 0.0)) throw UsageError("--init-noise must be non-negative");
        if (checkpoint_every < 1) throw UsageError("--checkpoint-every must be at least 1");
        if (rc.out_dir.empty()) throw UsageError("--out-dir is empty");
        for (double g : {rc.K, rc.K_pi, rc.W_xf, rc.w_H, rc.W_x0, rc.W_lambda})
            if (!(g > 0.0) || !std::isfinite(g)) throw UsageError("gains and weights must be positive");
        if (free_tf(p.mode) && (!(rc.k_tf > 0.0) || !std::isfinite(rc.k_tf)))
            throw UsageError("--gain-tf must be positive");
        const Gains gains = Gains::scaled(p, k_dim(p, rc.form), rc.K, rc.k_tf, rc.K_pi);
        const Weights w = weights_of(p, rc.W_xf, rc.w_H, rc.W_x0, rc.W_lambda);

        EvolutionState st = initial_state(p, rc.form, rc.N, u_init, gains, w);
        if (rc.init_noise > 0.0) {
            std::mt19937_64 rng(rc.seed);
            std::uniform_real_distribution<double> U(-1.0, 1.0);
            const int stride = rc.form == Form::Compact ? p.m : 2 * p.n + p.m;
            const int off = rc.form == Form::Compact ? 0 : 2 * p.n;
            for (int i = 0; i < rc.N; ++i)
                for (int j = 0; j < p.m; ++j) st.flat[i * stride + off + j] += rc.init_noise * U(rng);
        }
        EvolveOptions eo;
        eo.tau_end = rc.tau_end;
        eo.rtol = rc.rtol;
        eo.atol = rc.atol;
        eo.trace_every = rc.trace_every;
        eo.checkpoint_every = checkpoint_every;
        eo.record_steps = false;

        const fs::path out(rc.out_dir);
        fs::create_directories(out);
        const EvolveResult res = evolve(p, st, eo);

        Trajectory tr;
        double tf;
        Vec pi;
        bool have_tr = true;
        if (rc.form == Form::Compact) {
            const CompactLayout lay = CompactLayout::of(p, rc.N);
            tf = lay.tf(res.y, p.tf);
            pi = lay.pi(res.y);
            try {
                tr = build_cache(p, lay.u(res.y), tf, pi, w, make_grid(rc.N, p.t0, tf), CacheOptions{false}).traj;
            } catch (const Error&) {
                have_tr = false;  // a diverged run may leave nothing to propagate
            }
        } else {
            const PrimaryState ps = PrimaryLayout::of(p, rc.N).unpack(res.y, p.tf);
            tf = ps.tf;
            pi = ps.pi;
            try {
                tr = as_trajectory(ps, make_grid(rc.N, p.t0, tf));
            } catch (const Error&) {
                have_tr = false;
            }
        }
        const bool ok = converged(res.trace, rc.tol);
        const int code = res.trace.failed() ? kFailure : ok ? kOk : kNotConverged;

        if (have_tr) write_text(out / "trajectory.csv", trajectory_csv(tr));
        write_text(out / "trace.csv", trace_csv(res.trace, p.q_eff()));

        json sm;
        sm["problem"] = p.name;
        sm["form"] = form_name(rc.form);
        sm["mode"] = mode_name(p.mode);
        sm["nodes"] = rc.N;
        sm["status"] = status_name(res.trace.status);
        sm["message"] = res.trace.message;
        sm["converged"] = ok;
        sm["exit_code"] = code;
        sm["tau"] = res.tau;
        sm["t_f"] = tf;
        sm["pi"] = json_of(pi);
        const bool have_row = !res.trace.rows.empty();
        sm["jbar"] = have_row ? json(res.trace.rows.back().jbar) : json(nullptr);
        sm["rhs_inf_norm"] = have_row ? json(res.trace.rows.back().rhs_inf) : json(nullptr);
        std::optional<ErrorMetrics> metrics;
        if (have_tr) {
            try {
                sm["J"] = bolza_cost(p, tr);
                sm["residuals"] = report_json(optimality_report(p, tr, pi, tf));
                if (s.reference) metrics = error_metrics(p, tr, pi, tf, *s.reference);
            } catch (const Error& e) {
                sm["residuals"] = e.what();
            }
        }
        sm["steps"] = {{"accepted", res.trace.accepted},
                       {"rejected_error", res.trace.rejected_error},
                       {"rejected_monotone", res.trace.rejected_monotone},
                       {"evaluations", res.trace.evaluations}};
        sm["config"] = {{"tau_end", rc.tau_end}, {"rtol", rc.rtol},   {"atol", rc.atol},
                        {"trace_every", rc.trace_every}, {"tol", rc.tol}, {"gain", rc.K},
                        {"gain_tf", rc.k_tf}, {"gain_pi", rc.K_pi}, {"W_xf", rc.W_xf},
                        {"w_H", rc.w_H}, {"W_x0", rc.W_x0}, {"W_lambda", rc.W_lambda},
                        {"u0", u_init}, {"init_noise", rc.init_noise}, {"seed", rc.seed}};
        if (metrics) {
            const ErrorMetrics& e = *metrics;
            sm["metrics"] = {{"e_J", e.e_J}, {"e_u", e.e_u}, {"e_tf", e.e_tf}, {"e_x", json_of(e.e_x)},
                             {"e_lambda", json_of(e.e_lambda)}, {"e_pi", json_of(e.e_pi)}};
        }
        write_text(out / "summary.json", sm.dump(2) + "\n");

        const Checkpoint ck = res.trace.checkpoints.empty() ? Checkpoint{0.0, st.flat} : res.trace.checkpoints.back();
        json cj;
        cj["form"] = form_name(rc.form);
        cj["problem"] = p.name;
        cj["mode"] = mode_name(p.mode);
        cj["layout"] = {{"N", rc.N}, {"n", p.n}, {"m", p.m}, {"q", p.q_eff()}, {"has_tf", free_tf(p.mode)}};
        cj["grid_spec"] = {{"N", rc.N}, {"t0", p.t0}, {"tf", p.tf}};
        cj["tau"] = ck.tau;
        cj["flat"] = json_of(ck.y);
        write_text(out / "checkpoint.json", cj.dump() + "\n");

        std::cout << "status=" << status_name(res.trace.status) << " converged=" << (ok ? "yes" : "no")
                  << " tau=" << format_double(res.tau) << " jbar=" << (have_row ? format_double(res.trace.rows.back().jbar) : std::string("nan"))
                  << " t_f=" << format_double(tf) << "\n";
        if (res.trace.failed()) std::cerr << "error: " << res.trace.message << "\n";
        return code;
    });
}

int cmd_check(const std::vector<std::string>& args) {
    CLI::App app{"derivative and gradient audits", "check"};
    std::string problem, config;
    std::optional<int> nodes;
    int samples = 20;
    unsigned long long seed = 1;
    double fd_tol = 1e-5, grad_tol = 1e-4, tf_tol = 1e-3;
    app.add_option("--problem", problem);
    app.add_option("--config", config);
    app.add_option("--nodes", nodes);
    app.add_option("--samples", samples);
    app.add_option("--seed", seed);
    app.add_option("--fd-tol", fd_tol);
    app.add_option("--grad-tol", grad_tol);
    app.add_option("--tf-tol", tf_tol);
    return guarded(app, args, [&]() -> int {
        ProblemSetup s = load_or_usage(problem, config);
        const OcpProblem& p = s.problem;
        const int N = nodes.value_or(s.N);
        make_grid(N, p.t0, p.tf);
        if (samples < 1) throw UsageError("--samples must be at least 1");

        std::string worst_name;
        double worst_excess = 0.0;
        auto note = [&](const std::string& name, double v, double tol) {
            if (!(v <= tol) && (worst_name.empty() || v / tol > worst_excess)) {
                worst_name = name;
                worst_excess = v / tol;
            }
        };
        const FdReport fr = fd_check(p, samples, seed);
        std::cout << "derivative check (" << samples << " samples)\n";
        for (const FdEntry& e : fr.entries) {
            std::cout << "  " << e.name << (e.second_order ? "  [2nd] " : "  ") << format_double(e.worst) << "\n";
            note(e.name, e.worst, fd_tol);
        }
        const Gains gains = Gains::scaled(p, p.m, s.K, s.k_tf, s.K_pi);
        const Weights w = weights_of(p, s.W_xf, s.w_H, s.W_x0, s.W_lambda);
        EvolutionState st = initial_state(p, Form::Compact, N, s.u0, gains, w);
        std::mt19937_64 rng(seed);
        const Vec random_state = random_compact_state(p, N, s.u0, rng);
        std::cout << "gradient audit\n";
        for (int k = 0; k < 2; ++k) {
            if (k == 1) st.flat = random_state;
            const AuditReport a = gradient_audit(p, st, {});
            const char* at = k == 0 ? "initial" : "random";
            std::cout << "  " << at << "  u " << format_double(a.u_block) << "  t_f " << format_double(a.tf_block)
                      << "  pi " << format_double(a.pi_block) << "\n";
            note(std::string("n_u@") + at, a.u_block, grad_tol);
            note(std::string("n_tf@") + at, a.tf_block, tf_tol);
            note(std::string("n_pi@") + at, a.pi_block, grad_tol);
        }
        if (!worst_name.empty()) {
            std::cerr << "audit failed: worst block " << worst_name << "\n";
            return kAudit;
        }
        std::cout << "all blocks within tolerance\n";
        return kOk;
    });
}

int cmd_reference(const std::vector<std::string>& args) {
    CLI::App app{"write the reference trajectory", "reference"};
    std::string problem, out_path;
    int nodes = 401;
    std::string out_dir = default_out_dir();
    app.add_option("--problem", problem)->required();
    app.add_option("--nodes", nodes);
    app.add_option("--out", out_path, "CSV path (default <out-dir>/reference.csv)");
    app.add_option("--out-dir", out_dir);
    return guarded(app, args, [&]() -> int {
        if (problem != "example1" && problem != "example2")
            throw UsageError("no reference for problem '" + problem + "'");
        const ProblemSetup s = load_problem(problem);
        const Grid grid = make_grid(nodes, s.problem.t0, s.reference->tf_hat);
        const fs::path path = out_path.empty() ? fs::path(out_dir) / "reference.csv" : fs::path(out_path);
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        write_text(path, trajectory_csv(reference_trajectory(*s.reference, grid)));
        return kOk;
    });
}

int cmd_export(const std::vector<std::string>& args) {
    CLI::App app{"print a built-in problem as a JSON config", "export"};
    std::string problem;
    app.add_option("--problem", problem)->required();
    return guarded(app, args, [&]() -> int {
        std::cout << export_problem(problem);
        return kOk;
    });
}

int run_cli(int argc, const char* const* argv) {
    const std::string usage = "usage: vem {solve|check|reference|export} [options]\n";
    if (argc < 2) {
        std::cerr << usage;
        return kUsage;
    }
    const std::string cmd = argv[1];
    const std::vector<std::string> rest(argv + 2, argv + argc);
    if (cmd == "solve") return cmd_solve(rest);
    if (cmd == "check") return cmd_check(rest);
    if (cmd == "reference") return cmd_reference(rest);
    if (cmd == "export") return cmd_export(rest);
    if (cmd == "--help" || cmd == "-h") {
        std::cout << usage;
        return kOk;
    }
    std::cerr << "error: unknown command '" << cmd << "'\n" << usage;
    return kUsage;
}

}  // namespace vem
