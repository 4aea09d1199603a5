#include "hcs/cli.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "hcs/beta_spectrum.hpp"
#include "hcs/bloch.hpp"
#include "hcs/cell_problems.hpp"
#include "hcs/errors.hpp"
#include "hcs/eps_validation.hpp"

namespace hcs {

using nlohmann::json;

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

namespace {

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json triple(const std::array<double, 3>& v) { return json::array({num(v[0]), num(v[1]), num(v[2])}); }
json triple(const std::array<int, 3>& v) { return json::array({v[0], v[1], v[2]}); }
json cnum(cplx z) { return json::array({num(z.real()), num(z.imag())}); }

json coefficient_json(const CoefficientField& c) {
    if (!c.layers) return num(c.value);
    return {{"axis", c.layers->axis + 1}, {"layers", c.layers->values}};
}

/// Config echo; output directory and thread count are left out so that
/// artifacts do not depend on them.
json config_echo(const RunConfig& c) {
    json g;
    g["variant"] = c.geometry.variant == Variant::fibered ? "fibered" : "compact_inclusion";
    json fibers = json::array();
    for (const auto& f : c.geometry.fibers) {
        const auto& r = f.cross_section;
        fibers.push_back({{"axis", f.axis + 1}, {"rect", {r.lo[0], r.hi[0], r.lo[1], r.hi[1]}}});
    }
    g["fibers"] = fibers;
    if (c.geometry.inclusion_box)
        g["inclusion"] = {{"lo", triple(c.geometry.inclusion_box->lo)}, {"hi", triple(c.geometry.inclusion_box->hi)}};
    g["a0"] = coefficient_json(c.geometry.a0);
    g["a1"] = coefficient_json(c.geometry.a1);
    json modes = json::array();
    for (const auto& k : c.k_modes) modes.push_back(triple(k));
    json e;
    e["geometry"] = g;
    e["grid"] = {{"n", c.n}};
    e["theta_grid"] = {{"g", c.g}};
    e["m_max"] = c.m_max;
    e["lambda_max"] = num(c.lambda_max);
    e["k_modes"] = modes;
    e["period"] = num(c.period);
    e["eps_list"] = c.eps_list;
    e["tolerances"] = {{"eigen", c.tol.eigen}, {"linear", c.tol.linear}, {"pole_guard", c.tol.pole_guard}};
    e["theta"] = c.theta ? triple(c.theta->theta) : json(nullptr);
    e["beta"] = {{"samples", c.beta_samples}};
    const auto& v = c.validation;
    e["validation"] = {{"p", v.p},
                       {"mode", triple(v.mode)},
                       {"threshold", v.threshold},
                       {"slack", v.slack},
                       {"budget", v.budget},
                       {"spectral", v.spectral},
                       {"theta_star", triple(v.theta_star.theta)}};
    e["seed"] = c.seed;
    return e;
}

json header(const RunConfig& c, const std::string& kind) {
    return {{"schema_version", kSchemaVersion},
            {"kind", kind},
            {"geometry_hash", geometry_hash(c)},
            {"seed", c.seed},
            {"config", config_echo(c)}};
}

std::filesystem::path output_path(const RunConfig& c, const std::string& name) {
    std::filesystem::create_directories(c.output);
    return std::filesystem::path(c.output) / name;
}

void write_json(const RunConfig& c, const std::string& name, const json& j, std::ostream& out) {
    const auto path = output_path(c, name);
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << j.dump(2) << "\n";
    out << "wrote " << path.string() << "\n";
}

std::ofstream open_csv(const RunConfig& c, const std::string& name, std::ostream& out) {
    const auto path = output_path(c, name);
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << "# schema_version=" << kSchemaVersion << "\n";
    f << "# geometry_hash=" << geometry_hash(c) << "\n";
    f << "# seed=" << c.seed << "\n";
    f << "# config=" << config_echo(c).dump() << "\n";
    out << "wrote " << path.string() << "\n";
    return f;
}

BlochOptions bloch_options(const RunConfig& c) {
    BlochOptions o;
    o.eigen.tol = c.tol.eigen;
    o.eigen.seed = c.seed;
    o.threads = c.threads;
    return o;
}

LinearSolveOptions linear_options(const RunConfig& c) {
    LinearSolveOptions o;
    o.tol = c.tol.linear;
    return o;
}

int cmd_geom_check(const RunConfig& c, std::ostream& out) {
    const CellGeometry geom = build_geometry(c.geometry);
    const Grid grid = classify_nodes(geom, c.n);
    json j = header(c, "geometry");
    json comps = json::array();
    for (int a : geom.fiber_axes()) {
        std::size_t iface = 0;
        for (std::size_t x = 0; x < grid.size(); ++x)
            iface += grid.owned_by(x, a) && grid.tag(x).region == Region::interface;
        comps.push_back({{"fiber", a + 1},
                         {"measure", geom.fiber_measure(a)},
                         {"discrete_measure", grid.discrete_measure(a)},
                         {"nodes", grid.count_owned(a)},
                         {"interface_nodes", iface}});
    }
    j["fibers"] = comps;
    if (geom.variant() == Variant::compact_inclusion)
        j["host"] = {{"discrete_measure", grid.discrete_measure(kHostOwner)}, {"nodes", grid.count_owned(kHostOwner)}};
    j["matrix_nodes"] = grid.count_matrix();
    j["nodes"] = grid.size();
    j["valid"] = true;
    write_json(c, "geometry.json", j, out);
    return 0;
}

json tensor_json(const Eigen::Matrix3d& a) {
    json t = json::array();
    for (int i = 0; i < 3; ++i) t.push_back({a(i, 0), a(i, 1), a(i, 2)});
    return t;
}

int cmd_cell(const RunConfig& c, std::ostream& out) {
    const CellGeometry geom = build_geometry(c.geometry);
    const Grid grid = classify_nodes(geom, c.n);
    json j = header(c, "cell");
    json fibers = json::array();
    const auto sols = solve_all_cell_problems(geom, grid, linear_options(c));
    for (const auto& s : sols)
        fibers.push_back({{"fiber", s.axis + 1},
                          {"a_hom", s.a_hom},
                          {"discrete_measure", s.discrete_measure},
                          {"residual", s.residual},
                          {"flux", s.flux}});
    j["fibers"] = fibers;
    j["a_hom"] = tensor_json(effective_tensor(sols));
    if (geom.variant() == Variant::compact_inclusion)
        j["host"] = {{"a_hom", tensor_json(host_effective_tensor(geom, grid, linear_options(c)))},
                     {"discrete_measure", grid.discrete_measure(kHostOwner)}};
    write_json(c, "cell.json", j, out);
    return 0;
}

int cmd_bloch(const RunConfig& c, std::ostream& out) {
    const CellGeometry geom = build_geometry(c.geometry);
    const Grid grid = classify_nodes(geom, c.n);
    std::vector<BlochDecomposition> sweep;
    if (c.theta) {
        sweep.push_back(bloch_eigs(geom, grid, *c.theta, c.m_max, bloch_options(c)));
    } else {
        sweep = theta_sweep(geom, grid, make_theta_grid(c.g, geom), c.m_max, bloch_options(c));
    }
    auto f = open_csv(c, "bands.csv", out);
    f << "theta1,theta2,theta3,m,mu\n";
    for (const auto& b : sweep)
        for (std::size_t m = 0; m < b.mu.size(); ++m)
            f << format_double(b.theta.theta[0]) << ',' << format_double(b.theta.theta[1]) << ','
              << format_double(b.theta.theta[2]) << ',' << m + 1 << ',' << format_double(b.mu[m]) << '\n';
    return 0;
}

int cmd_beta(const RunConfig& c, std::ostream& out) {
    const CellGeometry geom = build_geometry(c.geometry);
    const Grid grid = classify_nodes(geom, c.n);
    const QuasiMomentum theta = c.theta.value_or(QuasiMomentum{});
    const auto bloch = bloch_eigs(geom, grid, theta, c.m_max, bloch_options(c));
    const auto lifts = solve_lifts(geom, grid, theta, bloch);
    const BetaMatrix beta(lifts, bloch, BetaForm::regularized, c.tol.pole_guard, c.m_max);
    auto f = open_csv(c, "beta.csv", out);
    f << "lambda";
    for (int i : beta.active())
        for (int j : beta.active()) f << ",re_b" << i + 1 << j + 1 << ",im_b" << i + 1 << j + 1;
    f << '\n';
    const int k = beta.size();
    for (int s = 0; s <= c.beta_samples; ++s) {
        const double lambda = c.lambda_max * s / c.beta_samples;
        f << format_double(lambda);
        if (beta.near_pole(lambda)) {
            for (int e = 0; e < 2 * k * k; ++e) f << ",nan";
        } else {
            const MatrixXcd b = beta(lambda);
            for (int i = 0; i < k; ++i)
                for (int j = 0; j < k; ++j) f << ',' << format_double(b(i, j).real()) << ',' << format_double(b(i, j).imag());
        }
        f << '\n';
    }
    return 0;
}

json intervals(const std::vector<Interval>& v) {
    json a = json::array();
    for (const auto& i : v) a.push_back({{"lo", i.lo}, {"hi", i.hi}});
    return a;
}

int cmd_spectrum(const RunConfig& c, std::ostream& out) {
    const CellGeometry geom = build_geometry(c.geometry);
    const Grid grid = classify_nodes(geom, c.n);
    LimitSpectrumOptions o;
    o.g = c.g;
    o.m_max = c.m_max;
    o.lambda_max = c.lambda_max;
    o.modes = c.k_modes;
    o.period = c.period;
    o.pole_guard_rel = c.tol.pole_guard;
    o.bloch = bloch_options(c);
    const BandStructure bs = limit_spectrum(geom, grid, o);
    json j = header(c, "spectrum");
    j["window_max"] = bs.window_max;
    j["bands"] = intervals(bs.bands);
    j["gaps"] = intervals(bs.gaps);
    json branches = json::array();
    for (const auto& b : bs.branches)
        branches.push_back({{"m", b.branch + 1},
                            {"lo", b.lo},
                            {"hi", b.hi},
                            {"argmin", triple(b.argmin.theta)},
                            {"argmax", triple(b.argmax.theta)}});
    j["branches"] = branches;
    json spatial = json::array();
    for (const auto& r : bs.spatial) {
        const std::array<double, 3> k{kTwoPi * r.mode[0] / c.period, kTwoPi * r.mode[1] / c.period,
                                      kTwoPi * r.mode[2] / c.period};
        spatial.push_back({{"theta", triple(r.theta.theta)},
                           {"k", triple(k)},
                           {"mode", triple(r.mode)},
                           {"lambda", r.lambda},
                           {"residual", num(r.residual)},
                           {"bracket", {r.bracket.lo, r.bracket.hi}}});
    }
    j["spatial"] = spatial;
    write_json(c, "spectrum.json", j, out);
    return 0;
}

int cmd_validate(const RunConfig& c, std::ostream& out) {
    const CellGeometry geom = build_geometry(c.geometry);
    const auto& v = c.validation;
    const Grid cell = classify_nodes(geom, v.p);
    const QuasiMomentum theta = c.theta.value_or(QuasiMomentum{});
    ReportOptions o;
    o.Ks = cell_counts(c.eps_list);
    o.threshold = v.threshold;
    o.slack = v.slack;
    o.budget = v.budget;
    o.solver.tol = c.tol.linear;
    const auto rep = convergence_report(geom, cell, theta, v.mode, default_profile(theta), o);

    json j = header(c, "validate");
    j["theta"] = triple(theta.theta);
    j["mode"] = triple(v.mode);
    j["tests"] = rep.tests;
    json rows = json::array();
    for (const auto& r : rep.rows) {
        json pairs = json::array(), lims = json::array();
        for (auto z : r.pairings) pairs.push_back(cnum(z));
        for (auto z : r.limits) lims.push_back(cnum(z));
        rows.push_back({{"K", r.K},
                        {"eps", 1.0 / r.K},
                        {"residuals", r.residuals},
                        {"pairings", pairs},
                        {"limits", lims},
                        {"norms",
                         {{"stiff_gradient", r.norms.stiff_gradient},
                          {"scaled_gradient", r.norms.scaled_gradient},
                          {"l2", r.norms.l2},
                          {"forcing", r.norms.forcing}}},
                        {"energy_defect", r.energy_defect},
                        {"solve_residual", r.solve_residual},
                        {"iterations", r.iterations}});
    }
    j["rows"] = rows;
    j["apriori"] = {{"bound", rep.apriori_bound}, {"pass", rep.apriori_pass}};
    j["monotone_pass"] = rep.monotone_pass;
    j["threshold_pass"] = rep.threshold_pass;
    bool pass = rep.pass;
    if (v.spectral) {
        const auto s = spectral_spot_check(geom, cell, v.theta_star, o.Ks, c.threads);
        j["spectral"] = {{"theta_star", triple(s.theta_star.theta)},
                         {"lambda_star", s.lambda_star},
                         {"K", s.Ks},
                         {"distance", s.distance},
                         {"nearest", s.nearest},
                         {"pass", s.pass}};
        pass = pass && s.pass;
    }
    j["pass"] = pass;
    write_json(c, "validate.json", j, out);
    out << (pass ? "PASS" : "FAIL") << "\n";
    return pass ? 0 : 1;
}

void error_payload(std::ostream& err, const std::string& kind, const std::string& message, int line = 0,
                   int column = 0) {
    json e{{"kind", kind}, {"message", message}};
    if (line > 0) {
        e["line"] = line;
        e["column"] = column;
    }
    err << json{{"schema_version", kSchemaVersion}, {"error", e}}.dump() << "\n";
}

template <class F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const ParseError& e) {
        error_payload(err, e.kind(), e.what(), e.line(), e.column());
    } catch (const Error& e) {
        error_payload(err, e.kind(), e.what());
    } catch (const std::exception& e) {
        error_payload(err, "Error", e.what());
    }
    return 2;
}

}  // namespace

int run(const std::string& subcommand, const RunConfig& config, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() -> int {
        if (subcommand == "geom-check") return cmd_geom_check(config, out);
        if (subcommand == "cell") return cmd_cell(config, out);
        if (subcommand == "bloch") return cmd_bloch(config, out);
        if (subcommand == "beta") return cmd_beta(config, out);
        if (subcommand == "spectrum") return cmd_spectrum(config, out);
        if (subcommand == "validate") return cmd_validate(config, out);
        throw ValidationError("unknown subcommand '" + subcommand + "'");
    });
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Spectral structure of high-contrast fibered composites", "hcspec"};
    std::string sub, config_path, out_dir, theta, eps;
    std::optional<int> threads;
    std::optional<std::uint64_t> seed;
    std::optional<double> lambda_max;
    app.add_option("subcommand", sub, "geom-check | cell | bloch | beta | spectrum | validate")
        ->required()
        ->check(CLI::IsMember(kSubcommands));
    app.add_option("--config", config_path, "YAML run configuration")->required();
    app.add_option("--out", out_dir, "output directory (overrides the config)");
    app.add_option("--threads", threads, "parallelism degree")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "eigensolver seed");
    app.add_option("--theta", theta, "quasi-momentum a,b,c (numbers or multiples of pi)");
    app.add_option("--eps", eps, "eps list e1,e2,... (each 1/K)");
    app.add_option("--lambda-max", lambda_max, "spectral window [0, lambda_max]");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        error_payload(err, "UsageError", e.what());
        return 2;
    }
    RunConfig cfg;
    const int rc = guarded(err, [&]() -> int {
        cfg = parse_config(config_path);
        if (!out_dir.empty()) cfg.output = out_dir;
        if (threads) cfg.threads = *threads;
        if (seed) cfg.seed = *seed;
        if (lambda_max) cfg.lambda_max = *lambda_max;
        if (!eps.empty()) cfg.eps_list = parse_number_list(eps);
        if (!theta.empty()) {
            const auto t = parse_number_list(theta);
            if (t.size() != 3) throw ValidationError("--theta needs three components");
            cfg.theta = QuasiMomentum({t[0], t[1], t[2]});
        }
        const auto v = config_violations(cfg);
        if (!v.empty()) {
            std::string msg = "invalid config: ";
            for (std::size_t i = 0; i < v.size(); ++i) msg += (i ? "; " : "") + v[i];
            throw ValidationError(msg);
        }
        return 0;
    });
    if (rc != 0) return rc;
    return run(sub, cfg, out, err);
}

}  // namespace hcs
