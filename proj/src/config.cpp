#include "hcs/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "hcs/errors.hpp"

namespace hcs {

namespace {

[[noreturn]] void fail(const YAML::Node& node, const std::string& message) {
    const YAML::Mark m = node.Mark();
    throw ParseError(message, m.line + 1, m.column + 1);
}

void check_keys(const YAML::Node& node, const std::string& section, const std::set<std::string>& allowed) {
    if (!node.IsMap()) fail(node, "section '" + section + "' must be a mapping");
    for (const auto& kv : node) {
        const std::string key = kv.first.as<std::string>();
        if (!allowed.contains(key)) fail(kv.first, "unknown key '" + key + "' in " + section);
    }
}

double parse_angle(const std::string& raw, bool* ok) {
    std::string s;
    for (char c : raw)
        if (!std::isspace(static_cast<unsigned char>(c))) s += c;
    *ok = false;
    if (s.empty()) return 0.0;
    const auto pos = s.find("pi");
    if (pos == std::string::npos) {
        std::size_t used = 0;
        try {
            const double v = std::stod(s, &used);
            *ok = used == s.size();
            return v;
        } catch (const std::exception&) {
            return 0.0;
        }
    }
    std::string coef = s.substr(0, pos), rest = s.substr(pos + 2);
    if (!coef.empty() && coef.back() == '*') coef.pop_back();
    double c = 1.0;
    if (coef == "-") {
        c = -1.0;
    } else if (!coef.empty() && coef != "+") {
        std::size_t used = 0;
        try {
            c = std::stod(coef, &used);
        } catch (const std::exception&) {
            return 0.0;
        }
        if (used != coef.size()) return 0.0;
    }
    double d = 1.0;
    if (!rest.empty()) {
        if (rest[0] != '/') return 0.0;
        rest = rest.substr(1);
        std::size_t used = 0;
        try {
            d = std::stod(rest, &used);
        } catch (const std::exception&) {
            return 0.0;
        }
        if (used != rest.size() || d == 0.0) return 0.0;
    }
    *ok = true;
    return c * (kTwoPi / 2) / d;
}

double as_double(const YAML::Node& node, bool angle = false) {
    if (!node.IsScalar()) fail(node, "expected a number");
    if (angle) {
        bool ok = false;
        const double v = parse_angle(node.Scalar(), &ok);
        if (!ok) fail(node, "expected a number or a multiple of pi, got '" + node.Scalar() + "'");
        return v;
    }
    try {
        return node.as<double>();
    } catch (const YAML::Exception&) {
        fail(node, "expected a number, got '" + node.Scalar() + "'");
    }
}

long long as_integer(const YAML::Node& node) {
    if (!node.IsScalar()) fail(node, "expected an integer");
    try {
        return node.as<long long>();
    } catch (const YAML::Exception&) {
        fail(node, "expected an integer, got '" + node.Scalar() + "'");
    }
}

bool as_bool(const YAML::Node& node) {
    try {
        return node.as<bool>();
    } catch (const YAML::Exception&) {
        fail(node, "expected true or false");
    }
}

std::vector<double> as_doubles(const YAML::Node& node, std::size_t size = 0, bool angle = false) {
    if (!node.IsSequence()) fail(node, "expected a list");
    if (size && node.size() != size) fail(node, "expected a list of " + std::to_string(size) + " numbers");
    std::vector<double> out;
    for (const auto& v : node) out.push_back(as_double(v, angle));
    return out;
}

std::array<int, 3> as_triple(const YAML::Node& node) {
    if (!node.IsSequence() || node.size() != 3) fail(node, "expected a list of 3 integers");
    std::array<int, 3> out{};
    for (std::size_t i = 0; i < 3; ++i) out[i] = static_cast<int>(as_integer(node[i]));
    return out;
}

struct Raw {
    RunConfig cfg;
    std::optional<std::array<double, 3>> theta;
    std::array<double, 3> theta_star{kTwoPi / 2, kTwoPi / 2, kTwoPi / 2};
    std::vector<int> fiber_axes_1based;
    long long n = 16, g = 4, m_max = 10, threads = 1, p = 8, budget = 128, samples = 200;
};

CoefficientField parse_coefficient(const YAML::Node& node, const std::string& name) {
    CoefficientField c;
    if (node.IsScalar()) {
        c.value = as_double(node);
        return c;
    }
    check_keys(node, name, {"axis", "layers"});
    if (!node["axis"] || !node["layers"]) fail(node, name + " needs 'axis' and 'layers'");
    Layering l;
    l.axis = static_cast<int>(as_integer(node["axis"])) - 1;
    l.values = as_doubles(node["layers"]);
    if (l.values.empty()) fail(node["layers"], name + ".layers is empty");
    c.value = l.values.front();
    c.layers = l;
    return c;
}

void parse_geometry(const YAML::Node& node, Raw& raw) {
    check_keys(node, "geometry", {"variant", "fibers", "inclusion", "a0", "a1"});
    GeometryConfig& g = raw.cfg.geometry;
    if (node["variant"]) {
        const std::string v = node["variant"].as<std::string>();
        if (v == "fibered")
            g.variant = Variant::fibered;
        else if (v == "compact_inclusion")
            g.variant = Variant::compact_inclusion;
        else
            fail(node["variant"], "variant must be 'fibered' or 'compact_inclusion'");
    }
    if (const auto f = node["fibers"]) {
        if (!f.IsSequence()) fail(f, "fibers must be a list");
        for (const auto& e : f) {
            check_keys(e, "fiber", {"axis", "rect"});
            if (!e["axis"] || !e["rect"]) fail(e, "a fiber needs 'axis' and 'rect'");
            const auto r = as_doubles(e["rect"], 4);
            FiberSpec s;
            const long long axis = as_integer(e["axis"]);
            raw.fiber_axes_1based.push_back(static_cast<int>(axis));
            s.axis = static_cast<int>(axis) - 1;
            s.cross_section = Rect{{r[0], r[2]}, {r[1], r[3]}};
            g.fibers.push_back(s);
        }
    }
    if (const auto b = node["inclusion"]) {
        check_keys(b, "inclusion", {"lo", "hi"});
        if (!b["lo"] || !b["hi"]) fail(b, "inclusion needs 'lo' and 'hi'");
        const auto lo = as_doubles(b["lo"], 3), hi = as_doubles(b["hi"], 3);
        g.inclusion_box = Box{{lo[0], lo[1], lo[2]}, {hi[0], hi[1], hi[2]}};
    }
    if (node["a0"]) g.a0 = parse_coefficient(node["a0"], "a0");
    if (node["a1"]) g.a1 = parse_coefficient(node["a1"], "a1");
}

void parse_root(const YAML::Node& root, Raw& raw) {
    RunConfig& c = raw.cfg;
    check_keys(root, "config",
               {"geometry", "grid", "theta_grid", "m_max", "lambda_max", "k_modes", "period", "eps_list",
                "tolerances", "theta", "beta", "validation", "output", "threads", "seed"});
    if (!root["geometry"]) fail(root, "missing section 'geometry'");
    parse_geometry(root["geometry"], raw);
    if (const auto n = root["grid"]) {
        check_keys(n, "grid", {"n"});
        if (n["n"]) raw.n = as_integer(n["n"]);
    }
    if (const auto n = root["theta_grid"]) {
        check_keys(n, "theta_grid", {"g"});
        if (n["g"]) raw.g = as_integer(n["g"]);
    }
    if (root["m_max"]) raw.m_max = as_integer(root["m_max"]);
    if (root["lambda_max"]) c.lambda_max = as_double(root["lambda_max"]);
    if (const auto k = root["k_modes"]) {
        if (!k.IsSequence()) fail(k, "k_modes must be a list of integer triples");
        c.k_modes.clear();
        for (const auto& e : k) c.k_modes.push_back(as_triple(e));
    }
    if (root["period"]) c.period = as_double(root["period"]);
    if (root["eps_list"]) c.eps_list = as_doubles(root["eps_list"]);
    if (const auto t = root["tolerances"]) {
        check_keys(t, "tolerances", {"eigen", "linear", "pole_guard"});
        if (t["eigen"]) c.tol.eigen = as_double(t["eigen"]);
        if (t["linear"]) c.tol.linear = as_double(t["linear"]);
        if (t["pole_guard"]) c.tol.pole_guard = as_double(t["pole_guard"]);
    }
    if (const auto t = root["theta"]) {
        const auto v = as_doubles(t, 3, true);
        raw.theta = std::array<double, 3>{v[0], v[1], v[2]};
    }
    if (const auto b = root["beta"]) {
        check_keys(b, "beta", {"samples"});
        if (b["samples"]) raw.samples = as_integer(b["samples"]);
    }
    if (const auto v = root["validation"]) {
        check_keys(v, "validation", {"p", "mode", "threshold", "slack", "budget", "spectral", "theta_star"});
        ValidationSettings& s = c.validation;
        if (v["p"]) raw.p = as_integer(v["p"]);
        if (v["mode"]) s.mode = as_triple(v["mode"]);
        if (v["threshold"]) s.threshold = as_double(v["threshold"]);
        if (v["slack"]) s.slack = as_double(v["slack"]);
        if (v["budget"]) raw.budget = as_integer(v["budget"]);
        if (v["spectral"]) s.spectral = as_bool(v["spectral"]);
        if (v["theta_star"]) {
            const auto t = as_doubles(v["theta_star"], 3, true);
            raw.theta_star = {t[0], t[1], t[2]};
        }
    }
    if (root["output"]) c.output = root["output"].as<std::string>();
    if (root["threads"]) raw.threads = as_integer(root["threads"]);
    if (const auto s = root["seed"]) {
        try {
            c.seed = s.as<std::uint64_t>();
        } catch (const YAML::Exception&) {
            fail(s, "seed must be a non-negative integer");
        }
    }
}

bool in_range(const std::array<double, 3>& t) {
    for (double v : t)
        if (!(v >= 0.0 && v < kTwoPi)) return false;
    return true;
}

template <class T>
std::string str(const T& v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::vector<std::string> raw_violations(const Raw& raw) {
    std::vector<std::string> out;
    auto check_int = [&](long long v, const std::string& what) {
        if (std::llabs(v) > 1 << 20) out.push_back(what + " is out of range");
    };
    check_int(raw.n, "n");
    check_int(raw.g, "g");
    check_int(raw.m_max, "m_max");
    check_int(raw.threads, "threads");
    check_int(raw.p, "validation.p");
    check_int(raw.budget, "validation.budget");
    check_int(raw.samples, "beta.samples");
    for (int a : raw.fiber_axes_1based)
        if (a < 1 || a > 3) out.push_back("fiber axis must be 1, 2 or 3");
    auto check_layers = [&](const CoefficientField& c, const std::string& name) {
        if (c.layers && (c.layers->axis < 0 || c.layers->axis > 2)) out.push_back(name + ".axis must be 1, 2 or 3");
    };
    check_layers(raw.cfg.geometry.a0, "a0");
    check_layers(raw.cfg.geometry.a1, "a1");
    if (raw.theta && !in_range(*raw.theta)) out.push_back("theta components must lie in [0, 2pi)");
    if (!in_range(raw.theta_star)) out.push_back("validation.theta_star components must lie in [0, 2pi)");
    return out;
}

}  // namespace

std::vector<std::string> config_violations(const RunConfig& c) {
    std::vector<std::string> out;
    if (c.n < 4) out.push_back("n >= 4");
    if (c.g < 1) out.push_back("g >= 1");
    if (c.m_max < 1) out.push_back("m_max >= 1");
    if (!(c.lambda_max > 0.0) || !std::isfinite(c.lambda_max)) out.push_back("lambda_max > 0");
    if (!(c.period > 0.0) || !std::isfinite(c.period)) out.push_back("period > 0");
    if (!(c.tol.eigen > 0.0)) out.push_back("tolerances.eigen > 0");
    if (!(c.tol.linear > 0.0)) out.push_back("tolerances.linear > 0");
    if (!(c.tol.pole_guard > 0.0)) out.push_back("tolerances.pole_guard > 0");
    if (c.k_modes.empty()) out.push_back("k_modes is not empty");
    if (c.eps_list.empty()) out.push_back("eps_list is not empty");
    for (std::size_t i = 0; i < c.eps_list.size(); ++i) {
        const double e = c.eps_list[i];
        if (!(e > 0.0 && e <= 1.0)) {
            out.push_back("eps_list entries lie in (0, 1], got " + str(e));
            continue;
        }
        const double K = 1.0 / e;
        if (std::abs(K - std::round(K)) > 1e-9 * K) out.push_back("eps_list entries are 1/K for integer K, got " + str(e));
        if (i > 0 && !(e < c.eps_list[i - 1])) out.push_back("eps_list is strictly decreasing");
    }
    if (c.threads < 1) out.push_back("threads >= 1");
    if (c.beta_samples < 1) out.push_back("beta.samples >= 1");
    if (c.validation.p < 4) out.push_back("validation.p >= 4");
    if (c.validation.budget < 1) out.push_back("validation.budget >= 1");
    if (!(c.validation.threshold > 0.0)) out.push_back("validation.threshold > 0");
    if (!(c.validation.slack >= 0.0)) out.push_back("validation.slack >= 0");
    if (c.geometry.variant == Variant::fibered && c.geometry.fibers.empty()) out.push_back("fibered geometry lists a fiber");
    if (c.geometry.variant == Variant::compact_inclusion && !c.geometry.inclusion_box)
        out.push_back("compact_inclusion geometry has an inclusion box");
    return out;
}

RunConfig parse_config_text(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ParseError(e.msg, e.mark.line + 1, e.mark.column + 1);
    }
    if (!root || root.IsNull()) throw ParseError("empty config", 1, 1);
    Raw raw;
    parse_root(root, raw);

    std::vector<std::string> v = raw_violations(raw);
    RunConfig& c = raw.cfg;
    c.n = static_cast<int>(raw.n);
    c.g = static_cast<int>(raw.g);
    c.m_max = static_cast<int>(raw.m_max);
    c.threads = static_cast<int>(raw.threads);
    c.beta_samples = static_cast<int>(raw.samples);
    c.validation.p = static_cast<int>(raw.p);
    c.validation.budget = static_cast<int>(raw.budget);
    for (const auto& s : config_violations(c))
        if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
    if (!v.empty()) {
        std::string msg = "invalid config: ";
        for (std::size_t i = 0; i < v.size(); ++i) msg += (i ? "; " : "") + v[i];
        throw ValidationError(msg);
    }
    if (raw.theta) c.theta = QuasiMomentum(*raw.theta);
    c.validation.theta_star = QuasiMomentum(raw.theta_star);
    return c;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot read config file '" + path + "'", 0, 0);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

namespace {

void emit_triple(YAML::Emitter& out, const std::array<double, 3>& v) {
    out << YAML::Flow << YAML::BeginSeq << v[0] << v[1] << v[2] << YAML::EndSeq;
}

void emit_coefficient(YAML::Emitter& out, const CoefficientField& c) {
    if (!c.layers) {
        out << c.value;
        return;
    }
    out << YAML::BeginMap << YAML::Key << "axis" << YAML::Value << c.layers->axis + 1 << YAML::Key << "layers"
        << YAML::Value << YAML::Flow << c.layers->values << YAML::EndMap;
}

void emit_geometry(YAML::Emitter& out, const GeometryConfig& g) {
    out << YAML::BeginMap;
    out << YAML::Key << "variant" << YAML::Value
        << (g.variant == Variant::fibered ? "fibered" : "compact_inclusion");
    if (!g.fibers.empty()) {
        out << YAML::Key << "fibers" << YAML::Value << YAML::BeginSeq;
        for (const auto& f : g.fibers) {
            const auto& r = f.cross_section;
            out << YAML::BeginMap << YAML::Key << "axis" << YAML::Value << f.axis + 1 << YAML::Key << "rect"
                << YAML::Value << YAML::Flow << YAML::BeginSeq << r.lo[0] << r.hi[0] << r.lo[1] << r.hi[1]
                << YAML::EndSeq << YAML::EndMap;
        }
        out << YAML::EndSeq;
    }
    if (g.inclusion_box) {
        out << YAML::Key << "inclusion" << YAML::Value << YAML::BeginMap << YAML::Key << "lo" << YAML::Value;
        emit_triple(out, g.inclusion_box->lo);
        out << YAML::Key << "hi" << YAML::Value;
        emit_triple(out, g.inclusion_box->hi);
        out << YAML::EndMap;
    }
    out << YAML::Key << "a0" << YAML::Value;
    emit_coefficient(out, g.a0);
    out << YAML::Key << "a1" << YAML::Value;
    emit_coefficient(out, g.a1);
    out << YAML::EndMap;
}

}  // namespace

std::string serialize_config(const RunConfig& c) {
    YAML::Emitter out;
    out.SetDoublePrecision(17);
    out << YAML::BeginMap;
    out << YAML::Key << "geometry" << YAML::Value;
    emit_geometry(out, c.geometry);
    out << YAML::Key << "grid" << YAML::Value << YAML::BeginMap << YAML::Key << "n" << YAML::Value << c.n
        << YAML::EndMap;
    out << YAML::Key << "theta_grid" << YAML::Value << YAML::BeginMap << YAML::Key << "g" << YAML::Value << c.g
        << YAML::EndMap;
    out << YAML::Key << "m_max" << YAML::Value << c.m_max;
    out << YAML::Key << "lambda_max" << YAML::Value << c.lambda_max;
    out << YAML::Key << "k_modes" << YAML::Value << YAML::BeginSeq;
    for (const auto& k : c.k_modes) out << YAML::Flow << YAML::BeginSeq << k[0] << k[1] << k[2] << YAML::EndSeq;
    out << YAML::EndSeq;
    out << YAML::Key << "period" << YAML::Value << c.period;
    out << YAML::Key << "eps_list" << YAML::Value << YAML::Flow << c.eps_list;
    out << YAML::Key << "tolerances" << YAML::Value << YAML::BeginMap << YAML::Key << "eigen" << YAML::Value
        << c.tol.eigen << YAML::Key << "linear" << YAML::Value << c.tol.linear << YAML::Key << "pole_guard"
        << YAML::Value << c.tol.pole_guard << YAML::EndMap;
    if (c.theta) {
        out << YAML::Key << "theta" << YAML::Value;
        emit_triple(out, c.theta->theta);
    }
    out << YAML::Key << "beta" << YAML::Value << YAML::BeginMap << YAML::Key << "samples" << YAML::Value
        << c.beta_samples << YAML::EndMap;
    const auto& v = c.validation;
    out << YAML::Key << "validation" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "p" << YAML::Value << v.p;
    out << YAML::Key << "mode" << YAML::Value << YAML::Flow << YAML::BeginSeq << v.mode[0] << v.mode[1] << v.mode[2]
        << YAML::EndSeq;
    out << YAML::Key << "threshold" << YAML::Value << v.threshold;
    out << YAML::Key << "slack" << YAML::Value << v.slack;
    out << YAML::Key << "budget" << YAML::Value << v.budget;
    out << YAML::Key << "spectral" << YAML::Value << v.spectral;
    out << YAML::Key << "theta_star" << YAML::Value;
    emit_triple(out, v.theta_star.theta);
    out << YAML::EndMap;
    out << YAML::Key << "output" << YAML::Value << YAML::DoubleQuoted << c.output;
    out << YAML::Key << "threads" << YAML::Value << c.threads;
    out << YAML::Key << "seed" << YAML::Value << c.seed;
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

std::string geometry_hash(const RunConfig& c) {
    YAML::Emitter out;
    out.SetDoublePrecision(17);
    out << YAML::BeginMap << YAML::Key << "geometry" << YAML::Value;
    emit_geometry(out, c.geometry);
    out << YAML::Key << "n" << YAML::Value << c.n << YAML::EndMap;
    std::uint64_t h = 1469598103934665603ull;
    for (const char ch : std::string(out.c_str())) {
        h ^= static_cast<unsigned char>(ch);
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::vector<int> cell_counts(const std::vector<double>& eps_list) {
    std::vector<int> out;
    for (double e : eps_list) {
        const double K = 1.0 / e;
        if (!(e > 0.0) || std::abs(K - std::round(K)) > 1e-9 * K)
            throw ValidationError("eps must be 1/K for an integer K");
        out.push_back(static_cast<int>(std::round(K)));
    }
    return out;
}

std::vector<double> parse_number_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        bool ok = false;
        const double v = parse_angle(item, &ok);
        if (!ok) throw ValidationError("cannot parse number '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw ValidationError("empty number list");
    return out;
}

}  // namespace hcs
