#pragma once

#include "ndtrace/coeffs.hpp"
#include "ndtrace/errors.hpp"
#include "ndtrace/roots.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace ndtrace::cli {

using json = nlohmann::json;

inline constexpr const char* schema_version = "ndtrace/1";

inline const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"roots",     "jost-dump", "wronskian", "trace-check",
                                                "det-check", "eig-count", "large-z"};
    return names;
}

struct Tolerances {
    double identity_rel_tol = 1e-5;
    double defect_tol = 1e-6;
    double quad_tol = 1e-10;
    double z_step = 1e-3;
    double critical_ray_floor = 1e-8;
};

struct LargeZSpec {
    cplx direction = I;
    std::vector<double> magnitudes{4, 32, 256};
    double slack = 0.3;
};

struct ContourSpec {
    cplx center;
    double radius = 1.0;
};

struct RunConfig {
    int N = 0;
    CoefficientSet coeffs;
    std::vector<cplx> z;
    double A = 10.0;
    double x = 0.0;
    std::vector<double> x_grid{0.0};
    Tolerances tol;
    std::vector<std::string> commands;
    std::string out_dir = ".";
    std::optional<LargeZSpec> large_z;
    std::optional<ContourSpec> contour;
    std::optional<int> expected_count;
};

namespace detail {

/// JSON object view that remembers which keys were read, so leftovers can
/// be reported as unknown.
class Fields {
public:
    Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    bool has(const std::string& k) const { return j_.contains(k); }

    const json& get(const std::string& k) {
        if (!j_.contains(k)) throw ConfigError(where_ + ": missing key '" + k + "'");
        seen_.insert(k);
        return j_.at(k);
    }

    const json* find(const std::string& k) {
        if (!j_.contains(k)) return nullptr;
        seen_.insert(k);
        return &j_.at(k);
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
    }

    const std::string& where() const { return where_; }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

inline double number(const json& j, const std::string& what) {
    if (!j.is_number()) throw ConfigError(what + ": expected a number");
    return j.get<double>();
}

inline double positive(const json& j, const std::string& what) {
    const double v = number(j, what);
    if (!(v > 0) || !std::isfinite(v)) throw ConfigError(what + ": must be positive");
    return v;
}

inline int integer(const json& j, const std::string& what) {
    if (!j.is_number_integer()) throw ConfigError(what + ": expected an integer");
    return j.get<int>();
}

inline double parse_real(std::string_view s, const std::string& what) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError(what + ": bad number '" + std::string(s) + "'");
    return v;
}

/// "1.5", "-2i", "i", "3-4i", "1e-3+2.5e1i".
inline cplx parse_complex_string(std::string s, const std::string& what) {
    s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char ch) { return std::isspace(ch); }), s.end());
    if (s.empty()) throw ConfigError(what + ": empty complex number");
    if (s.back() != 'i') return parse_real(s, what);
    s.pop_back();
    // Split at the last sign that is not part of an exponent.
    size_t cut = std::string::npos;
    for (size_t k = s.size(); k-- > 1;)
        if ((s[k] == '+' || s[k] == '-') && s[k - 1] != 'e' && s[k - 1] != 'E') {
            cut = k;
            break;
        }
    auto imag_part = [&](std::string t) {
        if (t.empty() || t == "+") return 1.0;
        if (t == "-") return -1.0;
        return parse_real(t, what);
    };
    if (cut == std::string::npos) return {0.0, imag_part(s)};
    return {parse_real(s.substr(0, cut), what), imag_part(s.substr(cut))};
}

inline cplx complex_value(const json& j, const std::string& what) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) return parse_complex_string(j.get<std::string>(), what);
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
        return {j[0].get<double>(), j[1].get<double>()};
    throw ConfigError(what + ": expected a number, [re, im] or a string like \"1-2i\"");
}

inline std::vector<double> real_list(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty()) throw ConfigError(what + ": expected a non-empty array");
    std::vector<double> out;
    for (const auto& e : j) out.push_back(number(e, what));
    return out;
}

/// Table file: CSV with header, columns x,re,im; x strictly increasing.
inline Profile read_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read coefficient table " + path.string());
    std::string line;
    std::getline(in, line);
    std::vector<double> xs;
    std::vector<cplx> vals;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string a, b, c;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c))
            throw ConfigError("coefficient table row needs x,re,im: " + line);
        xs.push_back(parse_real(a, "table x"));
        vals.emplace_back(parse_real(b, "table re"), parse_real(c, "table im"));
    }
    if (xs.size() < 3) throw ConfigError("coefficient table needs at least 3 rows");
    for (size_t i = 0; i + 1 < xs.size(); ++i)
        if (!(xs[i + 1] > xs[i])) throw ConfigError("coefficient table x must be strictly increasing");
    return profiles::table(std::move(xs), std::move(vals));
}

inline void add_term(const json& j, int N, std::vector<Profile>& v, std::vector<bool>& used,
                     const std::filesystem::path& base) {
    Fields f(j, "coefficients");
    std::vector<int> indices{1};
    if (auto* e = f.find("indices")) {
        if (!e->is_array() || e->empty()) throw ConfigError("coefficients.indices: expected a non-empty array");
        indices.clear();
        for (const auto& k : *e) indices.push_back(integer(k, "coefficients.indices"));
    }
    Profile p;
    if (auto* t = f.find("table")) {
        if (!t->is_string()) throw ConfigError("coefficients.table: expected a path");
        p = read_table(base / t->get<std::string>());
    } else {
        const std::string name = f.get("preset").is_string() ? f.get("preset").get<std::string>() : "";
        const double center = f.find("center") ? number(f.get("center"), "coefficients.center") : 0.0;
        if (name == "zero") {
        } else if (name == "bump") {
            p = profiles::bump(f.find("radius") ? positive(f.get("radius"), "coefficients.radius") : 1.0,
                               f.find("amplitude") ? complex_value(f.get("amplitude"), "coefficients.amplitude") : 1.0,
                               center);
        } else if (name == "gaussian") {
            p = profiles::gaussian(
                f.find("amplitude") ? complex_value(f.get("amplitude"), "coefficients.amplitude") : 1.0,
                f.find("sigma") ? positive(f.get("sigma"), "coefficients.sigma") : 1.0, center);
        } else if (name == "sech2") {
            p = profiles::sech2(f.find("lambda") ? complex_value(f.get("lambda"), "coefficients.lambda") : -2.0,
                                center);
        } else {
            throw InvalidPreset("unknown coefficient preset '" + name + "' (zero, bump, gaussian, sech2)");
        }
    }
    f.finish();
    for (int k : indices) {
        if (k < 1 || k > N) throw InvalidPreset("coefficient index out of range 1.." + std::to_string(N));
        if (used[k - 1]) throw ConfigError("coefficient v_" + std::to_string(k) + " given twice");
        used[k - 1] = true;
        v[k - 1] = p;
    }
}

inline std::vector<cplx> z_points(const json& j) {
    Fields f(j, "z");
    std::vector<cplx> z;
    int kinds = 0;
    if (auto* e = f.find("points")) {
        ++kinds;
        if (!e->is_array() || e->empty()) throw ConfigError("z.points: expected a non-empty array");
        for (const auto& p : *e) z.push_back(complex_value(p, "z.points"));
    }
    if (auto* e = f.find("rectangle")) {
        ++kinds;
        Fields r(*e, "z.rectangle");
        const auto re = real_list(r.get("re"), "z.rectangle.re"), im = real_list(r.get("im"), "z.rectangle.im");
        const auto n = r.get("n");
        r.finish();
        if (re.size() != 2 || im.size() != 2 || !n.is_array() || n.size() != 2)
            throw ConfigError("z.rectangle: re, im are [lo, hi] and n is [n_re, n_im]");
        const int nr = integer(n[0], "z.rectangle.n"), ni = integer(n[1], "z.rectangle.n");
        if (nr < 1 || ni < 1) throw ConfigError("z.rectangle.n must be positive");
        for (int b = 0; b < ni; ++b)
            for (int a = 0; a < nr; ++a) {
                const double s = nr == 1 ? 0.0 : double(a) / (nr - 1), t = ni == 1 ? 0.0 : double(b) / (ni - 1);
                z.emplace_back(re[0] + s * (re[1] - re[0]), im[0] + t * (im[1] - im[0]));
            }
    }
    if (auto* e = f.find("ray")) {
        ++kinds;
        Fields r(*e, "z.ray");
        const cplx dir = complex_value(r.get("direction"), "z.ray.direction");
        const auto mags = real_list(r.get("magnitudes"), "z.ray.magnitudes");
        r.finish();
        if (dir == cplx(0.0)) throw ConfigError("z.ray.direction must be nonzero");
        for (double t : mags) z.push_back(t * dir / std::abs(dir));
    }
    if (auto* e = f.find("contour")) {
        ++kinds;
        Fields r(*e, "z.contour");
        const cplx c = complex_value(r.get("center"), "z.contour.center");
        const double rad = positive(r.get("radius"), "z.contour.radius");
        const int m = integer(r.get("nodes"), "z.contour.nodes");
        r.finish();
        if (m < 1) throw ConfigError("z.contour.nodes must be positive");
        for (int k = 0; k < m; ++k) z.push_back(c + std::polar(rad, 2 * pi * k / m));
    }
    f.finish();
    if (kinds != 1) throw ConfigError("z: give exactly one of points, rectangle, ray, contour");
    return z;
}

}  // namespace detail

/// Parse and validate a config document. Relative table paths resolve
/// against `base`.
inline RunConfig parse_config(const json& doc, const std::filesystem::path& base = ".") {
    using namespace detail;
    Fields f(doc, "config");
    const json& schema = f.get("schema");
    if (!schema.is_string() || schema.get<std::string>() != schema_version)
        throw ConfigError(std::string("config: schema must be \"") + schema_version + "\"");
    RunConfig c;
    c.N = integer(f.get("N"), "N");
    if (c.N < 1) throw ConfigError("N must be at least 1");

    std::vector<Profile> v(c.N);
    std::vector<bool> used(c.N, false);
    const json& cj = f.get("coefficients");
    if (cj.is_array()) {
        for (const auto& t : cj) add_term(t, c.N, v, used, base);
    } else {
        add_term(cj, c.N, v, used, base);
    }
    c.coeffs = CoefficientSet::from_profiles(c.N, std::move(v));
    if (auto* e = f.find("cutoff")) c.coeffs = c.coeffs.cutoff(positive(*e, "cutoff"));

    if (auto* e = f.find("tolerances")) {
        Fields t(*e, "tolerances");
        if (auto* p = t.find("identity_rel_tol")) c.tol.identity_rel_tol = positive(*p, "tolerances.identity_rel_tol");
        if (auto* p = t.find("defect_tol")) c.tol.defect_tol = positive(*p, "tolerances.defect_tol");
        if (auto* p = t.find("quad_tol")) c.tol.quad_tol = positive(*p, "tolerances.quad_tol");
        if (auto* p = t.find("z_step")) c.tol.z_step = positive(*p, "tolerances.z_step");
        if (auto* p = t.find("critical_ray_floor"))
            c.tol.critical_ray_floor = positive(*p, "tolerances.critical_ray_floor");
        t.finish();
    }

    if (auto* e = f.find("z")) c.z = z_points(*e);
    if (auto* e = f.find("A")) c.A = positive(*e, "A");
    if (auto* e = f.find("x")) c.x = number(*e, "x");
    if (auto* e = f.find("x_grid")) c.x_grid = real_list(*e, "x_grid");
    if (auto* e = f.find("commands")) {
        if (!e->is_array()) throw ConfigError("commands: expected an array");
        for (const auto& s : *e) {
            if (!s.is_string()) throw ConfigError("commands: expected strings");
            const auto name = s.get<std::string>();
            if (std::find(command_names().begin(), command_names().end(), name) == command_names().end())
                throw ConfigError("commands: unknown command '" + name + "'");
            c.commands.push_back(name);
        }
    }
    if (auto* e = f.find("outputs")) {
        Fields o(*e, "outputs");
        if (auto* d = o.find("dir")) {
            if (!d->is_string()) throw ConfigError("outputs.dir: expected a path");
            c.out_dir = d->get<std::string>();
        }
        o.finish();
    }
    if (auto* e = f.find("large_z")) {
        Fields l(*e, "large_z");
        LargeZSpec s;
        if (auto* p = l.find("direction")) s.direction = complex_value(*p, "large_z.direction");
        if (auto* p = l.find("magnitudes")) s.magnitudes = real_list(*p, "large_z.magnitudes");
        if (auto* p = l.find("slack")) s.slack = number(*p, "large_z.slack");
        l.finish();
        if (s.direction == cplx(0.0)) throw ConfigError("large_z.direction must be nonzero");
        c.large_z = s;
    }
    if (auto* e = f.find("contour")) {
        Fields l(*e, "contour");
        ContourSpec s;
        s.center = complex_value(l.get("center"), "contour.center");
        s.radius = positive(l.get("radius"), "contour.radius");
        l.finish();
        c.contour = s;
    }
    if (auto* e = f.find("expected_count")) c.expected_count = integer(*e, "expected_count");
    f.finish();

    // Every z must be off the spectrum and off the root-degeneracy floor.
    RootOptions ro;
    ro.re_floor = c.tol.critical_ray_floor;
    for (cplx z : c.z) RootSystem::compute(c.N, z, ro);
    return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(doc, path.parent_path());
}

}  // namespace ndtrace::cli
