#pragma once

#include "config.hpp"

#include "ndtrace/fundmat.hpp"
#include "ndtrace/jost.hpp"
#include "ndtrace/parallel.hpp"
#include "ndtrace/verify.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace ndtrace::cli {

/// Shortest string that parses back to the same double.
inline std::string fmt(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

inline std::string fmt(cplx v) {
    std::string s = fmt(v.real());
    if (!std::signbit(v.imag())) s += '+';
    return s + fmt(v.imag()) + 'i';
}

inline std::string fmt(int v) { return std::to_string(v); }
inline std::string fmt(bool v) { return v ? "true" : "false"; }

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void write(std::ostream& os) const {
        auto line = [&](const std::vector<std::string>& r) {
            for (size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
            os << '\n';
        };
        line(header);
        for (const auto& r : rows) line(r);
    }
};

struct Summary {
    std::string identity;
    int n_points = 0;
    double max_rel_err = 0.0;
    bool pass = true;
};

struct CommandResult {
    Table table;
    std::vector<Summary> summaries;
};

namespace detail {

inline ZDiffOptions zdiff_options(const RunConfig& c) {
    ZDiffOptions o;
    o.rel_step = c.tol.z_step;
    return o;
}

inline void require_z(const RunConfig& c, const std::string& cmd) {
    if (c.z.empty()) throw ConfigError(cmd + " needs a z specification");
}

inline Summary summarize(const std::string& identity, const std::vector<double>& errs, double tol) {
    Summary s;
    s.identity = identity;
    s.n_points = static_cast<int>(errs.size());
    for (double e : errs) {
        s.max_rel_err = std::max(s.max_rel_err, e);
        if (!(e <= tol)) s.pass = false;
    }
    return s;
}

inline CommandResult roots(const RunConfig& c) {
    require_z(c, "roots");
    CommandResult r;
    r.table.header = {"z", "n"};
    for (int j = 1; j <= c.N; ++j) r.table.header.push_back("zeta_" + std::to_string(j));
    r.table.header.insert(r.table.header.end(), {"critical_ray_distance", "truncation_estimate"});
    RootOptions ro;
    ro.re_floor = c.tol.critical_ray_floor;
    for (cplx z : c.z) {
        const auto rs = RootSystem::compute(c.N, z, ro);
        std::vector<std::string> row{fmt(z), fmt(rs.n_plus())};
        for (cplx zeta : rs.roots()) row.push_back(fmt(zeta));
        row.push_back(fmt(rs.critical_ray_distance()));
        row.push_back(fmt(0.0));
        r.table.rows.push_back(std::move(row));
    }
    return r;
}

inline CommandResult jost_dump(const RunConfig& c, int threads) {
    require_z(c, "jost-dump");
    const double lo = *std::min_element(c.x_grid.begin(), c.x_grid.end());
    const double hi = *std::max_element(c.x_grid.begin(), c.x_grid.end());
    auto per_z = parallel_map<std::vector<JostSolution>>(static_cast<int>(c.z.size()), threads, [&](int i) {
        const JostSet js = JostSet::build(ndtrace::detail::regular_roots(c.N, c.z[i]), c.coeffs, lo, hi);
        std::vector<JostSolution> out;
        for (int j = 0; j < c.N; ++j) out.push_back(js.solution(j, c.x_grid));
        return out;
    });
    CommandResult r;
    r.table.header = {"z", "j", "side", "x"};
    for (int k = 1; k <= c.N; ++k) r.table.header.push_back("w_" + std::to_string(k));
    r.table.header.insert(r.table.header.end(), {"defect", "truncation_estimate"});
    std::vector<double> defects;
    for (size_t i = 0; i < c.z.size(); ++i)
        for (const auto& s : per_z[i]) {
            defects.push_back(s.max_defect);
            for (size_t g = 0; g < s.grid.size(); ++g) {
                std::vector<std::string> row{fmt(c.z[i]), fmt(s.j + 1), to_string(s.side), fmt(s.grid[g])};
                for (int k = 0; k < c.N; ++k) row.push_back(fmt(s.w_samples[g](k)));
                row.push_back(fmt(s.max_defect));
                row.push_back(fmt(s.tail_tolerance));
                r.table.rows.push_back(std::move(row));
            }
        }
    r.summaries.push_back(summarize("jost_defect", defects, c.tol.defect_tol));
    return r;
}

inline CommandResult wronskian(const RunConfig& c, int threads) {
    require_z(c, "wronskian");
    struct Row {
        cplx delta;
        double gap = 0.0;
    };
    auto vals = parallel_map<Row>(static_cast<int>(c.z.size()), threads, [&](int i) {
        Row row;
        row.delta = delta_value(c.coeffs, c.z[i], c.x, {}, &row.gap);
        return row;
    });
    CommandResult r;
    r.table.header = {"z", "x", "delta", "truncation_estimate"};
    for (size_t i = 0; i < c.z.size(); ++i)
        r.table.rows.push_back({fmt(c.z[i]), fmt(c.x), fmt(vals[i].delta), fmt(vals[i].gap)});
    return r;
}

inline void report_rows(CommandResult& r, const std::vector<VerificationReport>& reps, double tol) {
    r.table.header = {"z", "lhs", "rhs", "abs_err", "rel_err", "truncation_estimate", "pass"};
    std::vector<double> errs;
    for (const auto& rep : reps) {
        const double e = rep.finite() ? rep.rel_err : INFINITY;
        errs.push_back(e);
        r.table.rows.push_back({fmt(rep.z.front()), fmt(rep.lhs), fmt(rep.rhs), fmt(rep.abs_err), fmt(rep.rel_err),
                                fmt(rep.truncation_estimate), fmt(e <= tol)});
    }
    r.summaries.push_back(summarize(reps.empty() ? "" : to_string(reps.front().identity), errs, tol));
}

inline CommandResult trace(const RunConfig& c, int threads) {
    require_z(c, "trace-check");
    TraceOptions o;
    o.x = c.x;
    o.quad.rel_tol = c.tol.quad_tol;
    o.zdiff = zdiff_options(c);
    auto reps = parallel_map<VerificationReport>(static_cast<int>(c.z.size()), threads,
                                                 [&](int i) { return trace_check(c.coeffs, c.z[i], c.A, o); });
    CommandResult r;
    report_rows(r, reps, c.tol.identity_rel_tol);
    return r;
}

inline CommandResult det(const RunConfig& c, int threads) {
    require_z(c, "det-check");
    DetOptions o;
    o.x = c.x;
    auto reps = parallel_map<VerificationReport>(static_cast<int>(c.z.size()), threads,
                                                 [&](int i) { return det_identity_check(c.coeffs, c.z[i], o); });
    CommandResult r;
    report_rows(r, reps, c.tol.identity_rel_tol);
    return r;
}

inline CommandResult large_z(const RunConfig& c, int threads) {
    const LargeZSpec spec = c.large_z.value_or(LargeZSpec{});
    LargeZOptions o;
    o.x = c.x;
    o.slack = spec.slack;
    o.threads = threads;
    const LargeZResult res = large_z_check(c.coeffs, spec.direction, spec.magnitudes, o);
    CommandResult r;
    r.table.header = {"z", "deviation", "slope", "decreasing", "truncation_estimate", "pass"};
    for (size_t i = 0; i < res.z.size(); ++i)
        r.table.rows.push_back({fmt(res.z[i]), fmt(res.deviation[i]), fmt(res.slope), fmt(res.decreasing),
                                fmt(res.report.truncation_estimate), fmt(res.pass)});
    Summary s;
    s.identity = to_string(Identity::large_z);
    s.n_points = static_cast<int>(res.z.size());
    s.max_rel_err = res.report.rel_err;
    s.pass = res.pass;
    r.summaries.push_back(s);
    return r;
}

inline CommandResult eig(const RunConfig& c, int threads) {
    if (!c.contour) throw ConfigError("eig-count needs a contour {center, radius}");
    ContourOptions o;
    o.x = c.x;
    o.threads = threads;
    const Circle circle{c.contour->center, c.contour->radius};
    const WindingResult w = winding(c.coeffs, circle, o);
    const bool pass = !c.expected_count || *c.expected_count == w.count;
    CommandResult r;
    r.table.header = {"center", "radius", "count", "raw", "first_moment", "nodes", "min_abs_delta",
                      "truncation_estimate", "pass"};
    r.table.rows.push_back({fmt(circle.center), fmt(circle.radius), fmt(w.count), fmt(w.raw), fmt(w.first_moment),
                            fmt(w.nodes), fmt(w.min_abs_delta), fmt(w.change), fmt(pass)});
    Summary s;
    s.identity = to_string(Identity::eig_count);
    s.n_points = 1;
    s.max_rel_err = std::abs(w.raw - cplx(w.count));
    s.pass = pass;
    r.summaries.push_back(s);
    return r;
}

}  // namespace detail

inline CommandResult run_command(const std::string& name, const RunConfig& c, int threads) {
    if (name == "roots") return detail::roots(c);
    if (name == "jost-dump") return detail::jost_dump(c, threads);
    if (name == "wronskian") return detail::wronskian(c, threads);
    if (name == "trace-check") return detail::trace(c, threads);
    if (name == "det-check") return detail::det(c, threads);
    if (name == "large-z") return detail::large_z(c, threads);
    if (name == "eig-count") return detail::eig(c, threads);
    throw ConfigError("unknown command '" + name + "'");
}

inline json to_json(const Summary& s) {
    json j;
    j["identity"] = s.identity;
    j["n_points"] = s.n_points;
    j["max_rel_err"] = std::isfinite(s.max_rel_err) ? json(s.max_rel_err) : json(nullptr);
    j["pass"] = s.pass;
    return j;
}

/// Runs the commands, writing <out>/<command>.csv for each and
/// <out>/summary.json over all of them. Returns true iff every check passed.
inline bool run_all(const std::vector<std::string>& commands, const RunConfig& c, const std::filesystem::path& out,
                    int threads) {
    std::filesystem::create_directories(out);
    json summary = json::array();
    bool ok = true;
    for (const auto& name : commands) {
        const CommandResult r = run_command(name, c, threads);
        std::ofstream csv(out / (name + ".csv"));
        r.table.write(csv);
        if (!csv) throw ConfigError("cannot write " + (out / (name + ".csv")).string());
        for (const auto& s : r.summaries) {
            summary.push_back(to_json(s));
            ok = ok && s.pass;
        }
    }
    std::ofstream js(out / "summary.json");
    js << summary.dump(2) << '\n';
    return ok;
}

}  // namespace ndtrace::cli
