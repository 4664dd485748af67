#pragma once

#include "ndtrace/common.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace ndtrace {

enum class Identity { trace_formula, det_identity, resint, large_z, eig_count };

inline const char* to_string(Identity id) {
    switch (id) {
        case Identity::trace_formula: return "trace_formula";
        case Identity::det_identity: return "det_identity";
        case Identity::resint: return "resint";
        case Identity::large_z: return "large_z";
        case Identity::eig_count: return "eig_count";
    }
    return "unknown";
}

/// Paired sides of an identity with their discrepancy.
struct VerificationReport {
    Identity identity = Identity::trace_formula;
    std::vector<cplx> z;
    cplx lhs, rhs;
    double abs_err = 0.0;
    double rel_err = 0.0;
    /// Estimated size of what the numerics left out (domain truncation,
    /// grid refinement, z-step disagreement), whichever is largest.
    double truncation_estimate = 0.0;
    double runtime = 0.0;

    static VerificationReport make(Identity id, std::vector<cplx> z, cplx lhs, cplx rhs, double trunc) {
        VerificationReport r;
        r.identity = id;
        r.z = std::move(z);
        r.lhs = lhs;
        r.rhs = rhs;
        r.abs_err = std::abs(lhs - rhs);
        r.rel_err = r.abs_err / std::max({std::abs(lhs), std::abs(rhs), 1e-300});
        r.truncation_estimate = trunc;
        return r;
    }

    bool finite() const {
        return std::isfinite(lhs.real()) && std::isfinite(lhs.imag()) && std::isfinite(rhs.real()) &&
               std::isfinite(rhs.imag()) && std::isfinite(abs_err) && std::isfinite(rel_err) &&
               std::isfinite(truncation_estimate);
    }
};

}  // namespace ndtrace
