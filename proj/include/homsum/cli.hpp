#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "homsum/config.hpp"

namespace homsum {

// One contracted check: identities pass when residual <= tolerance, bounds when
// lhs - rhs <= tolerance * max(1, |lhs|, |rhs|).
struct CheckRow {
    std::string check;
    std::string case_id;
    double lhs = 0.0;
    double rhs = 0.0;
    double residual = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};
inline constexpr const char* kCheckHeader = "check,case,lhs,rhs,residual,tolerance,pass";
void write_checks(std::ostream& out, const std::vector<CheckRow>& rows);

// Product-formula, chaos-grading, carre-du-champ mean, top-level energy and U/V
// identities over a seeded random corpus.
std::vector<CheckRow> identity_suite(const CorpusSettings& corpus, std::uint64_t seed, unsigned threads = 1);
// Fourth-cumulant sign, chaos variance and covariance bounds, top-level energy
// bounds, off-diagonal mass, contraction transfer chain and the classical
// quadratic fourth-moment bound.
std::vector<CheckRow> inequality_suite(const CorpusSettings& corpus, std::uint64_t seed, unsigned threads = 1);

// Exit status: 0 all checks pass, 2 a check failed, 1 usage or config error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace homsum
