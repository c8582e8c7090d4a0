#pragma once

// Named verification suites, their reports and convergence studies.

#include "equichern/loops.hpp"

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

namespace equichern {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ReportFormat { text, json_lines };

struct SuiteConfig {
    std::string suite = "all";
    std::size_t n = 256;             // loop samples; a power of two in [32, 1024]
    int q = 32;                      // averaging nodes
    double tol_scale = 1.0;
    std::uint64_t seed = 0xC1E;
    ReportFormat format = ReportFormat::text;

    /// Throws UsageError for an unknown suite or out-of-range parameters.
    void validate() const;
};

struct CheckResult {
    std::string id;
    std::string anchor;   // the identity the check exercises
    double defect = 0.0;
    double tol = 0.0;
    bool pass = false;
    double seconds = 0.0;
    std::string message;  // rejection text or a short note
};

std::vector<std::string> suite_names();

/// Check ids of a suite ("all" lists every check).
std::vector<std::string> suite_checks(const std::string& suite);

/// Runs every check of the suite, sorted by id. Module rejections become
/// failed checks carrying the message.
std::vector<CheckResult> run_suite(const SuiteConfig& config);

/// Runs a single check by id.
CheckResult run_check(const std::string& id, const SuiteConfig& config);

bool all_passed(const std::vector<CheckResult>& results);

/// tol = base * tol_scale * max(1, (256 / N)^order).
double scaled_tolerance(double base, int order, std::size_t n, double tol_scale);

void write_report(std::ostream& out, const std::vector<CheckResult>& results, ReportFormat format);

struct StudyRow {
    std::size_t n = 0;
    double defect = 0.0;
};

struct StudyResult {
    std::string check;
    std::vector<StudyRow> rows;
    double observed_order = 0.0;  // mean log-ratio slope over usable consecutive pairs
};

/// Checks with an N-dependent defect.
std::vector<std::string> study_checks();

StudyResult convergence_study(const std::string& check, const std::vector<std::size_t>& ns,
                              const SuiteConfig& base = {});

/// Comma-separated table "n,defect,order" plus a trailing observed-order line.
void write_study(std::ostream& out, const StudyResult& study);

/// Resolves a relative output path against EQUICHERN_OUT_DIR when set.
std::string resolve_output_path(const std::string& path);

// ------------------------------------------------- randomized instances

/// Seeded generator for a named check, stable across suite composition.
std::mt19937_64 check_rng(std::uint64_t seed, const std::string& id);

/// e^{i(w theta + sum_k c_k sin(k theta + phi_k))}, |c_k| <= 0.3, k = 1..3.
LoopGauge random_phase_gauge(std::mt19937_64& rng, std::size_t n, int winding);

/// diag(e^{i w theta}, 1) exp(i(c1 sin(theta + phi) sigma_x + c2 cos(2 theta) sigma_z)) V with V a
/// random constant unitary.
LoopGauge random_rank2_gauge(std::mt19937_64& rng, std::size_t n, int winding);

Mat random_unitary(std::mt19937_64& rng, int n);

/// Smooth loop field a cos(m theta + phi) + b sin((m+1) theta) + c with bounded random coefficients.
LoopTangentField random_loop_field(std::mt19937_64& rng, std::size_t n);

/// Non-invariant i eps x (x dy - y dx)/(1+r^2)^3 and invariant i eps (x dy - y dx)/(1+r^2)^2 on
/// S^2, written in the north chart and carried to the south chart by the change of coordinates.
BundleWithConnection perturb_sphere_bundle(const BundleWithConnection& b, double eps, bool invariant);

}  // namespace equichern
