#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "excursus/stats.hpp"

namespace excursus {

inline constexpr const char* kVersion = "0.1.0";

// Outcome of one verification check: an analytic-oracle comparison or a
// seeded statistical test. `reports` carries the goodness-of-fit
// sub-results when the check is statistical; oracle checks record their
// errors and tolerances in `detail`.
struct CheckResult {
    std::string id;
    bool passed = false;
    double seconds = 0.0;
    std::string detail;
    std::vector<GofReport> reports;
};

// Shared knobs for the verification menu. `menu` selects checks by id;
// empty or {"all"} means every check that applies to the spec. `scale`
// divides every per-check sample size, so the same menu runs at reduced
// cost without changing what is checked.
struct ExperimentConfig {
    std::string spec_name = "brownian";
    std::vector<std::string> menu;
    double scale = 1.0;
    std::uint64_t seed = 1;
    int threads = 0; // 0: EXCURSUS_THREADS, then hardware
};

struct RunManifest {
    std::string command;
    std::string version = kVersion;
    ExperimentConfig config;
    double seconds = 0.0;
    std::vector<CheckResult> checks;

    bool all_passed() const;
    // Indented JSON: command, version, config echo, wall time, and the
    // per-check verdicts with their goodness-of-fit reports.
    std::string to_json(int indent = 2) const;
    // One "PASS|FAIL id detail" line per check.
    std::string summary() const;
};

// Ids accepted by run_checks, in registry order.
std::vector<std::string> list_checks();
// Ids run by the suites, in execution order.
std::vector<std::string> suite_checks();

// Runs the selected menu against config.spec_name. Each check draws from
// its own fixed seed block derived from config.seed, so manifests are
// reproducible check by check and independent of the menu subset chosen.
// Unknown spec names, unknown check ids, and checks that do not apply to
// the spec all throw std::invalid_argument.
RunManifest run_checks(const ExperimentConfig& config);

// Fixed verification bundles with pinned specs and parameters per check:
// "acceptance" at full sample sizes, "smoke" the same checks at sizes
// divided by 10. `on_check` (when set) observes each result as it lands.
RunManifest run_suite(
    const std::string& name, std::uint64_t seed = 1, int threads = 0,
    const std::function<void(const CheckResult&)>& on_check = {});

} // namespace excursus
