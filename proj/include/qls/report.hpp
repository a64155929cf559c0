#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

#include "qls/config.hpp"
#include "qls/multiplier.hpp"
#include "qls/nontrap.hpp"
#include "qls/solver.hpp"
#include "qls/spaces.hpp"

namespace qls {

// Unwritable output; exit code 1.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum ExitCode { kExitOk = 0, kExitIo = 1, kExitSchema = 2, kExitNumerical = 3 };

nlohmann::json to_json(const NormReport& r);
nlohmann::json to_json(const ProbeResult& r);
nlohmann::json to_json(const TrapReport& r);
nlohmann::json to_json(const RSearch& r);
nlohmann::json to_json(const IterationTrace& tr);
nlohmann::json to_json(const EnvelopeTrace& e);
nlohmann::json to_json(const LocalEnergyReport& r);
nlohmann::json to_json(const DependenceTable& t);
nlohmann::json to_json(const CommutatorVerdict& v);

struct RunOutcome {
    int exit_code = kExitOk;
    nlohmann::json report;   // deterministic: no timings
    nlohmann::json timings;  // wall-clock seconds per phase
    std::vector<std::string> files;
};

// Runs the configured mode and writes report.json, timings.json and the CSV tables
// into output.dir (created if missing). Throws ConfigError or IoError.
RunOutcome run(const RunConfig& cfg, bool verbose = false);

void write_text(const std::string& path, const std::string& text);

}  // namespace qls
