#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "qls/spectral.hpp"

namespace qls {

struct Verdict {
    int id = 0;
    std::string name;
    bool pass = false;
    double seconds = 0.0;
    double budget = 0.0;   // wall-clock limit in seconds; exceeding it fails the criterion
    nlohmann::json detail; // measured values and thresholds
};

struct SuiteOptions {
    bool full = true;  // quick: reduced sample counts, same thresholds
    unsigned seed = 1;
};

constexpr int kCriteria = 14;

Verdict run_criterion(int id, const SuiteOptions& opt);
// ids from a comma list or "all"; throws ConfigError on bad ids.
std::vector<int> parse_criteria(const std::string& list);

// Independent brute-force l^1 H^s norm: direct DFT sums and recomputed cube weights.
double brute_l1_hs_norm(const Field& f, double s);

nlohmann::json to_json(const Verdict& v, bool with_time = false);

}  // namespace qls
