#pragma once

#include <string>
#include <vector>

#include "qls/config.hpp"
#include "qls/model.hpp"
#include "qls/nontrap.hpp"
#include "qls/solver.hpp"

namespace qls {

// Built-in fixtures: flat, bump, ring, small_quadratic, small_cubic.
// The INI text is identical to configs/<name>.ini.
std::vector<std::string> fixture_names();
const std::string& fixture_ini(const std::string& name);
RunConfig fixture(const std::string& name);

GridSpec grid_of(const RunConfig& c);
NonlinearitySpec nonlinearity_of(const RunConfig& c);
TrapConfig trap_of(const RunConfig& c);
// T and dt are left at the cap; see resolve_setup.
SolverConfig solver_of(const RunConfig& c);

Field initial_data(const RunConfig& c);
// Perturbation profile for dependence sweeps: unit bump at sweep.profile_center.
Field sweep_profile(const RunConfig& c);

// gaussian: amp exp(-|x - c e0|^2 / (2 w^2)) exp(i k x0); ring: amp exp(-(|x| - r)^2 / (2 w^2)).
Field gaussian_field(const GridSpec& g, double amp, double width, double center = 0.0, double k = 0.0);
Field ring_field(const GridSpec& g, double amp, double radius, double width);

// Geometry of the data: R (search or override), M, M_s and the trapping report of g(u0).
struct Setup {
    GridSpec grid;
    NonlinearitySpec nl;
    Field u0;
    RSearch search;
    double R = 0.0;
    double M = 0.0;
    double M_s = 0.0;
    TrapReport trap;
    SolverConfig solver;  // R, trap filled; T from the lifespan rule when enabled
    double T_bound = 0.0;
};
Setup resolve_setup(const RunConfig& c, bool with_trap = true);

}  // namespace qls
