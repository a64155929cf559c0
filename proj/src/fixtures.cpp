#include "qls/fixtures.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "qls/spaces.hpp"

namespace qls {

namespace {

const std::map<std::string, std::string>& fixture_table() {
    static const std::map<std::string, std::string> t = {
        {"flat", R"(schema_version = 1

[run]
mode = analyze
fixture = flat

[grid]
d = 2
n = 128
J = 6

[nonlinearity]
name = flat

[data]
profile = zero

[trap]
R_override = 8
)"},
        {"bump", R"(schema_version = 1

[run]
mode = analyze
fixture = bump

[grid]
d = 2
n = 128
J = 6

[nonlinearity]
name = conformal
alpha = 1

[data]
profile = gaussian
amplitude = 0.7071067811865476
width = 2
)"},
        {"ring", R"(schema_version = 1

[run]
mode = analyze
fixture = ring

[grid]
d = 2
n = 128
J = 6

[nonlinearity]
name = conformal
alpha = 1

[data]
profile = ring
amplitude = 4.47213595499958
radius = 4
width = 1.2

[trap]
R_override = 8
)"},
        {"small_quadratic", R"(schema_version = 1

[run]
mode = solve
fixture = small_quadratic

[grid]
d = 1
n = 1024
J = 3

[nonlinearity]
name = quadratic

[data]
profile = gaussian
amplitude = 0.01
width = 0.5

[solver]
T = 0.05
use_lifespan = true
steps = 20
s = 3.61
s0 = 2.6
tol = 1e-8
n_max = 12
p = 1

[sweep]
kind = dependence
deltas = 1e-2, 1e-3, 1e-4
profile_width = 0.4
profile_center = 0.7
)"},
        {"small_cubic", R"(schema_version = 1

[run]
mode = solve
fixture = small_cubic

[grid]
d = 1
n = 1024
J = 3

[nonlinearity]
name = cubic

[data]
profile = gaussian
amplitude = 0.05
width = 0.5

[solver]
T = 0.05
use_lifespan = true
steps = 20
s = 3.11
s0 = 2.1
tol = 1e-8
n_max = 12
p = 2
)"},
    };
    return t;
}

}  // namespace

std::vector<std::string> fixture_names() { return {"flat", "bump", "ring", "small_quadratic", "small_cubic"}; }

const std::string& fixture_ini(const std::string& name) {
    const auto& t = fixture_table();
    const auto it = t.find(name);
    if (it == t.end()) throw ConfigError("unknown fixture '" + name + "'");
    return it->second;
}

RunConfig fixture(const std::string& name) { return RunConfig::parse(fixture_ini(name)); }

GridSpec grid_of(const RunConfig& c) {
    GridSpec g{static_cast<int>(c.integer("grid.d")), static_cast<int>(c.integer("grid.n")),
               static_cast<int>(c.integer("grid.J"))};
    try {
        g.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return g;
}

NonlinearitySpec nonlinearity_of(const RunConfig& c) {
    const int d = static_cast<int>(c.integer("grid.d"));
    const std::string& name = c.text("nonlinearity.name");
    const double alpha = c.real("nonlinearity.alpha");
    NonlinearitySpec nl;
    try {
        if (name == "custom") {
            const auto cls = c.text("nonlinearity.class") == "cubic" ? InteractionClass::cubic : InteractionClass::quadratic;
            nl = conformal_spec(d, alpha, parse_monomials(c.text("nonlinearity.forcing")), cls);
        } else {
            nl = builtin_spec(name, d, alpha);
        }
        nl.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("nonlinearity: ") + e.what());
    }
    return nl;
}

TrapConfig trap_of(const RunConfig& c) {
    TrapConfig t;
    t.epsilon = c.real("trap.epsilon");
    t.s0 = c.real("solver.s0");
    t.R_min = c.real("trap.R_min");
    t.boundary_points = static_cast<int>(c.integer("trap.boundary_points"));
    t.directions = static_cast<int>(c.integer("trap.directions"));
    t.interior_per_axis = static_cast<int>(c.integer("trap.interior_per_axis"));
    t.interior_directions = static_cast<int>(c.integer("trap.interior_directions"));
    t.kappa = c.real("trap.kappa");
    t.C0_coeff = c.real("trap.C0_coeff");
    t.exit_factor = c.real("trap.exit_factor");
    return t;
}

SolverConfig solver_of(const RunConfig& c) {
    SolverConfig s;
    s.T = c.real("solver.T");
    const long steps = c.integer("solver.steps");
    if (steps < 1) throw ConfigError("solver.steps must be >= 1");
    s.dt = s.T / static_cast<double>(steps);
    s.s = c.real("solver.s");
    s.s0 = c.real("solver.s0");
    s.n_max = static_cast<int>(c.integer("solver.n_max"));
    s.tol = c.real("solver.tol");
    s.p = c.real("solver.p");
    s.C_coeff = c.real("solver.C_coeff");
    s.K_coeff = c.real("solver.K_coeff");
    s.inner_tol = c.real("solver.inner_tol");
    s.check_trapping = c.boolean("solver.check_trapping");
    s.trap = trap_of(c);
    return s;
}

Field gaussian_field(const GridSpec& g, double amp, double width, double center, double k) {
    const cplx I(0.0, 1.0);
    return Field::from_function(g, [=](const Vec2& x) {
        const double r2 = (x[0] - center) * (x[0] - center) + (g.d == 2 ? x[1] * x[1] : 0.0);
        return amp * std::exp(-r2 / (2 * width * width)) * std::exp(I * k * x[0]);
    });
}

Field ring_field(const GridSpec& g, double amp, double radius, double width) {
    return Field::from_function(g, [=](const Vec2& x) {
        const double r = std::hypot(x[0], g.d == 2 ? x[1] : 0.0);
        return cplx(amp * std::exp(-(r - radius) * (r - radius) / (2 * width * width)), 0.0);
    });
}

Field initial_data(const RunConfig& c) {
    const GridSpec g = grid_of(c);
    const std::string& profile = c.text("data.profile");
    const double amp = c.real("data.amplitude");
    const double w = c.real("data.width");
    if (profile == "zero") return Field(g);
    if (!(w > 0.0)) throw ConfigError("data.width must be positive");
    if (profile == "ring") return ring_field(g, amp, c.real("data.radius"), w);
    return gaussian_field(g, amp, w, c.real("data.center"), c.real("data.wavenumber"));
}

Field sweep_profile(const RunConfig& c) {
    const double w = c.real("sweep.profile_width");
    if (!(w > 0.0)) throw ConfigError("sweep.profile_width must be positive");
    return gaussian_field(grid_of(c), 1.0, w, c.real("sweep.profile_center"));
}

Setup resolve_setup(const RunConfig& c, bool with_trap) {
    Setup s;
    s.grid = grid_of(c);
    s.nl = nonlinearity_of(c);
    s.u0 = initial_data(c);
    s.solver = solver_of(c);
    const TrapConfig& tc = s.solver.trap;
    s.search = find_R(s.u0, s.nl, tc);
    const double over = c.real("trap.R_override");
    s.R = over > 0.0 ? over : (s.search.admissible ? s.search.R : 0.0);
    s.M = lp_hs_norm(s.u0, s.solver.s0, s.solver.p).value;
    s.M_s = lp_hs_norm(s.u0, s.solver.s, s.solver.p).value;
    s.solver.R = s.R;
    const double cap = s.solver.T;
    s.T_bound = cap;
    if (with_trap && s.R > 0.0) {
        const auto g = metric_from_field(s.u0, s.nl);
        s.trap = compute_L(*g, s.R, tc, s.M);
        s.T_bound = lifespan_bound(s.M, s.M_s, s.trap.L, s.solver, cap);
    }
    if (c.boolean("solver.use_lifespan")) {
        s.solver.T = s.T_bound;
        s.solver.dt = s.T_bound / static_cast<double>(c.integer("solver.steps"));
    }
    return s;
}

}  // namespace qls
