#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "qls/spectral.hpp"

namespace qls {

// g^{jk} and its first derivatives at a point, packed (00, 01, 11).
struct MetricSample {
    std::array<double, 3> g{1.0, 0.0, 1.0};
    std::array<std::array<double, 3>, 2> dg{};  // dg[axis][packed]
};

class Metric {
public:
    virtual ~Metric() = default;
    virtual int dim() const = 0;
    virtual MetricSample eval(const Vec2& x) const = 0;
    // Positions with |x_i| beyond this are off the sampled domain.
    virtual double half_width() const { return 1e300; }
};

class FlatMetric final : public Metric {
public:
    explicit FlatMetric(int d) : d_(d) {}
    int dim() const override { return d_; }
    MetricSample eval(const Vec2&) const override { return {}; }

private:
    int d_;
};

class AnalyticMetric final : public Metric {
public:
    AnalyticMetric(int d, std::function<MetricSample(const Vec2&)> f, double half_width = 1e300)
        : d_(d), f_(std::move(f)), hw_(half_width) {}
    int dim() const override { return d_; }
    MetricSample eval(const Vec2& x) const override { return f_(x); }
    double half_width() const override { return hw_; }

private:
    int d_;
    std::function<MetricSample(const Vec2&)> f_;
    double hw_;
};

// g = gamma(|x|) I with gamma given with its radial derivative.
std::shared_ptr<Metric> radial_conformal_metric(int d, std::function<std::array<double, 2>(double)> gamma_and_deriv);

enum class Interp { hermite, trig };

// Metric sampled on a periodic grid (packed components; d = 1 uses slot 0).
// hermite: tensor quintic Hermite from spectral derivatives up to order (2,2).
// trig: exact trigonometric interpolation (slow; used as an oracle).
class GridMetric final : public Metric {
public:
    GridMetric(const GridSpec& spec, const std::array<RVec, 3>& g, Interp mode = Interp::hermite);
    int dim() const override { return spec_.d; }
    MetricSample eval(const Vec2& x) const override;
    double half_width() const override { return 0.5 * spec_.period(); }
    const GridSpec& spec() const { return spec_; }
    const std::array<RVec, 3>& values() const { return g_; }
    Interp mode() const { return mode_; }

private:
    MetricSample eval_hermite(const Vec2& x) const;
    MetricSample eval_trig(const Vec2& x) const;

    GridSpec spec_;
    Interp mode_;
    std::array<RVec, 3> g_;
    // der_[q][a * 3 + b] = d_x^a d_y^b g_q on the grid (hermite)
    std::array<std::array<RVec, 9>, 3> der_;
    // spectra (trig)
    std::array<CVec, 3> hat_;
};

struct PhasePoint {
    Vec2 x{0.0, 0.0};
    Vec2 xi{0.0, 0.0};
};

enum class FlowKind { full, cosphere };

struct FlowOptions {
    double atol = 1e-10;
    double rtol = 1e-10;
    double h_init = 1e-2;
    double h_max = 0.25;
    double h_min = 1e-12;
    int max_rejections = 60;
};

double hamiltonian(const Metric& g, const PhasePoint& p);
// x' = a_xi, xi' = -a_x (full) or -a_x + (a_x . xi) xi (cosphere).
PhasePoint vector_field(const Metric& g, const PhasePoint& p, FlowKind kind);

struct StepResult {
    PhasePoint p;
    double h_used = 0.0;
    double h_next = 0.0;
    int rejections = 0;
    bool ok = false;  // false: step-size underflow or rejection cascade
};

// One accepted Dormand-Prince 5(4) step starting with trial size h.
StepResult flow_step(const Metric& g, const PhasePoint& p, double h, FlowKind kind, const FlowOptions& opt = {});
// Integrates to time T > 0 exactly (last step shortened). Throws on step failure.
PhasePoint flow_to(const Metric& g, PhasePoint p, double T, FlowKind kind, const FlowOptions& opt = {});
// Fixed-step classical RK4 (oracle integrator).
PhasePoint rk4_flow(const Metric& g, PhasePoint p, double T, double dt, FlowKind kind);

enum class RayStatus { escaped, capped, left_grid, failed };
std::string ray_status_name(RayStatus s);

struct RaySample {
    double t = 0.0;
    PhasePoint p;
    double length = 0.0;
};

struct RayCaps {
    double R = 1.0;              // length is measured inside |x| <= 2R
    double length_cap = 1e300;   // status capped once total length reaches this
    double exit_radius = 4.0;    // escaped once |x| >= exit_radius moving outward
    bool record = false;
    double crossing_tol = 1e-8;
    // Fixed step for the dense oracle; <= 0 selects the adaptive integrator.
    double fixed_step = 0.0;
};

struct Ray {
    std::vector<RaySample> samples;
    RayStatus status = RayStatus::failed;
    double length_total = 0.0;
    double length_in_2BR = 0.0;
    double duration = 0.0;
    long steps = 0;
    double mean_step = 0.0;
    double min_radius = 1e300;  // smallest |x| reached
};

Ray trace_ray(const Metric& g, const PhasePoint& start, const RayCaps& caps, const FlowOptions& opt = {});

struct FlowComparison {
    std::vector<double> t;
    std::vector<double> deviation;  // running max of |x - x~| + |xi - xi~|
    double max_deviation = 0.0;
};
FlowComparison compare_flows(const Metric& g1, const Metric& g2, const PhasePoint& p, double horizon, int samples = 64,
                             FlowKind kind = FlowKind::cosphere, const FlowOptions& opt = {});

}  // namespace qls
