#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

namespace qls {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;
using RVec = std::vector<double>;
using Vec2 = std::array<double, 2>;

// Periodic box [-P/2, P/2)^d with P = 2^J and n points per axis.
// Dyadic indices count cycles per unit length: band k sits at |xi|/(2 pi) ~ 2^k.
struct GridSpec {
    int d = 1;
    int n = 256;
    int J = 3;

    double period() const;
    double spacing() const;
    double cell_volume() const;
    std::size_t size() const;
    // Largest band fully below the Nyquist frequency n/(2P).
    int k_max() const;
    void validate() const;
    // Position of a flattened index; axis 0 varies slowest.
    Vec2 coord(std::size_t idx) const;
    std::size_t index(int i0, int i1 = 0) const;

    bool operator==(const GridSpec& o) const { return d == o.d && n == o.n && J == o.J; }
    bool operator!=(const GridSpec& o) const { return !(*this == o); }
};

class Field {
public:
    Field() = default;
    explicit Field(const GridSpec& spec, int m = 1);
    Field(const GridSpec& spec, std::vector<CVec> comps);

    static Field from_function(const GridSpec& spec, const std::function<cplx(const Vec2&)>& f);

    const GridSpec& spec() const { return spec_; }
    int m() const { return static_cast<int>(comps_.size()); }
    CVec& comp(int c = 0) { return comps_.at(c); }
    const CVec& comp(int c = 0) const { return comps_.at(c); }
    std::vector<CVec>& comps() { return comps_; }
    const std::vector<CVec>& comps() const { return comps_; }

    bool finite() const;
    double l2() const;      // grid L2 over all components
    double max_abs() const;

    Field& operator+=(const Field& o);
    Field& operator-=(const Field& o);
    Field& operator*=(cplx a);
    friend Field operator+(Field a, const Field& b) { return a += b; }
    friend Field operator-(Field a, const Field& b) { return a -= b; }
    friend Field operator*(cplx a, Field f) { return f *= a; }

private:
    void check_compatible(const Field& o) const;
    GridSpec spec_{};
    std::vector<CVec> comps_;
};

// Unitary DFT coefficients over grid indices: fhat_m = N^{-1/2} sum_i f_i e^{-2 pi i m.i/n}.
class FrequencyField {
public:
    FrequencyField() = default;
    FrequencyField(const GridSpec& spec, std::vector<CVec> comps);
    const GridSpec& spec() const { return spec_; }
    int m() const { return static_cast<int>(comps_.size()); }
    CVec& comp(int c = 0) { return comps_.at(c); }
    const CVec& comp(int c = 0) const { return comps_.at(c); }
    // Grid L2 norm (equals Field::l2 of the inverse transform).
    double l2() const;

private:
    GridSpec spec_{};
    std::vector<CVec> comps_;
};

class SpacetimeField {
public:
    SpacetimeField() = default;
    SpacetimeField(std::vector<double> times, std::vector<Field> slices);
    static SpacetimeField zeros(const GridSpec& spec, int m, double T, int steps);
    static SpacetimeField constant_in_time(const Field& f, double T, int steps);

    const std::vector<double>& times() const { return times_; }
    const std::vector<Field>& slices() const { return slices_; }
    std::vector<Field>& slices() { return slices_; }
    const Field& slice(std::size_t i) const { return slices_.at(i); }
    Field& slice(std::size_t i) { return slices_.at(i); }
    std::size_t size() const { return slices_.size(); }
    const GridSpec& spec() const;
    int m() const { return slices_.empty() ? 0 : slices_.front().m(); }
    double dt() const;
    double T() const;
    // Trapezoid weights for time integrals on the sample grid.
    RVec time_weights() const;

private:
    std::vector<double> times_;
    std::vector<Field> slices_;
};

// Cached per-grid tables: wave numbers, band symbols, derivative multipliers.
struct SpectralTables {
    GridSpec spec;
    std::vector<RVec> xi;        // radian wave number per axis, full
    std::vector<RVec> xi_odd;    // same with the Nyquist mode zeroed (odd derivatives)
    RVec nu;                     // |xi| / (2 pi)
    RVec laplacian;              // -|xi|^2
    std::vector<RVec> band;      // S_k symbols, k = 0..k_max
};

const SpectralTables& spectral_tables(const GridSpec& spec);

namespace fft {
// Unnormalized forward transform and normalized (1/N) inverse; in and out may alias.
void forward(const GridSpec& spec, const cplx* in, cplx* out);
void inverse(const GridSpec& spec, const cplx* in, cplx* out);
CVec forward(const GridSpec& spec, const CVec& in);
CVec inverse(const GridSpec& spec, const CVec& in);
}  // namespace fft

FrequencyField to_frequency(const Field& f);
Field from_frequency(const FrequencyField& f);

Field spectral_derivative(const Field& f, int axis);
CVec spectral_derivative(const GridSpec& spec, const CVec& f, int axis);

// Symbol of S_k at cycle frequency nu on a grid whose top band is k_max.
double lp_symbol(int k, double nu, int k_max);
// Symbol of S_{[k1,k2]}.
double lp_range_symbol(int k1, int k2, double nu, int k_max);

Field lp_project(const Field& f, int k);
Field lp_project_range(const Field& f, int k1, int k2);
CVec lp_project(const GridSpec& spec, const CVec& f, int k);
CVec lp_project_range(const GridSpec& spec, const CVec& f, int k1, int k2);

// Tensor-product cube weight chi_Q; stored per axis with its support list.
struct Cube {
    int id = 0;
    std::array<int, 2> index{0, 0};
    Vec2 center{0.0, 0.0};
    std::array<RVec, 2> axis_weight;
    std::array<std::vector<int>, 2> support;

    double weight_at(const GridSpec& spec, std::size_t idx) const;
    RVec dense(const GridSpec& spec) const;
    // sum over the support of w(idx)^2 * density[idx]
    double weighted_sum_sq(const GridSpec& spec, const RVec& density) const;
};

// Smooth partition of unity subordinate to the cubes of side 2^j.
std::vector<Cube> cube_partition(const GridSpec& spec, int j);
// Shared cached version for hot loops.
const std::vector<Cube>& cached_cube_partition(const GridSpec& spec, int j);

}  // namespace qls
