#pragma once

#include <cstdint>
#include <vector>

#include "miovs/random.hpp"
#include "miovs/types.hpp"

namespace miovs {

/// Square-array subchannel cell: pitch square with a quarter rod in each
/// corner. Defaults are typical 17x17 PWR lattice dimensions.
struct GeometrySpec {
    double pitch = 0.0126;         // m
    double rod_diameter = 0.0095;  // m
    double length = 0.800;         // m, heated/flow length

    double flow_area() const;         // pitch^2 - pi*D^2/4
    double wetted_perimeter() const;  // pi*D
    double hydraulic_diameter() const;
    double p_over_d() const { return pitch / rod_diameter; }

    void validate() const;  // pitch > rod_diameter > 0, length > 0
};

/// Constant fluid properties at the reference state (564 K, PWR pressure),
/// taken from standard steam-table data. These are fixed model constants,
/// overridable through the CLI config.
struct FluidProperties {
    double density = 742.0;              // kg/m^3
    double dynamic_viscosity = 9.0e-5;   // Pa*s
    double specific_heat = 5450.0;       // J/(kg*K)
    double thermal_conductivity = 0.56;  // W/(m*K)

    double prandtl() const {
        return dynamic_viscosity * specific_heat / thermal_conductivity;
    }

    void validate() const;
};

/// Axial data-reduction record along the heated length. The stored h is the
/// closure value used in construction; h * (T_w - T_b) = q holds at every
/// grid point.
struct AxialProfile {
    std::vector<double> z;    // m, uniform over [0, length]
    std::vector<double> q;    // W/m^2
    std::vector<double> t_b;  // K, bulk temperature
    std::vector<double> t_w;  // K, wall temperature
    std::vector<double> h;    // W/(m^2 K)
    double v_in = 0.0;        // m/s, inlet velocity the profile was built for
};

/// Correlation round-trip record.
struct NusseltReport {
    double h_avg = 0.0;        // W/(m^2 K)
    double nu_avg = 0.0;
    double nu_weisman = 0.0;
    double margin_percent = 0.0;
    double reynolds = 0.0;
    double prandtl = 0.0;
};

/// Re = rho * v_in * D_h / mu.
double reynolds(const GeometrySpec& geom, const FluidProperties& props,
                double v_in);

/// Entrance length number Z_L = 4.4 * Re^(1/6).
double entrance_length_number(double re);

/// L = Z_L * D_h in meters.
double entrance_length(double re, double hydraulic_diameter);

/// Sinusoidal rod flux sampled at n1 cell centers: q_j = p_max *
/// sin(pi * z_j / length), z_j = (j + 1/2) * length / n1. Endpoints are
/// excluded so every sensor reads a positive flux. Units follow p_max.
std::vector<double> sample_heat_flux(double p_max, std::size_t n1,
                                     double length);

/// Square-array rod-bundle correlation:
/// Nu = (1.130 * P/D - 0.2609) * 0.023 * Re^0.8 * Pr^0.333.
/// p_over_d must lie in the validity band [1.1, 1.5].
double weisman_nusselt(double re, double pr, double p_over_d);

/// Builds the axial record for a sample on an n_z-point uniform grid:
/// piecewise-linear flux (pinned to zero at both rod ends), bulk temperature
/// from the trapezoid energy balance, constant h from the Weisman closure,
/// and T_w = T_b + q/h. Requires n_z >= 16.
AxialProfile axial_profiles(const InputSample& sample, const GeometrySpec& geom,
                            const FluidProperties& props, std::size_t n_z);

/// Recovers h(z) = q / (T_w - T_b) pointwise (0 where the temperature
/// difference vanishes, i.e. at unheated rod ends), averages it by the
/// trapezoid rule, and compares Nu_avg = h_avg * D_h / k_0 against the
/// Weisman value at the profile's Reynolds number.
NusseltReport nusselt_roundtrip(const AxialProfile& profile,
                                const GeometrySpec& geom,
                                const FluidProperties& props);

/// Deterministic cell-centered lattice over the pitch square with points
/// strictly inside any quarter-rod circle discarded. The achieved node count
/// lands within about +-10% of target_n. Throws if fewer than 16 nodes
/// survive.
CenterPlaneMesh generate_mesh(const GeometrySpec& geom, std::size_t target_n,
                              double z_plane);

/// Mesh with exactly n_nodes nodes, found by scanning lattice sizes near the
/// analytic estimate. Used to rebuild the trunk domain from a checkpoint
/// alone. Throws if no lattice size reproduces n_nodes.
CenterPlaneMesh mesh_for_node_count(const GeometrySpec& geom,
                                    std::size_t n_nodes, double z_plane);

/// Ground-truth fields at the center plane (z = length/2):
///   v = v_max * r^(1/7), v_max set so the node mean equals v_in,
///   T = T_w + (T_b - T_w) * r^(1/7), clamped between T_b and T_w,
///   k = u_tau^2 * (3 * r * (1 - r) + 0.1), u_tau = v_in * sqrt(f/8),
///       f = 0.316 * Re^-0.25,
/// with r = wall_distance / max wall_distance.
FieldSnapshot synthesize_fields(const InputSample& sample,
                                const GeometrySpec& geom,
                                const FluidProperties& props,
                                const CenterPlaneMesh& mesh);

/// True when all three parameters lie inside their sampling intervals.
bool inputs_within_ranges(double p_max, double t_in, double v_in,
                          const SampleRanges& ranges);

/// n_samples operating points drawn independently and uniformly from the
/// ranges (per-sample derived streams, so the result does not depend on
/// evaluation order), each paired with its synthesized fields.
Dataset generate_dataset(std::size_t n_samples, std::uint64_t seed,
                         const GeometrySpec& geom, const FluidProperties& props,
                         const CenterPlaneMesh& mesh, const SampleRanges& ranges,
                         std::size_t n1);

/// Axial grid resolution used when synthesizing fields and by the CLI
/// validation command.
inline constexpr std::size_t kDefaultAxialResolution = 256;

}  // namespace miovs
