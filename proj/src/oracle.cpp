#include "miovs/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "miovs/parallel.hpp"

namespace miovs {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kKilowatt = 1000.0;  // InputSample fluxes are kW/m^2

}  // namespace

void InputSample::validate() const {
    for (double q : p_rod) {
        if (!(q >= 0.0)) {
            throw std::runtime_error("input sample: rod flux entries must be >= 0");
        }
    }
    if (!(t_in > 0.0)) {
        throw std::runtime_error("input sample: inlet temperature must be > 0");
    }
    if (!(v_in > 0.0)) {
        throw std::runtime_error("input sample: inlet velocity must be > 0");
    }
}

double GeometrySpec::flow_area() const {
    return pitch * pitch - kPi * rod_diameter * rod_diameter / 4.0;
}

double GeometrySpec::wetted_perimeter() const { return kPi * rod_diameter; }

double GeometrySpec::hydraulic_diameter() const {
    return 4.0 * flow_area() / wetted_perimeter();
}

void GeometrySpec::validate() const {
    if (!(rod_diameter > 0.0) || !(pitch > rod_diameter)) {
        throw std::runtime_error("geometry: require pitch > rod_diameter > 0");
    }
    if (!(length > 0.0)) {
        throw std::runtime_error("geometry: require length > 0");
    }
}

void FluidProperties::validate() const {
    if (!(density > 0.0) || !(dynamic_viscosity > 0.0) ||
        !(specific_heat > 0.0) || !(thermal_conductivity > 0.0)) {
        throw std::runtime_error("fluid properties must all be positive");
    }
}

double reynolds(const GeometrySpec& geom, const FluidProperties& props,
                double v_in) {
    return props.density * v_in * geom.hydraulic_diameter() /
           props.dynamic_viscosity;
}

double entrance_length_number(double re) { return 4.4 * std::pow(re, 1.0 / 6.0); }

double entrance_length(double re, double hydraulic_diameter) {
    return entrance_length_number(re) * hydraulic_diameter;
}

std::vector<double> sample_heat_flux(double p_max, std::size_t n1,
                                     double length) {
    if (n1 < 2) {
        throw std::runtime_error("heat flux profile needs at least 2 sensor points");
    }
    std::vector<double> q(n1);
    for (std::size_t j = 0; j < n1; ++j) {
        const double z = (static_cast<double>(j) + 0.5) * length /
                         static_cast<double>(n1);
        q[j] = p_max * std::sin(kPi * z / length);
    }
    return q;
}

double weisman_nusselt(double re, double pr, double p_over_d) {
    if (!(re > 0.0) || !(pr > 0.0)) {
        throw std::runtime_error("weisman correlation needs Re > 0 and Pr > 0");
    }
    if (p_over_d < 1.1 || p_over_d > 1.5) {
        throw std::runtime_error("weisman correlation valid for P/D in [1.1, 1.5], got " +
                                 std::to_string(p_over_d));
    }
    const double psi = 1.130 * p_over_d - 0.2609;
    return psi * 0.023 * std::pow(re, 0.8) * std::pow(pr, 0.333);
}

namespace {

// Piecewise-linear flux over [0, length] in W/m^2. Knots are the sensor cell
// centers plus both rod ends, where the sinusoidal profile vanishes.
struct FluxInterpolant {
    std::vector<double> z;
    std::vector<double> q;

    FluxInterpolant(const InputSample& sample, double length) {
        const std::size_t n1 = sample.p_rod.size();
        z.reserve(n1 + 2);
        q.reserve(n1 + 2);
        z.push_back(0.0);
        q.push_back(0.0);
        for (std::size_t j = 0; j < n1; ++j) {
            z.push_back((static_cast<double>(j) + 0.5) * length /
                        static_cast<double>(n1));
            q.push_back(sample.p_rod[j] * kKilowatt);
        }
        z.push_back(length);
        q.push_back(0.0);
    }

    double at(double zq) const {
        if (zq <= z.front()) return q.front();
        if (zq >= z.back()) return q.back();
        const auto it = std::upper_bound(z.begin(), z.end(), zq);
        const std::size_t hi = static_cast<std::size_t>(it - z.begin());
        const std::size_t lo = hi - 1;
        const double t = (zq - z[lo]) / (z[hi] - z[lo]);
        return q[lo] + t * (q[hi] - q[lo]);
    }
};

double interp_on_grid(const std::vector<double>& z, const std::vector<double>& f,
                      double zq) {
    if (zq <= z.front()) return f.front();
    if (zq >= z.back()) return f.back();
    const auto it = std::upper_bound(z.begin(), z.end(), zq);
    const std::size_t hi = static_cast<std::size_t>(it - z.begin());
    const std::size_t lo = hi - 1;
    const double t = (zq - z[lo]) / (z[hi] - z[lo]);
    return f[lo] + t * (f[hi] - f[lo]);
}

}  // namespace

AxialProfile axial_profiles(const InputSample& sample, const GeometrySpec& geom,
                            const FluidProperties& props, std::size_t n_z) {
    if (n_z < 16) {
        throw std::runtime_error("axial profile needs n_z >= 16");
    }
    sample.validate();
    geom.validate();
    props.validate();

    const FluxInterpolant flux(sample, geom.length);
    const double dz = geom.length / static_cast<double>(n_z - 1);

    AxialProfile p;
    p.v_in = sample.v_in;
    p.z.resize(n_z);
    p.q.resize(n_z);
    for (std::size_t i = 0; i < n_z; ++i) {
        p.z[i] = static_cast<double>(i) * dz;
        p.q[i] = flux.at(p.z[i]);
    }

    // Energy balance: m_dot * c_p * (T_b - T_in) = P_w * integral(q dz),
    // accumulated by the trapezoid rule.
    const double coeff = geom.wetted_perimeter() /
                         (props.density * sample.v_in * geom.flow_area() *
                          props.specific_heat);
    p.t_b.resize(n_z);
    p.t_b[0] = sample.t_in;
    for (std::size_t i = 1; i < n_z; ++i) {
        p.t_b[i] = p.t_b[i - 1] + coeff * 0.5 * (p.q[i - 1] + p.q[i]) * dz;
    }

    const double re = reynolds(geom, props, sample.v_in);
    const double nu = weisman_nusselt(re, props.prandtl(), geom.p_over_d());
    const double h = nu * props.thermal_conductivity / geom.hydraulic_diameter();

    p.h.assign(n_z, h);
    p.t_w.resize(n_z);
    for (std::size_t i = 0; i < n_z; ++i) {
        p.t_w[i] = p.t_b[i] + p.q[i] / h;
    }
    return p;
}

NusseltReport nusselt_roundtrip(const AxialProfile& profile,
                                const GeometrySpec& geom,
                                const FluidProperties& props) {
    const std::size_t n = profile.z.size();
    if (n < 2) {
        throw std::runtime_error("nusselt roundtrip needs a profile with >= 2 points");
    }
    // Recover h from the measurable fields; where the wall-to-bulk difference
    // vanishes (unheated rod ends) the coefficient is undefined and taken as 0.
    std::vector<double> h(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double dt = profile.t_w[i] - profile.t_b[i];
        h[i] = dt > 0.0 ? profile.q[i] / dt : 0.0;
    }
    double integral = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
        integral += 0.5 * (h[i - 1] + h[i]) * (profile.z[i] - profile.z[i - 1]);
    }
    const double span = profile.z.back() - profile.z.front();

    NusseltReport r;
    r.h_avg = integral / span;
    r.nu_avg = r.h_avg * geom.hydraulic_diameter() / props.thermal_conductivity;
    r.reynolds = reynolds(geom, props, profile.v_in);
    r.prandtl = props.prandtl();
    r.nu_weisman = weisman_nusselt(r.reynolds, r.prandtl, geom.p_over_d());
    r.margin_percent = std::abs(r.nu_avg - r.nu_weisman) / r.nu_weisman * 100.0;
    return r;
}

namespace {

// Cell-centered M x M lattice over the pitch square; points strictly inside
// a quarter-rod circle are discarded. Node order is row-major in (i, j).
CenterPlaneMesh build_lattice(const GeometrySpec& geom, std::size_t m) {
    const double pitch = geom.pitch;
    const double radius = geom.rod_diameter / 2.0;
    const double corners[4][2] = {
        {0.0, 0.0}, {pitch, 0.0}, {0.0, pitch}, {pitch, pitch}};

    CenterPlaneMesh mesh;
    mesh.box_lo = 0.0;
    mesh.box_hi = pitch;
    for (std::size_t i = 0; i < m; ++i) {
        const double xi = (static_cast<double>(i) + 0.5) * pitch /
                          static_cast<double>(m);
        for (std::size_t j = 0; j < m; ++j) {
            const double yj = (static_cast<double>(j) + 0.5) * pitch /
                              static_cast<double>(m);
            double dmin = 0.0;
            bool inside_rod = false;
            for (int c = 0; c < 4; ++c) {
                const double dx = xi - corners[c][0];
                const double dy = yj - corners[c][1];
                const double dist = std::sqrt(dx * dx + dy * dy);
                if (dist < radius) {
                    inside_rod = true;
                    break;
                }
                const double wall = dist - radius;
                if (c == 0 || wall < dmin) dmin = wall;
            }
            if (inside_rod) continue;
            mesh.x.push_back(xi);
            mesh.y.push_back(yj);
            mesh.wall_distance.push_back(dmin);
        }
    }
    return mesh;
}

std::size_t lattice_estimate(const GeometrySpec& geom, std::size_t target_n) {
    const double keep = geom.flow_area() / (geom.pitch * geom.pitch);
    const double m = std::sqrt(static_cast<double>(target_n) / keep);
    return static_cast<std::size_t>(std::max(2.0, std::round(m)));
}

}  // namespace

CenterPlaneMesh generate_mesh(const GeometrySpec& geom, std::size_t target_n,
                              double z_plane) {
    geom.validate();
    if (target_n < 16) {
        throw std::runtime_error("mesh target node count must be >= 16");
    }
    if (!(z_plane >= 0.0 && z_plane <= geom.length)) {
        throw std::runtime_error("mesh plane must lie within the flow length");
    }
    CenterPlaneMesh mesh = build_lattice(geom, lattice_estimate(geom, target_n));
    if (mesh.size() < 16) {
        throw std::runtime_error(
            "mesh generation produced fewer than 16 interior nodes (target " +
            std::to_string(target_n) + ")");
    }
    return mesh;
}

CenterPlaneMesh mesh_for_node_count(const GeometrySpec& geom,
                                    std::size_t n_nodes, double z_plane) {
    geom.validate();
    if (!(z_plane >= 0.0 && z_plane <= geom.length)) {
        throw std::runtime_error("mesh plane must lie within the flow length");
    }
    const std::size_t m0 = lattice_estimate(geom, n_nodes);
    const std::size_t lo = m0 > 5 ? m0 - 3 : 2;
    for (std::size_t m = lo; m <= m0 + 3; ++m) {
        CenterPlaneMesh mesh = build_lattice(geom, m);
        if (mesh.size() == n_nodes) return mesh;
    }
    throw std::runtime_error(
        "no lattice size reproduces a mesh with " + std::to_string(n_nodes) +
        " nodes for this geometry; supply the mesh via --dataset");
}

FieldSnapshot synthesize_fields(const InputSample& sample,
                                const GeometrySpec& geom,
                                const FluidProperties& props,
                                const CenterPlaneMesh& mesh) {
    sample.validate();
    if (mesh.size() == 0 || mesh.box_hi != geom.pitch) {
        throw std::runtime_error(
            "mesh/geometry mismatch: mesh box " + std::to_string(mesh.box_hi) +
            " vs pitch " + std::to_string(geom.pitch));
    }

    const AxialProfile profile =
        axial_profiles(sample, geom, props, kDefaultAxialResolution);
    const double z_plane = geom.length / 2.0;
    const double t_b = interp_on_grid(profile.z, profile.t_b, z_plane);
    const double t_w = interp_on_grid(profile.z, profile.t_w, z_plane);

    const std::size_t n = mesh.size();
    const double d_max =
        *std::max_element(mesh.wall_distance.begin(), mesh.wall_distance.end());
    if (!(d_max > 0.0)) {
        throw std::runtime_error("mesh has no interior node away from the walls");
    }

    FieldSnapshot f;
    f.T.resize(n);
    f.v.resize(n);
    f.k.resize(n);

    // 1/7-power turbulent profile shape; normalized below so that the node
    // mean equals the inlet velocity.
    std::vector<double> shape(n);
    double shape_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        shape[i] = std::pow(mesh.wall_distance[i] / d_max, 1.0 / 7.0);
        shape_sum += shape[i];
    }
    const double v_max = sample.v_in * static_cast<double>(n) / shape_sum;

    const double re = reynolds(geom, props, sample.v_in);
    const double friction = 0.316 * std::pow(re, -0.25);  // Blasius
    const double u_tau = sample.v_in * std::sqrt(friction / 8.0);
    const double u_tau_sq = u_tau * u_tau;

    const double t_lo = std::min(t_b, t_w);
    const double t_hi = std::max(t_b, t_w);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = mesh.wall_distance[i] / d_max;
        f.v[i] = v_max * shape[i];
        f.T[i] = std::clamp(t_w + (t_b - t_w) * shape[i], t_lo, t_hi);
        f.k[i] = u_tau_sq * (3.0 * r * (1.0 - r) + 0.1);
    }
    return f;
}

bool inputs_within_ranges(double p_max, double t_in, double v_in,
                          const SampleRanges& ranges) {
    return p_max >= ranges.pmax_min && p_max <= ranges.pmax_max &&
           t_in >= ranges.tin_min && t_in <= ranges.tin_max &&
           v_in >= ranges.vin_min && v_in <= ranges.vin_max;
}

Dataset generate_dataset(std::size_t n_samples, std::uint64_t seed,
                         const GeometrySpec& geom, const FluidProperties& props,
                         const CenterPlaneMesh& mesh, const SampleRanges& ranges,
                         std::size_t n1) {
    if (n_samples < 1) {
        throw std::runtime_error("dataset needs at least one sample");
    }
    geom.validate();
    props.validate();

    Dataset ds;
    ds.mesh = mesh;
    ds.seed = seed;
    ds.ranges = ranges;
    ds.pitch = geom.pitch;
    ds.rod_diameter = geom.rod_diameter;
    ds.length = geom.length;
    ds.samples.resize(n_samples);
    ds.fields.resize(n_samples);

    const RandomStream parent(seed);
    parallel_rows(n_samples, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            RandomStream stream = parent.derive(i);
            const double p_max = stream.uniform(ranges.pmax_min, ranges.pmax_max);
            const double t_in = stream.uniform(ranges.tin_min, ranges.tin_max);
            const double v_in = stream.uniform(ranges.vin_min, ranges.vin_max);
            InputSample s;
            s.p_rod = sample_heat_flux(p_max, n1, geom.length);
            s.t_in = t_in;
            s.v_in = v_in;
            ds.fields[i] = synthesize_fields(s, geom, props, mesh);
            ds.samples[i] = std::move(s);
        }
    });
    return ds;
}

}  // namespace miovs
