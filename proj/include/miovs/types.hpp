#pragma once

#include <cstdint>
#include <cstddef>
#include <vector>

namespace miovs {

/// One operating condition: rod heat-flux profile sampled at fixed sensor
/// points [kW/m^2], inlet temperature [K], inlet velocity [m/s].
struct InputSample {
    std::vector<double> p_rod;
    double t_in = 0.0;
    double v_in = 0.0;

    /// Enforces p_rod >= 0, t_in > 0, v_in > 0; throws otherwise.
    void validate() const;
};

/// Nodes of the output plane: coordinates [m] inside the subchannel cross
/// section and distance to the nearest rod surface [m]. The bounding box is
/// the pitch square of the geometry the mesh was built from; trunk inputs
/// are normalized against it, so it is independent of the node positions.
struct CenterPlaneMesh {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> wall_distance;
    double box_lo = 0.0;
    double box_hi = 0.0;

    std::size_t size() const { return x.size(); }
};

/// The three output fields on the plane: temperature [K], velocity [m/s],
/// turbulence kinetic energy [m^2/s^2].
struct FieldSnapshot {
    std::vector<double> T;
    std::vector<double> v;
    std::vector<double> k;
};

/// Closed sampling intervals for the three operating parameters.
struct SampleRanges {
    double pmax_min = 540.0;   // kW/m^2
    double pmax_max = 660.0;
    double tin_min = 536.4;    // K
    double tin_max = 655.6;
    double vin_min = 4.05;     // m/s
    double vin_max = 4.95;
};

struct GeometrySpec;

/// A generated training set: one shared mesh plus per-sample inputs and
/// ground-truth fields, together with everything needed to regenerate it.
struct Dataset {
    CenterPlaneMesh mesh;
    std::vector<InputSample> samples;
    std::vector<FieldSnapshot> fields;
    std::uint64_t seed = 0;
    SampleRanges ranges;
    double pitch = 0.0;
    double rod_diameter = 0.0;
    double length = 0.0;

    std::size_t size() const { return samples.size(); }
    std::size_t n1() const { return samples.empty() ? 0 : samples[0].p_rod.size(); }
};

}  // namespace miovs
