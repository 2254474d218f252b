#pragma once

#include <string>

#include "adsr/manifest.hpp"

namespace adsr {

enum class FixtureKind { RigidOrbit, ArticulatedArm, OcclusionPair, FullScene };

FixtureKind fixture_kind_from_string(const std::string& s);

/// Writes meshes, rigs/poses, per-frame depth + RGB + mask renders (from the
/// splat rasterizer over ground truth), ground-truth meshes, and a manifest.
/// Returns the manifest path.
std::string make_fixture(FixtureKind kind, const std::string& out_dir, std::uint64_t seed);

// Ground-truth trajectory parameters used by tests.
struct OrbitParams {
    int n_frames = 10;
    double deg_per_frame = 3.0;
    double meters_per_frame = 0.02;
    double orbit_radius = 0.5;
    double cube_edge = 0.3;
    int canonical_frame = 0;
};
OrbitParams rigid_orbit_params();

/// GT transform (canonical mesh -> frame t) for the rigid_orbit fixture.
RigidTransform rigid_orbit_gt_transform(int frame);

}  // namespace adsr
