#pragma once

#include <string>

#include "adsr/camera.hpp"
#include "adsr/mesh.hpp"

namespace adsr {

// Format picked by extension: .ply (binary little-endian) or .obj (ASCII).
// OBJ quad faces are fan-triangulated; .obj vertex lines may carry RGB.
TriMesh load_mesh(const std::string& path);
void save_mesh(const TriMesh& mesh, const std::string& path);

// Point clouds: binary little-endian PLY only.
PointCloud load_cloud(const std::string& path);
void save_cloud(const PointCloud& cloud, const std::string& path);

// Camera JSON: {fx,fy,cx,cy,width,height,R:[9 row-major],t:[3]}.
Camera load_camera(const std::string& path);
void save_camera(const Camera& cam, const std::string& path);

}  // namespace adsr
