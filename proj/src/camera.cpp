#include "adsr/camera.hpp"

#include "adsr/error.hpp"

namespace adsr {

void Camera::check_valid() const {
    if (fx <= 0 || fy <= 0) throw Error("camera: focal lengths must be positive");
    if (width <= 0 || height <= 0) throw Error("camera: raster size must be positive");
    if (cx < 0 || cx >= width || cy < 0 || cy >= height)
        throw Error("camera: principal point outside the raster");
    const double ortho =
        (world_to_camera.R * world_to_camera.R.transpose() - Mat3::Identity())
            .cwiseAbs()
            .maxCoeff();
    if (ortho > 1e-9 || world_to_camera.R.determinant() < 0)
        throw Error("camera: world_to_camera rotation is not orthonormal");
}

}  // namespace adsr
