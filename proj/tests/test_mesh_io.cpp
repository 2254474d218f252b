#include <doctest.h>

#include <fstream>

#include "adsr/error.hpp"
#include "adsr/image.hpp"
#include "adsr/mesh_io.hpp"
#include "test_util.hpp"

using namespace adsr;

TEST_CASE("PLY mesh round trip with colors") {
    auto dir = testutil::temp_dir("meshio_ply");
    TriMesh m = testutil::make_box(1, 0.5, 0.25, Vec3(0.1, 0.2, 0.3));
    m.vertex_colors.resize(m.vertices.size());
    for (std::size_t i = 0; i < m.vertices.size(); ++i)
        m.vertex_colors[i] = Vec3(i / 8.0, 1.0 - i / 8.0, 0.5);

    std::string path = (dir / "box.ply").string();
    save_mesh(m, path);
    TriMesh back = load_mesh(path);
    REQUIRE(back.vertices.size() == m.vertices.size());
    REQUIRE(back.faces.size() == m.faces.size());
    REQUIRE(back.has_colors());
    for (std::size_t i = 0; i < m.vertices.size(); ++i) {
        CHECK((back.vertices[i] - m.vertices[i]).norm() < 1e-6);
        // 8-bit color quantization.
        CHECK((back.vertex_colors[i] - m.vertex_colors[i]).cwiseAbs().maxCoeff() < 1.0 / 255);
    }
    CHECK(back.faces == m.faces);
}

TEST_CASE("OBJ mesh round trip") {
    auto dir = testutil::temp_dir("meshio_obj");
    TriMesh m = testutil::make_box(0.4, 0.4, 0.4);
    std::string path = (dir / "box.obj").string();
    save_mesh(m, path);
    TriMesh back = load_mesh(path);
    REQUIRE(back.vertices.size() == m.vertices.size());
    REQUIRE(back.faces == m.faces);
    for (std::size_t i = 0; i < m.vertices.size(); ++i)
        CHECK((back.vertices[i] - m.vertices[i]).norm() < 1e-6);
}

TEST_CASE("OBJ quads are fan-triangulated") {
    auto dir = testutil::temp_dir("meshio_quad");
    std::string path = (dir / "quad.obj").string();
    std::ofstream(path) << "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
    TriMesh m = load_mesh(path);
    REQUIRE(m.faces.size() == 2);
    CHECK(m.faces[0] == std::array<int, 3>{0, 1, 2});
    CHECK(m.faces[1] == std::array<int, 3>{0, 2, 3});
}

TEST_CASE("malformed mesh files raise ParseError with an offset") {
    auto dir = testutil::temp_dir("meshio_bad");
    std::string path = (dir / "bad.obj").string();
    std::ofstream(path) << "v 0 0 0\nv 1 0 0\nf 1 2 9\n";
    CHECK_THROWS_AS(load_mesh(path), Error);

    std::string ply = (dir / "bad.ply").string();
    std::ofstream(ply) << "ply\nformat binary_little_endian 1.0\nnonsense\n";
    CHECK_THROWS_AS(load_mesh(ply), ParseError);

    CHECK_THROWS_AS(load_mesh((dir / "missing.ply").string()), Error);
}

TEST_CASE("point cloud round trip keeps normals") {
    auto dir = testutil::temp_dir("meshio_cloud");
    PointCloud c;
    c.points = {{0.5, -1.5, 2.0}, {1e-3, 2e-3, 3e-3}};
    c.normals = {{0, 0, 1}, {1, 0, 0}};
    std::string path = (dir / "c.ply").string();
    save_cloud(c, path);
    PointCloud back = load_cloud(path);
    REQUIRE(back.points.size() == 2);
    REQUIRE(back.has_normals());
    for (int i = 0; i < 2; ++i) {
        CHECK((back.points[i] - c.points[i]).norm() < 1e-6);
        CHECK((back.normals[i] - c.normals[i]).norm() < 1e-6);
    }
}

TEST_CASE("camera JSON round trip") {
    auto dir = testutil::temp_dir("meshio_cam");
    Camera cam = testutil::make_camera(320, 240, 150.0);
    cam.world_to_camera.R = axis_angle_to_matrix(Vec3(0.1, -0.2, 0.3));
    cam.world_to_camera.t = Vec3(1, 2, 3);
    std::string path = (dir / "cam.json").string();
    save_camera(cam, path);
    Camera back = load_camera(path);
    CHECK(back.fx == cam.fx);
    CHECK(back.width == cam.width);
    CHECK(back.height == cam.height);
    CHECK((back.world_to_camera.R - cam.world_to_camera.R).norm() < 1e-12);
    CHECK((back.world_to_camera.t - cam.world_to_camera.t).norm() < 1e-12);
}

TEST_CASE("depth raster round trip preserves floats and NaN") {
    auto dir = testutil::temp_dir("meshio_depth");
    DepthGrid d(5, 3);
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 5; ++x) d.at(x, y) = float(x + 10 * y) * 0.125f;
    d.at(2, 1) = std::numeric_limits<float>::quiet_NaN();
    std::string path = (dir / "d.f32").string();
    save_depth(d, path);
    DepthGrid back = load_depth(path);
    REQUIRE(back.width == 5);
    REQUIRE(back.height == 3);
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 5; ++x) {
            if (x == 2 && y == 1)
                CHECK(std::isnan(back.at(x, y)));
            else
                CHECK(back.at(x, y) == d.at(x, y));
        }
}

TEST_CASE("PNG mask and image round trip") {
    auto dir = testutil::temp_dir("meshio_png");
    MaskGrid mask(7, 4);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 7; ++x) mask.at(x, y) = std::uint8_t((x * y) % 5);
    std::string mpath = (dir / "m.png").string();
    save_mask_png(mask, mpath);
    MaskGrid mback = load_mask_png(mpath);
    REQUIRE(mback.width == 7);
    CHECK(mback.data == mask.data);

    ImageRGB img(6, 5);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 6; ++x)
            img.at(x, y) = Eigen::Vector3f(x / 5.0f, y / 4.0f, 0.25f);
    std::string ipath = (dir / "i.png").string();
    save_image_png(img, ipath);
    ImageRGB iback = load_image_png(ipath);
    REQUIRE(iback.width == 6);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 6; ++x)
            CHECK((iback.at(x, y) - img.at(x, y)).cwiseAbs().maxCoeff() < 1.0f / 255);
}
