#include "adsr/mesh_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "adsr/error.hpp"

namespace adsr {

namespace {

struct PlyProperty {
    std::string name;
    std::string type;        // float, double, uchar, int, ...
    bool is_list = false;
    std::string count_type;  // for lists
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> properties;
};

std::size_t scalar_size(const std::string& type) {
    if (type == "char" || type == "uchar" || type == "int8" || type == "uint8") return 1;
    if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") return 2;
    if (type == "int" || type == "uint" || type == "int32" || type == "uint32" ||
        type == "float" || type == "float32")
        return 4;
    if (type == "double" || type == "float64") return 8;
    throw Error("unsupported PLY scalar type '" + type + "'");
}

double read_scalar(std::ifstream& f, const std::string& type, const std::string& path) {
    union {
        std::uint8_t u8;
        std::int8_t i8;
        std::uint16_t u16;
        std::int16_t i16;
        std::uint32_t u32;
        std::int32_t i32;
        float f32;
        double f64;
        char bytes[8];
    } v{};
    const std::size_t n = scalar_size(type);
    const auto offset = static_cast<std::size_t>(f.tellg());
    f.read(v.bytes, static_cast<std::streamsize>(n));
    if (!f) throw ParseError("truncated PLY payload in " + path, offset);
    if (type == "uchar" || type == "uint8") return v.u8;
    if (type == "char" || type == "int8") return v.i8;
    if (type == "ushort" || type == "uint16") return v.u16;
    if (type == "short" || type == "int16") return v.i16;
    if (type == "uint" || type == "uint32") return v.u32;
    if (type == "int" || type == "int32") return v.i32;
    if (type == "float" || type == "float32") return v.f32;
    return v.f64;
}

struct PlyData {
    std::vector<Vec3> vertices;
    std::vector<Vec3> colors;
    std::vector<Vec3> normals;
    std::vector<std::array<int, 3>> faces;
};

PlyData load_ply(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path);

    std::string line;
    std::size_t offset = 0;
    auto next_line = [&](std::string& out) {
        if (!std::getline(f, out)) throw ParseError("truncated PLY header in " + path, offset);
        offset += out.size() + 1;
        if (!out.empty() && out.back() == '\r') out.pop_back();
    };

    next_line(line);
    if (line != "ply") throw ParseError("not a PLY file: " + path, 0);
    next_line(line);
    if (line != "format binary_little_endian 1.0")
        throw Error("unsupported PLY format in " + path + " ('" + line +
                    "'); only binary_little_endian 1.0 is supported");

    std::vector<PlyElement> elements;
    for (;;) {
        next_line(line);
        std::istringstream ss(line);
        std::string word;
        ss >> word;
        if (word == "comment") continue;
        if (word == "end_header") break;
        if (word == "element") {
            PlyElement e;
            ss >> e.name >> e.count;
            elements.push_back(e);
        } else if (word == "property") {
            if (elements.empty()) throw ParseError("property before element in " + path, offset);
            PlyProperty p;
            ss >> p.type;
            if (p.type == "list") {
                p.is_list = true;
                ss >> p.count_type >> p.type >> p.name;
            } else {
                ss >> p.name;
            }
            if (p.name.empty()) throw ParseError("malformed property line in " + path, offset);
            elements.back().properties.push_back(p);
        } else {
            throw ParseError("unexpected header token '" + word + "' in " + path, offset);
        }
    }

    PlyData out;
    for (const auto& e : elements) {
        if (e.name == "vertex") {
            int ix = -1, iy = -1, iz = -1, ir = -1, ig = -1, ib = -1;
            int inx = -1, iny = -1, inz = -1;
            for (std::size_t i = 0; i < e.properties.size(); ++i) {
                const auto& n = e.properties[i].name;
                const int idx = static_cast<int>(i);
                if (n == "x") ix = idx;
                else if (n == "y") iy = idx;
                else if (n == "z") iz = idx;
                else if (n == "red") ir = idx;
                else if (n == "green") ig = idx;
                else if (n == "blue") ib = idx;
                else if (n == "nx") inx = idx;
                else if (n == "ny") iny = idx;
                else if (n == "nz") inz = idx;
            }
            if (ix < 0 || iy < 0 || iz < 0)
                throw Error("PLY vertex element in " + path + " lacks x/y/z");
            const bool has_color = ir >= 0 && ig >= 0 && ib >= 0;
            const bool has_normal = inx >= 0 && iny >= 0 && inz >= 0;
            out.vertices.reserve(e.count);
            std::vector<double> row(e.properties.size());
            for (std::size_t v = 0; v < e.count; ++v) {
                for (std::size_t i = 0; i < e.properties.size(); ++i) {
                    if (e.properties[i].is_list)
                        throw Error("unexpected list property on PLY vertices in " + path);
                    row[i] = read_scalar(f, e.properties[i].type, path);
                }
                out.vertices.emplace_back(row[ix], row[iy], row[iz]);
                if (has_color)
                    out.colors.emplace_back(row[ir] / 255.0, row[ig] / 255.0, row[ib] / 255.0);
                if (has_normal) out.normals.emplace_back(row[inx], row[iny], row[inz]);
            }
        } else if (e.name == "face") {
            out.faces.reserve(e.count);
            for (std::size_t fi = 0; fi < e.count; ++fi) {
                for (const auto& p : e.properties) {
                    if (!p.is_list) {
                        read_scalar(f, p.type, path);
                        continue;
                    }
                    const int n = static_cast<int>(read_scalar(f, p.count_type, path));
                    std::vector<int> idx(n);
                    for (int k = 0; k < n; ++k)
                        idx[k] = static_cast<int>(read_scalar(f, p.type, path));
                    // fan-triangulate polygons
                    for (int k = 2; k < n; ++k)
                        out.faces.push_back({idx[0], idx[k - 1], idx[k]});
                }
            }
        } else {
            // skip unknown fixed-size elements
            std::size_t row_bytes = 0;
            for (const auto& p : e.properties) {
                if (p.is_list) throw Error("cannot skip list element '" + e.name + "' in " + path);
                row_bytes += scalar_size(p.type);
            }
            f.seekg(static_cast<std::streamoff>(row_bytes * e.count), std::ios::cur);
        }
    }
    return out;
}

void write_u8(std::ofstream& f, std::uint8_t v) { f.write(reinterpret_cast<char*>(&v), 1); }
void write_i32(std::ofstream& f, std::int32_t v) { f.write(reinterpret_cast<char*>(&v), 4); }
void write_f32(std::ofstream& f, float v) { f.write(reinterpret_cast<char*>(&v), 4); }

void save_ply(const std::string& path, const std::vector<Vec3>& vertices,
              const std::vector<Vec3>& colors, const std::vector<Vec3>& normals,
              const std::vector<std::array<int, 3>>* faces) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path);
    f << "ply\nformat binary_little_endian 1.0\n";
    f << "element vertex " << vertices.size() << "\n";
    f << "property float x\nproperty float y\nproperty float z\n";
    if (!normals.empty()) f << "property float nx\nproperty float ny\nproperty float nz\n";
    if (!colors.empty())
        f << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    if (faces) {
        f << "element face " << faces->size() << "\n";
        f << "property list uchar int vertex_indices\n";
    }
    f << "end_header\n";
    for (std::size_t i = 0; i < vertices.size(); ++i) {
        for (int k = 0; k < 3; ++k) write_f32(f, static_cast<float>(vertices[i][k]));
        if (!normals.empty())
            for (int k = 0; k < 3; ++k) write_f32(f, static_cast<float>(normals[i][k]));
        if (!colors.empty())
            for (int k = 0; k < 3; ++k)
                write_u8(f, static_cast<std::uint8_t>(
                                std::lround(std::clamp(colors[i][k], 0.0, 1.0) * 255.0)));
    }
    if (faces) {
        for (const auto& face : *faces) {
            write_u8(f, 3);
            for (int k = 0; k < 3; ++k) write_i32(f, face[k]);
        }
    }
    if (!f) throw Error("write failure on " + path);
}

TriMesh load_obj(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open " + path);
    TriMesh mesh;
    std::string line;
    std::size_t offset = 0;
    std::size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        const std::size_t line_start = offset;
        offset += line.size() + 1;
        std::istringstream ss(line);
        std::string word;
        if (!(ss >> word) || word[0] == '#') continue;
        if (word == "v") {
            double x, y, z;
            if (!(ss >> x >> y >> z))
                throw ParseError("malformed vertex line " + std::to_string(line_no) + " in " + path,
                                 line_start);
            mesh.vertices.emplace_back(x, y, z);
            double r, g, b;
            if (ss >> r >> g >> b) mesh.vertex_colors.emplace_back(r, g, b);
        } else if (word == "f") {
            std::vector<int> idx;
            std::string tok;
            while (ss >> tok) {
                // "i", "i/t", "i/t/n", "i//n"
                const auto slash = tok.find('/');
                const std::string head = slash == std::string::npos ? tok : tok.substr(0, slash);
                try {
                    int i = std::stoi(head);
                    if (i < 0) i = static_cast<int>(mesh.vertices.size()) + i + 1;
                    idx.push_back(i - 1);
                } catch (const std::exception&) {
                    throw ParseError("malformed face line " + std::to_string(line_no) + " in " + path,
                                     line_start);
                }
            }
            if (idx.size() < 3)
                throw ParseError("face with < 3 vertices at line " + std::to_string(line_no) +
                                     " in " + path,
                                 line_start);
            for (std::size_t k = 2; k < idx.size(); ++k)
                mesh.faces.push_back({idx[0], idx[k - 1], idx[k]});
        }
        // vn/vt/usemtl/etc. ignored
    }
    if (!mesh.vertex_colors.empty() && mesh.vertex_colors.size() != mesh.vertices.size())
        throw Error("OBJ " + path + " mixes colored and uncolored vertices");
    mesh.check_valid();
    return mesh;
}

void save_obj(const TriMesh& mesh, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path);
    f.precision(9);
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        const auto& v = mesh.vertices[i];
        f << "v " << v.x() << " " << v.y() << " " << v.z();
        if (mesh.has_colors()) {
            const auto& c = mesh.vertex_colors[i];
            f << " " << c.x() << " " << c.y() << " " << c.z();
        }
        f << "\n";
    }
    for (const auto& face : mesh.faces)
        f << "f " << face[0] + 1 << " " << face[1] + 1 << " " << face[2] + 1 << "\n";
}

std::string lower_ext(const std::string& path) {
    const auto dot = path.rfind('.');
    if (dot == std::string::npos) return "";
    std::string ext = path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    return ext;
}

}  // namespace

TriMesh load_mesh(const std::string& path) {
    const std::string ext = lower_ext(path);
    if (ext == "ply") {
        PlyData d = load_ply(path);
        TriMesh mesh;
        mesh.vertices = std::move(d.vertices);
        mesh.faces = std::move(d.faces);
        mesh.vertex_colors = std::move(d.colors);
        mesh.check_valid();
        return mesh;
    }
    if (ext == "obj") return load_obj(path);
    throw Error("unsupported mesh format '." + ext + "' for " + path);
}

void save_mesh(const TriMesh& mesh, const std::string& path) {
    const std::string ext = lower_ext(path);
    if (ext == "ply") {
        save_ply(path, mesh.vertices, mesh.vertex_colors, {}, &mesh.faces);
    } else if (ext == "obj") {
        save_obj(mesh, path);
    } else {
        throw Error("unsupported mesh format '." + ext + "' for " + path);
    }
}

PointCloud load_cloud(const std::string& path) {
    if (lower_ext(path) != "ply")
        throw Error("unsupported cloud format for " + path + "; expected .ply");
    PlyData d = load_ply(path);
    PointCloud cloud;
    cloud.points = std::move(d.vertices);
    cloud.normals = std::move(d.normals);
    return cloud;
}

void save_cloud(const PointCloud& cloud, const std::string& path) {
    if (lower_ext(path) != "ply")
        throw Error("unsupported cloud format for " + path + "; expected .ply");
    save_ply(path, cloud.points, {}, cloud.normals, nullptr);
}

Camera load_camera(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed camera JSON " + path + ": " + e.what());
    }
    Camera cam;
    cam.fx = j.at("fx").get<double>();
    cam.fy = j.at("fy").get<double>();
    cam.cx = j.at("cx").get<double>();
    cam.cy = j.at("cy").get<double>();
    cam.width = j.at("width").get<int>();
    cam.height = j.at("height").get<int>();
    const auto R = j.at("R").get<std::vector<double>>();
    const auto t = j.at("t").get<std::vector<double>>();
    if (R.size() != 9 || t.size() != 3) throw Error("camera JSON " + path + ": R/t wrong size");
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) cam.world_to_camera.R(r, c) = R[3 * r + c];
    cam.world_to_camera.t = Vec3(t[0], t[1], t[2]);
    cam.check_valid();
    return cam;
}

void save_camera(const Camera& cam, const std::string& path) {
    nlohmann::json j;
    j["fx"] = cam.fx;
    j["fy"] = cam.fy;
    j["cx"] = cam.cx;
    j["cy"] = cam.cy;
    j["width"] = cam.width;
    j["height"] = cam.height;
    std::vector<double> R(9);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) R[3 * r + c] = cam.world_to_camera.R(r, c);
    j["R"] = R;
    j["t"] = {cam.world_to_camera.t.x(), cam.world_to_camera.t.y(), cam.world_to_camera.t.z()};
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path);
    f << j.dump(2) << "\n";
}

}  // namespace adsr
