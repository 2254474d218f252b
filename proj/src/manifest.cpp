#include "adsr/manifest.hpp"

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "adsr/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace adsr {

std::string to_string(ObjectClass c) {
    switch (c) {
        case ObjectClass::Rigid: return "rigid";
        case ObjectClass::Articulated: return "articulated";
        default: return "static";
    }
}

ObjectClass object_class_from_string(const std::string& s) {
    if (s == "rigid") return ObjectClass::Rigid;
    if (s == "articulated") return ObjectClass::Articulated;
    if (s == "static") return ObjectClass::Static;
    throw Error("unknown object class '" + s + "'");
}

std::string SceneManifest::resolve(const std::string& path) const {
    if (path.empty() || fs::path(path).is_absolute() || base_dir.empty()) return path;
    return (fs::path(base_dir) / path).string();
}

const ObjectEntry* SceneManifest::find_object(const std::string& id) const {
    for (const auto& o : objects)
        if (o.id == id) return &o;
    return nullptr;
}

int SceneManifest::mask_id_of(const std::string& id) const {
    const auto it = mask_ids.find(id);
    if (it != mask_ids.end()) return it->second;
    for (std::size_t i = 0; i < objects.size(); ++i)
        if (objects[i].id == id) return static_cast<int>(i) + 1;
    throw Error("unknown object id '" + id + "'");
}

void SceneManifest::check_valid() const {
    if (unit_scale <= 0) throw Error("manifest: unit_scale must be positive");
    if (objects.empty()) throw Error("manifest: no objects");
    if (frames.empty()) throw Error("manifest: no frames");
    for (std::size_t i = 0; i < objects.size(); ++i)
        for (std::size_t j = i + 1; j < objects.size(); ++j)
            if (objects[i].id == objects[j].id)
                throw Error("manifest: duplicate object id '" + objects[i].id + "'");
    for (const auto& o : objects) {
        if (o.id.empty()) throw Error("manifest: object with empty id");
        if (o.canonical_frame < 0 || o.canonical_frame >= static_cast<int>(frames.size()))
            throw Error("manifest: object '" + o.id + "' canonical_frame " +
                        std::to_string(o.canonical_frame) + " out of range");
        if (o.cls == ObjectClass::Articulated) {
            if (o.rig_path.empty())
                throw Error("manifest: articulated object '" + o.id + "' lacks rig_path");
        } else if (!o.rig_path.empty()) {
            throw Error("manifest: non-articulated object '" + o.id + "' carries rig_path");
        }
        if (o.mesh_path.empty())
            throw Error("manifest: object '" + o.id + "' lacks mesh_path");
    }
    for (const auto& [id, paths] : ground_truth) {
        if (!find_object(id)) throw Error("manifest: ground_truth for unknown object '" + id + "'");
        if (paths.size() != frames.size())
            throw Error("manifest: ground_truth for '" + id + "' has " +
                        std::to_string(paths.size()) + " entries for " +
                        std::to_string(frames.size()) + " frames");
    }
}

namespace {

Camera camera_from_json(const json& j) {
    Camera cam;
    cam.fx = j.at("fx").get<double>();
    cam.fy = j.at("fy").get<double>();
    cam.cx = j.at("cx").get<double>();
    cam.cy = j.at("cy").get<double>();
    cam.width = j.at("width").get<int>();
    cam.height = j.at("height").get<int>();
    const auto R = j.at("R").get<std::vector<double>>();
    const auto t = j.at("t").get<std::vector<double>>();
    if (R.size() != 9 || t.size() != 3) throw Error("camera JSON: R/t wrong size");
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) cam.world_to_camera.R(r, c) = R[3 * r + c];
    cam.world_to_camera.t = Vec3(t[0], t[1], t[2]);
    return cam;
}

json camera_to_json(const Camera& cam) {
    std::vector<double> R(9);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) R[3 * r + c] = cam.world_to_camera.R(r, c);
    return json{{"fx", cam.fx},       {"fy", cam.fy},
                {"cx", cam.cx},       {"cy", cam.cy},
                {"width", cam.width}, {"height", cam.height},
                {"R", R},
                {"t", {cam.world_to_camera.t.x(), cam.world_to_camera.t.y(),
                       cam.world_to_camera.t.z()}}};
}

}  // namespace

SceneManifest load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open manifest " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw Error("malformed manifest " + path + ": " + e.what());
    }
    SceneManifest m;
    m.base_dir = fs::path(path).parent_path().string();
    m.unit_scale = j.value("unit_scale", 1.0);
    m.seed = j.value("seed", std::uint64_t{0});
    try {
        for (const auto& jo : j.at("objects")) {
            ObjectEntry o;
            o.id = jo.at("id").get<std::string>();
            o.cls = object_class_from_string(jo.at("class").get<std::string>());
            o.canonical_frame = jo.at("canonical_frame").get<int>();
            o.mesh_path = jo.at("mesh_path").get<std::string>();
            o.rig_path = jo.value("rig_path", "");
            o.pose_path = jo.value("pose_path", "");
            o.ref_mesh_path = jo.value("ref_mesh_path", "");
            m.objects.push_back(std::move(o));
        }
        for (const auto& jf : j.at("frames")) {
            FrameEntry fr;
            fr.rgb_path = jf.value("rgb_path", "");
            fr.depth_path = jf.at("depth_path").get<std::string>();
            fr.mask_path = jf.at("mask_path").get<std::string>();
            fr.camera = camera_from_json(jf.at("camera"));
            m.frames.push_back(std::move(fr));
        }
        if (j.contains("ground_truth"))
            m.ground_truth =
                j.at("ground_truth").get<std::map<std::string, std::vector<std::string>>>();
        if (j.contains("mask_ids")) m.mask_ids = j.at("mask_ids").get<std::map<std::string, int>>();
    } catch (const json::exception& e) {
        throw Error("manifest " + path + ": " + e.what());
    }
    m.check_valid();
    return m;
}

void save_manifest(const SceneManifest& m, const std::string& path) {
    json j;
    j["unit_scale"] = m.unit_scale;
    j["seed"] = m.seed;
    j["objects"] = json::array();
    for (const auto& o : m.objects) {
        json jo{{"id", o.id},
                {"class", to_string(o.cls)},
                {"canonical_frame", o.canonical_frame},
                {"mesh_path", o.mesh_path}};
        if (!o.rig_path.empty()) jo["rig_path"] = o.rig_path;
        if (!o.pose_path.empty()) jo["pose_path"] = o.pose_path;
        if (!o.ref_mesh_path.empty()) jo["ref_mesh_path"] = o.ref_mesh_path;
        j["objects"].push_back(jo);
    }
    j["frames"] = json::array();
    for (const auto& fr : m.frames) {
        json jf{{"depth_path", fr.depth_path},
                {"mask_path", fr.mask_path},
                {"camera", camera_to_json(fr.camera)}};
        if (!fr.rgb_path.empty()) jf["rgb_path"] = fr.rgb_path;
        j["frames"].push_back(jf);
    }
    if (!m.ground_truth.empty()) j["ground_truth"] = m.ground_truth;
    if (!m.mask_ids.empty()) j["mask_ids"] = m.mask_ids;
    std::ofstream f(path);
    if (!f) throw Error("cannot write manifest " + path);
    f << j.dump(2) << "\n";
}

}  // namespace adsr
