#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adsr/camera.hpp"

namespace adsr {

enum class ObjectClass { Rigid, Articulated, Static };

std::string to_string(ObjectClass c);
ObjectClass object_class_from_string(const std::string& s);

struct ObjectEntry {
    std::string id;
    ObjectClass cls = ObjectClass::Rigid;
    int canonical_frame = 0;
    std::string mesh_path;
    std::string rig_path;       // articulated only
    std::string pose_path;      // articulated only: per-frame pose params
    std::string ref_mesh_path;  // articulated, optional: posed reference body
                                // for skinning-weight transfer
};

struct FrameEntry {
    std::string rgb_path;
    std::string depth_path;
    std::string mask_path;
    Camera camera;
};

struct SceneManifest {
    std::vector<ObjectEntry> objects;
    std::vector<FrameEntry> frames;
    // object id -> per-frame ground-truth mesh paths
    std::map<std::string, std::vector<std::string>> ground_truth;
    double unit_scale = 1.0;  // applied to all geometry at ingestion
    std::uint64_t seed = 0;
    // mask pixel value assigned to each object (index in `objects` + 1 when
    // absent from the file)
    std::map<std::string, int> mask_ids;

    std::string base_dir;  // directory of the manifest file; paths resolve against it

    std::string resolve(const std::string& path) const;
    const ObjectEntry* find_object(const std::string& id) const;
    int mask_id_of(const std::string& id) const;

    /// Structural checks only (schema-level); path existence is the
    /// pipeline validator's job.
    void check_valid() const;
};

SceneManifest load_manifest(const std::string& path);
void save_manifest(const SceneManifest& m, const std::string& path);

}  // namespace adsr
