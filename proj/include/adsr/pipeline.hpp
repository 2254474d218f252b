#pragma once

#include <set>
#include <string>
#include <vector>

#include "adsr/icp.hpp"
#include "adsr/manifest.hpp"
#include "adsr/metrics.hpp"
#include "adsr/refine.hpp"

namespace adsr {

enum class Stage { Deform, Track, Refine, Evaluate, Export, Render };

Stage stage_from_string(const std::string& s);
std::string to_string(Stage s);

struct PipelineConfig {
    std::string manifest_path;
    std::string output_dir;
    std::set<Stage> stages = {Stage::Deform, Stage::Track, Stage::Refine,
                              Stage::Evaluate, Stage::Export};
    IcpParams icp;
    RefineConfig refine;
    EvalProtocol protocol;
    std::uint64_t seed = 0;
    int threads = 0;  // 0 = auto
    bool debug_renders = false;

    void check_valid() const;
};

struct ValidationIssue {
    enum class Severity { ErrorLevel, Warning } severity;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;
    bool ok() const;
    int error_count() const;
    int warning_count() const;
};

/// Schema, path-existence, raster/camera consistency, and canonical-frame
/// visibility (mask pixel count > 500) checks.
ValidationReport validate_manifest(const std::string& manifest_path);

/// Runs the selected stages; artifacts land under config.output_dir.
/// Returns the process exit code (0 ok, 1 stage failure, 2 validation failure).
int run_pipeline(const PipelineConfig& config);

}  // namespace adsr
