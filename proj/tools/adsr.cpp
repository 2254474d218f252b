// adsr: scene reconstruction pipeline CLI.
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adsr/error.hpp"
#include "adsr/fixtures.hpp"
#include "adsr/log.hpp"
#include "adsr/pipeline.hpp"

using namespace adsr;

namespace {

std::set<Stage> parse_stages(const std::string& csv) {
    std::set<Stage> stages;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) stages.insert(stage_from_string(item));
    }
    if (stages.empty()) throw Error("no stages given");
    return stages;
}

int cmd_validate(const std::string& manifest) {
    const ValidationReport report = validate_manifest(manifest);
    for (const auto& issue : report.issues)
        std::cout << (issue.severity == ValidationIssue::Severity::ErrorLevel ? "error: "
                                                                              : "warning: ")
                  << issue.message << "\n";
    std::cout << report.error_count() << " error(s), " << report.warning_count()
              << " warning(s)\n";
    return report.ok() ? 0 : 2;
}

int cmd_report(const std::string& out_dir) {
    std::ifstream f(out_dir + "/report.csv");
    if (!f) {
        std::cerr << "error: no report.csv under " << out_dir << "\n";
        return 2;
    }
    std::cout << f.rdbuf();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adsr: asset-driven scene reconstruction"};
    app.require_subcommand(1);

    std::string manifest, out_dir = "out", stages_csv = "deform,track,refine,evaluate,export";
    std::string fixture_kind = "rigid_orbit", align_mode = "none";
    std::uint64_t seed = 0;
    int threads = 0, samples = 100000, refine_iters = 200;
    double tau = 0.05;
    bool debug_renders = false;

    auto* validate = app.add_subcommand("validate", "check a scene manifest");
    validate->add_option("--manifest", manifest, "manifest path")->required();

    auto* run = app.add_subcommand("run", "run the reconstruction pipeline");
    run->add_option("--manifest", manifest, "manifest path")->required();
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--stages", stages_csv,
                    "comma list of deform,track,refine,evaluate,export,render");
    run->add_option("--seed", seed, "random seed");
    run->add_option("--threads", threads, "worker threads (0 = auto)");
    run->add_option("--tau", tau, "F-score distance threshold, meters");
    run->add_option("--samples", samples, "surface samples per mesh for evaluation");
    run->add_option("--align", align_mode, "none|per_object_icp|static_scene_icp");
    run->add_option("--refine-iters", refine_iters, "pose refinement iterations");
    run->add_flag("--debug-renders", debug_renders, "write per-iteration renders");

    auto* fixture = app.add_subcommand("fixture", "generate a synthetic scene");
    fixture->add_option("--kind", fixture_kind,
                        "rigid_orbit|articulated_arm|occlusion_pair|full_scene");
    fixture->add_option("--out", out_dir, "output directory")->required();
    fixture->add_option("--seed", seed, "random seed");

    auto* report = app.add_subcommand("report", "print the metrics report of a run");
    report->add_option("--out", out_dir, "run output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) return cmd_validate(manifest);
        if (report->parsed()) return cmd_report(out_dir);
        if (fixture->parsed()) {
            const std::string path =
                make_fixture(fixture_kind_from_string(fixture_kind), out_dir, seed);
            std::cout << path << "\n";
            return 0;
        }
        PipelineConfig config;
        config.manifest_path = manifest;
        config.output_dir = out_dir;
        config.stages = parse_stages(stages_csv);
        config.seed = seed;
        config.threads = threads;
        config.debug_renders = debug_renders;
        config.protocol.tau = tau;
        config.protocol.samples_per_mesh = samples;
        config.protocol.seed = seed;
        config.refine.iterations = refine_iters;
        if (align_mode == "none")
            config.protocol.align_mode = AlignMode::None;
        else if (align_mode == "per_object_icp")
            config.protocol.align_mode = AlignMode::PerObjectIcp;
        else if (align_mode == "static_scene_icp")
            config.protocol.align_mode = AlignMode::StaticSceneIcp;
        else
            throw Error("unknown align mode '" + align_mode + "'");
        return run_pipeline(config);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
