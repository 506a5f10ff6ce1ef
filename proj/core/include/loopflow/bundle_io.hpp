#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "loopflow/frame.hpp"
#include "loopflow/immersion.hpp"
#include "loopflow/killing.hpp"
#include "loopflow/lax.hpp"

namespace loopflow {

using nlohmann::json;

// On-disk bundle layout: a directory with manifest.json (deterministic for a
// given config + seed; no timestamps), run.json (timestamp and wall time,
// deliberately outside the manifest), and per-object CSV/binary blocks.
// All floats are written as shortest round-trip decimals, UTF-8, LF endings.

json loop_to_json(const LaurentLoop& loop);
LaurentLoop loop_from_json(const json& j);

json gridspec_to_json(const GridSpec& spec);
GridSpec gridspec_from_json(const json& j);

void write_text(const std::filesystem::path& path, const std::string& text);
json read_json(const std::filesystem::path& path);

/// manifest.json + run.json writer. The manifest is dumped with 2-space
/// indentation and sorted keys, so identical content is byte-identical.
void write_manifest(const std::filesystem::path& dir, const json& manifest);
json read_manifest(const std::filesystem::path& dir);

void write_state_grid(const std::filesystem::path& dir, const StateGrid& grid,
                      const std::string& filename = "states.csv");
StateGrid read_state_grid(const std::filesystem::path& dir, const json& manifest);

void write_immersion_csv(const std::filesystem::path& path, const ImmersionData& data);
ImmersionData read_immersion_csv(const std::filesystem::path& path,
                                 const GridSpec& spec);
void write_residuals_csv(const std::filesystem::path& path, const ImmersionData& data);
std::map<std::string, std::vector<double>> read_residuals_csv(
    const std::filesystem::path& path);

void write_frames(const std::filesystem::path& dir, const FrameFamily& frames);
FrameFamily read_frames(const std::filesystem::path& dir, const json& manifest);

void write_killing(const std::filesystem::path& dir, const KillingSeries& series);

struct ObjExportOptions {
  int chart = 2;              // divide by this homogeneous coordinate (0-based)
  double singular_tol = 1e-6; // |z_chart| below this -> ChartSingularity
};

/// surface.obj: vertices are the affine chart (z^a/z^c, z^b/z^c) in C^2 mapped
/// to R^3 as (Re w1, Im w1, Re w2); Im w2 goes to a sidecar CSV. Faces are the
/// grid quads split into triangles.
void write_obj(const std::filesystem::path& obj_path,
               const std::filesystem::path& sidecar_csv, const ImmersionData& data,
               const ObjExportOptions& opt = {});

}  // namespace loopflow
