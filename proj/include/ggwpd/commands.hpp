#pragma once

#include <string>

#include <json.hpp>

#include "ggwpd/config.hpp"

namespace ggwpd {

/// Each command writes its tables (CSV, plus JSON mirrors when cfg.json is
/// set) and a summary file into cfg.out_dir, and returns the summary.
///
///   singmap  singmap.csv, singmap.pgm, singmap_summary.json
///   foliate  contour.csv, foliations.csv, lwpd_ellipse.csv, foliate_summary.json
///   saddles  saddles.csv, saddle_failures.csv, saddles_summary.json
///   sweep    families.csv, caustics.csv, sweep_summary.json
///   wavefn   wavefn.csv, families.csv, caustics.csv, profile.csv, wavefn_summary.json
///   compare  compare.csv, psi_q.csv, psi_q.bin, report.json
///   overlap  overlap_saddles.csv, overlap_summary.json
nlohmann::json cmd_singmap(const RunConfig& cfg);
nlohmann::json cmd_foliate(const RunConfig& cfg);
nlohmann::json cmd_saddles(const RunConfig& cfg);
nlohmann::json cmd_sweep(const RunConfig& cfg);
nlohmann::json cmd_wavefn(const RunConfig& cfg);
nlohmann::json cmd_compare(const RunConfig& cfg);
nlohmann::json cmd_overlap(const RunConfig& cfg);

/// Dispatches by name; throws ConfigError for an unknown command.
nlohmann::json run_command(const std::string& name, const RunConfig& cfg);

}  // namespace ggwpd
