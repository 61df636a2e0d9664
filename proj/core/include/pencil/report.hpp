#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pencil/trainer.hpp"

namespace pencil {

/// Deterministic JSON serialization of a run report: identical reports produce
/// identical bytes. NaN metrics and -1 counts become null.
std::string report_to_json_string(const RunReport& report);

void write_report_json(const RunReport& report, const std::filesystem::path& path);

/// Correct-label curve (columns epoch,correct_count), one row per phase-2 epoch.
void write_correct_label_csv(const RunReport& report, const std::filesystem::path& path);

/// Wall-clock phase timings; kept out of report.json so reruns stay byte-identical.
void write_timings_json(const std::vector<PhaseTiming>& timings,
                        const std::filesystem::path& path);

/// Probe rows sorted by (epoch, example); columns epoch,example,grad_original,grad_true.
void write_probe_csv(std::vector<GradProbeRow> rows, const std::filesystem::path& path);

}  // namespace pencil
