#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rampmerge/config.h"
#include "rampmerge/engine.h"
#include "rampmerge/metrics.h"
#include "rampmerge/safety.h"

namespace rampmerge {

// time,vehicle_id,class,lane,station,speed
void WriteTimelineCsv(std::ostream& out, const Timeline& timeline);

// One JSON object per line: time, type, vehicle_id plus the event detail.
void WriteEventsJsonl(std::ostream& out, const Timeline& timeline);

// Per-vehicle record with its delay.
void WriteVehiclesCsv(std::ostream& out, const Timeline& timeline);

// Executed segments, tagged with the strategy that produced them.
void WriteTrajectoriesCsv(std::ostream& out, const Timeline& timeline);

void WriteConflictsCsv(std::ostream& out,
                       const std::vector<PairViolation>& conflicts);

nlohmann::json DelayReportToJson(const DelayReport& report);
DelayReport DelayReportFromJson(const nlohmann::json& j);

std::string DelayReportText(const DelayReport& report);

// mainline_volume,ramp_volume,strategy,seed,mainline_delay_s,ramp_delay_s,
// min_separation_m,faults. An absent delay is an empty field.
void WriteMatrixCsv(std::ostream& out, const std::vector<DelayReport>& reports);

// One row per volume pair, one column per strategy: seed-averaged delay of
// the given stream, ready for a grouped bar chart.
void WriteBarChartCsv(std::ostream& out, const MatrixSummary& summary,
                      const MatrixSpec& spec, VehicleClass stream);

// Cell statistics (mean, min, max) as CSV.
void WriteCellSummaryCsv(std::ostream& out, const MatrixSummary& summary);

std::string OrderingSummaryText(const MatrixSummary& summary);

std::string RunReportText(const RunConfig& config, const DelayReport& report);

std::string MatrixReportText(const RunConfig& config,
                             const MatrixSummary& summary,
                             const std::vector<std::string>& trend_notes);

}  // namespace rampmerge
