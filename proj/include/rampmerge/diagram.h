#pragma once

#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rampmerge/engine.h"

namespace rampmerge {

// Reads the timeline CSV written by WriteTimelineCsv. Throws
// kMalformedTimeline with the offending line number.
std::vector<StateSample> ReadTimelineCsv(std::istream& in);

struct ZoomWindow {
  double t0 = 0.0;
  double t1 = 0.0;
  double s0 = 0.0;
  double s1 = 0.0;
};

// "t0:t1:s0:s1" with t0 < t1 and s0 < s1.
ZoomWindow ParseZoom(std::string_view text);

struct DiagramOptions {
  std::optional<ZoomWindow> zoom;
  std::optional<double> merge_point;  // drawn as a horizontal rule
  std::string title;
  double width = 960.0;
  double height = 600.0;
};

// Time-space diagram: x is time, y is station. One polyline per vehicle,
// solid for mainline vehicles and dashed for ramp vehicles.
std::string RenderTimeSpaceSvg(const std::vector<StateSample>& samples,
                               const DiagramOptions& options);

struct Crossing {
  VehicleId first;
  VehicleId second;
  double time = 0.0;  // sample instant at or just after the crossing
  bool same_stream = false;
};

// Pairs of polylines that swap order between consecutive shared samples.
std::vector<Crossing> FindCrossings(const std::vector<StateSample>& samples);

}  // namespace rampmerge
