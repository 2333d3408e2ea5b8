#pragma once

#include <string>
#include <string_view>

#include "rampmerge/engine.h"
#include "rampmerge/metrics.h"

namespace rampmerge {

struct RunConfig {
  ScenarioConfig scenario;
  MatrixSpec matrix;
};

// INI text with sections [scenario], [geometry], [vehicle], [safety],
// [planner], [coordination], [baseline], [matrix] and [arrivals]. Speeds are
// written in km/h, everything else in SI units. Unknown sections or keys are
// rejected with kConfigParse; `origin` names the source in messages.
RunConfig ParseConfig(std::string_view text,
                      std::string_view origin = "<config>");

RunConfig LoadConfigFile(const std::string& path);

// Every key with its effective value, defaults included. Parsing the result
// gives back an identical config.
std::string ResolvedConfigText(const RunConfig& config);

}  // namespace rampmerge
