#include "rampmerge/config.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "rampmerge/errors.h"

namespace rampmerge {
namespace {

constexpr double kKmh = 3.6;

[[noreturn]] void Fail(std::string_view origin, const std::string& msg) {
  throw MergeError(ErrorCode::kConfigParse, fmt::format("{}: {}", origin, msg));
}

double ToDouble(std::string_view origin, const std::string& where,
                const std::string& text) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end || text.empty()) {
    Fail(origin, fmt::format("{}: '{}' is not a number", where, text));
  }
  return v;
}

std::uint64_t ToUnsigned(std::string_view origin, const std::string& where,
                         const std::string& text) {
  std::uint64_t v = 0;
  const char* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end || text.empty()) {
    Fail(origin,
         fmt::format("{}: '{}' is not a non-negative integer", where, text));
  }
  return v;
}

int ToInt(std::string_view origin, const std::string& where,
          const std::string& text) {
  int v = 0;
  const char* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end || text.empty()) {
    Fail(origin, fmt::format("{}: '{}' is not an integer", where, text));
  }
  return v;
}

std::vector<std::string> SplitList(const std::string& text) {
  std::vector<std::string> parts;
  boost::split(parts, text, boost::is_any_of(","));
  for (std::string& p : parts) boost::trim(p);
  if (parts.size() == 1 && parts[0].empty()) parts.clear();
  return parts;
}

template <typename T>
std::string JoinList(const std::vector<T>& values) {
  return fmt::format("{}", fmt::join(values, ", "));
}

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view, const std::string&)> set;
};

template <typename Acc>
Field Real(std::string section, std::string key, Acc acc, double scale = 1.0) {
  const std::string where = section + "." + key;
  return {section, key,
          [acc, scale](const RunConfig& c) {
            RunConfig copy = c;
            const double v = acc(copy);
            if (scale == 1.0) return fmt::format("{}", v);
            // Shortest text that converts back to the same stored value.
            for (int digits = 1; digits <= 17; ++digits) {
              const std::string s = fmt::format(
                  "{}", std::stod(fmt::format("{:.{}g}", v * scale, digits)));
              if (std::stod(s) / scale == v) return s;
            }
            // Not every double has an exact preimage under the scale; look a
            // few ulps either side before settling for the nearest one.
            constexpr double kBig = std::numeric_limits<double>::infinity();
            double up = v * scale, down = up;
            for (int step = 0; step < 8; ++step) {
              if (up / scale == v) return fmt::format("{}", up);
              if (down / scale == v) return fmt::format("{}", down);
              up = std::nextafter(up, kBig);
              down = std::nextafter(down, -kBig);
            }
            return fmt::format("{}", v * scale);
          },
          [acc, scale, where](RunConfig& c, std::string_view origin,
                              const std::string& v) {
            acc(c) = ToDouble(origin, where, v) / scale;
          }};
}

template <typename Acc>
Field Integer(std::string section, std::string key, Acc acc) {
  const std::string where = section + "." + key;
  return {section, key,
          [acc](const RunConfig& c) {
            RunConfig copy = c;
            return fmt::format("{}", acc(copy));
          },
          [acc, where](RunConfig& c, std::string_view origin,
                       const std::string& v) {
            acc(c) = ToInt(origin, where, v);
          }};
}

const std::vector<Field>& Fields() {
  static const std::vector<Field> fields = [] {
    std::vector<Field> f;
    // [scenario]
    f.push_back(Real("scenario", "mainline_volume", [](RunConfig& c) -> double& {
      return c.scenario.mainline_volume;
    }));
    f.push_back(Real("scenario", "ramp_volume", [](RunConfig& c) -> double& {
      return c.scenario.ramp_volume;
    }));
    f.push_back(
        {"scenario", "strategy",
         [](const RunConfig& c) {
           return std::string(StrategyName(c.scenario.strategy));
         },
         [](RunConfig& c, std::string_view origin, const std::string& v) {
           auto s = ParseStrategy(v);
           if (!s) Fail(origin, fmt::format("unknown strategy '{}'", v));
           c.scenario.strategy = *s;
         }});
    f.push_back(Real("scenario", "duration", [](RunConfig& c) -> double& {
      return c.scenario.duration;
    }));
    f.push_back(Real("scenario", "warmup", [](RunConfig& c) -> double& {
      return c.scenario.warmup;
    }));
    f.push_back(
        {"scenario", "seed",
         [](const RunConfig& c) { return fmt::format("{}", c.scenario.seed); },
         [](RunConfig& c, std::string_view origin, const std::string& v) {
           c.scenario.seed = ToUnsigned(origin, "scenario.seed", v);
         }});
    f.push_back(Real("scenario", "sample_dt", [](RunConfig& c) -> double& {
      return c.scenario.sample_dt;
    }));
    f.push_back(Real("scenario", "drain_limit", [](RunConfig& c) -> double& {
      return c.scenario.drain_limit;
    }));
    f.push_back(
        {"scenario", "use_protocol",
         [](const RunConfig& c) {
           return std::string(c.scenario.use_protocol ? "true" : "false");
         },
         [](RunConfig& c, std::string_view origin, const std::string& v) {
           if (v == "true") {
             c.scenario.use_protocol = true;
           } else if (v == "false") {
             c.scenario.use_protocol = false;
           } else {
             Fail(origin, fmt::format("scenario.use_protocol: '{}' is not "
                                      "true or false",
                                      v));
           }
         }});
    // [geometry]
    f.push_back(Real("geometry", "mainline_length", [](RunConfig& c) -> double& {
      return c.scenario.geometry.mainline_length;
    }));
    f.push_back(Integer("geometry", "mainline_lanes", [](RunConfig& c) -> int& {
      return c.scenario.geometry.mainline_lane_count;
    }));
    f.push_back(Real("geometry", "ramp_length", [](RunConfig& c) -> double& {
      return c.scenario.geometry.ramp_length;
    }));
    f.push_back(Real("geometry", "accel_lane_start", [](RunConfig& c) -> double& {
      return c.scenario.geometry.accel_lane_start;
    }));
    f.push_back(
        Real("geometry", "accel_lane_length", [](RunConfig& c) -> double& {
          return c.scenario.geometry.accel_lane_length;
        }));
    // [vehicle]
    f.push_back(Real(
        "vehicle", "mainline_speed_kmh",
        [](RunConfig& c) -> double& { return c.scenario.params.v0; }, kKmh));
    f.push_back(Real(
        "vehicle", "ramp_speed_kmh",
        [](RunConfig& c) -> double& { return c.scenario.params.vr0; }, kKmh));
    f.push_back(Real("vehicle", "accel_lane_rate", [](RunConfig& c) -> double& {
      return c.scenario.params.a_r;
    }));
    f.push_back(Real("vehicle", "max_accel", [](RunConfig& c) -> double& {
      return c.scenario.params.a_max;
    }));
    f.push_back(Real("vehicle", "min_accel", [](RunConfig& c) -> double& {
      return c.scenario.params.a_min;
    }));
    f.push_back(Real(
        "vehicle", "max_speed_kmh",
        [](RunConfig& c) -> double& { return c.scenario.params.v_max; }, kKmh));
    f.push_back(Real("vehicle", "length", [](RunConfig& c) -> double& {
      return c.scenario.params.vehicle_length;
    }));
    f.push_back(Real(
        "vehicle", "ramp_speed_limit_kmh",
        [](RunConfig& c) -> double& {
          return c.scenario.params.ramp_speed_limit;
        },
        kKmh));
    // [safety]
    f.push_back(Real("safety", "standstill_margin", [](RunConfig& c) -> double& {
      return c.scenario.safety.d0;
    }));
    f.push_back(Real("safety", "max_braking", [](RunConfig& c) -> double& {
      return c.scenario.safety.b_max;
    }));
    f.push_back(Real("safety", "gps_error", [](RunConfig& c) -> double& {
      return c.scenario.safety.gps_error;
    }));
    f.push_back(Real("safety", "clock_error", [](RunConfig& c) -> double& {
      return c.scenario.safety.clock_error;
    }));
    f.push_back(
        Real("safety", "sampling_tolerance", [](RunConfig& c) -> double& {
          return c.scenario.safety.sampling_tolerance;
        }));
    f.push_back(Real("safety", "crash_pulse", [](RunConfig& c) -> double& {
      return c.scenario.urgency.t_pulse;
    }));
    // [planner]
    f.push_back(Real("planner", "plan_lead_time", [](RunConfig& c) -> double& {
      return c.scenario.planner.plan_lead_time;
    }));
    f.push_back(
        Real("planner", "ramp_adjust_decel", [](RunConfig& c) -> double& {
          return c.scenario.planner.ramp_adjust_decel;
        }));
    f.push_back(
        Real("planner", "mainline_adjust_rate", [](RunConfig& c) -> double& {
          return c.scenario.planner.mainline_adjust_rate;
        }));
    f.push_back(
        Real("planner", "ramp_min_speed_ratio", [](RunConfig& c) -> double& {
          return c.scenario.planner.ramp_min_speed_ratio;
        }));
    f.push_back(Real(
        "planner", "mainline_min_speed_kmh",
        [](RunConfig& c) -> double& {
          return c.scenario.planner.mainline_min_speed;
        },
        kKmh));
    f.push_back(Integer("planner", "cascade_cap", [](RunConfig& c) -> int& {
      return c.scenario.planner.cascade_cap;
    }));
    f.push_back(Integer("planner", "gap_search_radius", [](RunConfig& c) -> int& {
      return c.scenario.planner.gap_search_radius;
    }));
    f.push_back(Real("planner", "planning_margin", [](RunConfig& c) -> double& {
      return c.scenario.planner.planning_margin;
    }));
    f.push_back(Real("planner", "max_ramp_wait", [](RunConfig& c) -> double& {
      return c.scenario.planner.max_ramp_wait;
    }));
    // [coordination]
    f.push_back(
        Real("coordination", "processing_latency", [](RunConfig& c) -> double& {
          return c.scenario.coordination.processing_latency;
        }));
    f.push_back(
        Real("coordination", "transmission_delay", [](RunConfig& c) -> double& {
          return c.scenario.coordination.transmission_delay;
        }));
    // [baseline]
    f.push_back(Real("baseline", "tau", [](RunConfig& c) -> double& {
      return c.scenario.baseline.krauss.tau;
    }));
    f.push_back(Real("baseline", "decel", [](RunConfig& c) -> double& {
      return c.scenario.baseline.krauss.decel;
    }));
    f.push_back(Real("baseline", "accel", [](RunConfig& c) -> double& {
      return c.scenario.baseline.krauss.accel;
    }));
    f.push_back(Real("baseline", "sigma", [](RunConfig& c) -> double& {
      return c.scenario.baseline.krauss.sigma;
    }));
    f.push_back(Real("baseline", "min_gap", [](RunConfig& c) -> double& {
      return c.scenario.baseline.krauss.min_gap;
    }));
    f.push_back(Real("baseline", "step_ratio", [](RunConfig& c) -> double& {
      return c.scenario.baseline.step_ratio;
    }));
    f.push_back(Real("baseline", "tau_lead", [](RunConfig& c) -> double& {
      return c.scenario.baseline.tau_lead;
    }));
    f.push_back(Real("baseline", "tau_lag", [](RunConfig& c) -> double& {
      return c.scenario.baseline.tau_lag;
    }));
    // [matrix]
    f.push_back(
        {"matrix", "mainline_volumes",
         [](const RunConfig& c) { return JoinList(c.matrix.mainline_volumes); },
         [](RunConfig& c, std::string_view origin, const std::string& v) {
           c.matrix.mainline_volumes.clear();
           for (const std::string& p : SplitList(v)) {
             c.matrix.mainline_volumes.push_back(
                 ToDouble(origin, "matrix.mainline_volumes", p));
           }
         }});
    f.push_back(
        {"matrix", "ramp_volumes",
         [](const RunConfig& c) { return JoinList(c.matrix.ramp_volumes); },
         [](RunConfig& c, std::string_view origin, const std::string& v) {
           c.matrix.ramp_volumes.clear();
           for (const std::string& p : SplitList(v)) {
             c.matrix.ramp_volumes.push_back(
                 ToDouble(origin, "matrix.ramp_volumes", p));
           }
         }});
    f.push_back(
        {"matrix", "strategies",
         [](const RunConfig& c) {
           std::vector<std::string_view> names;
           for (Strategy s : c.matrix.strategies) {
             names.push_back(StrategyName(s));
           }
           return JoinList(names);
         },
         [](RunConfig& c, std::string_view origin, const std::string& v) {
           c.matrix.strategies.clear();
           for (const std::string& p : SplitList(v)) {
             auto s = ParseStrategy(p);
             if (!s) Fail(origin, fmt::format("unknown strategy '{}'", p));
             c.matrix.strategies.push_back(*s);
           }
         }});
    f.push_back(
        {"matrix", "seeds",
         [](const RunConfig& c) { return JoinList(c.matrix.seeds); },
         [](RunConfig& c, std::string_view origin, const std::string& v) {
           c.matrix.seeds.clear();
           for (const std::string& p : SplitList(v)) {
             c.matrix.seeds.push_back(ToUnsigned(origin, "matrix.seeds", p));
           }
         }});
    return f;
  }();
  return fields;
}

// "<class> <time> [lane]"
ScriptedArrival ParseArrival(std::string_view origin, const std::string& key,
                             const std::string& value) {
  std::vector<std::string> parts;
  std::string trimmed = boost::trim_copy(value);
  boost::split(parts, trimmed, boost::is_space(), boost::token_compress_on);
  const std::string where = "arrivals." + key;
  if (parts.size() < 2 || parts.size() > 3) {
    Fail(origin, fmt::format("{}: expected '<class> <time> [lane]', got '{}'",
                             where, value));
  }
  ScriptedArrival a;
  auto cls = ParseVehicleClass(parts[0]);
  if (!cls) Fail(origin, fmt::format("{}: unknown class '{}'", where, parts[0]));
  a.vehicle_class = *cls;
  a.time = ToDouble(origin, where, parts[1]);
  if (parts.size() == 3) a.lane = ToInt(origin, where, parts[2]);
  return a;
}

}  // namespace

RunConfig ParseConfig(std::string_view text, std::string_view origin) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    Fail(origin, fmt::format("line {}: {}", e.line(), e.message()));
  }
  RunConfig config;
  std::set<std::string> sections;
  for (const Field& f : Fields()) sections.insert(f.section);
  for (const auto& [section, body] : tree) {
    if (section == "arrivals") {
      for (const auto& [key, value] : body) {
        config.scenario.script.push_back(
            ParseArrival(origin, key, value.data()));
      }
      continue;
    }
    if (!sections.count(section)) {
      Fail(origin, fmt::format("unknown section [{}]", section));
    }
    if (!body.data().empty()) {
      Fail(origin, fmt::format("'{}' is outside any section", section));
    }
    for (const auto& [key, value] : body) {
      auto it = std::find_if(Fields().begin(), Fields().end(),
                             [&](const Field& f) {
                               return f.section == section && f.key == key;
                             });
      if (it == Fields().end()) {
        Fail(origin, fmt::format("unknown key '{}' in [{}]", key, section));
      }
      it->set(config, origin, boost::trim_copy(value.data()));
    }
  }
  try {
    ValidateScenario(config.scenario);
  } catch (const MergeError& e) {
    Fail(origin, e.what());
  }
  return config;
}

RunConfig LoadConfigFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw MergeError(ErrorCode::kConfigParse,
                     fmt::format("cannot read config file '{}'", path));
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return ParseConfig(buf.str(), path);
}

std::string ResolvedConfigText(const RunConfig& config) {
  std::string out;
  std::string section;
  for (const Field& f : Fields()) {
    if (f.section != section) {
      if (!section.empty()) out += '\n';
      section = f.section;
      out += fmt::format("[{}]\n", section);
    }
    out += fmt::format("{} = {}\n", f.key, f.get(config));
  }
  if (!config.scenario.script.empty()) {
    out += "\n[arrivals]\n";
    int n = 0;
    for (const ScriptedArrival& a : config.scenario.script) {
      out += fmt::format("a{} = {} {} {}\n", ++n,
                         VehicleClassName(a.vehicle_class), a.time, a.lane);
    }
  }
  return out;
}

}  // namespace rampmerge
