#include "rampmerge/diagram.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

#include <boost/algorithm/string.hpp>
#include <fmt/format.h>

#include "rampmerge/errors.h"

namespace rampmerge {
namespace {

constexpr std::string_view kHeader = "time,vehicle_id,class,lane,station,speed";

[[noreturn]] void Malformed(long line, const std::string& msg) {
  throw MergeError(ErrorCode::kMalformedTimeline,
                   fmt::format("timeline line {}: {}", line, msg));
}

template <typename T>
T ParseField(long line, const std::string& name, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || p != end) {
    Malformed(line, fmt::format("bad {} '{}'", name, text));
  }
  return v;
}

double NiceStep(double span) {
  if (!(span > 0.0)) return 1.0;
  const double raw = span / 8.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (raw <= m * mag) return m * mag;
  }
  return 10.0 * mag;
}

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c",
                                    "#d62728", "#9467bd", "#8c564b",
                                    "#e377c2", "#17becf"};

}  // namespace

std::vector<StateSample> ReadTimelineCsv(std::istream& in) {
  std::vector<StateSample> out;
  std::string text;
  long line = 0;
  if (!std::getline(in, text)) Malformed(1, "missing header");
  ++line;
  boost::trim_right_if(text, boost::is_any_of("\r"));
  if (text != kHeader) {
    Malformed(line, fmt::format("expected header '{}'", kHeader));
  }
  while (std::getline(in, text)) {
    ++line;
    boost::trim_right_if(text, boost::is_any_of("\r"));
    if (text.empty()) continue;
    std::vector<std::string> f;
    boost::split(f, text, boost::is_any_of(","));
    if (f.size() != 6) {
      Malformed(line, fmt::format("expected 6 fields, found {}", f.size()));
    }
    StateSample s;
    s.time = ParseField<double>(line, "time", f[0]);
    s.vehicle_id = VehicleId{ParseField<std::int64_t>(line, "vehicle_id", f[1])};
    auto cls = ParseVehicleClass(f[2]);
    if (!cls) Malformed(line, fmt::format("bad class '{}'", f[2]));
    s.vehicle_class = *cls;
    auto lane = ParseLane(f[3]);
    if (!lane) Malformed(line, fmt::format("bad lane '{}'", f[3]));
    s.lane = *lane;
    s.station = ParseField<double>(line, "station", f[4]);
    s.speed = ParseField<double>(line, "speed", f[5]);
    if (!out.empty() && s.time < out.back().time) {
      Malformed(line, "times go backwards");
    }
    out.push_back(s);
  }
  return out;
}

ZoomWindow ParseZoom(std::string_view text) {
  std::vector<std::string> parts;
  std::string copy(text);
  boost::split(parts, copy, boost::is_any_of(":"));
  auto bad = [&] {
    return MergeError(ErrorCode::kInvalidArgument,
                      fmt::format("zoom '{}' is not t0:t1:s0:s1 with t0 < t1 "
                                  "and s0 < s1",
                                  text));
  };
  if (parts.size() != 4) throw bad();
  double v[4];
  for (int i = 0; i < 4; ++i) {
    const char* end = parts[i].data() + parts[i].size();
    auto [p, ec] = std::from_chars(parts[i].data(), end, v[i]);
    if (parts[i].empty() || ec != std::errc() || p != end) throw bad();
  }
  ZoomWindow z{v[0], v[1], v[2], v[3]};
  if (!(z.t0 < z.t1) || !(z.s0 < z.s1)) throw bad();
  return z;
}

std::string RenderTimeSpaceSvg(const std::vector<StateSample>& samples,
                               const DiagramOptions& opt) {
  const double left = 70.0, right = 20.0, top = 40.0, bottom = 50.0;
  const double pw = opt.width - left - right;
  const double ph = opt.height - top - bottom;

  double t0 = 0.0, t1 = 1.0, s0 = 0.0, s1 = 1.0;
  if (opt.zoom) {
    t0 = opt.zoom->t0;
    t1 = opt.zoom->t1;
    s0 = opt.zoom->s0;
    s1 = opt.zoom->s1;
  } else if (!samples.empty()) {
    t0 = t1 = samples.front().time;
    s0 = s1 = samples.front().station;
    for (const StateSample& s : samples) {
      t0 = std::min(t0, s.time);
      t1 = std::max(t1, s.time);
      s0 = std::min(s0, s.station);
      s1 = std::max(s1, s.station);
    }
    if (opt.merge_point) {
      s0 = std::min(s0, *opt.merge_point);
      s1 = std::max(s1, *opt.merge_point);
    }
    if (t1 <= t0) t1 = t0 + 1.0;
    if (s1 <= s0) s1 = s0 + 1.0;
  }
  auto X = [&](double t) { return left + (t - t0) / (t1 - t0) * pw; };
  auto Y = [&](double s) { return top + ph - (s - s0) / (s1 - s0) * ph; };

  std::string out;
  out += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" "
      "viewBox=\"0 0 {} {}\" font-family=\"sans-serif\" font-size=\"11\">\n",
      opt.width, opt.height, opt.width, opt.height);
  out += fmt::format(
      "<defs><clipPath id=\"plot\"><rect x=\"{}\" y=\"{}\" width=\"{}\" "
      "height=\"{}\"/></clipPath></defs>\n",
      left, top, pw, ph);
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!opt.title.empty()) {
    out += fmt::format(
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}"
        "</text>\n",
        opt.width / 2.0, opt.title);
  }

  // Axes and ticks.
  out += fmt::format(
      "<g class=\"axes\" stroke=\"black\" fill=\"none\"><rect x=\"{}\" "
      "y=\"{}\" width=\"{}\" height=\"{}\"/></g>\n",
      left, top, pw, ph);
  out += "<g class=\"ticks\" fill=\"black\">\n";
  const double ts = NiceStep(t1 - t0);
  for (double t = std::ceil(t0 / ts) * ts; t <= t1 + 1e-9 * ts; t += ts) {
    out += fmt::format(
        "<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" "
        "stroke=\"black\"/><text x=\"{0:.2f}\" y=\"{3:.2f}\" "
        "text-anchor=\"middle\">{4:g}</text>\n",
        X(t), top + ph, top + ph + 5, top + ph + 18, t);
  }
  const double ss = NiceStep(s1 - s0);
  for (double s = std::ceil(s0 / ss) * ss; s <= s1 + 1e-9 * ss; s += ss) {
    out += fmt::format(
        "<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{2:.2f}\" y2=\"{1:.2f}\" "
        "stroke=\"black\"/><text x=\"{3:.2f}\" y=\"{4:.2f}\" "
        "text-anchor=\"end\">{5:g}</text>\n",
        left - 5, Y(s), left, left - 8, Y(s) + 4, s);
  }
  out += "</g>\n";
  out += fmt::format(
      "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">time (s)</text>\n",
      left + pw / 2.0, opt.height - 12);
  out += fmt::format(
      "<text x=\"16\" y=\"{0}\" text-anchor=\"middle\" "
      "transform=\"rotate(-90 16 {0})\">station (m)</text>\n",
      top + ph / 2.0);

  if (opt.merge_point && *opt.merge_point >= s0 && *opt.merge_point <= s1) {
    out += fmt::format(
        "<line class=\"merge-point\" x1=\"{0}\" y1=\"{1:.2f}\" x2=\"{2}\" "
        "y2=\"{1:.2f}\" stroke=\"gray\" stroke-dasharray=\"2,3\"/>"
        "<text x=\"{3}\" y=\"{4:.2f}\" text-anchor=\"end\" fill=\"gray\">"
        "merge point</text>\n",
        left, Y(*opt.merge_point), left + pw, left + pw - 4,
        Y(*opt.merge_point) - 4);
  }

  std::map<VehicleId, std::vector<const StateSample*>> tracks;
  for (const StateSample& s : samples) tracks[s.vehicle_id].push_back(&s);
  out += "<g clip-path=\"url(#plot)\" fill=\"none\" stroke-width=\"1.2\">\n";
  for (const auto& [id, pts] : tracks) {
    std::string coords;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const StateSample& p = *pts[i];
      if (opt.zoom) {
        // Keep one point either side of the window so lines reach the edge.
        const bool next_in = i + 1 < pts.size() && pts[i + 1]->time >= t0;
        const bool prev_in = i > 0 && pts[i - 1]->time <= t1;
        if ((p.time < t0 && !next_in) || (p.time > t1 && !prev_in)) continue;
      }
      if (!coords.empty()) coords += ' ';
      coords += fmt::format("{:.2f},{:.2f}", X(p.time), Y(p.station));
    }
    if (coords.empty()) continue;
    const bool ramp = pts.front()->vehicle_class == VehicleClass::kRamp;
    out += fmt::format(
        "<polyline class=\"{}\" data-vehicle=\"{}\" stroke=\"{}\"{} "
        "points=\"{}\"/>\n",
        ramp ? "ramp" : "mainline", id.value,
        kPalette[static_cast<std::size_t>(id.value) % 8],
        ramp ? " stroke-dasharray=\"6,4\"" : "", coords);
  }
  out += "</g>\n</svg>\n";
  return out;
}

std::vector<Crossing> FindCrossings(const std::vector<StateSample>& samples) {
  std::map<VehicleId, std::vector<const StateSample*>> tracks;
  for (const StateSample& s : samples) tracks[s.vehicle_id].push_back(&s);
  std::vector<Crossing> out;
  for (auto a = tracks.begin(); a != tracks.end(); ++a) {
    for (auto b = std::next(a); b != tracks.end(); ++b) {
      const auto& pa = a->second;
      const auto& pb = b->second;
      std::size_t i = 0, j = 0;
      int sign = 0;
      const StateSample* prev_a = nullptr;
      const StateSample* prev_b = nullptr;
      while (i < pa.size() && j < pb.size()) {
        if (pa[i]->time < pb[j]->time) {
          ++i;
          continue;
        }
        if (pb[j]->time < pa[i]->time) {
          ++j;
          continue;
        }
        const double d = pa[i]->station - pb[j]->station;
        const int s = (d > 0.0) - (d < 0.0);
        if (s != 0) {
          if (sign != 0 && s != sign) {
            const bool same = SameStream(pa[i]->lane, pb[j]->lane) &&
                              (!prev_a || SameStream(prev_a->lane, prev_b->lane));
            out.push_back({a->first, b->first, pa[i]->time, same});
          }
          sign = s;
        }
        prev_a = pa[i];
        prev_b = pb[j];
        ++i;
        ++j;
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const Crossing& x, const Crossing& y) {
    if (x.time != y.time) return x.time < y.time;
    if (x.first != y.first) return x.first < y.first;
    return x.second < y.second;
  });
  return out;
}

}  // namespace rampmerge
