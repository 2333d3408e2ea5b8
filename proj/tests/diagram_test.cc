#include "rampmerge/diagram.h"

#include <regex>
#include <sstream>

#include <gtest/gtest.h>

#include "rampmerge/errors.h"
#include "rampmerge/report_io.h"
#include "test_support.h"

namespace rampmerge {
namespace {

int Count(const std::string& text, const std::string& needle) {
  int n = 0;
  for (std::size_t p = text.find(needle); p != std::string::npos;
       p = text.find(needle, p + 1)) {
    ++n;
  }
  return n;
}

ErrorCode ReadCode(const std::string& csv, std::string* msg = nullptr) {
  std::istringstream in(csv);
  try {
    ReadTimelineCsv(in);
  } catch (const MergeError& e) {
    if (msg) *msg = e.what();
    return e.code();
  }
  ADD_FAILURE() << "accepted: " << csv;
  return ErrorCode::kInvalidArgument;
}

const char* kHeader = "time,vehicle_id,class,lane,station,speed\n";

TEST(RenderTimeSpaceSvg, EmptyTimelineHasAxesOnly) {
  const std::string svg = RenderTimeSpaceSvg({}, {});
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_EQ(Count(svg, "class=\"axes\""), 1);
  EXPECT_NE(svg.find("time (s)"), std::string::npos);
  EXPECT_NE(svg.find("station (m)"), std::string::npos);
  EXPECT_EQ(Count(svg, "<polyline"), 0);
  EXPECT_EQ(Count(svg, "<svg"), Count(svg, "</svg>"));
}

TEST(RenderTimeSpaceSvg, OnePolylinePerVehicleWithStyles) {
  const testing::WorkedExample ex;
  const std::vector<StateSample> samples = RunFreeFlow(ex.Config()).Samples();
  DiagramOptions opt;
  opt.merge_point = testing::DefaultGeometry().merge_point;
  opt.title = "worked example";
  const std::string svg = RenderTimeSpaceSvg(samples, opt);
  EXPECT_EQ(Count(svg, "<polyline"), 8);
  EXPECT_EQ(Count(svg, "class=\"mainline\""), 7);
  EXPECT_EQ(Count(svg, "class=\"ramp\""), 1);
  const std::regex dashed("<polyline[^>]*stroke-dasharray");
  EXPECT_EQ(std::distance(
                std::sregex_iterator(svg.begin(), svg.end(), dashed),
                std::sregex_iterator()),
            1);
  EXPECT_EQ(Count(svg, "class=\"merge-point\""), 1);
  EXPECT_NE(svg.find("worked example"), std::string::npos);
  EXPECT_EQ(svg, RenderTimeSpaceSvg(samples, opt));
}

TEST(RenderTimeSpaceSvg, ZoomKeepsPointsNearTheWindow) {
  const testing::WorkedExample ex;
  const std::vector<StateSample> samples = RunFreeFlow(ex.Config()).Samples();
  DiagramOptions opt;
  opt.zoom = ZoomWindow{40.0, 50.0, 1100.0, 1300.0};
  const std::string full = RenderTimeSpaceSvg(samples, {});
  const std::string zoomed = RenderTimeSpaceSvg(samples, opt);
  EXPECT_LT(zoomed.size(), full.size() / 4);
  EXPECT_GT(Count(zoomed, "<polyline"), 0);
}

TEST(FindCrossings, FreeFlowRampMeetsTheFourthVehicle) {
  const testing::WorkedExample ex;
  const auto crossings = FindCrossings(RunFreeFlow(ex.Config()).Samples());
  bool ramp_crosses_fourth = false;
  for (const Crossing& c : crossings) {
    if (c.first == VehicleId{4} && c.second == VehicleId{ex.ramp_id}) {
      ramp_crosses_fourth = true;
      // Vehicle 4 overtakes while the ramp vehicle is still off the mainline.
      EXPECT_FALSE(c.same_stream);
    }
    EXPECT_TRUE(c.first == VehicleId{ex.ramp_id} ||
                c.second == VehicleId{ex.ramp_id});
  }
  EXPECT_TRUE(ramp_crosses_fourth);
}

TEST(FindCrossings, NoSameStreamCrossingAfterPlanning) {
  const testing::WorkedExample ex;
  for (Strategy s : {Strategy::kMainlinePriority, Strategy::kRampPriority}) {
    ScenarioConfig c = ex.Config();
    c.strategy = s;
    for (const Crossing& x : FindCrossings(rampmerge::Run(c).Samples())) {
      EXPECT_FALSE(x.same_stream) << x.first.value << " " << x.second.value;
    }
  }
}

TEST(FindCrossings, OvertakingOnTheMainlineIsSameStream) {
  std::vector<StateSample> s;
  for (int k = 0; k <= 10; ++k) {
    const double t = k * 0.5;
    s.push_back({t, VehicleId{1}, VehicleClass::kMainline, Lane::Mainline(0),
                 100.0 + 20.0 * t, 20.0});
    s.push_back({t, VehicleId{2}, VehicleClass::kMainline, Lane::Mainline(0),
                 90.0 + 25.0 * t, 25.0});
  }
  std::stable_sort(s.begin(), s.end(),
                   [](const StateSample& a, const StateSample& b) {
                     return a.time < b.time;
                   });
  const auto c = FindCrossings(s);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_TRUE(c[0].same_stream);
  // Level at t = 2, swapped from the next sample on.
  EXPECT_EQ(c[0].time, 2.5);
}

TEST(ReadTimelineCsv, RoundTripsTheWriter) {
  ScenarioConfig c;
  c.duration = 120.0;
  c.warmup = 0.0;
  const Timeline tl = rampmerge::Run(c);
  std::stringstream buf;
  WriteTimelineCsv(buf, tl);
  const std::vector<StateSample> back = ReadTimelineCsv(buf);
  const std::vector<StateSample> direct = tl.Samples();
  ASSERT_EQ(back.size(), direct.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].vehicle_id, direct[i].vehicle_id);
    EXPECT_EQ(back[i].lane, direct[i].lane);
    EXPECT_EQ(back[i].vehicle_class, direct[i].vehicle_class);
    EXPECT_NEAR(back[i].time, direct[i].time, 1e-9);
    EXPECT_NEAR(back[i].station, direct[i].station, 1e-9);
    EXPECT_NEAR(back[i].speed, direct[i].speed, 1e-9);
  }
}

TEST(ReadTimelineCsv, MalformedLinesAreNumbered) {
  std::string msg;
  EXPECT_EQ(ReadCode(""), ErrorCode::kMalformedTimeline);
  EXPECT_EQ(ReadCode("t,id\n"), ErrorCode::kMalformedTimeline);
  EXPECT_EQ(ReadCode(std::string(kHeader) +
                         "0,1,mainline,main0,0,27.7\n"
                         "0.1,1,mainline,main0,2.7\n",
                     &msg),
            ErrorCode::kMalformedTimeline);
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
  EXPECT_EQ(ReadCode(std::string(kHeader) + "0,1,bus,main0,0,1\n", &msg),
            ErrorCode::kMalformedTimeline);
  EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
  EXPECT_EQ(ReadCode(std::string(kHeader) + "x,1,ramp,ramp,0,1\n"),
            ErrorCode::kMalformedTimeline);
  EXPECT_EQ(ReadCode(std::string(kHeader) +
                     "1,1,ramp,ramp,700,16\n0.5,1,ramp,ramp,708,16\n"),
            ErrorCode::kMalformedTimeline);
}

TEST(ReadTimelineCsv, HeaderOnlyIsEmpty) {
  std::istringstream in(kHeader);
  EXPECT_TRUE(ReadTimelineCsv(in).empty());
}

TEST(ParseZoom, Valid) {
  const ZoomWindow z = ParseZoom("10:20.5:1000:1300");
  EXPECT_EQ(z.t0, 10.0);
  EXPECT_EQ(z.t1, 20.5);
  EXPECT_EQ(z.s0, 1000.0);
  EXPECT_EQ(z.s1, 1300.0);
}

TEST(ParseZoom, Invalid) {
  for (const char* bad : {"", "1:2:3", "1:2:3:4:5", "2:1:0:10", "0:1:5:5",
                          "a:1:0:1", "0:1:0:1x"}) {
    EXPECT_THROW(ParseZoom(bad), MergeError) << bad;
  }
}

}  // namespace
}  // namespace rampmerge
