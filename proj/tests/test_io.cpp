#include <fft/mot_io.hpp>

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace {

using fft::BBox;
using fft::Detection;
using fft::FlowField;
using fft::ParseError;
using fft::TrajectorySet;

std::vector<unsigned char> flow_bytes(float magic, std::int32_t w,
                                      std::int32_t h,
                                      const std::vector<float>& uv) {
  std::vector<unsigned char> bytes(12 + uv.size() * 4);
  std::memcpy(bytes.data(), &magic, 4);
  std::memcpy(bytes.data() + 4, &w, 4);
  std::memcpy(bytes.data() + 8, &h, 4);
  std::memcpy(bytes.data() + 12, uv.data(), uv.size() * 4);
  return bytes;
}

}  // namespace

TEST(ParseDetections, SingleRowConvertsToZeroBased) {
  auto data = fft::parse_detections("1,-1,10,20,30,40,0.9\n");
  ASSERT_EQ(data.by_frame.size(), 1u);
  ASSERT_EQ(data.by_frame[0].size(), 1u);
  EXPECT_EQ(data.by_frame[0][0].box, BBox(9, 19, 30, 40));
  EXPECT_EQ(data.by_frame[0][0].score, 0.9);
  EXPECT_FALSE(data.normalized);
}

TEST(ParseDetections, EmptyTextGivesEmptyMap) {
  EXPECT_TRUE(fft::parse_detections("").by_frame.empty());
  EXPECT_TRUE(fft::parse_detections("\n\n").by_frame.empty());
}

TEST(ParseDetections, KeepsPerFrameOrderAndGroupsFrames) {
  auto data = fft::parse_detections(
      "2,-1,5,5,10,10,0.5\n"
      "1,-1,1,1,10,10,0.8\n"
      "1,-1,30,1,10,10,0.7\n");
  ASSERT_EQ(data.by_frame.size(), 2u);
  ASSERT_EQ(data.by_frame[0].size(), 2u);
  EXPECT_EQ(data.by_frame[0][0].box, BBox(0, 0, 10, 10));
  EXPECT_EQ(data.by_frame[0][1].box, BBox(29, 0, 10, 10));
  EXPECT_EQ(data.by_frame[1][0].box, BBox(4, 4, 10, 10));
}

TEST(ParseDetections, MinMaxNormalizesOutOfRangeScores) {
  auto data = fft::parse_detections(
      "1,-1,0,0,10,10,-2\n"
      "1,-1,20,0,10,10,0\n"
      "1,-1,40,0,10,10,2\n");
  EXPECT_TRUE(data.normalized);
  EXPECT_EQ(data.raw_min, -2.0);
  EXPECT_EQ(data.raw_max, 2.0);
  ASSERT_EQ(data.by_frame[0].size(), 3u);
  EXPECT_DOUBLE_EQ(data.by_frame[0][0].score, 0.0);
  EXPECT_DOUBLE_EQ(data.by_frame[0][1].score, 0.5);
  EXPECT_DOUBLE_EQ(data.by_frame[0][2].score, 1.0);
}

TEST(ParseDetections, ConstantOutOfRangeScoresBecomeOne) {
  auto data = fft::parse_detections(
      "1,-1,0,0,10,10,5\n"
      "2,-1,0,0,10,10,5\n");
  EXPECT_TRUE(data.normalized);
  EXPECT_DOUBLE_EQ(data.by_frame[0][0].score, 1.0);
  EXPECT_DOUBLE_EQ(data.by_frame[1][0].score, 1.0);
}

TEST(ParseDetections, InRangeScoresAreUntouched) {
  auto data = fft::parse_detections("1,-1,0,0,10,10,0.25\n1,-1,20,0,10,10,1\n");
  EXPECT_FALSE(data.normalized);
  EXPECT_EQ(data.by_frame[0][0].score, 0.25);
}

TEST(ParseDetections, ReportsLineNumbers) {
  try {
    fft::parse_detections("1,-1,10,20,-5,40,0.9\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
  try {
    fft::parse_detections("1,-1,1,1,10,10,0.5\n\n2,-1,bad,1,10,10,0.5\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(ParseDetections, RejectsShortRowsAndBadFrames) {
  EXPECT_THROW(fft::parse_detections("1,-1,10,20,30\n"), ParseError);
  EXPECT_THROW(fft::parse_detections("0,-1,10,20,30,40,0.9\n"), ParseError);
  EXPECT_THROW(fft::parse_detections("1,-1,10,20,30,nan,0.9\n"), ParseError);
}

TEST(ParseGroundTruth, FiltersFlagClassAndVisibility) {
  const char* text =
      "1,1,10,20,30,40,1,1,1.0\n"
      "1,2,50,20,30,40,0,1,1.0\n"
      "1,3,90,20,30,40,1,11,1.0\n"
      "1,4,130,20,30,40,1,1,0.2\n";
  auto all = fft::parse_ground_truth(text);
  EXPECT_EQ(all.size(), 3u);  // flag 0 always drops
  EXPECT_FALSE(all.contains(2));

  auto filtered = fft::parse_ground_truth(text, {1}, 0.5);
  ASSERT_EQ(filtered.size(), 1u);
  EXPECT_TRUE(filtered.contains(1));
  EXPECT_EQ(filtered.at(1).at(0).box, BBox(9, 19, 30, 40));
  EXPECT_EQ(filtered.at(1).at(0).score, 1.0);
}

TEST(ParseGroundTruth, RejectsDuplicateIdFramePairs) {
  const char* text =
      "1,1,10,20,30,40,1,1,1.0\n"
      "1,1,12,20,30,40,1,1,1.0\n";
  EXPECT_THROW(fft::parse_ground_truth(text), ParseError);
}

TEST(ParseResults, RoundTripsWriteResults) {
  TrajectorySet set;
  set.add_entry(4, 0, BBox(9, 19, 30, 40), 0.9);
  auto parsed = fft::parse_results(fft::write_results(set));
  ASSERT_TRUE(parsed.contains(4));
  EXPECT_EQ(parsed.at(4).at(0).box, BBox(9, 19, 30, 40));
  EXPECT_EQ(parsed.at(4).at(0).score, 0.9);
}

TEST(ParseResults, RejectsBadIdOrScore) {
  EXPECT_THROW(fft::parse_results("1,0,10,20,30,40,0.9\n"), ParseError);
  EXPECT_THROW(fft::parse_results("1,-2,10,20,30,40,0.9\n"), ParseError);
  EXPECT_THROW(fft::parse_results("1,1,10,20,30,40,1.5\n"), ParseError);
}

TEST(WriteResults, EmptySetGivesEmptyString) {
  EXPECT_EQ(fft::write_results(TrajectorySet{}), "");
}

TEST(WriteResults, FormatsOneBasedRow) {
  TrajectorySet set;
  set.add_entry(4, 0, BBox(9, 19, 30, 40), 0.9);
  EXPECT_EQ(fft::write_results(set), "1,4,10,20,30,40,0.9,-1,-1,-1\n");
}

TEST(WriteResults, SortsByFrameThenId) {
  TrajectorySet set;
  set.add_entry(9, 1, BBox(0, 0, 5, 5), 0.5);
  set.add_entry(2, 1, BBox(10, 0, 5, 5), 0.5);
  set.add_entry(9, 0, BBox(1, 0, 5, 5), 0.5);
  const std::string out = fft::write_results(set);
  EXPECT_EQ(out,
            "1,9,2,1,5,5,0.5,-1,-1,-1\n"
            "2,2,11,1,5,5,0.5,-1,-1,-1\n"
            "2,9,1,1,5,5,0.5,-1,-1,-1\n");
}

TEST(WriteResults, TrimsTrailingZerosInCoords) {
  TrajectorySet set;
  set.add_entry(1, 0, BBox(9.5, 19.25, 30.129, 40), 0.5);
  // x+1 = 10.5, y+1 = 20.25, w rounds to 30.13 at two decimals
  EXPECT_EQ(fft::write_results(set), "1,1,10.5,20.25,30.13,40,0.5,-1,-1,-1\n");
}

TEST(WriteResults, ValueRoundTripOnRandomSets) {
  std::mt19937_64 rng(55);
  std::uniform_int_distribution<int> quarters(0, 400);
  std::uniform_int_distribution<int> score512(0, 512);
  std::uniform_int_distribution<std::int64_t> frame(0, 20);
  for (int rep = 0; rep < 50; ++rep) {
    TrajectorySet set;
    for (std::int64_t id = 1; id <= 5; ++id) {
      std::int64_t f = frame(rng);
      set.add_entry(id, f,
                    BBox(quarters(rng) / 4.0, quarters(rng) / 4.0,
                         quarters(rng) / 4.0, quarters(rng) / 4.0),
                    score512(rng) / 512.0);
    }
    auto parsed = fft::parse_results(fft::write_results(set));
    ASSERT_EQ(parsed.size(), set.size());
    for (const auto& [id, traj] : set.tracks()) {
      for (const auto& [f, tp] : traj.entries()) {
        const auto& got = parsed.at(id).at(f);
        EXPECT_NEAR(got.box.x, tp.box.x, 1e-9);
        EXPECT_NEAR(got.box.y, tp.box.y, 1e-9);
        EXPECT_NEAR(got.box.w, tp.box.w, 1e-9);
        EXPECT_NEAR(got.box.h, tp.box.h, 1e-9);
        EXPECT_NEAR(got.score, tp.score, 1e-9);
      }
    }
  }
}

TEST(WriteDetections, RoundTripsThroughParse) {
  std::map<std::int64_t, std::vector<Detection>> dets;
  dets[0] = {Detection(BBox(9, 19, 30, 40), 0.9)};
  dets[3] = {Detection(BBox(0, 0, 5, 5), 0.25),
             Detection(BBox(50, 0, 5.5, 5), 1.0)};
  auto parsed = fft::parse_detections(fft::write_detections(dets));
  ASSERT_EQ(parsed.by_frame.size(), 2u);
  EXPECT_EQ(parsed.by_frame[0][0].box, BBox(9, 19, 30, 40));
  ASSERT_EQ(parsed.by_frame[3].size(), 2u);
  EXPECT_EQ(parsed.by_frame[3][1].box, BBox(50, 0, 5.5, 5));
}

TEST(WriteGroundTruth, RoundTripsThroughParse) {
  TrajectorySet gt;
  gt.add_entry(1, 0, BBox(10, 10, 20, 20), 1.0);
  gt.add_entry(2, 1, BBox(40, 10, 20, 20), 1.0);
  auto parsed = fft::parse_ground_truth(fft::write_ground_truth(gt));
  EXPECT_EQ(parsed.size(), 2u);
  EXPECT_EQ(parsed.at(1).at(0).box, BBox(10, 10, 20, 20));
}

TEST(ParseRefinerCsv, ParsesRowsAndValidates) {
  auto rows = fft::parse_refiner_csv("1,10,20,30,40,0.9\n2,5,5,10,10,0.5\n");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0][0].box, BBox(9, 19, 30, 40));
  EXPECT_EQ(rows[0][0].score, 0.9);
  EXPECT_THROW(fft::parse_refiner_csv("1,10,20,30,40,1.5\n"), ParseError);
  EXPECT_THROW(fft::parse_refiner_csv("1,10,20,30\n"), ParseError);
}

TEST(ReadFlow, DecodesMinimalFile) {
  auto bytes = flow_bytes(202021.25f, 1, 1, {3.0f, -2.0f});
  FlowField f = fft::read_flow(bytes);
  EXPECT_EQ(f.width, 1);
  EXPECT_EQ(f.height, 1);
  EXPECT_EQ(f.u[0], 3.0f);
  EXPECT_EQ(f.v[0], -2.0f);
}

TEST(ReadFlow, DecodesInterleavedRowMajor) {
  // 2x1 grid: (u0,v0,u1,v1)
  auto bytes = flow_bytes(202021.25f, 2, 1, {1.f, 2.f, 3.f, 4.f});
  FlowField f = fft::read_flow(bytes);
  EXPECT_EQ(f.u[0], 1.f);
  EXPECT_EQ(f.v[0], 2.f);
  EXPECT_EQ(f.u[1], 3.f);
  EXPECT_EQ(f.v[1], 4.f);
}

TEST(ReadFlow, RejectsBadMagic) {
  auto bytes = flow_bytes(123.f, 1, 1, {0.f, 0.f});
  try {
    fft::read_flow(bytes);
    FAIL() << "expected FlowError";
  } catch (const fft::FlowError& e) {
    EXPECT_EQ(e.kind(), fft::FlowErrorKind::bad_magic);
  }
}

TEST(ReadFlow, RejectsTruncatedPayload) {
  auto bytes = flow_bytes(202021.25f, 2, 2, {0.f, 0.f, 0.f});
  try {
    fft::read_flow(bytes);
    FAIL() << "expected FlowError";
  } catch (const fft::FlowError& e) {
    EXPECT_EQ(e.kind(), fft::FlowErrorKind::truncated);
  }
}

TEST(ReadFlow, RejectsTruncatedHeader) {
  std::vector<unsigned char> bytes{1, 2, 3};
  EXPECT_THROW(fft::read_flow(bytes), fft::FlowError);
}

TEST(ReadFlow, RejectsTrailingBytes) {
  auto bytes = flow_bytes(202021.25f, 1, 1, {0.f, 0.f, 9.f});
  try {
    fft::read_flow(bytes);
    FAIL() << "expected FlowError";
  } catch (const fft::FlowError& e) {
    EXPECT_EQ(e.kind(), fft::FlowErrorKind::trailing_data);
  }
}

TEST(ReadFlow, RejectsNonFiniteValues) {
  auto bytes =
      flow_bytes(202021.25f, 1, 1,
                 {std::numeric_limits<float>::quiet_NaN(), 0.f});
  try {
    fft::read_flow(bytes);
    FAIL() << "expected FlowError";
  } catch (const fft::FlowError& e) {
    EXPECT_EQ(e.kind(), fft::FlowErrorKind::non_finite);
  }
}

TEST(ReadFlow, RejectsBadDimensions) {
  auto bytes = flow_bytes(202021.25f, -1, 1, {0.f, 0.f});
  try {
    fft::read_flow(bytes);
    FAIL() << "expected FlowError";
  } catch (const fft::FlowError& e) {
    EXPECT_EQ(e.kind(), fft::FlowErrorKind::bad_dims);
  }
}

TEST(WriteFlow, BitExactRoundTrip) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<float> val(-40.f, 40.f);
  std::uniform_int_distribution<int> dim(1, 24);
  for (int rep = 0; rep < 50; ++rep) {
    FlowField f(dim(rng), dim(rng));
    for (auto& x : f.u) x = val(rng);
    for (auto& x : f.v) x = val(rng);
    FlowField g = fft::read_flow(fft::write_flow(f));
    EXPECT_EQ(g.width, f.width);
    EXPECT_EQ(g.height, f.height);
    ASSERT_EQ(g.u.size(), f.u.size());
    EXPECT_EQ(0, std::memcmp(g.u.data(), f.u.data(), f.u.size() * 4));
    EXPECT_EQ(0, std::memcmp(g.v.data(), f.v.data(), f.v.size() * 4));
  }
}

TEST(FlowFiles, NameUsesOneBasedFramePair) {
  EXPECT_EQ(fft::flow_file_name(1, 1), "2_1.flo");
  EXPECT_EQ(fft::flow_file_name(9, 3), "10_7.flo");
  EXPECT_EQ(fft::flow_file_name(0, 1), "1_0.flo");
}

TEST(FlowFiles, RoundTripOnDisk) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "fft_flow_io_test";
  fs::create_directories(dir);
  FlowField f(3, 2);
  f.u = {1, 2, 3, 4, 5, 6};
  f.v = {-1, -2, -3, -4, -5, -6};
  const fs::path p = dir / "2_1.flo";
  fft::write_flow_file(p, f);
  FlowField g = fft::read_flow_file(p);
  EXPECT_EQ(g.u, f.u);
  EXPECT_EQ(g.v, f.v);
  fs::remove_all(dir);
}

TEST(LoadFrameBundle, AssemblesFlowsAndDetections) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "fft_bundle_test";
  fs::create_directories(dir);
  FlowField f(2, 2);
  fft::write_flow_file(dir / fft::flow_file_name(3, 1), f);
  fft::write_flow_file(dir / fft::flow_file_name(3, 2), f);

  std::map<std::int64_t, std::vector<Detection>> dets;
  dets[3] = {Detection(BBox(0, 0, 5, 5), 0.9)};
  auto bundle = fft::load_frame_bundle(dir, 3, 8, dets);
  EXPECT_EQ(bundle.frame, 3);
  EXPECT_TRUE(bundle.flow_prev.has_value());
  EXPECT_EQ(bundle.lookback_flows.size(), 1u);
  EXPECT_TRUE(bundle.lookback_flows.count(2));
  ASSERT_EQ(bundle.detections.size(), 1u);

  auto bare = fft::load_frame_bundle(dir, 1, 8, dets);
  EXPECT_FALSE(bare.flow_prev.has_value());
  EXPECT_TRUE(bare.detections.empty());
  fs::remove_all(dir);
}

TEST(SeqInfo, ParsesStandardIni) {
  const char* text =
      "[Sequence]\n"
      "name=MOT17-04\n"
      "imDir=img1\n"
      "frameRate=30\n"
      "seqLength=1050\n"
      "imWidth=1920\n"
      "imHeight=1080\n"
      "imExt=.jpg\n";
  auto info = fft::parse_seqinfo(text);
  EXPECT_EQ(info.name, "MOT17-04");
  EXPECT_EQ(info.width, 1920);
  EXPECT_EQ(info.height, 1080);
  EXPECT_EQ(info.frame_rate, 30.0);
  EXPECT_EQ(info.seq_length, 1050);
}

TEST(SeqInfo, RejectsMissingOrNonPositiveFields) {
  EXPECT_THROW(fft::parse_seqinfo("name=x\nimWidth=10\n"), ParseError);
  EXPECT_THROW(
      fft::parse_seqinfo(
          "imWidth=0\nimHeight=10\nframeRate=30\nseqLength=5\n"),
      ParseError);
}

TEST(PipelineConfigText, AppliesKnownKeysAndComments) {
  auto cfg = fft::parse_pipeline_config(
      "# tracker settings\n"
      "thresh_score = 0.4\n"
      "thresh_iou = 0.6   # inline comment\n"
      "bt_frames = 10\n"
      "scale_mode = none\n"
      "min_pixels = 4\n"
      "inner_margin_ratio = 0.2\n");
  EXPECT_EQ(cfg.fuse.thresh_score, 0.4);
  EXPECT_EQ(cfg.fuse.thresh_iou, 0.6);
  EXPECT_EQ(cfg.fuse.thresh_nms, 0.5);
  EXPECT_EQ(cfg.bt_frames, 10);
  EXPECT_EQ(cfg.motion.scale_mode, fft::ScaleMode::none);
  EXPECT_EQ(cfg.motion.min_pixels, 4);
  EXPECT_EQ(cfg.motion.inner_margin_ratio, 0.2);
}

TEST(PipelineConfigText, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(fft::parse_pipeline_config("verbosity = 3\n"), ParseError);
  EXPECT_THROW(fft::parse_pipeline_config("scale_mode = fancy\n"), ParseError);
  EXPECT_THROW(fft::parse_pipeline_config("thresh_score = 1.5\n"),
               std::invalid_argument);
  EXPECT_THROW(fft::parse_pipeline_config("min_pixels = 0\n"), ParseError);
}

TEST(ResolveConfig, OverridesBeatFileBeatsDefault) {
  std::mt19937_64 rng(66);
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> pct(0, 100);
  for (int rep = 0; rep < 200; ++rep) {
    const fft::PipelineConfig defaults;
    std::optional<std::string> file_text;
    double file_score = pct(rng) / 100.0;
    double file_iou = pct(rng) / 100.0;
    bool has_file = coin(rng) == 1;
    bool file_has_iou = coin(rng) == 1;
    if (has_file) {
      std::string text = "thresh_score = " + std::to_string(file_score) + "\n";
      if (file_has_iou)
        text += "thresh_iou = " + std::to_string(file_iou) + "\n";
      file_text = text;
    }
    fft::ConfigOverrides ov;
    double flag_score = pct(rng) / 100.0;
    bool has_flag = coin(rng) == 1;
    if (has_flag) ov.thresh_score = flag_score;

    auto cfg = fft::resolve_pipeline_config(file_text, ov);
    double want_score = has_flag ? flag_score
                        : has_file ? std::stod(std::to_string(file_score))
                                   : defaults.fuse.thresh_score;
    EXPECT_DOUBLE_EQ(cfg.fuse.thresh_score, want_score);
    double want_iou = (has_file && file_has_iou)
                          ? std::stod(std::to_string(file_iou))
                          : defaults.fuse.thresh_iou;
    EXPECT_DOUBLE_EQ(cfg.fuse.thresh_iou, want_iou);
    EXPECT_EQ(cfg.fuse.thresh_nms, defaults.fuse.thresh_nms);
  }
}

TEST(TextFiles, MissingFileThrows) {
  EXPECT_THROW(fft::read_text_file("/nonexistent/fft/file.txt"),
               std::runtime_error);
  EXPECT_THROW(fft::read_flow_file("/nonexistent/fft/file.flo"),
               std::runtime_error);
}
