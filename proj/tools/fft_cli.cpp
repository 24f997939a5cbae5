// fft: flow-fuse tracking, evaluation and synthetic-sequence tooling.
//
// Subcommands: track, eval, synth, ablate-bt, render. Set FFT_LOG=0|1|2
// (quiet|info|debug) to control stderr verbosity.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "fft/error.hpp"
#include "fft/metrics.hpp"
#include "fft/mot_io.hpp"
#include "fft/pipeline.hpp"
#include "fft/render.hpp"
#include "fft/synth.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitError = 2;
constexpr int kExitMissingFlow = 3;

int log_level() {
  static const int level = [] {
    const char* env = std::getenv("FFT_LOG");
    if (!env) return 1;
    const std::string v(env);
    if (v == "0" || v == "quiet") return 0;
    if (v == "2" || v == "debug") return 2;
    return 1;
  }();
  return level;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::fprintf(stderr, "[fft] %s\n", msg.c_str());
}

void log_debug(const std::string& msg) {
  if (log_level() >= 2) std::fprintf(stderr, "[fft] %s\n", msg.c_str());
}

struct PipelineOpts {
  double thresh_score = 0.5;
  double thresh_iou = 0.5;
  double thresh_nms = 0.5;
  int bt_frames = 30;
  std::string refiner = "identity";
  std::string config_path;
  CLI::Option* thresh_score_opt = nullptr;
  CLI::Option* thresh_iou_opt = nullptr;
  CLI::Option* thresh_nms_opt = nullptr;
  CLI::Option* bt_frames_opt = nullptr;
};

void add_pipeline_options(CLI::App* cmd, PipelineOpts& o) {
  o.thresh_score_opt =
      cmd->add_option("--thresh-score", o.thresh_score, "Kill proposals scoring below this");
  o.thresh_iou_opt = cmd->add_option("--thresh-iou", o.thresh_iou, "IoU needed to match a detection");
  o.thresh_nms_opt = cmd->add_option("--thresh-nms", o.thresh_nms, "NMS suppression threshold");
  o.bt_frames_opt = cmd->add_option("--bt-frames", o.bt_frames, "Maximum backtracking depth");
  cmd->add_option("--refiner", o.refiner, "identity, overlap, or file:<path>");
  cmd->add_option("--config", o.config_path, "Key-value pipeline config file");
}

fft::ConfigOverrides overrides_from(const PipelineOpts& o) {
  fft::ConfigOverrides ov;
  if (o.thresh_score_opt && o.thresh_score_opt->count()) ov.thresh_score = o.thresh_score;
  if (o.thresh_iou_opt && o.thresh_iou_opt->count()) ov.thresh_iou = o.thresh_iou;
  if (o.thresh_nms_opt && o.thresh_nms_opt->count()) ov.thresh_nms = o.thresh_nms;
  if (o.bt_frames_opt && o.bt_frames_opt->count()) ov.bt_frames = o.bt_frames;
  return ov;
}

fft::PipelineConfig resolve_config(const PipelineOpts& o) {
  std::optional<std::string> config_text;
  if (!o.config_path.empty()) config_text = fft::read_text_file(o.config_path);
  return fft::resolve_pipeline_config(config_text, overrides_from(o));
}

// Frame-rate policy for the backtracking depth; applies only when neither
// flag nor config file pinned bt_frames.
int bt_frames_for_fps(double fps) {
  if (fps < 7.0) return 3;
  if (fps < 14.0) return 10;
  return 30;
}

std::unique_ptr<fft::Refiner> make_refiner(
    const std::string& selection,
    const std::map<std::int64_t, std::vector<fft::Detection>>& detections) {
  if (selection == "identity") return std::make_unique<fft::IdentityRefiner>();
  if (selection == "overlap") return std::make_unique<fft::OverlapRefiner>(detections);
  if (selection.rfind("file:", 0) == 0) {
    const std::string path = selection.substr(5);
    return std::make_unique<fft::FileRefiner>(fft::parse_refiner_csv(fft::read_text_file(path)));
  }
  throw std::runtime_error("unknown refiner '" + selection +
                           "' (expected identity, overlap, or file:<path>)");
}

std::string describe_config(const fft::PipelineConfig& cfg, const std::string& refiner) {
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "config: thresh_score=%g thresh_iou=%g thresh_nms=%g bt_frames=%d refiner=%s",
                cfg.fuse.thresh_score, cfg.fuse.thresh_iou, cfg.fuse.thresh_nms, cfg.bt_frames,
                refiner.c_str());
  return buf;
}

void log_frame_counts(const fft::TrajectorySet& set) {
  if (log_level() < 2 || set.empty()) return;
  const auto [first, last] = set.frame_span();
  for (std::int64_t t = first; t <= last; ++t)
    log_debug("frame " + std::to_string(t) + ": " +
              std::to_string(set.targets_at(t).size()) + " targets");
}

fs::path derive_gt_path(const fs::path& out) {
  fs::path gt = out;
  const std::string ext = gt.extension().string();
  gt.replace_extension();
  gt += ".gt";
  gt += ext;
  return gt;
}

struct TrackArgs {
  std::string synth_spec;
  std::string det_path;
  std::string flow_dir;
  std::string seqinfo_path;
  std::string out_path;
  std::string gt_out;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  PipelineOpts pipeline;
};

fft::TrajectorySet track_synth(const fft::SynthSpec& spec, const fft::SynthTruth& truth,
                               const std::string& refiner_sel, const fft::PipelineConfig& cfg) {
  auto refiner = make_refiner(refiner_sel, truth.detections);
  return fft::run(
      spec.frames, [&spec, &truth](std::int64_t t) { return fft::make_bundle(spec, truth, t); },
      *refiner, cfg);
}

int cmd_track(const TrackArgs& a) {
  const auto started = std::chrono::steady_clock::now();
  fft::PipelineConfig cfg;
  fft::TrajectorySet result;

  if (!a.synth_spec.empty()) {
    fft::SynthSpec spec = fft::parse_synth_spec(fft::read_text_file(a.synth_spec));
    if (a.seed_opt && a.seed_opt->count()) spec.seed = a.seed;
    cfg = resolve_config(a.pipeline);
    log_info(describe_config(cfg, a.pipeline.refiner));
    const fft::SynthTruth truth = fft::generate_truth(spec);
    result = track_synth(spec, truth, a.pipeline.refiner, cfg);
    const fs::path gt_path = a.gt_out.empty() ? derive_gt_path(a.out_path) : fs::path(a.gt_out);
    fft::write_text_file(gt_path, fft::write_ground_truth(truth.gt));
    log_info("ground truth written to " + gt_path.string());
  } else {
    if (a.det_path.empty()) throw std::runtime_error("track needs --synth-spec or --det");
    const fft::DetectionData dets = fft::parse_detections(fft::read_text_file(a.det_path));
    if (dets.normalized)
      log_info("detection scores min-max normalized from [" + std::to_string(dets.raw_min) + ", " +
               std::to_string(dets.raw_max) + "] to [0, 1]");

    std::optional<fft::SeqInfo> seqinfo;
    if (!a.seqinfo_path.empty())
      seqinfo = fft::parse_seqinfo(fft::read_text_file(a.seqinfo_path));

    std::optional<std::string> config_text;
    if (!a.pipeline.config_path.empty())
      config_text = fft::read_text_file(a.pipeline.config_path);
    fft::ConfigOverrides ov = overrides_from(a.pipeline);
    if (!ov.bt_frames && seqinfo) ov.bt_frames = bt_frames_for_fps(seqinfo->frame_rate);
    cfg = fft::resolve_pipeline_config(config_text, ov);
    log_info(describe_config(cfg, a.pipeline.refiner));

    std::int64_t frame_count = 0;
    if (seqinfo) {
      frame_count = seqinfo->seq_length;
    } else {
      for (const auto& [frame, list] : dets.by_frame) frame_count = std::max(frame_count, frame + 1);
    }
    if (a.flow_dir.empty()) throw fft::MissingFlowError(1);

    auto refiner = make_refiner(a.pipeline.refiner, dets.by_frame);
    const fs::path flow_dir(a.flow_dir);
    result = fft::run(
        frame_count,
        [&flow_dir, &cfg, &dets](std::int64_t t) {
          return fft::load_frame_bundle(flow_dir, t, cfg.bt_frames, dets.by_frame);
        },
        *refiner, cfg);
  }

  fft::write_text_file(a.out_path, fft::write_results(result));
  log_frame_counts(result);
  const auto elapsed =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
  log_info("tracked " + std::to_string(result.size()) + " trajectories, " +
           std::to_string(result.total_entries()) + " boxes in " + std::to_string(elapsed.count()) +
           " ms -> " + a.out_path);
  return 0;
}

struct EvalArgs {
  std::string res_path;
  std::string gt_path;
  std::string out_path;
  std::string name;
  double iou_thresh = 0.5;
};

int cmd_eval(const EvalArgs& a) {
  const fft::TrajectorySet pred = fft::parse_results(fft::read_text_file(a.res_path));
  const fft::TrajectorySet gt = fft::parse_ground_truth(fft::read_text_file(a.gt_path));
  const fft::MotReport report = fft::evaluate(gt, pred, a.iou_thresh);
  const std::string name = a.name.empty() ? fs::path(a.res_path).stem().string() : a.name;
  const std::string table = fft::format_report_table({{name, report}});
  std::fputs(table.c_str(), stdout);
  if (!a.out_path.empty()) fft::write_text_file(a.out_path, table);
  return 0;
}

struct SynthArgs {
  std::string spec_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
};

int cmd_synth(const SynthArgs& a) {
  fft::SynthSpec spec = fft::parse_synth_spec(fft::read_text_file(a.spec_path));
  if (a.seed_opt && a.seed_opt->count()) spec.seed = a.seed;
  const fft::SynthTruth truth = fft::generate_truth(spec);

  const fs::path dir(a.out_dir);
  fs::create_directories(dir / "flow");
  fft::write_text_file(dir / "det.txt", fft::write_detections(truth.detections));
  fft::write_text_file(dir / "gt.txt", fft::write_ground_truth(truth.gt));
  char seqinfo[256];
  std::snprintf(seqinfo, sizeof(seqinfo),
                "[Sequence]\nname=%s\nimWidth=%d\nimHeight=%d\nframeRate=30\nseqLength=%lld\n",
                spec.name.c_str(), spec.width, spec.height,
                static_cast<long long>(spec.frames));
  fft::write_text_file(dir / "seqinfo.ini", seqinfo);

  std::int64_t flow_files = 0;
  for (std::int64_t t = 1; t < spec.frames; ++t) {
    fft::write_flow_file(dir / "flow" / fft::flow_file_name(t, 1), fft::make_flow(spec, t, 1));
    ++flow_files;
    for (int d = 2; d <= spec.max_lookback && t - d >= 0; ++d) {
      fft::write_flow_file(dir / "flow" / fft::flow_file_name(t, d), fft::make_flow(spec, t, d));
      ++flow_files;
    }
  }
  log_info("synth '" + spec.name + "': " + std::to_string(spec.frames) + " frames, " +
           std::to_string(spec.targets.size()) + " targets, " + std::to_string(flow_files) +
           " flow files -> " + a.out_dir);
  return 0;
}

struct AblateArgs {
  std::vector<std::string> spec_paths;
  std::string out_dir;
  std::string bt_list = "1,10,20,30";
  PipelineOpts pipeline;
};

int cmd_ablate_bt(const AblateArgs& a) {
  std::vector<int> bt_values;
  for (const std::string_view part : fft::detail::split(a.bt_list, ','))
    bt_values.push_back(static_cast<int>(fft::detail::parse_int(part, 1, "bt value")));
  if (bt_values.empty()) throw std::runtime_error("--bt-list is empty");

  struct Sequence {
    fft::SynthSpec spec;
    fft::SynthTruth truth;
  };
  std::vector<Sequence> sequences;
  for (const std::string& path : a.spec_paths) {
    Sequence s;
    s.spec = fft::parse_synth_spec(fft::read_text_file(path));
    s.truth = fft::generate_truth(s.spec);
    sequences.push_back(std::move(s));
  }

  const fs::path dir(a.out_dir);
  fs::create_directories(dir);

  std::string grid = "BT\tMOTA\tMOTP\tIDF1\tIDP\tIDR\tMT\tML\tFP\tFN\tIDSW\tFrag\n";
  for (const int bt : bt_values) {
    PipelineOpts opts = a.pipeline;
    fft::ConfigOverrides ov = overrides_from(opts);
    ov.bt_frames = bt;
    std::optional<std::string> config_text;
    if (!opts.config_path.empty()) config_text = fft::read_text_file(opts.config_path);
    const fft::PipelineConfig cfg = fft::resolve_pipeline_config(config_text, ov);

    std::vector<fft::MotReport> reports;
    for (const Sequence& s : sequences) {
      const fft::TrajectorySet result = track_synth(s.spec, s.truth, opts.refiner, cfg);
      fft::write_text_file(dir / (s.spec.name + "_bt" + std::to_string(bt) + ".txt"),
                           fft::write_results(result));
      reports.push_back(fft::evaluate(s.truth.gt, result));
    }
    const fft::MotReport total = fft::aggregate(reports);
    const std::string row = fft::format_report_table({{std::to_string(bt), total}});
    grid += row.substr(row.find('\n') + 1);
    log_info("bt=" + std::to_string(bt) + " done (" + std::to_string(sequences.size()) +
             " sequences)");
  }

  std::fputs(grid.c_str(), stdout);
  fft::write_text_file(dir / "ablate_bt.tsv", grid);
  return 0;
}

struct RenderArgs {
  std::string res_path;
  std::string out_dir;
  int width = 0;
  int height = 0;
  std::int64_t frames = 0;
  CLI::Option* frames_opt = nullptr;
};

int cmd_render(const RenderArgs& a) {
  const fft::TrajectorySet set = fft::parse_results(fft::read_text_file(a.res_path));
  std::int64_t first = 0, last = -1;
  if (!set.empty()) std::tie(first, last) = set.frame_span();
  if (a.frames_opt && a.frames_opt->count()) {
    first = 0;
    last = a.frames - 1;
  }

  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  std::int64_t written = 0;
  for (std::int64_t t = first; t <= last; ++t) {
    const std::vector<fft::Target> targets = set.targets_at(t);
    const fft::Image img = fft::render_frame(a.width, a.height, targets);
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%06lld.ppm", static_cast<long long>(t + 1));
    fft::write_text_file(dir / name, fft::encode_ppm(img));
    ++written;
  }
  log_info("rendered " + std::to_string(written) + " frames -> " + a.out_dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flow-fuse multi-object tracker and evaluation toolkit"};
  app.require_subcommand(1);

  TrackArgs track;
  CLI::App* track_cmd = app.add_subcommand("track", "Run the tracker over a sequence");
  track_cmd->add_option("--synth-spec", track.synth_spec, "Synthetic sequence spec file");
  track_cmd->add_option("--det", track.det_path, "MOT detection file");
  track_cmd->add_option("--flow-dir", track.flow_dir, "Directory of <t>_<t-d>.flo files");
  track_cmd->add_option("--seqinfo", track.seqinfo_path, "seqinfo.ini (enables the FPS BT policy)");
  track_cmd->add_option("--out", track.out_path, "Results file to write")->required();
  track_cmd->add_option("--gt-out", track.gt_out, "Ground-truth sidecar (synth mode)");
  track.seed_opt = track_cmd->add_option("--seed", track.seed, "Override the synth spec seed");
  add_pipeline_options(track_cmd, track.pipeline);

  EvalArgs eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Score results against ground truth");
  eval_cmd->add_option("--res", eval.res_path, "Results file")->required();
  eval_cmd->add_option("--gt", eval.gt_path, "Ground-truth file")->required();
  eval_cmd->add_option("--out", eval.out_path, "Write the metrics table here too");
  eval_cmd->add_option("--name", eval.name, "Row label (default: results file stem)");
  eval_cmd->add_option("--iou-thresh", eval.iou_thresh, "Match threshold");

  SynthArgs synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Materialize a synthetic sequence to disk");
  synth_cmd->add_option("--spec", synth.spec_path, "Synthetic sequence spec file")->required();
  synth_cmd->add_option("--out-dir", synth.out_dir, "Output directory")->required();
  synth.seed_opt = synth_cmd->add_option("--seed", synth.seed, "Override the spec seed");

  AblateArgs ablate;
  CLI::App* ablate_cmd = app.add_subcommand("ablate-bt", "Track + eval over a bt_frames grid");
  ablate_cmd->add_option("--synth-spec", ablate.spec_paths, "Spec file (repeatable)")->required();
  ablate_cmd->add_option("--out-dir", ablate.out_dir, "Output directory")->required();
  ablate_cmd->add_option("--bt-list", ablate.bt_list, "Comma-separated bt_frames values");
  add_pipeline_options(ablate_cmd, ablate.pipeline);

  RenderArgs render;
  CLI::App* render_cmd = app.add_subcommand("render", "Draw per-frame box overlays");
  render_cmd->add_option("--res", render.res_path, "Results file")->required();
  render_cmd->add_option("--out-dir", render.out_dir, "Output directory")->required();
  render_cmd->add_option("--width", render.width, "Frame width")->required();
  render_cmd->add_option("--height", render.height, "Frame height")->required();
  render.frames_opt = render_cmd->add_option("--frames", render.frames, "Render frames 1..N");

  CLI11_PARSE(app, argc, argv);

  try {
    if (track_cmd->parsed()) return cmd_track(track);
    if (eval_cmd->parsed()) return cmd_eval(eval);
    if (synth_cmd->parsed()) return cmd_synth(synth);
    if (ablate_cmd->parsed()) return cmd_ablate_bt(ablate);
    if (render_cmd->parsed()) return cmd_render(render);
  } catch (const fft::MissingFlowError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitMissingFlow;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
  return 0;
}
