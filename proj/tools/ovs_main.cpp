#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <thread>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ovs/config.hpp"
#include "ovs/io.hpp"
#include "ovs/metrics.hpp"
#include "ovs/pipeline.hpp"
#include "ovs/synth.hpp"

namespace fs = std::filesystem;
using namespace ovs;

namespace {

struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

// OVS_THREADS caps the worker count (0 = auto). The current pipeline runs a
// single worker, so the cap is validated and recorded but never exceeded.
int resolve_threads() {
  const char* env = std::getenv("OVS_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 0) throw UsageError("OVS_THREADS must be a non-negative integer");
  return v == 0 ? static_cast<int>(std::max(1u, std::thread::hardware_concurrency()))
                : static_cast<int>(v);
}

std::vector<std::string> list_sorted(const std::string& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw UsageError("input directory not found: " + dir);
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) names.push_back(e.path().string());
  std::sort(names.begin(), names.end());
  return names;
}

std::vector<Image> load_frames(const std::string& dir) {
  std::vector<Image> frames;
  for (const auto& p : list_sorted(dir, ".png")) frames.push_back(read_png(p));
  if (frames.empty()) throw UsageError("no .png frames in " + dir);
  for (const Image& f : frames)
    if (!f.same_dims(frames[0])) throw UsageError("frames differ in size in " + dir);
  return frames;
}

std::string index_name(const char* stem, int i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%06d%s", stem, i, ext);
  return buf;
}

std::unique_ptr<FlowEstimator> make_estimator(const std::string& spec) {
  if (spec == "baseline") return std::make_unique<BaselineFlowEstimator>();
  if (spec == "consistent") return std::make_unique<ConsistentFlowEstimator>();
  if (spec.rfind("files:", 0) == 0) return std::make_unique<FileFlowEstimator>(spec.substr(6));
  throw UsageError("unknown flow estimator: " + spec +
                   " (expected consistent|baseline|files:<dir>)");
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
}

std::string report_header(const Config& cfg, int threads) {
  std::ostringstream s;
  s << "# effective configuration\n" << dump_config(cfg) << "threads = " << threads << "\n\n";
  return s.str();
}

// Minimal SVG line plot of (x, y) samples.
std::string svg_line_plot(const std::vector<double>& xs, const std::vector<double>& ys,
                          const std::string& xlabel, const std::string& ylabel) {
  const int w = 480, h = 320, m = 48;
  double x0 = xs.front(), x1 = xs.back();
  double y0 = *std::min_element(ys.begin(), ys.end());
  double y1 = *std::max_element(ys.begin(), ys.end());
  if (x1 - x0 < 1e-12) x1 = x0 + 1;
  if (y1 - y0 < 1e-12) y1 = y0 + 1;
  auto px = [&](double x) { return m + (x - x0) / (x1 - x0) * (w - 2 * m); };
  auto py = [&](double y) { return h - m - (y - y0) / (y1 - y0) * (h - 2 * m); };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
    << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<line x1=\"" << m << "\" y1=\"" << h - m << "\" x2=\"" << w - m << "\" y2=\"" << h - m
    << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << m << "\" y1=\"" << m << "\" x2=\"" << m << "\" y2=\"" << h - m
    << "\" stroke=\"black\"/>\n<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
  for (size_t i = 0; i < xs.size(); ++i) s << px(xs[i]) << "," << py(ys[i]) << " ";
  s << "\"/>\n";
  for (size_t i = 0; i < xs.size(); ++i)
    s << "<circle cx=\"" << px(xs[i]) << "\" cy=\"" << py(ys[i])
      << "\" r=\"3\" fill=\"steelblue\"/>\n";
  s << "<text x=\"" << w / 2 << "\" y=\"" << h - 12 << "\" text-anchor=\"middle\">" << xlabel
    << "</text>\n<text x=\"14\" y=\"" << h / 2 << "\" transform=\"rotate(-90 14 " << h / 2
    << ")\" text-anchor=\"middle\">" << ylabel << "</text>\n</svg>\n";
  return s.str();
}

struct CommonArgs {
  std::string config_path;
  std::string flow = "consistent";
  Config cfg;
  int threads = 1;

  void finalize() {
    if (!config_path.empty()) cfg = load_config(config_path);
    threads = resolve_threads();
  }
};

int cmd_expand(const std::string& input, const std::string& out_dir, int iterations,
               const std::string& mode_str, CommonArgs& common) {
  common.finalize();
  Config cfg = common.cfg;
  if (iterations >= 0) cfg.iterations = iterations;
  const ExpandMode mode = expand_mode_from_string(mode_str);
  const auto frames = load_frames(input);
  const auto estimator = make_estimator(common.flow);
  ExpandParams params = expand_params_from(cfg);
  if (params.pad < 0) params.pad = default_pad(frames[0].width);

  const auto canvases = expand_sequence(frames, cfg.iterations, mode, *estimator, params);
  fs::create_directories(out_dir);
  for (size_t i = 0; i < canvases.size(); ++i) {
    write_png(out_dir + "/" + index_name("canvas", static_cast<int>(i), ".png"),
              canvases[i].color);
    write_pgm(out_dir + "/" + index_name("mask", static_cast<int>(i), ".pgm"),
              canvases[i].mask);
  }
  std::ostringstream rep;
  rep << report_header(cfg, common.threads) << "mode = " << mode_str << "\n"
      << "flow = " << estimator->name() << "\nframes = " << frames.size() << "\n";
  for (size_t i = 0; i < canvases.size(); ++i)
    rep << "valid_area_" << i << " = " << static_cast<long>(mask_area(canvases[i].mask)) << "\n";
  write_text(out_dir + "/report.txt", rep.str());
  return 0;
}

int cmd_stabilize(const std::string& input, const std::string& out_dir, const std::string& ovs_on,
                  int iterations, const std::string& fill_str, int window, CommonArgs& common) {
  common.finalize();
  Config cfg = common.cfg;
  if (iterations >= 0) cfg.iterations = iterations;
  if (window > 0) cfg.window = window;
  if (!fill_str.empty()) cfg.fill = fill_str;
  if (cfg.fill != "none" && cfg.fill != "nearest") throw UsageError("fill must be none|nearest");
  if (ovs_on != "on" && ovs_on != "off") throw UsageError("--ovs must be on|off");

  const auto frames = load_frames(input);
  ExpandParams params = expand_params_from(cfg);
  if (params.pad < 0) params.pad = default_pad(frames[0].width);

  std::vector<Canvas> sources;
  if (ovs_on == "on") {
    const auto estimator = make_estimator(common.flow);
    sources = expand_sequence(frames, cfg.iterations, ExpandMode::Full, *estimator, params);
  } else {
    for (const Image& f : frames) sources.push_back(pad_frame(f, params.pad));
  }
  const HoleFill fill = cfg.fill == "nearest" ? HoleFill::Nearest : HoleFill::None;
  const StabilizeOutput out = stabilize_pipeline(frames, sources, cfg.window, fill,
                                                 cfg.grid_size, cfg.max_keypoints, cfg.seed);
  fs::create_directories(out_dir);
  for (size_t i = 0; i < out.frames.size(); ++i)
    write_png(out_dir + "/" + index_name("frame", static_cast<int>(i), ".png"), out.frames[i]);

  std::ostringstream rep;
  rep << report_header(cfg, common.threads) << "ovs = " << ovs_on << "\nfill = " << cfg.fill
      << "\nframes = " << frames.size() << "\nhole_pixels = " << out.hole_pixels
      << "\ncrop_rect = " << out.crop_rect.x << " " << out.crop_rect.y << " " << out.crop_rect.w
      << " " << out.crop_rect.h << "\n";
  write_text(out_dir + "/report.txt", rep.str());
  return 0;
}

int cmd_eval(const std::string& input, const std::string& output, const std::string& report,
             const std::string& gt_dir, CommonArgs& common) {
  common.finalize();
  const auto in_frames = load_frames(input);
  const auto out_frames = load_frames(output);
  if (in_frames.size() != out_frames.size())
    throw UsageError("input and output frame counts differ");

  std::ostringstream rep;
  rep << report_header(common.cfg, common.threads);
  rep << "cropping = " << cropping_ratio(in_frames, out_frames) << "\n";
  rep << "distortion = " << distortion(in_frames, out_frames) << "\n";
  if (out_frames.size() >= 32)
    rep << "stability = " << stability(out_frames) << "\n";
  else
    rep << "stability = n/a (needs >= 32 frames)\n";

  rep << "per_frame_cropping =";
  for (size_t i = 0; i < in_frames.size(); ++i) {
    const auto h = detail::frame_homography(in_frames[i], out_frames[i]);
    if (!h) {
      rep << " n/a";
      continue;
    }
    const double det = (*h)(0, 0) * (*h)(1, 1) - (*h)(0, 1) * (*h)(1, 0);
    const double s = std::sqrt(std::abs(det));
    rep << " " << std::clamp(s > 1e-12 ? 1.0 / s : 2.0, 1e-9, 2.0);
  }
  rep << "\nper_frame_distortion =";
  for (size_t i = 0; i < in_frames.size(); ++i) {
    const auto h = detail::frame_homography(in_frames[i], out_frames[i]);
    if (!h) {
      rep << " n/a";
      continue;
    }
    double s1, s2;
    detail::affine_singular_values(*h, s1, s2);
    rep << " " << (s1 > 1e-12 ? s2 / s1 : 0.0);
  }
  rep << "\n";

  if (!gt_dir.empty()) {
    const auto gt_frames = load_frames(gt_dir);
    if (gt_frames.size() != out_frames.size()) throw UsageError("gt frame count differs");
    const Mask full = make_mask(out_frames[0].width, out_frames[0].height, 1.f);
    double p = 0, s = 0;
    LossReport losses;
    for (size_t i = 0; i < out_frames.size(); ++i) {
      p += psnr(out_frames[i], gt_frames[i], full);
      s += ssim(out_frames[i], gt_frames[i], full);
      const LossReport li = eval_losses(out_frames[i], sobel_edges(out_frames[i]), full,
                                        gt_frames[i], sobel_edges(gt_frames[i]), full);
      losses.l_image += li.l_image;
      losses.l_edge += li.l_edge;
      losses.l_mask += li.l_mask;
    }
    const double n = static_cast<double>(out_frames.size());
    rep << "psnr = " << p / n << "\nssim = " << s / n << "\nL_I = " << losses.l_image / n
        << "\nL_G = " << losses.l_edge / n << "\nL_M = " << losses.l_mask / n
        << "\nL_combined = " << (losses.l_image + 2 * losses.l_edge + 2 * losses.l_mask) / n
        << "\n";
  }
  write_text(report, rep.str());
  return 0;
}

int cmd_synth(const std::string& panorama_path, const std::string& out_dir, bool emit_gt,
              int width, int height, CommonArgs& common) {
  common.finalize();
  const Image panorama = read_png(panorama_path);
  const JitterVideo video = render_jitter_video(panorama, common.cfg.jitter, width, height);
  fs::create_directories(out_dir);
  std::ostringstream traj;
  traj << report_header(common.cfg, common.threads) << "n_frames = " << video.frames.size()
       << "\n";
  for (size_t i = 0; i < video.frames.size(); ++i) {
    write_png(out_dir + "/" + index_name("frame", static_cast<int>(i), ".png"), video.frames[i]);
    if (emit_gt)
      write_png(out_dir + "/" + index_name("gt", static_cast<int>(i), ".png"),
                video.gt[i].color);
    traj << "pose_" << i << " = " << video.poses[i].cx << " " << video.poses[i].cy << " "
         << video.poses[i].angle << "\n";
  }
  write_text(out_dir + "/trajectory.txt", traj.str());
  return 0;
}

int cmd_ablate(const std::string& input, const std::string& out_dir, CommonArgs& common) {
  common.finalize();
  Config cfg = common.cfg;
  const auto frames = load_frames(input);
  const auto estimator = make_estimator(common.flow);
  ExpandParams params = expand_params_from(cfg);
  if (params.pad < 0) params.pad = default_pad(frames[0].width);
  const HoleFill fill = HoleFill::None;

  std::vector<Canvas> padded;
  for (const Image& f : frames) padded.push_back(pad_frame(f, params.pad));

  auto eval_sources = [&](const std::vector<Canvas>& sources, std::ostringstream& rep,
                          const std::string& row) -> double {
    const StabilizeOutput out =
        stabilize_pipeline(frames, sources, cfg.window, fill, cfg.grid_size, cfg.max_keypoints,
                           cfg.seed);
    const double cr = cropping_ratio(frames, out.frames);
    const double dist = distortion(frames, out.frames);
    rep << row << ": cropping = " << cr << ", distortion = " << dist << ", stability = ";
    if (out.frames.size() >= 32)
      rep << stability(out.frames);
    else
      rep << "n/a";
    rep << ", hole_pixels = " << out.hole_pixels << "\n";
    return cr;
  };

  std::ostringstream rep;
  rep << report_header(cfg, common.threads);
  rep << "# mode matrix (iterations = " << cfg.iterations << ")\n";

  // Iteration sweep on the full mode, snapshotting the mode-matrix row too.
  const std::vector<int> sweep = {0, 5, 10, 15};
  std::vector<Canvas> full_at_default;
  std::vector<std::pair<int, double>> sweep_rows;
  std::ostringstream sweep_text;
  expand_sequence(frames, 15, ExpandMode::Full, *estimator, params,
                  [&](int k, const std::vector<Canvas>& canvases) {
                    if (k == cfg.iterations) full_at_default = canvases;
                    if (std::find(sweep.begin(), sweep.end(), k) == sweep.end()) return;
                    const double cr = eval_sources(canvases, sweep_text,
                                                   "iterations_" + std::to_string(k));
                    sweep_rows.emplace_back(k, cr);
                  });

  eval_sources(padded, rep, "baseline");
  eval_sources(expand_sequence(frames, cfg.iterations, ExpandMode::CoarseOnly, *estimator, params),
               rep, "coarse_only");
  eval_sources(expand_sequence(frames, cfg.iterations, ExpandMode::FineOnly, *estimator, params),
               rep, "fine_only");
  if (full_at_default.empty())
    full_at_default =
        expand_sequence(frames, cfg.iterations, ExpandMode::Full, *estimator, params);
  eval_sources(full_at_default, rep, "full");

  rep << "# iteration sweep (full mode)\n" << sweep_text.str();

  fs::create_directories(out_dir);
  write_text(out_dir + "/report.txt", rep.str());

  std::vector<double> xs, ys;
  for (const auto& [k, cr] : sweep_rows) {
    xs.push_back(k);
    ys.push_back(cr);
  }
  write_text(out_dir + "/cropping_vs_iterations.svg",
             svg_line_plot(xs, ys, "iterations", "cropping ratio"));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"out-of-boundary view synthesis video stabilization toolkit"};
  app.require_subcommand(1);
  CommonArgs common;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "config file (key = value with [sections])");
    sub->add_option("--flow", common.flow, "flow estimator: consistent|baseline|files:<dir>");
  };

  std::string input, out_dir, output, report_path, gt_dir, panorama;
  std::string mode = "full", ovs_on = "on", fill_str;
  int iterations = -1, window = 0, synth_w = 640, synth_h = 480;
  bool emit_gt = false;

  auto* expand = app.add_subcommand("expand", "expand frame canvases from neighbors");
  expand->add_option("--input", input)->required();
  expand->add_option("--out", out_dir)->required();
  expand->add_option("--iterations", iterations);
  expand->add_option("--mode", mode)->check(CLI::IsMember({"full", "coarse", "fine"}));
  add_common(expand);

  auto* stab = app.add_subcommand("stabilize", "stabilize a frame sequence");
  stab->add_option("--input", input)->required();
  stab->add_option("--out", out_dir)->required();
  stab->add_option("--ovs", ovs_on)->check(CLI::IsMember({"on", "off"}));
  stab->add_option("--iterations", iterations);
  stab->add_option("--fill", fill_str)->check(CLI::IsMember({"none", "nearest"}));
  stab->add_option("--window", window);
  add_common(stab);

  auto* eval = app.add_subcommand("eval", "evaluate stabilization metrics");
  eval->add_option("--input", input)->required();
  eval->add_option("--output", output)->required();
  eval->add_option("--report", report_path)->required();
  eval->add_option("--gt", gt_dir);
  add_common(eval);

  auto* synth = app.add_subcommand("synth", "render a synthetic jitter video");
  synth->add_option("--panorama", panorama)->required();
  synth->add_option("--out", out_dir)->required();
  synth->add_option("--frames", common.cfg.jitter.n_frames);
  synth->add_option("--amplitude", common.cfg.jitter.smooth_amplitude);
  synth->add_option("--period", common.cfg.jitter.smooth_period);
  synth->add_option("--jitter", common.cfg.jitter.jitter_sigma);
  synth->add_option("--rotation", common.cfg.jitter.rotation_sigma);
  synth->add_option("--seed", common.cfg.jitter.seed);
  synth->add_option("--width", synth_w);
  synth->add_option("--height", synth_h);
  synth->add_flag("--emit-gt", emit_gt);
  add_common(synth);

  auto* ablate = app.add_subcommand("ablate", "mode matrix and iteration sweep");
  ablate->add_option("--input", input)->required();
  ablate->add_option("--out", out_dir)->required();
  ablate->add_option("--iterations", iterations);
  ablate->add_option("--window", window);
  add_common(ablate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  }

  try {
    // CLI flags override the config file, which overrides defaults; the
    // config file is loaded first so flag values land on top of it.
    if (!common.config_path.empty()) {
      const Config file_cfg = load_config(common.config_path);
      JitterSpec flag_jitter = common.cfg.jitter;
      common.cfg = file_cfg;
      if (synth->parsed()) {
        const JitterSpec defaults;
        auto keep = [&](auto flagv, auto filev, auto defv) {
          return flagv != defv ? flagv : filev;
        };
        common.cfg.jitter.n_frames =
            keep(flag_jitter.n_frames, file_cfg.jitter.n_frames, defaults.n_frames);
        common.cfg.jitter.smooth_amplitude = keep(flag_jitter.smooth_amplitude,
                                                  file_cfg.jitter.smooth_amplitude,
                                                  defaults.smooth_amplitude);
        common.cfg.jitter.smooth_period = keep(flag_jitter.smooth_period,
                                               file_cfg.jitter.smooth_period,
                                               defaults.smooth_period);
        common.cfg.jitter.jitter_sigma =
            keep(flag_jitter.jitter_sigma, file_cfg.jitter.jitter_sigma, defaults.jitter_sigma);
        common.cfg.jitter.rotation_sigma = keep(flag_jitter.rotation_sigma,
                                                file_cfg.jitter.rotation_sigma,
                                                defaults.rotation_sigma);
        common.cfg.jitter.seed = keep(flag_jitter.seed, file_cfg.jitter.seed, defaults.seed);
      }
      common.config_path.clear();  // already merged
    }
    if (ablate->parsed() && window > 0) common.cfg.window = window;
    if (ablate->parsed() && iterations >= 0) common.cfg.iterations = iterations;

    if (expand->parsed()) return cmd_expand(input, out_dir, iterations, mode, common);
    if (stab->parsed())
      return cmd_stabilize(input, out_dir, ovs_on, iterations, fill_str, window, common);
    if (eval->parsed()) return cmd_eval(input, output, report_path, gt_dir, common);
    if (synth->parsed()) return cmd_synth(panorama, out_dir, emit_gt, synth_w, synth_h, common);
    if (ablate->parsed()) return cmd_ablate(input, out_dir, common);
  } catch (const UsageError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: processing: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
