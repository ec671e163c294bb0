#include "cli.hpp"

#include "voxelox/association.hpp"
#include "voxelox/detail/parallel.hpp"
#include "voxelox/error.hpp"
#include "voxelox/evaluate.hpp"
#include "voxelox/evolution.hpp"
#include "voxelox/frame_store.hpp"
#include "voxelox/query.hpp"
#include "voxelox/simulate.hpp"
#include "voxelox/snapshot.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace voxelox::cli {

namespace fs = std::filesystem;

namespace {

struct SimOptions {
  std::string out;
  std::uint64_t seed = 0;
  int objects = 6;
  int frames = 60;
  std::size_t dim = 16;
  double resolution = kDefaultResolution;
  NoiseConfig noise;
};

struct BuildOptions {
  std::string sequence;
  std::string out;
  std::string baseline = "none";
  double iou_threshold = 0.5;
  AssociationConfig association;
  std::string scope = "local";
  std::string progress;
  std::string association_log;
};

struct EvalOptionsCli {
  std::string snapshot;
  std::string scene;
  std::string json_out;
  bool self = false;
  std::uint64_t seed = 0;
  double noisy_sigma = 0.2;
};

struct QueryOptions {
  std::string snapshot;
  std::string embedding_file;
  std::size_t row = 0;
  long long instance = -1;
  std::size_t k = 3;
};

struct RenderOptions {
  std::string snapshot;
  std::string sequence;
  std::size_t frame = 0;
  std::string out;
};

struct ExportOptions {
  std::string snapshot;
  std::string out;
  std::string format = "pointlist";
};

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
  return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

class OutputFile {
public:
  OutputFile(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::trunc);
      if (!file_) throw_io("cannot open " + path + " for writing");
      stream_ = &file_;
    }
  }
  std::ostream& get() { return *stream_; }

private:
  std::ofstream file_;
  std::ostream* stream_;
};

void cmd_sim(const SimOptions& o, std::ostream& out) {
  SceneConfig cfg;
  cfg.seed = o.seed;
  cfg.n_objects = o.objects;
  cfg.n_frames = o.frames;
  cfg.embedding_dim = o.dim;
  const auto scene = generate_scene(cfg);
  NoiseConfig noise = o.noise;
  noise.seed = o.noise.seed != 0 ? o.noise.seed : o.seed;
  write_simulation(scene, noise, o.resolution, o.out);
  write_embedding_file(scene.class_embeddings, scene.embedding_dim(),
                       fs::path(o.out) / "classes.emb");
  out << (fs::path(o.out) / "manifest.json").string() << '\n';
}

void cmd_build(const BuildOptions& o, std::ostream& out) {
  IntegrationConfig cfg;
  cfg.association = o.association;
  cfg.association.candidate_scope =
      o.scope == "global" ? CandidateScope::Global : CandidateScope::VoxelLocal;
  cfg.backend = o.baseline == "iou" ? AssociationBackend::Iou : AssociationBackend::Probabilistic;
  cfg.iou_threshold = o.iou_threshold;
  cfg.threads = detail::worker_threads();
  cfg.association.validate();

  SequenceReader reader(o.sequence);
  VoxelMap map(reader.manifest().resolution);
  Codebook codebook(reader.manifest().embedding_dim);

  OutputFile progress(o.progress, out);
  std::optional<OutputFile> assoc_log;
  if (!o.association_log.empty()) assoc_log.emplace(o.association_log, out);

  std::vector<double> latencies;
  for (std::size_t i = 0; i < reader.manifest().frames.size(); ++i) {
    const auto& entry = reader.manifest().frames[i];
    FrameBundle frame;
    AssociationResult result;
    FrameReport report;
    try {
      frame = reader.read_frame(i);
      report = integrate_frame(map, codebook, frame, cfg, &result);
    } catch (const Error& e) {
      throw Error(e.kind(), "frame " + std::to_string(entry.frame_id) + ": " + e.what());
    }
    latencies.push_back(report.latency_ms);
    progress.get() << report.to_json() << '\n';
    if (assoc_log) write_association_log(assoc_log->get(), result);
  }

  save_snapshot(map, codebook, o.out);
  nlohmann::json summary = {{"summary",
                             {{"frames", latencies.size()},
                              {"instances", codebook.size()},
                              {"voxels", map.size()},
                              {"total_count", map.total_count()},
                              {"latency_p50_ms", percentile(latencies, 0.5)},
                              {"latency_p95_ms", percentile(latencies, 0.95)},
                              {"snapshot", o.out}}}};
  progress.get() << summary.dump() << '\n';
}

void cmd_eval(const EvalOptionsCli& o, std::ostream& out) {
  if (!fs::is_regular_file(fs::path(o.scene) / "scene.json")) {
    throw_io("ground truth missing: " + (fs::path(o.scene) / "scene.json").string());
  }
  const auto scene = load_scene(o.scene);
  const SequenceReader reader(o.scene);
  EvalOptions options;
  options.seed = o.seed;
  options.noisy_query_sigma = o.noisy_sigma;

  EvalReport report;
  if (o.self) {
    const auto gt = build_ground_truth(scene, reader.manifest().resolution);
    report = evaluate_ground_truth(scene, gt, options);
  } else {
    if (o.snapshot.empty()) throw_usage("eval: --snapshot or --self is required");
    const auto snap = load_snapshot(o.snapshot);
    if (std::abs(snap.map.resolution() - reader.manifest().resolution) > 1e-12) {
      throw_validation("eval: snapshot resolution does not match the sequence");
    }
    const auto gt = build_ground_truth(scene, snap.map.resolution());
    report = evaluate_map(snap.map, snap.codebook, scene, gt, options);
  }
  out << report.to_table();
  if (!o.json_out.empty()) {
    std::ofstream f(o.json_out, std::ios::trunc);
    if (!f) throw_io("cannot open " + o.json_out + " for writing");
    f << report.to_json() << '\n';
  }
}

void cmd_query(const QueryOptions& o, std::ostream& out) {
  if (o.k == 0) throw_usage("query: -k must be at least 1");
  const auto snap = load_snapshot(o.snapshot);
  std::vector<double> query;
  if (o.instance >= 0) {
    const auto* rec = snap.codebook.find(static_cast<InstanceId>(o.instance));
    if (rec == nullptr) throw_validation("query: unknown instance " + std::to_string(o.instance));
    query = rec->embedding;
  } else if (!o.embedding_file.empty()) {
    const auto rows = read_embedding_file(o.embedding_file);
    if (o.row >= rows.size()) throw_usage("query: --row out of range");
    query = rows[o.row];
  } else {
    throw_usage("query: --embedding or --instance is required");
  }
  if (query.size() != snap.codebook.embedding_dim()) {
    throw_validation("query: embedding dimension " + std::to_string(query.size()) +
                     " != codebook dimension " + std::to_string(snap.codebook.embedding_dim()));
  }
  for (const auto& hit : retrieve(snap.codebook, query, o.k)) {
    const auto* rec = snap.codebook.find(hit.id);
    nlohmann::json j = {{"rank", hit.rank},
                        {"instance", hit.id},
                        {"score", hit.score},
                        {"caption", rec->caption ? nlohmann::json(*rec->caption)
                                                 : nlohmann::json(nullptr)}};
    out << j.dump() << '\n';
  }
}

void cmd_render(const RenderOptions& o, std::ostream& out) {
  const auto snap = load_snapshot(o.snapshot);
  const SequenceReader reader(o.sequence);
  const auto frame = reader.read_frame(o.frame);
  const auto mask = render_mask(snap.map, frame.intrinsics, frame.pose, frame.depth_mm);
  write_rendered_mask(mask, o.out);
  std::size_t labeled = 0;
  for (const auto id : mask.labels) labeled += id != kNoInstance ? 1 : 0;
  out << nlohmann::json{{"out", o.out}, {"frame_id", frame.frame_id}, {"labeled_pixels", labeled}}
             .dump()
      << '\n';
}

void cmd_export(const ExportOptions& o, std::ostream& out) {
  const auto snap = load_snapshot(o.snapshot);
  const auto format = o.format == "labeled-voxels" ? ExportFormat::LabeledVoxels
                                                   : ExportFormat::PointList;
  export_map(snap.map, snap.codebook, o.out, format);
  out << o.out << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"voxelox: probabilistic instance voxel mapping"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Key-value config file (flags override it)");
  app.allow_config_extras(CLI::config_extras_mode::error);
  bool print_config = false;
  app.add_flag("--print-config", print_config, "Print the effective configuration and exit");

  SimOptions sim;
  auto* sim_cmd = app.add_subcommand("sim", "Generate a synthetic sequence with ground truth");
  sim_cmd->add_option("--out", sim.out, "Output directory")->required();
  sim_cmd->add_option("--seed", sim.seed, "Scene and noise seed")->capture_default_str();
  sim_cmd->add_option("--objects", sim.objects, "Number of objects")->capture_default_str()
      ->check(CLI::PositiveNumber);
  sim_cmd->add_option("--frames", sim.frames, "Trajectory length")->capture_default_str()
      ->check(CLI::PositiveNumber);
  sim_cmd->add_option("--dim", sim.dim, "Embedding dimension")->capture_default_str()
      ->check(CLI::PositiveNumber);
  sim_cmd->add_option("--resolution", sim.resolution, "Voxel size in meters")
      ->capture_default_str()->check(CLI::PositiveNumber);
  sim_cmd->add_option("--p-drop", sim.noise.p_drop)->capture_default_str()->check(CLI::Range(0.0, 1.0));
  sim_cmd->add_option("--p-split", sim.noise.p_split)->capture_default_str()->check(CLI::Range(0.0, 1.0));
  sim_cmd->add_option("--p-merge", sim.noise.p_merge)->capture_default_str()->check(CLI::Range(0.0, 1.0));
  sim_cmd->add_option("--jitter", sim.noise.boundary_jitter, "Boundary jitter in pixels")
      ->capture_default_str()->check(CLI::NonNegativeNumber);
  sim_cmd->add_option("--embedding-noise", sim.noise.embedding_noise_sigma)->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  sim_cmd->add_option("--depth-noise", sim.noise.depth_noise_sigma, "Depth noise sigma in meters")
      ->capture_default_str()->check(CLI::NonNegativeNumber);
  sim_cmd->add_option("--min-mask-pixels", sim.noise.min_mask_pixels)->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  sim_cmd->add_option("--noise-seed", sim.noise.seed, "Noise seed (0 reuses --seed)")
      ->capture_default_str();

  BuildOptions build;
  auto* build_cmd = app.add_subcommand("build", "Integrate a sequence into a map snapshot");
  build_cmd->add_option("--sequence", build.sequence, "Sequence directory")->required();
  build_cmd->add_option("--out", build.out, "Snapshot directory")->required();
  build_cmd->add_option("--baseline", build.baseline, "Association backend override")
      ->capture_default_str()->check(CLI::IsMember({"none", "iou"}));
  build_cmd->add_option("--iou-threshold", build.iou_threshold)->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  build_cmd->add_option("--geo-weight", build.association.geo_weight)->capture_default_str();
  build_cmd->add_option("--fea-weight", build.association.fea_weight)->capture_default_str();
  build_cmd->add_option("--threshold", build.association.similarity_threshold,
                        "Association similarity threshold")->capture_default_str();
  build_cmd->add_option("--observed-floor", build.association.observed_fraction_floor)
      ->capture_default_str();
  build_cmd->add_option("--scope", build.scope, "Candidate scope")->capture_default_str()
      ->check(CLI::IsMember({"local", "global"}));
  build_cmd->add_option("--progress", build.progress, "JSON-lines progress file (default stdout)");
  build_cmd->add_option("--association-log", build.association_log, "JSON-lines association log");

  EvalOptionsCli eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a snapshot against simulator ground truth");
  eval_cmd->add_option("--scene", eval.scene, "Simulation directory")->required();
  eval_cmd->add_option("--snapshot", eval.snapshot, "Snapshot directory");
  eval_cmd->add_flag("--self", eval.self, "Evaluate the ground truth against itself");
  eval_cmd->add_option("--json", eval.json_out, "Write the report as JSON");
  eval_cmd->add_option("--seed", eval.seed, "Seed for noisy retrieval queries")->capture_default_str();
  eval_cmd->add_option("--noisy-sigma", eval.noisy_sigma)->capture_default_str()
      ->check(CLI::NonNegativeNumber);

  QueryOptions query;
  auto* query_cmd = app.add_subcommand("query", "Rank instances by embedding similarity");
  query_cmd->add_option("--snapshot", query.snapshot)->required();
  query_cmd->add_option("--embedding", query.embedding_file, "Embedding file");
  query_cmd->add_option("--row", query.row, "Row of the embedding file")->capture_default_str();
  query_cmd->add_option("--instance", query.instance, "Query with a stored instance embedding");
  query_cmd->add_option("-k", query.k, "Number of hits")->capture_default_str();

  RenderOptions render;
  auto* render_cmd = app.add_subcommand("render", "Render map labels into a sequence frame");
  render_cmd->add_option("--snapshot", render.snapshot)->required();
  render_cmd->add_option("--sequence", render.sequence)->required();
  render_cmd->add_option("--frame", render.frame, "Frame position in the sequence")
      ->capture_default_str();
  render_cmd->add_option("--out", render.out, "Rendered mask file")->required();

  ExportOptions exp;
  auto* export_cmd = app.add_subcommand("export", "Export a snapshot as PLY or labeled voxels");
  export_cmd->add_option("--snapshot", exp.snapshot)->required();
  export_cmd->add_option("--out", exp.out)->required();
  export_cmd->add_option("--format", exp.format)->capture_default_str()
      ->check(CLI::IsMember({"pointlist", "labeled-voxels"}));

  std::vector<std::string> rev(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(rev.begin(), rev.end());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n' << app.help();
    return static_cast<int>(ErrorKind::Usage);
  }

  if (print_config) {
    std::istringstream lines(app.config_to_str(true, false));
    for (std::string line; std::getline(lines, line);) {
      if (!line.starts_with("print-config")) out << line << '\n';
    }
    return 0;
  }

  try {
    if (*sim_cmd) cmd_sim(sim, out);
    if (*build_cmd) cmd_build(build, out);
    if (*eval_cmd) cmd_eval(eval, out);
    if (*query_cmd) cmd_query(query, out);
    if (*render_cmd) cmd_render(render, out);
    if (*export_cmd) cmd_export(exp, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::Io);
  }
  return 0;
}

}  // namespace voxelox::cli
