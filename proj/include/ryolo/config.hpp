#pragma once

// Run configuration as a single JSON document. Every field is optional in the
// file; missing fields take the defaults below, unknown fields are rejected.

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ryolo/anchors.hpp"
#include "ryolo/clips.hpp"
#include "ryolo/detector.hpp"
#include "ryolo/error.hpp"
#include "ryolo/training.hpp"

namespace ryolo {

using Json = nlohmann::ordered_json;

struct PathsConfig {
  std::string annotations = "data/annotations.txt";
  std::string frames_dir = "data/frames";
  std::string prepared_dir = "prepared";
  std::string anchors = "anchors/anchors.txt";
  std::string checkpoint = "train/checkpoint.ryck";
  std::string init_from;  // optional checkpoint to port weights from
};

struct PipelineConfig {
  SegmentOptions segment;
  std::size_t chunk_len = 16;
  std::size_t subsample = 1;
  double val_fraction = 0.2;
  std::size_t block = 120;
  std::string split = "clips";  // "clips" or "frames"
};

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t max_steps = 0;      // 0: no cap
  std::size_t batch_frames = 8;   // frames per non-recurrent step
  SgdConfig sgd;
  LossWeights loss;
};

struct EvalConfig {
  std::optional<double> conf_threshold;  // required by eval
  double nms_iou = 0.45;
  double match_iou = 0.5;
  std::vector<std::size_t> top_k{5, 24};
  bool playback = false;  // score ground truth as detections
};

struct SynthConfig {
  std::size_t videos = 4;
  std::size_t frames_per_video = 600;
  std::size_t size = 104;
  std::vector<double> class_weights{0.35, 0.35, 0.2, 0.1};
  std::size_t min_object = 10;  // pixels
  std::size_t max_object = 18;
  std::size_t min_run = 60;
  std::size_t max_run = 140;
  std::size_t min_gap = 40;
  std::size_t max_gap = 120;
  double speed = 1.5;           // pixels per frame
  double noise = 60.0;          // background noise amplitude, 0..255
};

struct AnchorConfig {
  std::size_t restarts = 10;
  std::size_t max_iters = 300;
};

struct RunConfig {
  PathsConfig paths;
  DetectorConfig model;
  PipelineConfig pipeline;
  TrainConfig train;
  EvalConfig eval;
  SynthConfig synth;
  AnchorConfig anchors;
  std::uint64_t seed = 0;
};

namespace detail {

inline void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  require(j.is_object(), ErrorKind::Parse, "config: " + where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    require(allowed.count(it.key()) == 1, ErrorKind::Parse,
            "config: unknown key '" + where + (where.empty() ? "" : ".") + it.key() + "'");
  }
}

template <typename T>
void read(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, std::string("config: bad value for '") + key + "': " + e.what());
  }
}

}  // namespace detail

inline Json to_json(const RunConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["paths"] = {{"annotations", c.paths.annotations},   {"frames_dir", c.paths.frames_dir},
                {"prepared_dir", c.paths.prepared_dir}, {"anchors", c.paths.anchors},
                {"checkpoint", c.paths.checkpoint},     {"init_from", c.paths.init_from}};
  j["model"] = {{"input_size", c.model.input_size},
                {"input_channels", c.model.input_channels},
                {"backbone_widths", c.model.backbone_widths},
                {"num_classes", c.model.num_classes},
                {"recurrent", c.model.recurrent},
                {"leaky_slope", c.model.leaky_slope},
                {"grid_sizes", c.model.grid_sizes},
                {"lstm",
                 {{"layers", c.model.lstm.layers},
                  {"kernel", c.model.lstm.kernel},
                  {"hidden", c.model.lstm.hidden},
                  {"dropout", c.model.lstm.dropout}}}};
  j["pipeline"] = {{"pad", c.pipeline.segment.pad},
                   {"max_gap", c.pipeline.segment.max_gap},
                   {"min_len", c.pipeline.segment.min_len},
                   {"max_len", c.pipeline.segment.max_len},
                   {"overlap", c.pipeline.segment.overlap},
                   {"chunk_len", c.pipeline.chunk_len},
                   {"subsample", c.pipeline.subsample},
                   {"val_fraction", c.pipeline.val_fraction},
                   {"block", c.pipeline.block},
                   {"split", c.pipeline.split}};
  j["train"] = {{"epochs", c.train.epochs},
                {"max_steps", c.train.max_steps},
                {"batch_frames", c.train.batch_frames},
                {"learning_rate", c.train.sgd.learning_rate},
                {"momentum", c.train.sgd.momentum},
                {"weight_decay", c.train.sgd.weight_decay},
                {"grad_clip_norm", c.train.sgd.grad_clip_norm},
                {"freeze", c.train.sgd.frozen_prefixes},
                {"lambda_coord", c.train.loss.coord},
                {"lambda_obj", c.train.loss.obj},
                {"lambda_noobj", c.train.loss.noobj},
                {"lambda_cls", c.train.loss.cls}};
  j["eval"] = {{"conf_threshold", c.eval.conf_threshold ? Json(*c.eval.conf_threshold) : Json(nullptr)},
               {"nms_iou", c.eval.nms_iou},
               {"match_iou", c.eval.match_iou},
               {"top_k", c.eval.top_k},
               {"playback", c.eval.playback}};
  j["synth"] = {{"videos", c.synth.videos},       {"frames_per_video", c.synth.frames_per_video},
                {"size", c.synth.size},           {"class_weights", c.synth.class_weights},
                {"min_object", c.synth.min_object}, {"max_object", c.synth.max_object},
                {"min_run", c.synth.min_run},     {"max_run", c.synth.max_run},
                {"min_gap", c.synth.min_gap},     {"max_gap", c.synth.max_gap},
                {"speed", c.synth.speed},         {"noise", c.synth.noise}};
  j["anchors"] = {{"restarts", c.anchors.restarts}, {"max_iters", c.anchors.max_iters}};
  return j;
}

inline DetectorConfig detector_config_from_json(const Json& m) {
  using detail::read;
  DetectorConfig d;
  detail::check_keys(m, {"input_size", "input_channels", "backbone_widths", "num_classes", "recurrent",
                         "leaky_slope", "grid_sizes", "lstm"},
                     "model");
  read(m, "input_size", d.input_size);
  read(m, "input_channels", d.input_channels);
  read(m, "backbone_widths", d.backbone_widths);
  read(m, "num_classes", d.num_classes);
  read(m, "recurrent", d.recurrent);
  read(m, "leaky_slope", d.leaky_slope);
  read(m, "grid_sizes", d.grid_sizes);
  if (m.contains("lstm")) {
    const Json& l = m.at("lstm");
    detail::check_keys(l, {"layers", "kernel", "hidden", "dropout"}, "model.lstm");
    read(l, "layers", d.lstm.layers);
    read(l, "kernel", d.lstm.kernel);
    read(l, "hidden", d.lstm.hidden);
    read(l, "dropout", d.lstm.dropout);
  }
  return d;
}

inline Json detector_config_to_json(const DetectorConfig& d) {
  RunConfig c;
  c.model = d;
  return to_json(c).at("model");
}

inline RunConfig config_from_json(const Json& j) {
  using detail::read;
  RunConfig c;
  detail::check_keys(j, {"seed", "paths", "model", "pipeline", "train", "eval", "synth", "anchors"}, "");
  read(j, "seed", c.seed);
  if (j.contains("paths")) {
    const Json& p = j.at("paths");
    detail::check_keys(p, {"annotations", "frames_dir", "prepared_dir", "anchors", "checkpoint", "init_from"},
                       "paths");
    read(p, "annotations", c.paths.annotations);
    read(p, "frames_dir", c.paths.frames_dir);
    read(p, "prepared_dir", c.paths.prepared_dir);
    read(p, "anchors", c.paths.anchors);
    read(p, "checkpoint", c.paths.checkpoint);
    read(p, "init_from", c.paths.init_from);
  }
  if (j.contains("model")) c.model = detector_config_from_json(j.at("model"));
  if (j.contains("pipeline")) {
    const Json& p = j.at("pipeline");
    detail::check_keys(p, {"pad", "max_gap", "min_len", "max_len", "overlap", "chunk_len", "subsample",
                           "val_fraction", "block", "split"},
                       "pipeline");
    read(p, "pad", c.pipeline.segment.pad);
    read(p, "max_gap", c.pipeline.segment.max_gap);
    read(p, "min_len", c.pipeline.segment.min_len);
    read(p, "max_len", c.pipeline.segment.max_len);
    read(p, "overlap", c.pipeline.segment.overlap);
    read(p, "chunk_len", c.pipeline.chunk_len);
    read(p, "subsample", c.pipeline.subsample);
    read(p, "val_fraction", c.pipeline.val_fraction);
    read(p, "block", c.pipeline.block);
    read(p, "split", c.pipeline.split);
    require(c.pipeline.split == "clips" || c.pipeline.split == "frames", ErrorKind::Parse,
            "config: pipeline.split must be 'clips' or 'frames'");
  }
  if (j.contains("train")) {
    const Json& t = j.at("train");
    detail::check_keys(t, {"epochs", "max_steps", "batch_frames", "learning_rate", "momentum", "weight_decay",
                           "grad_clip_norm", "freeze", "lambda_coord", "lambda_obj", "lambda_noobj",
                           "lambda_cls"},
                       "train");
    read(t, "epochs", c.train.epochs);
    read(t, "max_steps", c.train.max_steps);
    read(t, "batch_frames", c.train.batch_frames);
    read(t, "learning_rate", c.train.sgd.learning_rate);
    read(t, "momentum", c.train.sgd.momentum);
    read(t, "weight_decay", c.train.sgd.weight_decay);
    read(t, "grad_clip_norm", c.train.sgd.grad_clip_norm);
    read(t, "freeze", c.train.sgd.frozen_prefixes);
    read(t, "lambda_coord", c.train.loss.coord);
    read(t, "lambda_obj", c.train.loss.obj);
    read(t, "lambda_noobj", c.train.loss.noobj);
    read(t, "lambda_cls", c.train.loss.cls);
  }
  if (j.contains("eval")) {
    const Json& e = j.at("eval");
    detail::check_keys(e, {"conf_threshold", "nms_iou", "match_iou", "top_k", "playback"}, "eval");
    if (e.contains("conf_threshold") && !e.at("conf_threshold").is_null()) {
      double v = 0.0;
      read(e, "conf_threshold", v);
      c.eval.conf_threshold = v;
    }
    read(e, "nms_iou", c.eval.nms_iou);
    read(e, "match_iou", c.eval.match_iou);
    read(e, "top_k", c.eval.top_k);
    read(e, "playback", c.eval.playback);
  }
  if (j.contains("synth")) {
    const Json& s = j.at("synth");
    detail::check_keys(s, {"videos", "frames_per_video", "size", "class_weights", "min_object", "max_object",
                           "min_run", "max_run", "min_gap", "max_gap", "speed", "noise"},
                       "synth");
    read(s, "videos", c.synth.videos);
    read(s, "frames_per_video", c.synth.frames_per_video);
    read(s, "size", c.synth.size);
    read(s, "class_weights", c.synth.class_weights);
    read(s, "min_object", c.synth.min_object);
    read(s, "max_object", c.synth.max_object);
    read(s, "min_run", c.synth.min_run);
    read(s, "max_run", c.synth.max_run);
    read(s, "min_gap", c.synth.min_gap);
    read(s, "max_gap", c.synth.max_gap);
    read(s, "speed", c.synth.speed);
    read(s, "noise", c.synth.noise);
  }
  if (j.contains("anchors")) {
    const Json& a = j.at("anchors");
    detail::check_keys(a, {"restarts", "max_iters"}, "anchors");
    read(a, "restarts", c.anchors.restarts);
    read(a, "max_iters", c.anchors.max_iters);
  }
  return c;
}

inline Json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::Parse, what + ": " + e.what());
  }
}

inline RunConfig read_config(const std::string& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorKind::Io, "cannot read config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return config_from_json(parse_json_text(ss.str(), path));
}

inline void write_config(const std::string& path, const RunConfig& c) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorKind::Io, "cannot write config " + path);
  os << to_json(c).dump(2) << '\n';
}

// Applies "a.b.c=value" overrides; value is parsed as JSON, falling back to a
// plain string.
inline RunConfig apply_overrides(const RunConfig& base, const std::vector<std::string>& sets) {
  Json j = to_json(base);
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    require(eq != std::string::npos && eq > 0, ErrorKind::InvalidArgument,
            "override '" + s + "' is not key=value");
    std::string pointer = "/" + s.substr(0, eq);
    for (char& ch : pointer) {
      if (ch == '.') ch = '/';
    }
    const std::string raw = s.substr(eq + 1);
    Json value;
    try {
      value = Json::parse(raw);
    } catch (const nlohmann::json::parse_error&) {
      value = raw;
    }
    try {
      j[Json::json_pointer(pointer)] = value;
    } catch (const std::exception& e) {
      fail(ErrorKind::InvalidArgument, "override '" + s + "': " + e.what());
    }
  }
  return config_from_json(j);
}

}  // namespace ryolo
