#pragma once

// End-to-end commands behind the command-line tool. Each takes a resolved
// RunConfig and an output directory; inputs are located through cfg.paths.
//
// prepare   -> clips.txt, train.txt, val.txt, frames_train.txt, frames_val.txt,
//              histogram.json, report.json
// anchors   -> anchors.txt, anchor_report.json
// train     -> checkpoint.ryck, epoch_<e>.ryck, metrics.jsonl
// eval      -> eval.json, predictions.txt
// synth     -> annotations.txt, frames/<video>.ryf
//
// Every command also writes the resolved config.json into its output directory.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ryolo/anchors.hpp"
#include "ryolo/boxes.hpp"
#include "ryolo/checkpoint.hpp"
#include "ryolo/clips.hpp"
#include "ryolo/config.hpp"
#include "ryolo/detector.hpp"
#include "ryolo/error.hpp"
#include "ryolo/io.hpp"
#include "ryolo/metrics.hpp"
#include "ryolo/rng.hpp"
#include "ryolo/synth.hpp"
#include "ryolo/training.hpp"

namespace ryolo {

namespace fs = std::filesystem;

namespace detail {

inline void make_out_dir(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  require(!ec && fs::is_directory(out), ErrorKind::Io, "cannot create output directory " + out);
}

inline std::string join(const std::string& dir, const std::string& file) {
  return (fs::path(dir) / file).string();
}

inline void write_json(const std::string& path, const Json& j) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorKind::Io, "cannot write " + path);
  os << j.dump(2) << '\n';
}

inline void write_frame_list(const std::string& path, const std::vector<FrameRef>& frames) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorKind::Io, "cannot write " + path);
  os << "# video_id frame\n";
  for (const auto& f : frames) os << f.video_id << ' ' << f.frame << '\n';
}

inline std::vector<FrameRef> read_frame_list(const std::string& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorKind::Io, "cannot read frame list " + path);
  std::vector<FrameRef> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    FrameRef f;
    if (!(ls >> f.video_id >> f.frame)) {
      fail(ErrorKind::Parse, path + ":" + std::to_string(lineno) + ": malformed frame record");
    }
    out.push_back(f);
  }
  return out;
}

inline std::map<FrameRef, const std::vector<BoxLabel>*> label_index(const AnnotationSet& set) {
  std::map<FrameRef, const std::vector<BoxLabel>*> out;
  for (const auto& v : set.videos) {
    for (const auto& f : v.frames) out[{v.video_id, f.frame_index}] = &f.labels;
  }
  return out;
}

inline Json histogram_json(const ClassHistogram& h, const std::vector<std::size_t>& top_k) {
  Json counts = Json::object();
  for (const auto& [c, n] : h.clip_counts) counts[std::to_string(c)] = n;
  Json j;
  j["clip_counts"] = counts;
  for (std::size_t k : top_k) j["top" + std::to_string(k)] = h.top_k(k);
  return j;
}

}  // namespace detail

// Frame archives loaded on demand.
class FrameStore {
 public:
  explicit FrameStore(std::string dir) : dir_(std::move(dir)) {}

  const FrameArchive& get(const std::string& video_id) {
    auto it = cache_.find(video_id);
    if (it == cache_.end()) {
      it = cache_.emplace(video_id, FrameArchive::load(frame_archive_path(dir_, video_id))).first;
    }
    return it->second;
  }

  Tensor4 frames(const std::string& video_id, const std::vector<long>& indices) {
    return get(video_id).frames_tensor(indices);
  }

 private:
  std::string dir_;
  std::map<std::string, FrameArchive> cache_;
};

// ---------------------------------------------------------------------------
// prepare

struct PrepareSummary {
  std::vector<ClipRecord> clips;
  Split<ClipRecord> clip_split;
  Split<FrameRef> frame_split;
  SegmentStats stats;
  ClassHistogram histogram;
};

inline PrepareSummary cmd_prepare(const RunConfig& cfg, const std::string& out) {
  detail::make_out_dir(out);
  write_config(detail::join(out, "config.json"), cfg);
  const AnnotationSet annotations = read_annotations(cfg.paths.annotations);

  PrepareSummary s;
  for (const auto& v : annotations.videos) {
    long frames = v.max_frame + 1;
    const std::string archive = frame_archive_path(cfg.paths.frames_dir, v.video_id);
    if (fs::exists(archive)) {
      frames = static_cast<long>(FrameArchive::peek_frames(archive));
      require(v.max_frame < frames, ErrorKind::Geometry,
              "annotations of " + v.video_id + " reach frame " + std::to_string(v.max_frame) +
                  " but the archive holds " + std::to_string(frames) + " frames");
    }
    for (auto& c : segment_clips(v.video_id, v.frames, frames, cfg.pipeline.segment, &s.stats)) {
      s.clips.push_back(cfg.pipeline.subsample > 1 ? sparse_subsample(c, cfg.pipeline.subsample) : std::move(c));
    }
  }

  std::vector<ManifestEntry> manifest;
  for (std::size_t i = 0; i < s.clips.size(); ++i) {
    const auto& c = s.clips[i];
    manifest.push_back({i, c.video_id, c.start_frame, c.end_frame, c.stride});
  }
  const auto split = split_clips(manifest, cfg.pipeline.val_fraction, cfg.seed);
  for (const auto& e : split.train) s.clip_split.train.push_back(s.clips[e.clip_id]);
  for (const auto& e : split.val) s.clip_split.val.push_back(s.clips[e.clip_id]);
  write_manifest(detail::join(out, "clips.txt"), manifest);
  write_manifest(detail::join(out, "train.txt"), split.train);
  write_manifest(detail::join(out, "val.txt"), split.val);

  std::set<FrameRef> kept;
  for (const auto& c : s.clips) {
    for (std::size_t i = 0; i < c.length(); ++i) kept.insert({c.video_id, c.frame_at(i)});
  }
  s.frame_split = split_frames_blocked({kept.begin(), kept.end()}, cfg.pipeline.block,
                                       cfg.pipeline.val_fraction, cfg.seed);
  detail::write_frame_list(detail::join(out, "frames_train.txt"), s.frame_split.train);
  detail::write_frame_list(detail::join(out, "frames_val.txt"), s.frame_split.val);

  s.histogram = class_histogram(s.clips);
  detail::write_json(detail::join(out, "histogram.json"), detail::histogram_json(s.histogram, cfg.eval.top_k));

  Json report;
  report["videos"] = annotations.videos.size();
  report["clips"] = s.clips.size();
  report["train_clips"] = split.train.size();
  report["val_clips"] = split.val.size();
  report["total_frames"] = s.stats.total_frames;
  report["kept_frames"] = s.stats.kept_frames;
  report["labeled_runs"] = s.stats.labeled_runs;
  report["skipped_short"] = s.stats.skipped_short;
  report["reduction"] = s.stats.reduction();
  detail::write_json(detail::join(out, "report.json"), report);
  return s;
}

// ---------------------------------------------------------------------------
// Training/validation data as seen by train and eval

struct Sequence {
  std::size_t clip_id = 0;
  std::string video_id;
  std::vector<long> frames;
  std::vector<std::vector<BoxLabel>> labels;
};

// Clips of a manifest as sequences, or single-frame sequences from a frame
// list when the frame split is in use.
inline std::vector<Sequence> load_sequences(const RunConfig& cfg, const AnnotationSet& annotations, bool val) {
  std::vector<Sequence> out;
  if (cfg.pipeline.split == "frames") {
    const auto index = detail::label_index(annotations);
    const auto frames = detail::read_frame_list(
        detail::join(cfg.paths.prepared_dir, val ? "frames_val.txt" : "frames_train.txt"));
    for (std::size_t i = 0; i < frames.size(); ++i) {
      auto it = index.find(frames[i]);
      out.push_back({i, frames[i].video_id, {frames[i].frame},
                     {it == index.end() ? std::vector<BoxLabel>{} : *it->second}});
    }
    return out;
  }
  require(cfg.pipeline.split == "clips", ErrorKind::InvalidArgument,
          "pipeline.split must be \"clips\" or \"frames\", got \"" + cfg.pipeline.split + "\"");
  for (const auto& e : read_manifest(detail::join(cfg.paths.prepared_dir, val ? "val.txt" : "train.txt"))) {
    const ClipRecord c = load_clip(e, annotations);
    Sequence s{e.clip_id, c.video_id, {}, c.labels};
    for (std::size_t i = 0; i < c.length(); ++i) s.frames.push_back(c.frame_at(i));
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// anchors

struct AnchorSummary {
  AnchorSet anchors;
  KMeansResult kmeans;
  std::size_t boxes = 0;
};

inline AnchorSummary cmd_anchors(const RunConfig& cfg, const std::string& out) {
  detail::make_out_dir(out);
  write_config(detail::join(out, "config.json"), cfg);
  const AnnotationSet annotations = read_annotations(cfg.paths.annotations);
  std::set<FrameRef> seen;
  std::vector<BoxShape> shapes;
  for (const auto& seq : load_sequences(cfg, annotations, false)) {
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
      if (!seen.insert({seq.video_id, seq.frames[i]}).second) continue;
      for (const auto& l : seq.labels[i]) shapes.push_back({l.box.w, l.box.h});
    }
  }
  const std::set<BoxShape> distinct(shapes.begin(), shapes.end());
  require(distinct.size() >= kScales * kAnchorsPerScale, ErrorKind::InvalidArgument,
          "anchors: training set has " + std::to_string(distinct.size()) +
              " distinct box shapes, need at least 9");

  AnchorSummary s;
  s.boxes = shapes.size();
  s.kmeans = kmeans_anchors(shapes, {kScales * kAnchorsPerScale, cfg.seed, cfg.anchors.max_iters,
                                     cfg.anchors.restarts});
  s.anchors = assign_to_scales(s.kmeans.centroids);
  write_anchor_file(detail::join(out, "anchors.txt"), s.anchors);

  Json report;
  report["boxes"] = s.boxes;
  report["distinct_shapes"] = distinct.size();
  report["objective"] = s.kmeans.objective;
  report["mean_iou"] = 1.0 - s.kmeans.objective / static_cast<double>(shapes.size());
  report["iterations"] = s.kmeans.iterations;
  Json util = Json::array();
  const auto counts = prior_utilization(shapes, s.anchors);
  for (std::size_t sc = 0; sc < kScales; ++sc) {
    for (std::size_t a = 0; a < kAnchorsPerScale; ++a) {
      util.push_back({{"scale", sc}, {"anchor", a}, {"w", s.anchors.at(sc)[a].w},
                      {"h", s.anchors.at(sc)[a].h}, {"boxes", counts[sc][a]}});
    }
  }
  report["utilization"] = util;
  detail::write_json(detail::join(out, "anchor_report.json"), report);
  return s;
}

// ---------------------------------------------------------------------------
// train

struct TrainSummary {
  std::size_t steps = 0;
  std::vector<double> epoch_loss;  // mean total loss per frame, per epoch
  std::vector<LossBreakdown> step_loss;
  std::string checkpoint;
};

inline Detector initial_model(const RunConfig& cfg) {
  cfg.model.validate();
  Rng rng(cfg.seed);
  Rng init = rng.fork(1);
  Detector model = Detector::initialized(cfg.model, init);
  if (!cfg.paths.init_from.empty()) {
    const Checkpoint src = load_checkpoint(cfg.paths.init_from);
    port_weights(src.model, model);
  }
  return model;
}

// Optional per-step observer: (step, epoch, loss).
using StepObserver = std::function<void(std::size_t, std::size_t, const LossBreakdown&)>;

inline TrainSummary cmd_train(const RunConfig& cfg, const std::string& out,
                              const StepObserver& observer = {}) {
  detail::make_out_dir(out);
  write_config(detail::join(out, "config.json"), cfg);
  const AnnotationSet annotations = read_annotations(cfg.paths.annotations);
  const AnchorSet anchors = read_anchor_file(cfg.paths.anchors);
  const bool recurrent = cfg.model.recurrent;
  require(!(recurrent && cfg.pipeline.split == "frames"), ErrorKind::InvalidArgument,
          "recurrent training needs whole clips; use pipeline.split = \"clips\"");
  require(cfg.train.batch_frames >= 1 && cfg.pipeline.chunk_len >= 1, ErrorKind::InvalidArgument,
          "train.batch_frames and pipeline.chunk_len must be >= 1");
  const std::vector<Sequence> data = load_sequences(cfg, annotations, false);

  Detector model = initial_model(cfg);
  FrameStore store(cfg.paths.frames_dir);
  SgdMomentum optimizer(cfg.train.sgd);
  Rng rng = Rng(cfg.seed).fork(2);

  TrainSummary summary;
  std::ofstream log(detail::join(out, "metrics.jsonl"));
  require(static_cast<bool>(log), ErrorKind::Io, "cannot write metrics log in " + out);

  auto save = [&](const std::string& path, std::size_t epoch) {
    Json meta;
    meta["epoch"] = epoch;
    meta["steps"] = summary.steps;
    meta["seed"] = cfg.seed;
    save_checkpoint(path, {model, anchors, meta});
  };
  auto capped = [&] { return cfg.train.max_steps > 0 && summary.steps >= cfg.train.max_steps; };

  auto run_step = [&](TrainBatch& batch, std::optional<DetectorState>& states, std::size_t epoch,
                      LossBreakdown& epoch_sum, std::size_t& epoch_frames) {
    const StepResult r = train_step(model, batch, anchors, states, optimizer, cfg.train.loss, rng);
    ++summary.steps;
    epoch_sum += r.loss;
    epoch_frames += batch.frames.n();
    summary.step_loss.push_back(r.loss);
    Json line;
    line["step"] = summary.steps;
    line["epoch"] = epoch;
    line["frames"] = batch.frames.n();
    line["localization"] = r.loss.localization;
    line["confidence"] = r.loss.confidence;
    line["classification"] = r.loss.classification;
    line["total"] = r.loss.total;
    line["dropped_labels"] = r.dropped_labels;
    log << line.dump() << '\n';
    if (observer) observer(summary.steps, epoch, r.loss);
  };

  for (std::size_t epoch = 1; epoch <= cfg.train.epochs && !capped(); ++epoch) {
    LossBreakdown epoch_sum;
    std::size_t epoch_frames = 0;
    if (recurrent) {
      for (const Sequence& seq : hybrid_shuffle(data, cfg.seed + epoch)) {
        if (capped()) break;
        std::optional<DetectorState> states = model.fresh_state();
        for (std::size_t off = 0; off < seq.frames.size() && !capped(); off += cfg.pipeline.chunk_len) {
          const std::size_t end = std::min(seq.frames.size(), off + cfg.pipeline.chunk_len);
          TrainBatch batch;
          const std::vector<long> idx(seq.frames.begin() + static_cast<std::ptrdiff_t>(off),
                                      seq.frames.begin() + static_cast<std::ptrdiff_t>(end));
          batch.frames = store.frames(seq.video_id, idx);
          batch.labels.assign(seq.labels.begin() + static_cast<std::ptrdiff_t>(off),
                              seq.labels.begin() + static_cast<std::ptrdiff_t>(end));
          batch.clip_ids.assign(idx.size(), static_cast<long>(seq.clip_id));
          run_step(batch, states, epoch, epoch_sum, epoch_frames);
        }
      }
    } else {
      // Frames are independent here, so the whole set is flat-shuffled.
      struct Item {
        const Sequence* seq;
        std::size_t i;
      };
      std::vector<Item> items;
      for (const auto& seq : data) {
        for (std::size_t i = 0; i < seq.frames.size(); ++i) items.push_back({&seq, i});
      }
      Rng order(cfg.seed + epoch);
      order.shuffle(items);
      std::optional<DetectorState> none;
      for (std::size_t off = 0; off < items.size() && !capped(); off += cfg.train.batch_frames) {
        const std::size_t end = std::min(items.size(), off + cfg.train.batch_frames);
        std::vector<Tensor4> frames;
        TrainBatch batch;
        for (std::size_t k = off; k < end; ++k) {
          const Item& it = items[k];
          frames.push_back(store.frames(it.seq->video_id, {it.seq->frames[it.i]}));
          batch.labels.push_back(it.seq->labels[it.i]);
          batch.clip_ids.push_back(static_cast<long>(it.seq->clip_id));
        }
        std::vector<const Tensor4*> ptrs;
        for (const auto& f : frames) ptrs.push_back(&f);
        batch.frames = batch_concat(ptrs);
        run_step(batch, none, epoch, epoch_sum, epoch_frames);
      }
    }
    summary.epoch_loss.push_back(epoch_frames ? epoch_sum.total / static_cast<double>(epoch_frames) : 0.0);
    save(detail::join(out, "epoch_" + std::to_string(epoch) + ".ryck"), epoch);
  }
  summary.checkpoint = detail::join(out, "checkpoint.ryck");
  save(summary.checkpoint, summary.epoch_loss.size());
  return summary;
}

// ---------------------------------------------------------------------------
// eval

struct EvalReport {
  MatchResult match;
  std::map<int, double> ap;
  PrecisionRecall overall;
  MeanAp map_all;
  std::map<std::size_t, MeanAp> map_top;  // keyed by k
  std::vector<KeyedDetection> detections;
  std::size_t frames = 0;
};

// Per-frame detections for one sequence; recurrent state starts fresh and is
// carried across chunks.
inline std::vector<std::vector<Detection>> detect_sequence(const Detector& model, const AnchorSet& anchors,
                                                           FrameStore& store, const Sequence& seq,
                                                           std::size_t chunk_len, double conf_threshold,
                                                           double nms_iou) {
  std::vector<std::vector<Detection>> out;
  std::optional<DetectorState> state;
  if (model.config().recurrent) state = model.fresh_state();
  for (std::size_t off = 0; off < seq.frames.size(); off += chunk_len) {
    const std::size_t end = std::min(seq.frames.size(), off + chunk_len);
    const std::vector<long> idx(seq.frames.begin() + static_cast<std::ptrdiff_t>(off),
                                seq.frames.begin() + static_cast<std::ptrdiff_t>(end));
    for (const auto& preds : forward(model, store.frames(seq.video_id, idx), state)) {
      out.push_back(nms(filter_confidence(decode_all(preds, anchors), conf_threshold), nms_iou));
    }
  }
  return out;
}

// With cfg.eval.playback the ground truth is scored as the detections and no
// checkpoint is read.
inline EvalReport cmd_eval(const RunConfig& cfg, const std::string& checkpoint, const std::string& out) {
  require(cfg.eval.conf_threshold.has_value(), ErrorKind::InvalidArgument,
          "eval.conf_threshold must be set");
  detail::make_out_dir(out);
  write_config(detail::join(out, "config.json"), cfg);
  const AnnotationSet annotations = read_annotations(cfg.paths.annotations);
  const std::vector<Sequence> val = load_sequences(cfg, annotations, true);

  std::optional<Checkpoint> ck;
  if (!cfg.eval.playback) ck = load_checkpoint_for(checkpoint, cfg.model);
  FrameStore store(cfg.paths.frames_dir);

  EvalReport rep;
  std::vector<KeyedTruth> truths;
  for (const auto& seq : val) {
    std::vector<std::vector<Detection>> dets;
    if (ck) {
      dets = detect_sequence(ck->model, ck->anchors, store, seq, cfg.pipeline.chunk_len,
                             *cfg.eval.conf_threshold, cfg.eval.nms_iou);
    } else {
      for (const auto& labels : seq.labels) {
        std::vector<Detection> d;
        for (const auto& l : labels) d.push_back({l.box, l.class_id, 1.0});
        dets.push_back(std::move(d));
      }
    }
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
      const FrameRef ref{seq.video_id, seq.frames[i]};
      for (const auto& l : seq.labels[i]) truths.push_back({ref, l});
      for (const auto& d : dets[i]) rep.detections.push_back({ref, d});
    }
    rep.frames += seq.frames.size();
  }

  rep.match = match_detections(rep.detections, truths, cfg.eval.match_iou);
  rep.ap = per_class_ap(rep.match);
  rep.overall = precision_recall(rep.match);

  std::vector<int> all_classes;
  for (int c = 0; c < static_cast<int>(cfg.model.num_classes); ++c) all_classes.push_back(c);
  rep.map_all = mean_ap(rep.ap, all_classes);

  ClassHistogram hist;
  {
    std::vector<ClipRecord> clips;
    const std::string manifest = detail::join(cfg.paths.prepared_dir, "clips.txt");
    if (fs::exists(manifest)) {
      for (const auto& e : read_manifest(manifest)) clips.push_back(load_clip(e, annotations));
    }
    hist = class_histogram(clips);
  }

  Json report;
  report["frames"] = rep.frames;
  report["conf_threshold"] = *cfg.eval.conf_threshold;
  report["match_iou"] = cfg.eval.match_iou;
  report["playback"] = cfg.eval.playback;
  Json classes = Json::object();
  for (int c : all_classes) {
    const PrecisionRecall pr = precision_recall(rep.match, std::vector<int>{c});
    Json jc;
    jc["truths"] = pr.truths;
    jc["detections"] = pr.true_positives + pr.false_positives;
    jc["precision"] = pr.precision;
    jc["recall"] = pr.recall;
    auto it = rep.ap.find(c);
    jc["ap"] = it == rep.ap.end() ? Json(nullptr) : Json(it->second);
    classes[std::to_string(c)] = jc;
  }
  report["classes"] = classes;
  report["precision"] = rep.overall.precision;
  report["recall"] = rep.overall.recall;
  report["map"] = rep.map_all.value;
  Json top = Json::object();
  for (std::size_t k : cfg.eval.top_k) {
    const std::vector<int> set = hist.top_k(k);
    Json jt;
    jt["classes"] = set;
    if (set.empty()) {
      jt["map"] = nullptr;
    } else {
      rep.map_top[k] = mean_ap(rep.ap, set);
      const PrecisionRecall pr = precision_recall(rep.match, set);
      jt["map"] = rep.map_top[k].value;
      jt["excluded"] = rep.map_top[k].excluded_classes;
      jt["precision"] = pr.precision;
      jt["recall"] = pr.recall;
    }
    top["top" + std::to_string(k)] = jt;
  }
  report["top_k"] = top;
  detail::write_json(detail::join(out, "eval.json"), report);

  std::ofstream pred(detail::join(out, "predictions.txt"));
  require(static_cast<bool>(pred), ErrorKind::Io, "cannot write predictions in " + out);
  pred << "# video_id frame class_id confidence cx cy w h\n" << std::setprecision(9);
  for (const auto& d : rep.detections) {
    pred << d.frame.video_id << ' ' << d.frame.frame << ' ' << d.det.class_id << ' ' << d.det.confidence
         << ' ' << d.det.box.cx << ' ' << d.det.box.cy << ' ' << d.det.box.w << ' ' << d.det.box.h << '\n';
  }
  return rep;
}

// ---------------------------------------------------------------------------
// synth

struct SynthSummary {
  std::size_t videos = 0;
  std::size_t frames = 0;
  std::size_t labeled_frames = 0;
  std::map<int, std::size_t> runs;  // object runs per class
};

inline SynthSummary cmd_synth(const RunConfig& cfg, const std::string& out) {
  detail::make_out_dir(out);
  write_config(detail::join(out, "config.json"), cfg);
  const std::string frames_dir = detail::join(out, "frames");
  detail::make_out_dir(frames_dir);
  AnnotationSet set;
  SynthSummary s;
  for (auto& v : generate_dataset(cfg.synth, cfg.seed)) {
    v.frames.save(frame_archive_path(frames_dir, v.annotations.video_id));
    ++s.videos;
    s.frames += v.frames.frames();
    int prev = -1;
    for (const auto& f : v.annotations.frames) {
      if (!f.labels.empty()) ++s.labeled_frames;
      const int cls = f.labels.empty() ? -1 : f.labels.front().class_id;
      if (cls >= 0 && cls != prev) ++s.runs[cls];
      prev = cls;
    }
    set.videos.push_back(std::move(v.annotations));
  }
  write_annotations(detail::join(out, "annotations.txt"), set);
  return s;
}

}  // namespace ryolo
