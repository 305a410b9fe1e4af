#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ryolo/boxes.hpp"
#include "ryolo/error.hpp"
#include "ryolo/rng.hpp"

namespace ryolo {

struct FrameAnnotation {
  long frame_index = 0;
  std::vector<BoxLabel> labels;  // empty: frame known but unlabeled

  friend bool operator==(const FrameAnnotation&, const FrameAnnotation&) = default;
};

// Ordered frames of one video, start..end inclusive, every `stride`-th frame.
// Segmentation emits stride 1; sparse subsampling raises it.
struct ClipRecord {
  std::string video_id;
  long start_frame = 0;
  long end_frame = 0;
  long stride = 1;
  std::vector<std::vector<BoxLabel>> labels;  // one entry per kept frame

  std::size_t length() const {
    return static_cast<std::size_t>((end_frame - start_frame) / stride + 1);
  }
  long frame_at(std::size_t i) const { return start_frame + static_cast<long>(i) * stride; }

  friend bool operator==(const ClipRecord&, const ClipRecord&) = default;
};

struct SegmentOptions {
  long pad = 30;
  long max_gap = 30;
  long min_len = 100;
  long max_len = 1000;
  long overlap = 30;

  void validate() const {
    require(pad >= 0 && max_gap >= 0 && overlap >= 0, ErrorKind::InvalidArgument,
            "segment options must be non-negative");
    require(min_len >= 1 && min_len <= max_len, ErrorKind::InvalidArgument,
            "segment options: need 1 <= min_len <= max_len");
    require(overlap < max_len, ErrorKind::InvalidArgument,
            "segment options: overlap must be smaller than max_len");
  }
};

struct SegmentStats {
  std::size_t total_frames = 0;    // frames in the video(s)
  std::size_t kept_frames = 0;     // distinct frames covered by some clip
  std::size_t labeled_runs = 0;
  std::size_t skipped_short = 0;   // windows that could not reach min_len

  double reduction() const {
    return total_frames == 0 ? 0.0
                             : 1.0 - static_cast<double>(kept_frames) / static_cast<double>(total_frames);
  }

  SegmentStats& operator+=(const SegmentStats& o) {
    total_frames += o.total_frames;
    kept_frames += o.kept_frames;
    labeled_runs += o.labeled_runs;
    skipped_short += o.skipped_short;
    return *this;
  }
};

namespace detail {

// Grows [lo, hi] to min_len, half on each side, shifting into the other side
// when a video bound is hit. Returns false when the video is too short.
inline bool extend_to_min(long& lo, long& hi, long min_len, long last) {
  const long len = hi - lo + 1;
  if (len >= min_len) return true;
  const long need = min_len - len;
  lo -= need / 2;
  hi += need - need / 2;
  if (lo < 0) {
    hi += -lo;
    lo = 0;
  }
  if (hi > last) {
    lo -= hi - last;
    hi = last;
  }
  lo = std::max(lo, 0L);
  return hi - lo + 1 >= min_len;
}

}  // namespace detail

// Splits one video's annotations into clips: labeled runs (gaps <= max_gap
// bridged) padded on both sides, clamped to the video, split into
// overlapping max_len windows and extended to min_len.
inline std::vector<ClipRecord> segment_clips(const std::string& video_id,
                                             const std::vector<FrameAnnotation>& annotations,
                                             long video_frames, const SegmentOptions& opts,
                                             SegmentStats* stats = nullptr) {
  opts.validate();
  require(video_frames >= 0, ErrorKind::InvalidArgument, "segment_clips: negative video length");
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    require(annotations[i].frame_index >= 0 && annotations[i].frame_index < video_frames,
            ErrorKind::InvalidArgument,
            "segment_clips: frame " + std::to_string(annotations[i].frame_index) +
                " outside video " + video_id);
    if (i > 0) {
      require(annotations[i].frame_index > annotations[i - 1].frame_index, ErrorKind::InvalidArgument,
              "segment_clips: annotations of video " + video_id + " are not sorted by frame index (at " +
                  std::to_string(annotations[i].frame_index) + ")");
    }
  }

  std::map<long, const std::vector<BoxLabel>*> labeled;
  for (const auto& a : annotations) {
    if (!a.labels.empty()) labeled[a.frame_index] = &a.labels;
  }

  std::vector<std::pair<long, long>> runs;
  for (const auto& [f, _] : labeled) {
    if (!runs.empty() && f - runs.back().second - 1 <= opts.max_gap) {
      runs.back().second = f;
    } else {
      runs.emplace_back(f, f);
    }
  }

  SegmentStats local;
  local.total_frames = static_cast<std::size_t>(video_frames);
  local.labeled_runs = runs.size();
  const long last = video_frames - 1;
  std::vector<ClipRecord> clips;
  auto emit = [&](long lo, long hi) {
    if (!detail::extend_to_min(lo, hi, opts.min_len, last)) {
      ++local.skipped_short;
      return;
    }
    ClipRecord c;
    c.video_id = video_id;
    c.start_frame = lo;
    c.end_frame = hi;
    for (long f = lo; f <= hi; ++f) {
      auto it = labeled.find(f);
      c.labels.push_back(it == labeled.end() ? std::vector<BoxLabel>{} : *it->second);
    }
    clips.push_back(std::move(c));
  };

  for (const auto& [a, b] : runs) {
    const long lo = std::max(0L, a - opts.pad);
    const long hi = std::min(last, b + opts.pad);
    if (hi - lo + 1 <= opts.max_len) {
      emit(lo, hi);
      continue;
    }
    long start = lo;
    while (true) {
      const long end = std::min(start + opts.max_len - 1, hi);
      emit(start, end);
      if (end == hi) break;
      start = end - opts.overlap + 1;
    }
  }

  std::set<long> covered;
  for (const auto& c : clips) {
    for (long f = c.start_frame; f <= c.end_frame; ++f) covered.insert(f);
  }
  local.kept_frames = covered.size();
  if (stats) *stats += local;
  return clips;
}

// Seeded permutation of whole clips; frames inside a clip are untouched.
template <typename T>
std::vector<T> hybrid_shuffle(std::vector<T> clips, std::uint64_t seed) {
  Rng rng(seed);
  rng.shuffle(clips);
  return clips;
}

struct Chunk {
  std::size_t clip_id = 0;
  std::size_t offset = 0;  // position of the first frame within the clip
  std::vector<long> frames;
  std::vector<std::vector<BoxLabel>> labels;
  bool is_first = false;  // reset state before
  bool is_last = false;   // discard state after
};

inline std::vector<Chunk> chunk_clip(const ClipRecord& clip, std::size_t clip_id,
                                     std::size_t chunk_len) {
  require(chunk_len >= 1, ErrorKind::InvalidArgument, "chunk_clip: chunk_len must be >= 1");
  std::vector<Chunk> chunks;
  const std::size_t n = clip.length();
  for (std::size_t off = 0; off < n; off += chunk_len) {
    Chunk c;
    c.clip_id = clip_id;
    c.offset = off;
    const std::size_t end = std::min(n, off + chunk_len);
    for (std::size_t i = off; i < end; ++i) {
      c.frames.push_back(clip.frame_at(i));
      c.labels.push_back(i < clip.labels.size() ? clip.labels[i] : std::vector<BoxLabel>{});
    }
    c.is_first = off == 0;
    c.is_last = end == n;
    chunks.push_back(std::move(c));
  }
  return chunks;
}

template <typename T>
struct Split {
  std::vector<T> train;
  std::vector<T> val;
};

namespace detail {
inline std::size_t val_count(std::size_t n, double fraction, bool at_least_one) {
  require(fraction >= 0.0 && fraction <= 1.0, ErrorKind::InvalidArgument,
          "validation fraction must be in [0, 1]");
  auto m = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (at_least_one && fraction > 0.0 && n >= 1) m = std::max<std::size_t>(m, 1);
  return std::min(m, n);
}

inline std::vector<bool> pick_val(std::size_t n, std::size_t m, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx);
  std::vector<bool> val(n, false);
  for (std::size_t i = 0; i < m; ++i) val[idx[i]] = true;
  return val;
}
}  // namespace detail

// Frames grouped into blocks of `block` consecutive frame indices per video;
// round(val_fraction * blocks) whole blocks go to validation.
inline Split<FrameRef> split_frames_blocked(const std::vector<FrameRef>& frames,
                                            std::size_t block, double val_fraction,
                                            std::uint64_t seed) {
  require(block >= 1, ErrorKind::InvalidArgument, "split_frames_blocked: block must be >= 1");
  std::map<std::pair<std::string, long>, std::size_t> block_index;
  std::vector<std::size_t> block_of(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto key = std::make_pair(frames[i].video_id, frames[i].frame / static_cast<long>(block));
    auto [it, inserted] = block_index.emplace(key, block_index.size());
    block_of[i] = it->second;
  }
  // Block numbering follows key order so the split ignores input order.
  std::size_t ordinal = 0;
  for (auto& [key, id] : block_index) id = ordinal++;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    block_of[i] = block_index.at({frames[i].video_id, frames[i].frame / static_cast<long>(block)});
  }
  const std::size_t nb = block_index.size();
  const auto val = detail::pick_val(nb, detail::val_count(nb, val_fraction, false), seed);
  Split<FrameRef> out;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    (val[block_of[i]] ? out.val : out.train).push_back(frames[i]);
  }
  return out;
}

// round(val_fraction * n) clips (at least one when the fraction is positive)
// go to validation; both halves keep input order.
template <typename T>
Split<T> split_clips(const std::vector<T>& clips, double val_fraction, std::uint64_t seed) {
  const auto val = detail::pick_val(clips.size(), detail::val_count(clips.size(), val_fraction, true), seed);
  Split<T> out;
  for (std::size_t i = 0; i < clips.size(); ++i) (val[i] ? out.val : out.train).push_back(clips[i]);
  return out;
}

// Keeps every n-th frame starting at the first.
inline ClipRecord sparse_subsample(const ClipRecord& clip, std::size_t n) {
  require(n >= 1, ErrorKind::InvalidArgument, "sparse_subsample: n must be >= 1");
  const std::size_t len = clip.length();
  const std::size_t kept = (len + n - 1) / n;
  require(kept >= 2, ErrorKind::InvalidArgument,
          "sparse_subsample: keeping every " + std::to_string(n) + " frames leaves " +
              std::to_string(kept) + " frame(s)");
  ClipRecord out;
  out.video_id = clip.video_id;
  out.start_frame = clip.start_frame;
  out.stride = clip.stride * static_cast<long>(n);
  out.end_frame = clip.start_frame + static_cast<long>(kept - 1) * out.stride;
  for (std::size_t i = 0; i < len; i += n) {
    out.labels.push_back(i < clip.labels.size() ? clip.labels[i] : std::vector<BoxLabel>{});
  }
  return out;
}

struct ClassHistogram {
  std::map<int, std::size_t> clip_counts;  // clips containing the class

  // Most frequent classes, ties broken by ascending class id.
  std::vector<int> top_k(std::size_t k) const {
    std::vector<std::pair<int, std::size_t>> v(clip_counts.begin(), clip_counts.end());
    std::stable_sort(v.begin(), v.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<int> out;
    for (std::size_t i = 0; i < std::min(k, v.size()); ++i) out.push_back(v[i].first);
    return out;
  }
};

inline ClassHistogram class_histogram(const std::vector<ClipRecord>& clips) {
  ClassHistogram h;
  for (const auto& c : clips) {
    std::set<int> present;
    for (const auto& frame : c.labels) {
      for (const auto& l : frame) present.insert(l.class_id);
    }
    for (int id : present) ++h.clip_counts[id];
  }
  return h;
}

}  // namespace ryolo
