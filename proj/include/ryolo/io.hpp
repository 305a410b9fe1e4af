#pragma once

// On-disk formats.
//
// Annotations (text, one record per line, '#' starts a comment):
//     <video_id> <frame_index> <class_id> <cx> <cy> <w> <h>
//     <video_id> <frame_index> -            frame present, no labels
// Box fields are normalized to [0, 1]. Records of one video appear in
// frame order; several records may share a frame.
//
// Clip manifest (text):
//     <clip_id> <video_id> <start_frame> <end_frame> <stride>
//
// Frame archive (binary, little endian): "RYFRAME1", u32 version,
// u32 frames, u32 channels, u32 height, u32 width, then frames*c*h*w u8
// pixels in (frame, channel, row, col) order.
//
// Tensor container (binary, little endian): "RYTENS01", u32 count, then per
// tensor u32 name length, name bytes, 4 x u64 dims (n, c, h, w), raw f64
// values. Round trips are bit exact.

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ryolo/boxes.hpp"
#include "ryolo/clips.hpp"
#include "ryolo/error.hpp"
#include "ryolo/tensor.hpp"

namespace ryolo {

// ---------------------------------------------------------------------------
// Annotations

struct VideoAnnotations {
  std::string video_id;
  std::vector<FrameAnnotation> frames;
  long max_frame = -1;
};

struct AnnotationSet {
  std::vector<VideoAnnotations> videos;  // first-appearance order

  VideoAnnotations* find(const std::string& id) {
    for (auto& v : videos) {
      if (v.video_id == id) return &v;
    }
    return nullptr;
  }
  const VideoAnnotations* find(const std::string& id) const {
    for (const auto& v : videos) {
      if (v.video_id == id) return &v;
    }
    return nullptr;
  }
};

inline AnnotationSet parse_annotations(std::istream& is, const std::string& source = "<annotations>") {
  AnnotationSet set;
  std::string line;
  std::size_t lineno = 0;
  auto bad = [&](const std::string& why) {
    fail(ErrorKind::Parse, source + ":" + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (!(tok.size() == 3 && tok[2] == "-") && tok.size() != 7) {
      bad("expected 'video frame class cx cy w h' or 'video frame -'");
    }
    long frame = 0;
    try {
      std::size_t used = 0;
      frame = std::stol(tok[1], &used);
      if (used != tok[1].size() || frame < 0) bad("bad frame index '" + tok[1] + "'");
    } catch (const std::logic_error&) {
      bad("bad frame index '" + tok[1] + "'");
    }
    VideoAnnotations* v = set.find(tok[0]);
    if (!v) {
      set.videos.push_back({tok[0], {}, -1});
      v = &set.videos.back();
    }
    if (v->frames.empty() || v->frames.back().frame_index != frame) {
      v->frames.push_back({frame, {}});
    }
    v->max_frame = std::max(v->max_frame, frame);
    if (tok.size() == 3) continue;

    BoxLabel label;
    double vals[4];
    try {
      std::size_t used = 0;
      label.class_id = std::stoi(tok[2], &used);
      if (used != tok[2].size() || label.class_id < 0) bad("bad class id '" + tok[2] + "'");
      for (int i = 0; i < 4; ++i) {
        vals[i] = std::stod(tok[3 + i], &used);
        if (used != tok[3 + i].size()) bad("bad number '" + tok[3 + i] + "'");
      }
    } catch (const std::logic_error&) {
      bad("bad numeric field");
    }
    label.box = {vals[0], vals[1], vals[2], vals[3]};
    if (!(vals[0] >= 0.0 && vals[0] <= 1.0 && vals[1] >= 0.0 && vals[1] <= 1.0 && vals[2] > 0.0 &&
          vals[2] <= 1.0 && vals[3] > 0.0 && vals[3] <= 1.0)) {
      bad("box must be normalized: cx, cy in [0, 1] and w, h in (0, 1]");
    }
    v->frames.back().labels.push_back(label);
  }
  return set;
}

inline AnnotationSet read_annotations(const std::string& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorKind::Io, "cannot read annotations " + path);
  return parse_annotations(is, path);
}

inline void write_annotations(std::ostream& os, const AnnotationSet& set) {
  os << "# video_id frame_index class_id cx cy w h   ('-' marks an unlabeled frame)\n";
  os << std::setprecision(17);
  for (const auto& v : set.videos) {
    for (const auto& f : v.frames) {
      if (f.labels.empty()) {
        os << v.video_id << ' ' << f.frame_index << " -\n";
        continue;
      }
      for (const auto& l : f.labels) {
        os << v.video_id << ' ' << f.frame_index << ' ' << l.class_id << ' ' << l.box.cx << ' '
           << l.box.cy << ' ' << l.box.w << ' ' << l.box.h << '\n';
      }
    }
  }
}

inline void write_annotations(const std::string& path, const AnnotationSet& set) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorKind::Io, "cannot write annotations " + path);
  write_annotations(os, set);
}

// ---------------------------------------------------------------------------
// Clip manifests

struct ManifestEntry {
  std::size_t clip_id = 0;
  std::string video_id;
  long start_frame = 0;
  long end_frame = 0;
  long stride = 1;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

inline void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorKind::Io, "cannot write manifest " + path);
  os << "# clip_id video_id start_frame end_frame stride\n";
  for (const auto& e : entries) {
    os << e.clip_id << ' ' << e.video_id << ' ' << e.start_frame << ' ' << e.end_frame << ' '
       << e.stride << '\n';
  }
}

inline std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorKind::Io, "cannot read manifest " + path);
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    ManifestEntry e;
    if (!(ls >> e.clip_id >> e.video_id >> e.start_frame >> e.end_frame >> e.stride) ||
        e.end_frame < e.start_frame || e.stride < 1) {
      fail(ErrorKind::Parse, path + ":" + std::to_string(lineno) + ": malformed manifest record");
    }
    out.push_back(e);
  }
  return out;
}

// Rebuilds the per-frame labels of a manifest clip from the annotations.
inline ClipRecord load_clip(const ManifestEntry& e, const AnnotationSet& annotations) {
  ClipRecord c;
  c.video_id = e.video_id;
  c.start_frame = e.start_frame;
  c.end_frame = e.end_frame;
  c.stride = e.stride;
  const VideoAnnotations* v = annotations.find(e.video_id);
  std::map<long, const std::vector<BoxLabel>*> by_frame;
  if (v) {
    for (const auto& f : v->frames) by_frame[f.frame_index] = &f.labels;
  }
  for (std::size_t i = 0; i < c.length(); ++i) {
    auto it = by_frame.find(c.frame_at(i));
    c.labels.push_back(it == by_frame.end() ? std::vector<BoxLabel>{} : *it->second);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Binary helpers

namespace detail {
template <typename T>
void put(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> buf;
  std::memcpy(buf.data(), &v, sizeof(T));
  os.write(buf.data(), sizeof(T));
}
template <typename T>
T get(std::istream& is, const std::string& what) {
  T v;
  std::array<char, sizeof(T)> buf;
  if (!is.read(buf.data(), sizeof(T))) fail(ErrorKind::Parse, what + ": truncated");
  std::memcpy(&v, buf.data(), sizeof(T));
  return v;
}
inline void expect_magic(std::istream& is, const char* magic, const std::string& what) {
  char buf[8];
  if (!is.read(buf, 8) || std::memcmp(buf, magic, 8) != 0) {
    fail(ErrorKind::Parse, what + ": bad magic header (expected " + std::string(magic, 8) + ")");
  }
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Frame archives

class FrameArchive {
 public:
  FrameArchive() = default;
  FrameArchive(std::size_t frames, std::size_t channels, std::size_t height, std::size_t width)
      : frames_(frames), channels_(channels), height_(height), width_(width),
        pixels_(frames * channels * height * width, 0) {}

  std::size_t frames() const { return frames_; }
  std::size_t channels() const { return channels_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t frame_size() const { return channels_ * height_ * width_; }

  std::uint8_t* frame_pixels(std::size_t f) { return pixels_.data() + f * frame_size(); }
  const std::uint8_t* frame_pixels(std::size_t f) const { return pixels_.data() + f * frame_size(); }

  // Pixel values scaled to [0, 1].
  Tensor4 frame(std::size_t f) const {
    require(f < frames_, ErrorKind::InvalidArgument,
            "frame " + std::to_string(f) + " outside archive of " + std::to_string(frames_));
    Tensor4 t(1, channels_, height_, width_);
    const std::uint8_t* p = frame_pixels(f);
    for (std::size_t i = 0; i < frame_size(); ++i) t[i] = p[i] / 255.0;
    return t;
  }

  Tensor4 frames_tensor(const std::vector<long>& indices) const {
    Tensor4 t(indices.size(), channels_, height_, width_);
    for (std::size_t k = 0; k < indices.size(); ++k) {
      require(indices[k] >= 0 && static_cast<std::size_t>(indices[k]) < frames_,
              ErrorKind::InvalidArgument, "frame index " + std::to_string(indices[k]) + " out of range");
      const std::uint8_t* p = frame_pixels(static_cast<std::size_t>(indices[k]));
      for (std::size_t i = 0; i < frame_size(); ++i) t[k * frame_size() + i] = p[i] / 255.0;
    }
    return t;
  }

  void save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    require(static_cast<bool>(os), ErrorKind::Io, "cannot write frame archive " + path);
    os.write("RYFRAME1", 8);
    detail::put<std::uint32_t>(os, 1);
    for (std::size_t v : {frames_, channels_, height_, width_}) detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(v));
    os.write(reinterpret_cast<const char*>(pixels_.data()), static_cast<std::streamsize>(pixels_.size()));
  }

  static FrameArchive load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(static_cast<bool>(is), ErrorKind::Io, "cannot read frame archive " + path);
    detail::expect_magic(is, "RYFRAME1", path);
    const auto version = detail::get<std::uint32_t>(is, path);
    require(version == 1, ErrorKind::Parse, path + ": unsupported frame archive version " + std::to_string(version));
    FrameArchive a;
    a.frames_ = detail::get<std::uint32_t>(is, path);
    a.channels_ = detail::get<std::uint32_t>(is, path);
    a.height_ = detail::get<std::uint32_t>(is, path);
    a.width_ = detail::get<std::uint32_t>(is, path);
    a.pixels_.resize(a.frames_ * a.frame_size());
    if (!is.read(reinterpret_cast<char*>(a.pixels_.data()), static_cast<std::streamsize>(a.pixels_.size()))) {
      fail(ErrorKind::Parse, path + ": truncated pixel data");
    }
    return a;
  }

  // Frame count from the header alone.
  static std::size_t peek_frames(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(static_cast<bool>(is), ErrorKind::Io, "cannot read frame archive " + path);
    detail::expect_magic(is, "RYFRAME1", path);
    detail::get<std::uint32_t>(is, path);
    return detail::get<std::uint32_t>(is, path);
  }

  friend bool operator==(const FrameArchive&, const FrameArchive&) = default;

 private:
  std::size_t frames_ = 0;
  std::size_t channels_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::uint8_t> pixels_;
};

inline std::string frame_archive_path(const std::string& frames_dir, const std::string& video_id) {
  return (std::filesystem::path(frames_dir) / (video_id + ".ryf")).string();
}

// ---------------------------------------------------------------------------
// Named tensor container

using NamedTensors = std::vector<std::pair<std::string, Tensor4>>;

inline void write_tensors(std::ostream& os, const NamedTensors& tensors) {
  os.write("RYTENS01", 8);
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    for (std::size_t d : {t.n(), t.c(), t.h(), t.w()}) detail::put<std::uint64_t>(os, d);
    for (double v : t.values()) detail::put<double>(os, v);
  }
}

inline NamedTensors read_tensors(std::istream& is, const std::string& what) {
  detail::expect_magic(is, "RYTENS01", what);
  const auto count = detail::get<std::uint32_t>(is, what);
  NamedTensors out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = detail::get<std::uint32_t>(is, what);
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) fail(ErrorKind::Parse, what + ": truncated tensor name");
    Shape4 s;
    s.n = detail::get<std::uint64_t>(is, what);
    s.c = detail::get<std::uint64_t>(is, what);
    s.h = detail::get<std::uint64_t>(is, what);
    s.w = detail::get<std::uint64_t>(is, what);
    require(s.n >= 1 && s.c >= 1 && s.h >= 1 && s.w >= 1 && s.size() < (1ULL << 32), ErrorKind::Parse,
            what + ": implausible dims for tensor " + name);
    std::vector<double> values(s.size());
    for (double& v : values) v = detail::get<double>(is, what);
    out.emplace_back(std::move(name), Tensor4(s, std::move(values)));
  }
  return out;
}

template <typename Model>
NamedTensors collect_tensors(const Model& model) {
  NamedTensors out;
  model.for_each_parameter([&](const std::string& n, const Tensor4& t) { out.emplace_back(n, t); });
  return out;
}

// Loads tensors into a model with exactly matching names and dims.
template <typename Model>
void assign_tensors(Model& model, const NamedTensors& tensors) {
  std::size_t i = 0;
  model.for_each_parameter([&](const std::string& n, Tensor4& t) {
    require(i < tensors.size(), ErrorKind::Geometry, "weights: missing tensor " + n);
    require(tensors[i].first == n, ErrorKind::Geometry,
            "weights: expected tensor " + n + ", found " + tensors[i].first);
    require(tensors[i].second.shape() == t.shape(), ErrorKind::Geometry,
            "weights: tensor " + n + " has dims " + to_string(tensors[i].second.shape()) +
                ", model expects " + to_string(t.shape()));
    t = tensors[i].second;
    ++i;
  });
  require(i == tensors.size(), ErrorKind::Geometry,
          "weights: " + std::to_string(tensors.size() - i) + " unexpected extra tensor(s)");
}

}  // namespace ryolo
