#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "ryolo/boxes.hpp"
#include "ryolo/clips.hpp"
#include "ryolo/config.hpp"
#include "ryolo/error.hpp"
#include "ryolo/io.hpp"
#include "ryolo/rng.hpp"

namespace ryolo {

// Classes of the synthetic set. The two direction classes render identically
// and only differ in horizontal motion; the others differ in appearance.
enum class SynthClass : int {
  moving_left = 0,
  moving_right = 1,
  ring = 2,
  cross = 3,
};

inline constexpr int kSynthClasses = 4;

inline bool is_direction_class(int c) { return c == 0 || c == 1; }

struct SynthVideo {
  FrameArchive frames;
  VideoAnnotations annotations;
};

namespace detail {

inline void draw_object(std::uint8_t* img, std::size_t size, int cls, long x0, long y0, long s) {
  auto put = [&](long x, long y, std::uint8_t v) {
    if (x >= 0 && y >= 0 && x < static_cast<long>(size) && y < static_cast<long>(size)) {
      img[static_cast<std::size_t>(y) * size + static_cast<std::size_t>(x)] = v;
    }
  };
  const long border = std::max(2L, s / 5);
  const long arm = std::max(2L, s / 3);
  const long mid0 = (s - arm) / 2;
  for (long dy = 0; dy < s; ++dy) {
    for (long dx = 0; dx < s; ++dx) {
      bool on = false;
      std::uint8_t v = 230;
      switch (static_cast<SynthClass>(cls)) {
        case SynthClass::moving_left:
        case SynthClass::moving_right:
          on = true;
          v = 200;
          break;
        case SynthClass::ring:
          on = dx < border || dy < border || dx >= s - border || dy >= s - border;
          break;
        case SynthClass::cross:
          on = (dx >= mid0 && dx < mid0 + arm) || (dy >= mid0 && dy < mid0 + arm);
          break;
      }
      if (on) put(x0 + dx, y0 + dy, v);
    }
  }
}

inline int pick_class(const std::vector<double>& weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  double r = rng.uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (r < weights[i]) return static_cast<int>(i);
    r -= weights[i];
  }
  return static_cast<int>(weights.size()) - 1;
}

}  // namespace detail

// One video of single-object action runs separated by empty stretches, on a
// uniform-noise background. Unlabeled frames are recorded explicitly.
inline SynthVideo generate_video(const SynthConfig& cfg, const std::string& video_id, Rng& rng) {
  require(cfg.size >= 16 && cfg.min_object >= 4 && cfg.min_object <= cfg.max_object &&
              cfg.max_object < cfg.size / 2,
          ErrorKind::InvalidArgument, "synth: object sizes must fit the frame");
  require(!cfg.class_weights.empty() && cfg.class_weights.size() <= kSynthClasses, ErrorKind::InvalidArgument,
          "synth: class_weights must list 1 to 4 weights");
  require(cfg.min_run >= 1 && cfg.min_run <= cfg.max_run && cfg.min_gap <= cfg.max_gap && cfg.speed > 0.0,
          ErrorKind::InvalidArgument, "synth: bad run/gap/speed settings");

  const std::size_t S = cfg.size;
  const std::size_t F = cfg.frames_per_video;
  SynthVideo v;
  v.frames = FrameArchive(F, 1, S, S);
  v.annotations.video_id = video_id;
  std::vector<std::vector<BoxLabel>> labels(F);

  long t = rng.range(static_cast<long>(cfg.min_gap), static_cast<long>(cfg.max_gap));
  while (t < static_cast<long>(F)) {
    const int cls = detail::pick_class(cfg.class_weights, rng);
    const long s = rng.range(static_cast<long>(cfg.min_object), static_cast<long>(cfg.max_object));
    long dur = rng.range(static_cast<long>(cfg.min_run), static_cast<long>(cfg.max_run));
    const double room = static_cast<double>(S) - static_cast<double>(s);
    double x, y, vx, vy;
    if (is_direction_class(cls)) {
      // Start uniformly over the positions that keep the whole path inside;
      // left and right movers then share one position distribution.
      dur = std::min(dur, static_cast<long>(room / cfg.speed));
      const double travel = cfg.speed * static_cast<double>(dur);
      const double start = rng.uniform(0.0, room - travel);
      vx = cls == 1 ? cfg.speed : -cfg.speed;
      x = cls == 1 ? start : room - start;
      y = rng.uniform(0.0, room);
      vy = 0.0;
    } else {
      const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
      vx = cfg.speed * std::cos(angle);
      vy = cfg.speed * std::sin(angle);
      x = rng.uniform(0.0, room);
      y = rng.uniform(0.0, room);
    }
    for (long k = 0; k < dur && t + k < static_cast<long>(F); ++k) {
      const long xi = std::clamp(std::lround(x), 0L, static_cast<long>(room));
      const long yi = std::clamp(std::lround(y), 0L, static_cast<long>(room));
      auto& frame_labels = labels[static_cast<std::size_t>(t + k)];
      frame_labels.push_back({cls, Box{(static_cast<double>(xi) + 0.5 * static_cast<double>(s)) / static_cast<double>(S),
                                       (static_cast<double>(yi) + 0.5 * static_cast<double>(s)) / static_cast<double>(S),
                                       static_cast<double>(s) / static_cast<double>(S),
                                       static_cast<double>(s) / static_cast<double>(S)}});
      x += vx;
      y += vy;
      if (x < 0.0 || x > room) {
        vx = -vx;
        x = std::clamp(x, 0.0, room);
      }
      if (y < 0.0 || y > room) {
        vy = -vy;
        y = std::clamp(y, 0.0, room);
      }
    }
    t += dur + rng.range(static_cast<long>(cfg.min_gap), static_cast<long>(cfg.max_gap));
  }

  for (std::size_t f = 0; f < F; ++f) {
    std::uint8_t* img = v.frames.frame_pixels(f);
    for (std::size_t i = 0; i < S * S; ++i) {
      img[i] = static_cast<std::uint8_t>(std::floor(rng.uniform() * cfg.noise));
    }
    for (const auto& l : labels[f]) {
      const long s = std::lround(l.box.w * static_cast<double>(S));
      const long x0 = std::lround(l.box.cx * static_cast<double>(S) - 0.5 * static_cast<double>(s));
      const long y0 = std::lround(l.box.cy * static_cast<double>(S) - 0.5 * static_cast<double>(s));
      detail::draw_object(img, S, l.class_id, x0, y0, s);
    }
    v.annotations.frames.push_back({static_cast<long>(f), labels[f]});
  }
  v.annotations.max_frame = static_cast<long>(F) - 1;
  return v;
}

inline std::string synth_video_id(std::size_t i) { return "vid" + std::to_string(i); }

inline std::vector<SynthVideo> generate_dataset(const SynthConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SynthVideo> out;
  for (std::size_t i = 0; i < cfg.videos; ++i) {
    Rng sub = rng.fork(i);
    out.push_back(generate_video(cfg, synth_video_id(i), sub));
  }
  return out;
}

}  // namespace ryolo
