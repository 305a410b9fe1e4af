#pragma once

// Checkpoint: "RYOLOCK1", u32 version, u64 header length, JSON header
// {"model": <detector config>, "anchors": [[w, h] x 9], "meta": {...}},
// then the model weights as a tensor container (see io.hpp).

#include <cstdint>
#include <fstream>
#include <string>
#include <utility>

#include "ryolo/config.hpp"
#include "ryolo/detector.hpp"
#include "ryolo/error.hpp"
#include "ryolo/io.hpp"

namespace ryolo {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Detector model;
  AnchorSet anchors;
  Json meta = Json::object();
};

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  Json header;
  header["model"] = detector_config_to_json(ck.model.config());
  Json anchors = Json::array();
  for (const auto& scale : ck.anchors.priors) {
    for (const auto& p : scale) anchors.push_back({p.w, p.h});
  }
  header["anchors"] = anchors;
  header["meta"] = ck.meta;
  const std::string text = header.dump();

  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorKind::Io, "cannot write checkpoint " + path);
  os.write("RYOLOCK1", 8);
  detail::put<std::uint32_t>(os, kCheckpointVersion);
  detail::put<std::uint64_t>(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  write_tensors(os, collect_tensors(ck.model));
  require(static_cast<bool>(os), ErrorKind::Io, "failed writing checkpoint " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorKind::Io, "cannot read checkpoint " + path);
  detail::expect_magic(is, "RYOLOCK1", path);
  const auto version = detail::get<std::uint32_t>(is, path);
  require(version == kCheckpointVersion, ErrorKind::Parse,
          path + ": unsupported checkpoint version " + std::to_string(version));
  const auto len = detail::get<std::uint64_t>(is, path);
  require(len < (1ULL << 24), ErrorKind::Parse, path + ": implausible header length");
  std::string text(len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(len))) fail(ErrorKind::Parse, path + ": truncated header");
  const Json header = parse_json_text(text, path);

  Checkpoint ck;
  try {
    ck.model = Detector(detector_config_from_json(header.at("model")));
    const Json& anchors = header.at("anchors");
    require(anchors.is_array() && anchors.size() == kScales * kAnchorsPerScale, ErrorKind::Parse,
            path + ": checkpoint must hold 9 anchors");
    for (std::size_t i = 0; i < anchors.size(); ++i) {
      ck.anchors.priors[i / kAnchorsPerScale][i % kAnchorsPerScale] = {anchors[i].at(0).get<double>(),
                                                                        anchors[i].at(1).get<double>()};
    }
    if (header.contains("meta")) ck.meta = header.at("meta");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, path + ": malformed checkpoint header: " + e.what());
  }
  ck.anchors.validate();
  assign_tensors(ck.model, read_tensors(is, path));
  return ck;
}

// Loads a checkpoint and checks that its architecture equals `expected`.
inline Checkpoint load_checkpoint_for(const std::string& path, const DetectorConfig& expected) {
  Checkpoint ck = load_checkpoint(path);
  require(ck.model.config() == expected, ErrorKind::Geometry,
          "checkpoint " + path + " was built for a different model configuration:\n  checkpoint: " +
              detector_config_to_json(ck.model.config()).dump() +
              "\n  config:     " + detector_config_to_json(expected).dump());
  return ck;
}

}  // namespace ryolo
