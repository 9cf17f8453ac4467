#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lapsr/model.hpp"

namespace lapsr {

enum class CheckpointErrorKind {
  io,
  bad_magic,
  bad_version,
  bad_header,
  shape_mismatch,
  truncated,
};

class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(CheckpointErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  CheckpointErrorKind kind() const { return kind_; }

 private:
  CheckpointErrorKind kind_;
};

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

inline nlohmann::json config_to_json(const LapSRNConfig& c) {
  return {{"scale", c.scale},
          {"depth_d", c.depth_d},
          {"channels", c.channels},
          {"lrelu_slope", c.lrelu_slope},
          {"use_pyramid", c.use_pyramid},
          {"use_residual", c.use_residual},
          {"loss_kind", loss_kind_name(c.loss_kind)},
          {"charbonnier_eps", c.charbonnier_eps}};
}

inline LapSRNConfig config_from_json(const nlohmann::json& j) {
  LapSRNConfig c;
  c.scale = j.at("scale").get<int>();
  c.depth_d = j.at("depth_d").get<int>();
  c.channels = j.at("channels").get<int>();
  c.lrelu_slope = j.at("lrelu_slope").get<double>();
  c.use_pyramid = j.at("use_pyramid").get<bool>();
  c.use_residual = j.at("use_residual").get<bool>();
  c.loss_kind = loss_kind_from_name(j.at("loss_kind").get<std::string>());
  c.charbonnier_eps = j.at("charbonnier_eps").get<double>();
  return c;
}

}  // namespace detail

/// File layout: "LPSR" magic, version byte 0x01, 8-byte little-endian header
/// length, UTF-8 JSON header {config, ordered manifest of {name, shape}},
/// then raw little-endian float32 tensor data in manifest order.
inline void save_checkpoint(const LapSRNModel<float>& model, const std::filesystem::path& path) {
  nlohmann::json header;
  header["config"] = detail::config_to_json(model.config);
  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& p : model.params) {
    const Shape4 s = p.param.value.shape();
    manifest.push_back({{"name", p.name}, {"shape", {s.n, s.c, s.h, s.w}}});
  }
  header["manifest"] = std::move(manifest);
  const std::string header_bytes = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw CheckpointError(CheckpointErrorKind::io,
                          "save_checkpoint: cannot open '" + path.string() + "' for writing");
  out.write("LPSR", 4);
  const char version = 0x01;
  out.write(&version, 1);
  const std::uint64_t len = header_bytes.size();
  out.write(reinterpret_cast<const char*>(&len), 8);
  out.write(header_bytes.data(), std::streamsize(header_bytes.size()));
  for (const auto& p : model.params) {
    const auto& v = p.param.value;
    out.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * sizeof(float)));
  }
  if (!out)
    throw CheckpointError(CheckpointErrorKind::io,
                          "save_checkpoint: write failed for '" + path.string() + "'");
}

inline LapSRNModel<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw CheckpointError(CheckpointErrorKind::io,
                          "load_checkpoint: cannot open '" + path.string() + "'");
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, "LPSR", 4) != 0)
    throw CheckpointError(CheckpointErrorKind::bad_magic,
                          "load_checkpoint: '" + path.string() + "' is not an LPSR checkpoint");
  char version = 0;
  in.read(&version, 1);
  if (in.gcount() != 1 || version != 0x01)
    throw CheckpointError(CheckpointErrorKind::bad_version,
                          "load_checkpoint: unsupported checkpoint version " +
                              std::to_string(int(version)));
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 8);
  if (in.gcount() != 8)
    throw CheckpointError(CheckpointErrorKind::truncated, "load_checkpoint: truncated header length");
  std::string header_bytes(len, '\0');
  in.read(header_bytes.data(), std::streamsize(len));
  if (std::uint64_t(in.gcount()) != len)
    throw CheckpointError(CheckpointErrorKind::truncated, "load_checkpoint: truncated JSON header");

  nlohmann::json header = nlohmann::json::parse(header_bytes, nullptr, false);
  if (header.is_discarded() || !header.contains("config") || !header.contains("manifest"))
    throw CheckpointError(CheckpointErrorKind::bad_header,
                          "load_checkpoint: malformed JSON header");
  LapSRNConfig cfg;
  try {
    cfg = detail::config_from_json(header["config"]);
    cfg.validate();
  } catch (const std::exception& e) {
    throw CheckpointError(CheckpointErrorKind::bad_header,
                          std::string("load_checkpoint: bad config: ") + e.what());
  }

  LapSRNModel<float> model = build_model<float>(cfg, 0);
  const auto& manifest = header["manifest"];
  if (!manifest.is_array() || manifest.size() != model.params.size())
    throw CheckpointError(CheckpointErrorKind::shape_mismatch,
                          "load_checkpoint: manifest has " + std::to_string(manifest.size()) +
                              " tensors, architecture expects " +
                              std::to_string(model.params.size()));
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    const auto& entry = manifest[i];
    const std::string name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<std::vector<int>>();
    const Shape4 expect = model.params[i].param.value.shape();
    if (name != model.params[i].name || shape.size() != 4 ||
        !(Shape4{shape[0], shape[1], shape[2], shape[3]} == expect))
      throw CheckpointError(CheckpointErrorKind::shape_mismatch,
                            "load_checkpoint: tensor " + std::to_string(i) + " ('" + name +
                                "') does not match expected '" + model.params[i].name + "' " +
                                expect.str());
    auto& v = model.params[i].param.value;
    in.read(reinterpret_cast<char*>(v.data()), std::streamsize(v.size() * sizeof(float)));
    if (std::size_t(in.gcount()) != v.size() * sizeof(float))
      throw CheckpointError(CheckpointErrorKind::truncated,
                            "load_checkpoint: truncated tensor data at '" + name + "'");
  }
  return model;
}

}  // namespace lapsr
