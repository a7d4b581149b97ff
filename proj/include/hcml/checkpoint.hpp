// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hcml/network.hpp"

namespace hcml {

namespace detail {

inline const char* b64_alphabet() {
  return "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

inline std::string base64_encode(const std::uint8_t* data, std::size_t len) {
  const char* tab = b64_alphabet();
  std::string out;
  out.reserve((len + 2) / 3 * 4);
  for (std::size_t i = 0; i < len; i += 3) {
    std::uint32_t v = static_cast<std::uint32_t>(data[i]) << 16;
    if (i + 1 < len) v |= static_cast<std::uint32_t>(data[i + 1]) << 8;
    if (i + 2 < len) v |= data[i + 2];
    out.push_back(tab[(v >> 18) & 63]);
    out.push_back(tab[(v >> 12) & 63]);
    out.push_back(i + 1 < len ? tab[(v >> 6) & 63] : '=');
    out.push_back(i + 2 < len ? tab[v & 63] : '=');
  }
  return out;
}

inline std::vector<std::uint8_t> base64_decode(const std::string& s) {
  std::array<int, 256> rev;
  rev.fill(-1);
  const char* tab = b64_alphabet();
  for (int i = 0; i < 64; ++i) rev[static_cast<unsigned char>(tab[i])] = i;
  std::vector<std::uint8_t> out;
  std::uint32_t buf = 0;
  int bits = 0;
  for (char ch : s) {
    if (ch == '=' || ch == '\n') continue;
    const int v = rev[static_cast<unsigned char>(ch)];
    if (v < 0) throw std::runtime_error("base64_decode: invalid character");
    buf = (buf << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((buf >> bits) & 0xff));
    }
  }
  return out;
}

// Raw little-endian doubles, so round trips are bit-exact.
inline std::string encode_doubles(const Vec& v) {
  static_assert(sizeof(double) == 8);
  return base64_encode(reinterpret_cast<const std::uint8_t*>(v.data()), v.size() * 8);
}

inline Vec decode_doubles(const std::string& s, std::size_t expected) {
  const std::vector<std::uint8_t> bytes = base64_decode(s);
  if (bytes.size() != expected * 8)
    throw std::runtime_error("checkpoint: array byte-length mismatch");
  Vec v(expected);
  std::memcpy(v.data(), bytes.data(), bytes.size());
  return v;
}

}  // namespace detail

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json model_config_to_json(const ModelConfig& cfg) {
  return {{"p", cfg.p},
          {"h", cfg.h},
          {"w", cfg.w},
          {"c", cfg.c},
          {"branch_hidden", cfg.branch_hidden},
          {"embed_dim", cfg.embed_dim},
          {"n_classes", cfg.n_classes},
          {"leaky_slope", cfg.leaky_slope}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.p = j.at("p");
  cfg.h = j.at("h");
  cfg.w = j.at("w");
  cfg.c = j.at("c");
  cfg.branch_hidden = j.at("branch_hidden");
  cfg.embed_dim = j.at("embed_dim");
  cfg.n_classes = j.at("n_classes");
  cfg.leaky_slope = j.at("leaky_slope");
  return cfg;
}

inline void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                            const ModelParams& params) {
  nlohmann::json j;
  j["version"] = kCheckpointVersion;
  j["config"] = model_config_to_json(cfg);
  nlohmann::json arrays = nlohmann::json::object();
  for (int b = 0; b < 2; ++b) {
    arrays["branch_w" + std::to_string(b)] = detail::encode_doubles(params.branch_w[b].data);
    arrays["branch_b" + std::to_string(b)] = detail::encode_doubles(params.branch_b[b]);
  }
  for (int s = 0; s < cfg.p; ++s) {
    arrays["reduce_w" + std::to_string(s)] = detail::encode_doubles(params.reduce_w[s].data);
    arrays["reduce_b" + std::to_string(s)] = detail::encode_doubles(params.reduce_b[s]);
    arrays["cls_w" + std::to_string(s)] = detail::encode_doubles(params.cls_w[s].data);
    arrays["cls_b" + std::to_string(s)] = detail::encode_doubles(params.cls_b[s]);
  }
  j["params"] = std::move(arrays);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out << j.dump(2) << "\n";
}

inline std::pair<ModelConfig, ModelParams> load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  nlohmann::json j;
  in >> j;
  if (j.at("version").get<int>() != kCheckpointVersion)
    throw std::runtime_error("load_checkpoint: unsupported version");
  const ModelConfig cfg = model_config_from_json(j.at("config"));
  cfg.validate();

  const auto& arrays = j.at("params");
  ModelParams p;
  const std::size_t hidden = static_cast<std::size_t>(cfg.branch_hidden);
  const std::size_t d = static_cast<std::size_t>(cfg.embed_dim);
  const std::size_t nc = static_cast<std::size_t>(cfg.n_classes);
  for (int b = 0; b < 2; ++b) {
    p.branch_w[b] = Mat(hidden, static_cast<std::size_t>(cfg.c));
    p.branch_w[b].data = detail::decode_doubles(arrays.at("branch_w" + std::to_string(b)),
                                                hidden * static_cast<std::size_t>(cfg.c));
    p.branch_b[b] = detail::decode_doubles(arrays.at("branch_b" + std::to_string(b)), hidden);
  }
  p.reduce_w.resize(cfg.p);
  p.reduce_b.resize(cfg.p);
  p.cls_w.resize(cfg.p);
  p.cls_b.resize(cfg.p);
  for (int s = 0; s < cfg.p; ++s) {
    p.reduce_w[s] = Mat(d, hidden);
    p.reduce_w[s].data = detail::decode_doubles(arrays.at("reduce_w" + std::to_string(s)),
                                                d * hidden);
    p.reduce_b[s] = detail::decode_doubles(arrays.at("reduce_b" + std::to_string(s)), d);
    p.cls_w[s] = Mat(nc, d);
    p.cls_w[s].data = detail::decode_doubles(arrays.at("cls_w" + std::to_string(s)), nc * d);
    p.cls_b[s] = detail::decode_doubles(arrays.at("cls_b" + std::to_string(s)), nc);
  }
  return {cfg, std::move(p)};
}

}  // namespace hcml
