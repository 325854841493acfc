// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fed/config.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <sstream>

#include <toml.hpp>

#include "fed/error.hpp"
#include "fed/npy.hpp"

namespace fed {
namespace {

std::string where(const std::string& source, const toml::node& node) {
  std::ostringstream os;
  os << source << ":" << node.source().begin.line;
  return os.str();
}

[[noreturn]] void fail(const std::string& source, const toml::node& node, const std::string& what) {
  throw ConfigError(where(source, node) + ": " + what);
}

double as_real(const std::string& src, std::string_view key, const toml::node& n) {
  if (auto v = n.value<double>(); v && (n.is_floating_point() || n.is_integer())) return *v;
  fail(src, n, "'" + std::string(key) + "' must be a number");
}

std::size_t as_count(const std::string& src, std::string_view key, const toml::node& n) {
  const auto* v = n.as_integer();
  if (!v) fail(src, n, "'" + std::string(key) + "' must be an integer");
  if (v->get() < 0) fail(src, n, "'" + std::string(key) + "' must be non-negative");
  return static_cast<std::size_t>(v->get());
}

std::uint64_t as_seed(const std::string& src, std::string_view key, const toml::node& n) {
  return static_cast<std::uint64_t>(as_count(src, key, n));
}

std::string as_string(const std::string& src, std::string_view key, const toml::node& n) {
  const auto* v = n.as_string();
  if (!v) fail(src, n, "'" + std::string(key) + "' must be a string");
  return v->get();
}

using Handler = std::function<void(const toml::node&)>;

toml::table parse_table(std::string_view text, const std::string& source) {
  try {
    return toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << source << ":" << e.source().begin.line << ": " << e.description();
    throw ConfigError(os.str());
  }
}

void dispatch(const toml::table& table, const std::map<std::string, Handler, std::less<>>& handlers,
              const std::string& source) {
  for (const auto& [key, node] : table) {
    const auto it = handlers.find(key.str());
    if (it == handlers.end()) fail(source, node, "unknown key '" + std::string(key.str()) + "'");
    it->second(node);
  }
}

template <typename T>
T validated(T value, const std::string& source) {
  try {
    value.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return value;
}

}  // namespace

TrainFile parse_train_config(std::string_view text, const std::string& source) {
  const toml::table table = parse_table(text, source);
  TrainFile f;
  FlowConfig& fc = f.detector.flow;
  TrainConfig& tc = f.train;
  const std::string& s = source;
  const std::map<std::string, Handler, std::less<>> handlers = {
      {"L", [&](const toml::node& n) { fc.blocks = as_count(s, "L", n); }},
      {"P", [&](const toml::node& n) { fc.cond_channels = as_count(s, "P", n); }},
      {"K", [&](const toml::node& n) { fc.kernel = as_count(s, "K", n); }},
      {"hidden_width", [&](const toml::node& n) { fc.hidden = as_count(s, "hidden_width", n); }},
      {"dropout_rate", [&](const toml::node& n) { fc.dropout = as_real(s, "dropout_rate", n); }},
      {"cov_mode",
       [&](const toml::node& n) {
         try {
           f.detector.cov_mode = parse_cov_mode(as_string(s, "cov_mode", n));
         } catch (const ConfigError& e) {
           fail(s, n, e.what());
         }
       }},
      {"energy_clamp_eps",
       [&](const toml::node& n) {
         const double eps = as_real(s, "energy_clamp_eps", n);
         if (!(eps > 0.0)) fail(s, n, "'energy_clamp_eps' must be positive");
         f.detector.energy_clamp_eps = eps;
       }},
      {"lr_init", [&](const toml::node& n) { tc.lr_init = as_real(s, "lr_init", n); }},
      {"lr_warmup_start",
       [&](const toml::node& n) { tc.lr_warmup_start = as_real(s, "lr_warmup_start", n); }},
      {"warmup_iters", [&](const toml::node& n) { tc.warmup_iters = as_count(s, "warmup_iters", n); }},
      {"decay_every", [&](const toml::node& n) { tc.decay_every = as_count(s, "decay_every", n); }},
      {"decay_factor", [&](const toml::node& n) { tc.decay_factor = as_real(s, "decay_factor", n); }},
      {"total_iters", [&](const toml::node& n) { tc.total_iters = as_count(s, "total_iters", n); }},
      {"batch_size", [&](const toml::node& n) { tc.batch_size = as_count(s, "batch_size", n); }},
      {"weight_decay", [&](const toml::node& n) { tc.weight_decay = as_real(s, "weight_decay", n); }},
      {"seed", [&](const toml::node& n) { tc.seed = as_seed(s, "seed", n); }},
      {"grad_clip",
       [&](const toml::node& n) {
         const double c = as_real(s, "grad_clip", n);
         if (!(c > 0.0)) fail(s, n, "'grad_clip' must be positive");
         tc.grad_clip = c;
       }},
      {"crop",
       [&](const toml::node& n) {
         const auto* arr = n.as_array();
         if (!arr || arr->size() != 2) fail(s, n, "'crop' must be [height, width]");
         tc.crop_height = as_count(s, "crop", *arr->get(0));
         tc.crop_width = as_count(s, "crop", *arr->get(1));
       }},
  };
  dispatch(table, handlers, source);
  validated(fc, source);
  validated(tc, source);
  return f;
}

TrainFile load_train_config(const std::filesystem::path& path) {
  return parse_train_config(read_file(path), path.string());
}

SynthConfig parse_synth_config(std::string_view text, const std::string& source) {
  const toml::table table = parse_table(text, source);
  SynthConfig c;
  const std::string& s = source;
  const std::map<std::string, Handler, std::less<>> handlers = {
      {"C", [&](const toml::node& n) { c.classes = as_count(s, "C", n); }},
      {"V", [&](const toml::node& n) { c.embedding_dims = as_count(s, "V", n); }},
      {"H", [&](const toml::node& n) { c.height = as_count(s, "H", n); }},
      {"W", [&](const toml::node& n) { c.width = as_count(s, "W", n); }},
      {"n_samples", [&](const toml::node& n) { c.samples = as_count(s, "n_samples", n); }},
      {"rho_idm", [&](const toml::node& n) { c.rho_idm = as_real(s, "rho_idm", n); }},
      {"rho_ood", [&](const toml::node& n) { c.rho_ood = as_real(s, "rho_ood", n); }},
      {"margin_id", [&](const toml::node& n) { c.margin_id = as_real(s, "margin_id", n); }},
      {"energy_gap", [&](const toml::node& n) { c.energy_gap = as_real(s, "energy_gap", n); }},
      {"noise_std", [&](const toml::node& n) { c.noise_std = as_real(s, "noise_std", n); }},
      {"seed", [&](const toml::node& n) { c.seed = as_seed(s, "seed", n); }},
  };
  dispatch(table, handlers, source);
  return validated(c, source);
}

SynthConfig load_synth_config(const std::filesystem::path& path) {
  return parse_synth_config(read_file(path), path.string());
}

}  // namespace fed
