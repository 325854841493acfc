// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fed/detector.hpp"

#include <map>

#include "fed/error.hpp"

namespace fed {
namespace {

template <typename Derived>
std::span<double> span_of(Eigen::PlainObjectBase<Derived>& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

void add_conv(std::vector<ParamRef>& refs, const std::string& prefix, Conv2d& conv) {
  refs.push_back({prefix + ".weight", {conv.out, conv.in, conv.kernel, conv.kernel},
                  span_of(conv.weight), true});
  refs.push_back({prefix + ".bias", {conv.out}, span_of(conv.bias), false});
}

}  // namespace

Detector Detector::zeros_like() const {
  Detector z = *this;
  z.flow = FlowParams::zeros(flow.config);
  z.density = DensityParams{};
  z.density.mode = density.mode;
  return z;
}

Detector init_detector(const FlowConfig& config, CovMode cov_mode, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Detector d;
  d.flow = init_flow(config, rng);
  d.density.mode = cov_mode;
  d.seed = seed;
  return d;
}

std::vector<ParamRef> parameter_refs(Detector& d) {
  std::vector<ParamRef> refs;
  for (std::size_t l = 0; l < d.flow.blocks.size(); ++l) {
    FlowBlock& b = d.flow.blocks[l];
    const std::string p = "blocks." + std::to_string(l);
    refs.push_back({p + ".actnorm.log_scale", {2}, span_of(b.log_scale), false});
    refs.push_back({p + ".actnorm.bias", {2}, span_of(b.bias), false});
    refs.push_back({p + ".mix", {2, 2}, span_of(b.mix), true});
    add_conv(refs, p + ".subnet.0", b.in_conv);
    add_conv(refs, p + ".subnet.1", b.mid_conv);
    add_conv(refs, p + ".subnet.2", b.out_conv);
  }
  refs.push_back({"density.raw_beta", {2}, span_of(d.density.raw_beta), false});
  refs.push_back({"density.mean", {2}, span_of(d.density.mean), false});
  refs.push_back({"density.raw_diag", {2}, span_of(d.density.raw_diag), false});
  refs.push_back({"density.offdiag", {1}, {&d.density.offdiag, 1}, false});
  return refs;
}

ModelArchive to_archive(const Detector& detector) {
  Detector copy = detector;
  ModelArchive a;
  auto& m = a.manifest;
  m.classes = detector.classes;
  m.embedding_dims = detector.embedding_dims;
  m.blocks = detector.config().blocks;
  m.cond_channels = detector.config().cond_channels;
  m.kernel = detector.config().kernel;
  m.hidden_width = detector.config().hidden;
  m.cov_mode = std::string(cov_mode_name(detector.density.mode));
  m.seed = detector.seed;
  m.dropout_rate = detector.config().dropout;
  m.energy_clamp_eps = detector.energy_clamp_eps;
  for (const ParamRef& ref : parameter_refs(copy)) {
    a.params.emplace_back(ref.name, Tensor(ref.shape, std::vector<double>(ref.values.begin(), ref.values.end())));
  }
  return a;
}

Detector from_archive(const ModelArchive& archive) {
  const auto& m = archive.manifest;
  FlowConfig config;
  config.blocks = m.blocks;
  config.cond_channels = m.cond_channels;
  config.kernel = m.kernel;
  config.hidden = m.hidden_width;
  config.dropout = m.dropout_rate;
  config.validate();

  Detector d;
  d.flow = FlowParams::zeros(config);
  d.density.mode = parse_cov_mode(m.cov_mode);
  d.classes = m.classes;
  d.embedding_dims = m.embedding_dims;
  d.seed = m.seed;
  d.energy_clamp_eps = m.energy_clamp_eps;

  std::map<std::string, const Tensor*> blobs;
  for (const auto& [name, t] : archive.params) blobs.emplace(name, &t);
  const auto refs = parameter_refs(d);
  if (blobs.size() != refs.size()) {
    throw FormatError("model archive holds " + std::to_string(blobs.size()) +
                      " parameters, expected " + std::to_string(refs.size()) + " for L = " +
                      std::to_string(config.blocks));
  }
  for (const ParamRef& ref : refs) {
    auto it = blobs.find(ref.name);
    if (it == blobs.end()) throw FormatError("model archive is missing parameter '" + ref.name + "'");
    if (it->second->shape != ref.shape) {
      throw ShapeError("parameter '" + ref.name + "' has shape " + shape_string(it->second->shape) +
                       ", expected " + shape_string(ref.shape));
    }
    std::copy(it->second->data.begin(), it->second->data.end(), ref.values.begin());
  }
  return d;
}

FeatureMaps featurize_sample(const DatasetSample& sample, std::size_t cond_channels,
                             double energy_clamp_eps, bool with_labels) {
  FeatureMaps f;
  f.grid = {1, sample.height(), sample.width()};
  const auto n = static_cast<Eigen::Index>(f.grid.pixels());
  const Tensor z = energy_pair(sample.logits, energy_clamp_eps);
  f.z = Eigen::Map<const Matrix>(z.data.data(), 2, n);
  if (cond_channels > 0) {
    if (!sample.embeddings) {
      throw ConfigError("sample '" + sample.sample_id + "' has no embeddings but the detector expects P = " +
                        std::to_string(cond_channels) + " condition channels");
    }
    const Tensor a = pool_condition(*sample.embeddings, cond_channels);
    f.cond = Eigen::Map<const Matrix>(a.data.data(), static_cast<Eigen::Index>(cond_channels), n);
  } else {
    f.cond = Matrix(0, n);
  }
  if (with_labels) {
    if (!sample.labels) throw IoError("sample '" + sample.sample_id + "' has no labels.npy");
    f.labels = binary_labels(sample.logits, *sample.labels).m.data;
  }
  return f;
}

FeatureMaps concat_features(const std::vector<const FeatureMaps*>& parts) {
  if (parts.empty()) throw ConfigError("cannot build an empty batch");
  FeatureMaps out;
  out.grid = parts.front()->grid;
  out.grid.images = 0;
  for (const auto* p : parts) {
    if (p->grid.height != out.grid.height || p->grid.width != out.grid.width) {
      throw ShapeError("batch members must share one spatial size");
    }
    out.grid.images += p->grid.images;
  }
  const auto n = static_cast<Eigen::Index>(out.grid.pixels());
  out.z.resize(2, n);
  out.cond.resize(parts.front()->cond.rows(), n);
  Eigen::Index at = 0;
  for (const auto* p : parts) {
    const Eigen::Index k = p->z.cols();
    out.z.middleCols(at, k) = p->z;
    if (out.cond.rows() > 0) out.cond.middleCols(at, k) = p->cond;
    out.labels.insert(out.labels.end(), p->labels.begin(), p->labels.end());
    at += k;
  }
  return out;
}

Tensor score_sample(const Detector& detector, const DatasetSample& sample) {
  const FeatureMaps f = featurize_sample(sample, detector.config().cond_channels,
                                         detector.energy_clamp_eps, false);
  const FlowOutput out = flow_forward(detector.flow, f.grid, f.z, f.cond);
  const RowVector p = posterior(class_logits(out, detector.density));
  return Tensor({sample.height(), sample.width()}, std::vector<double>(p.data(), p.data() + p.size()));
}

}  // namespace fed
