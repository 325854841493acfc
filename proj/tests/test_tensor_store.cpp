// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include <nlohmann/json.hpp>

#include "fed/detector.hpp"
#include "fed/error.hpp"
#include "fed/npy.hpp"
#include "fed/tensor_store.hpp"
#include "fed/zip_archive.hpp"
#include "test_support.hpp"

namespace fed {
namespace {

using testing::TempDir;
using testing::data_file;

TEST(Npy, ReadsNumpyFloat32) {
  const Tensor t = load_real_npy(data_file("f4_2x3.npy"));
  EXPECT_EQ(t.shape, (Shape{2, 3}));
  EXPECT_EQ(t.data, (std::vector<double>{1.5, -2.0, 0.25, 0.0, 3.0, -0.5}));
}

TEST(Npy, ReadsNumpyHalfAndBytes) {
  const Tensor h = load_real_npy(data_file("f2_3.npy"));
  EXPECT_EQ(h.data, (std::vector<double>{1.0, -0.5, 65504.0}));
  const LabelMap u = load_label_npy(data_file("u1_3.npy"));
  EXPECT_EQ(u.data, (std::vector<std::int32_t>{0, 255, 7}));
  const LabelMap l = load_label_npy(data_file("i8_2x2.npy"));
  EXPECT_EQ(l.shape, (Shape{2, 2}));
  EXPECT_EQ(l.data, (std::vector<std::int32_t>{1, 2, 255, 0}));
}

TEST(Npy, RejectsFortranOrder) {
  EXPECT_THROW(load_real_npy(data_file("f8_fortran.npy")), FormatError);
}

TEST(Npy, ScalarHasEmptyShape) {
  const Tensor t = load_real_npy(data_file("f8_scalar.npy"));
  EXPECT_TRUE(t.shape.empty());
  EXPECT_EQ(t.data, std::vector<double>{2.5});
}

TEST(Npy, WriterMatchesNumpyBytes) {
  const Tensor t({2, 3}, std::vector<double>{1.5, -2.0, 0.25, 0.0, 3.0, -0.5});
  EXPECT_EQ(encode_real(t, DType::kFloat32), read_file(data_file("f4_2x3.npy")));
}

TEST(Npy, HeaderIsPaddedTo64) {
  const std::string bytes = encode_real(Tensor({7}, 1.0), DType::kFloat64);
  const auto header_len = static_cast<unsigned char>(bytes[8]) | (static_cast<unsigned char>(bytes[9]) << 8);
  EXPECT_EQ((10 + header_len) % 64, 0u);
  EXPECT_EQ(bytes[10 + header_len - 1], '\n');
}

TEST(Npy, TruncatedDataIsAnError) {
  std::string bytes = read_file(data_file("f4_2x3.npy"));
  bytes.pop_back();
  EXPECT_THROW(decode_npy(bytes, "x.npy"), FormatError);
  EXPECT_THROW(decode_npy(bytes.substr(0, 5), "x.npy"), FormatError);
}

TEST(Npy, Float64RoundTripIsBitExact) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 1e3);
  Tensor t({3, 5, 2});
  for (double& v : t.data) v = normal(rng);
  const Tensor back = blob_to_real(decode_npy(encode_real(t, DType::kFloat64), "t"), "t");
  EXPECT_EQ(back, t);
}

TEST(Zip, ReadsPythonStoredArchive) {
  const auto entries = zip_decode(read_file(data_file("python_store.zip")), "python_store.zip");
  ASSERT_EQ(entries.size(), 2u);
  EXPECT_EQ(entries[0].name, "a.txt");
  EXPECT_EQ(entries[0].data, "hello");
  EXPECT_EQ(entries[1].name, "dir/b.bin");
  EXPECT_EQ(entries[1].data, std::string("\x00\x01\x02\x03", 4));
}

TEST(Zip, RejectsCompressedEntries) {
  EXPECT_THROW(zip_decode(read_file(data_file("python_deflate.zip")), "d.zip"), FormatError);
}

TEST(Zip, RoundTripAndCorruption) {
  const std::vector<ZipEntry> in = {{"m.json", "{}"}, {"p.npy", std::string(1000, 'x')}};
  std::string bytes = zip_encode(in);
  const auto out = zip_decode(bytes, "z");
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[1].data, in[1].data);
  EXPECT_EQ(zip_encode(in), bytes);

  std::string flipped = bytes;
  flipped[100] ^= 0x01;  // inside the second entry's data
  EXPECT_THROW(zip_decode(flipped, "z"), FormatError);
  EXPECT_THROW(zip_decode(bytes.substr(0, bytes.size() / 2), "z"), FormatError);
}

DatasetSample small_sample(bool with_embeddings) {
  DatasetSample s;
  s.sample_id = "s0";
  s.logits = Tensor({3, 4, 4});
  for (std::size_t i = 0; i < s.logits.size(); ++i) s.logits[i] = static_cast<float>(0.25 * i - 3.0);
  LabelMap labels({4, 4}, 1);
  labels[5] = 255;
  labels[6] = 2;
  s.labels = labels;
  if (with_embeddings) s.embeddings = Tensor({2, 4, 4}, 0.5);
  return s;
}

TEST(TensorStore, SampleRoundTrip) {
  TempDir dir;
  const DatasetSample s = small_sample(true);
  write_sample(dir / "s0", s);
  const DatasetSample back = read_sample(dir / "s0");
  EXPECT_EQ(back.classes(), 3u);
  EXPECT_EQ(back.height(), 4u);
  EXPECT_EQ(back.logits, s.logits);
  EXPECT_EQ(back.embeddings, s.embeddings);
  EXPECT_EQ(back.labels, s.labels);
  EXPECT_EQ((*back.labels)[5], kVoidLabel);
}

TEST(TensorStore, SampleWithoutEmbeddings) {
  TempDir dir;
  write_sample(dir / "s0", small_sample(false));
  const DatasetSample back = read_sample(dir / "s0");
  EXPECT_FALSE(back.embeddings.has_value());
  EXPECT_EQ(back.width(), 4u);
}

TEST(TensorStore, LabelShapeMismatch) {
  TempDir dir;
  write_sample(dir / "s0", small_sample(false));
  save_label_npy(dir / "s0" / "labels.npy", LabelMap({5, 5}, 0));
  try {
    read_sample(dir / "s0");
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("labels.npy"), std::string::npos) << e.what();
  }
}

TEST(TensorStore, LabelValueOutOfRange) {
  TempDir dir;
  write_sample(dir / "s0", small_sample(false));
  save_label_npy(dir / "s0" / "labels.npy", LabelMap({4, 4}, 3));
  EXPECT_THROW(read_sample(dir / "s0"), FormatError);
}

TEST(TensorStore, MissingLogits) {
  TempDir dir;
  std::filesystem::create_directories(dir / "empty");
  EXPECT_THROW(read_sample(dir / "empty"), IoError);
}

TEST(TensorStore, LabelsOptionalWhenAsked) {
  TempDir dir;
  write_sample(dir / "s0", small_sample(false));
  std::filesystem::remove(dir / "s0" / "labels.npy");
  EXPECT_THROW(read_sample(dir / "s0"), IoError);
  EXPECT_FALSE(read_sample(dir / "s0", LabelPolicy::kOptional).labels.has_value());
}

TEST(TensorStore, ManifestRoundTripAndEmbeddingContract) {
  TempDir dir;
  DatasetManifest m;
  m.classes = 3;
  m.embedding_dims = 2;
  m.class_names = {"a", "b", "c"};
  m.sample_ids = {"s0"};
  m.model_id = "zoo/x";
  write_dataset_manifest(dir.path(), m);
  write_sample(dir / "s0", small_sample(true));
  const DatasetManifest back = read_dataset_manifest(dir.path());
  EXPECT_EQ(back.sample_ids, m.sample_ids);
  EXPECT_EQ(back.model_id, "zoo/x");
  EXPECT_NO_THROW(read_dataset_sample(dir.path(), back, "s0"));

  m.embedding_dims = 0;
  EXPECT_THROW(read_dataset_sample(dir.path(), m, "s0"), FormatError);
}

Detector random_detector(std::size_t blocks, std::uint64_t seed) {
  FlowConfig c;
  c.blocks = blocks;
  c.cond_channels = 2;
  c.kernel = 3;
  c.hidden = 4;
  Detector d = init_detector(c, CovMode::kFull, seed);
  d.classes = 5;
  d.embedding_dims = 4;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (ParamRef& p : parameter_refs(d))
    for (double& v : p.values) v = normal(rng);
  return d;
}

TEST(ModelArchive, ZeroModelRoundTrip) {
  TempDir dir;
  FlowConfig c;
  const Detector d = init_detector(c, CovMode::kDiag, 0).zeros_like();
  const ModelArchive a = to_archive(d);
  write_model(a, dir / "m.fedz");
  EXPECT_EQ(read_model(dir / "m.fedz"), a);
}

TEST(ModelArchive, RandomRoundTripIsBitExact) {
  TempDir dir;
  const ModelArchive a = to_archive(random_detector(4, 11));
  write_model(a, dir / "m.fedz");
  const ModelArchive b = read_model(dir / "m.fedz");
  EXPECT_EQ(a, b);
  EXPECT_EQ(encode_model(b), encode_model(a));
  const Detector d = from_archive(b);
  EXPECT_EQ(to_archive(d), a);
}

TEST(ModelArchive, ReportsBlockCount) {
  FlowConfig c;
  c.blocks = 8;
  const ModelArchive a = decode_model(encode_model(to_archive(init_detector(c, CovMode::kFull, 1))), "m");
  EXPECT_EQ(a.manifest.blocks, 8u);
  EXPECT_EQ(from_archive(a).flow.blocks.size(), 8u);
}

TEST(ModelArchive, MissingBlobNamesParameter) {
  const std::string bytes = encode_model(to_archive(random_detector(2, 5)));
  std::vector<ZipEntry> entries = zip_decode(bytes, "m");
  std::erase_if(entries, [](const ZipEntry& e) { return e.name == "blocks.1.mix.npy"; });
  try {
    decode_model(zip_encode(entries), "m");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("blocks.1.mix"), std::string::npos) << e.what();
  }
}

TEST(ModelArchive, VersionAndShapeChecks) {
  const std::string bytes = encode_model(to_archive(random_detector(2, 5)));
  std::vector<ZipEntry> entries = zip_decode(bytes, "m");
  std::vector<ZipEntry> wrong_version = entries;
  auto manifest = nlohmann::json::parse(wrong_version[0].data);
  manifest["version"] = 99;
  wrong_version[0].data = manifest.dump();
  EXPECT_THROW(decode_model(zip_encode(wrong_version), "m"), FormatError);

  std::vector<ZipEntry> wrong_shape = entries;
  for (ZipEntry& e : wrong_shape)
    if (e.name == "blocks.0.mix.npy") e.data = encode_real(Tensor({3}, 0.0), DType::kFloat64);
  EXPECT_THROW(decode_model(zip_encode(wrong_shape), "m"), ShapeError);

  EXPECT_THROW(decode_model(bytes.substr(0, bytes.size() - 30), "m"), FormatError);
}

}  // namespace
}  // namespace fed
