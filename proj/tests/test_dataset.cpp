#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <random>
#include <set>
#include <string>

#include "gcp/binary_io.hpp"
#include "gcp/dataset.hpp"
#include "gcp/error.hpp"
#include "gcp/label_io.hpp"
#include "support.hpp"

using namespace gcp;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary) << s;
}

// Three 4x4 images over classes {unlabeled, sky (stuff), car (things)}.
fs::path write_small_manifest(const test::TempDir& dir, ClassId poison = 1) {
  fs::create_directories(dir / "labels");
  write_text(dir / "classes.jsonl",
             "{\"index\":0,\"name\":\"unlabeled\",\"kind\":\"unlabeled\"}\n"
             "{\"index\":1,\"name\":\"sky\",\"kind\":\"stuff\"}\n"
             "{\"index\":2,\"name\":\"car\",\"kind\":\"things\"}\n");
  write_label_map_pgm(LabelMap(4, 4, 1), dir / "labels/a.pgm");
  write_label_map_pgm(LabelMap(4, 4, 2), dir / "labels/b.pgm");
  LabelMap c(4, 4, 1);
  c.at(3, 3) = poison;
  write_label_map_png(c, dir / "labels/c.png");
  const auto manifest = dir / "manifest.jsonl";
  write_text(manifest,
             "{\"format\":\"gcp-manifest\",\"classes\":\"classes.jsonl\"}\n"
             "{\"id\":\"a\",\"labelmap\":\"labels/a.pgm\",\"split\":\"train\"}\n"
             "{\"id\":\"b\",\"labelmap\":\"labels/b.pgm\",\"split\":\"train\"}\n"
             "{\"id\":\"c\",\"labelmap\":\"labels/c.png\",\"split\":\"val\"}\n");
  return manifest;
}

std::string error_of(const fs::path& manifest) {
  try {
    load_manifest(manifest);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("manifest with three valid entries loads in order") {
  test::TempDir dir("ds3");
  const auto ds = load_manifest(write_small_manifest(dir));
  REQUIRE(ds.size() == 3);
  CHECK(ds.images[0].id == "a");
  CHECK(ds.images[2].id == "c");
  CHECK(ds.images[2].split == "val");
  CHECK(ds.find("b") == std::optional<std::size_t>(1));
  CHECK(ds.labels[1] == LabelMap(4, 4, 2));
  CHECK(ds.labels[2].at(3, 3) == 1);
  CHECK(ds.classes.is_things(2));
  CHECK_FALSE(ds.descriptors.has_value());
}

TEST_CASE("label index equal to C names the offending image") {
  test::TempDir dir("dsbad");
  const auto msg = error_of(write_small_manifest(dir, 3));
  CHECK(msg.find("image 'c'") != std::string::npos);
  CHECK(msg.find("class index 3") != std::string::npos);
}

TEST_CASE("empty manifests are rejected") {
  test::TempDir dir("dsempty");
  write_text(dir / "empty.jsonl", "");
  CHECK(error_of(dir / "empty.jsonl").find("empty dataset") != std::string::npos);
  write_text(dir / "classes.jsonl",
             "{\"index\":0,\"name\":\"unlabeled\",\"kind\":\"unlabeled\"}\n{\"index\":1,\"name\":\"a\",\"kind\":\"stuff\"}\n");
  write_text(dir / "header.jsonl", "{\"format\":\"gcp-manifest\",\"classes\":\"classes.jsonl\"}\n");
  CHECK(error_of(dir / "header.jsonl").find("empty dataset") != std::string::npos);
}

TEST_CASE("missing label map and malformed records") {
  test::TempDir dir("dsmiss");
  const auto manifest = write_small_manifest(dir);
  fs::remove(dir / "labels/b.pgm");
  const auto msg = error_of(manifest);
  CHECK(msg.find("image 'b'") != std::string::npos);
  CHECK(msg.find("missing") != std::string::npos);

  write_text(manifest, "{\"format\":\"gcp-manifest\",\"classes\":\"classes.jsonl\"}\n{\"id\":\"a\"\n");
  CHECK_FALSE(error_of(manifest).empty());
}

TEST_CASE("class frequency counts images, not pixels") {
  Dataset ds;
  ds.classes = test::make_classes(4);
  LabelMap both(2, 2, 1);
  both.at(0, 0) = 2;
  ds.labels = {both, LabelMap(2, 2, 1), LabelMap(2, 2, kUnlabeled)};
  ds.images = {{"x", "x.pgm", "train", {}}, {"y", "y.pgm", "train", {}}, {"z", "z.pgm", "val", {}}};
  const auto f = class_frequency(ds);
  CHECK(f.counts == std::vector<std::size_t>{0, 2, 1, 0});  // f(1)=2, f(2)=1, f(3) absent

  const auto w = rare_class_weights(f);
  CHECK(w == std::vector<double>{1.0, 2.0, 1.0, 1.0});

  CHECK(class_frequency(ds, "val").counts == std::vector<std::size_t>{0, 0, 0, 0});
  CHECK_THROWS_AS(class_frequency(ds, "test"), Error);
}

TEST_CASE("class frequency is invariant under image permutation") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Dataset ds;
    ds.classes = test::make_classes(6);
    for (int i = 0; i < 9; ++i) {
      ds.labels.push_back(test::random_label_map(rng, 8, 8, 6, 0.2));
      ds.images.push_back({std::to_string(i), "", "train", {}});
    }
    const auto before = class_frequency(ds).counts;
    std::shuffle(ds.labels.begin(), ds.labels.end(), rng);
    CHECK(class_frequency(ds).counts == before);
  }
}

TEST_CASE("presence flags count the distinct labelled classes") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = test::random_label_map(rng, 10, 10, 7, 0.3);
    const auto flags = present_classes(m, 7);
    std::set<ClassId> distinct;
    for (ClassId v : m.labels()) {
      if (v != kUnlabeled) distinct.insert(v);
    }
    CHECK(std::count(flags.begin(), flags.end(), true) == static_cast<long>(distinct.size()));
    CHECK_FALSE(flags[kUnlabeled]);
  }
}

TEST_CASE("save then load reproduces maps and descriptors bit for bit") {
  std::mt19937_64 rng(5);
  Dataset ds;
  ds.classes = test::make_classes(300);  // forces 16-bit PGM
  DescriptorSet desc;
  desc.dim = 5;
  std::normal_distribution<float> g;
  for (int i = 0; i < 6; ++i) {
    auto m = test::random_label_map(rng, 12, 12, 300, 0.1);
    ds.labels.push_back(std::move(m));
    ds.images.push_back({"img " + std::to_string(i), "", i % 2 ? "val" : "train", {}});
    for (int k = 0; k < 5; ++k) desc.values.push_back(g(rng));
  }
  ds.descriptors = desc;
  test::TempDir dir("dsrt");
  const auto loaded = load_manifest(save_dataset(ds, dir.path()));
  REQUIRE(loaded.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(loaded.labels[i] == ds.labels[i]);
    CHECK(loaded.images[i].id == ds.images[i].id);
    CHECK(loaded.images[i].split == ds.images[i].split);
  }
  REQUIRE(loaded.descriptors.has_value());
  CHECK(loaded.descriptors->dim == 5);
  CHECK(std::memcmp(loaded.descriptors->values.data(), desc.values.data(), desc.values.size() * sizeof(float)) == 0);
  CHECK(loaded.classes.names == ds.classes.names);
  CHECK(loaded.classes.kinds == ds.classes.kinds);
}

TEST_CASE("descriptor rows may be remapped and must exist") {
  test::TempDir dir("dsdesc");
  const auto manifest = write_small_manifest(dir);
  DescriptorSet d;
  d.dim = 2;
  d.values = {0, 0, 1, 1, 2, 2};
  write_descriptors(d, dir / "d.gcpd");
  write_text(manifest,
             "{\"format\":\"gcp-manifest\",\"classes\":\"classes.jsonl\",\"descriptors\":\"d.gcpd\",\"descriptor_dim\":2}\n"
             "{\"id\":\"a\",\"labelmap\":\"labels/a.pgm\",\"descriptor\":2}\n"
             "{\"id\":\"b\",\"labelmap\":\"labels/b.pgm\",\"descriptor\":0}\n");
  const auto ds = load_manifest(manifest);
  REQUIRE(ds.descriptors.has_value());
  CHECK(ds.descriptors->values == std::vector<float>{2, 2, 0, 0});

  write_text(manifest,
             "{\"format\":\"gcp-manifest\",\"classes\":\"classes.jsonl\",\"descriptors\":\"d.gcpd\",\"descriptor_dim\":2}\n"
             "{\"id\":\"a\",\"labelmap\":\"labels/a.pgm\",\"descriptor\":7}\n");
  CHECK(error_of(manifest).find("image 'a'") != std::string::npos);

  write_text(manifest,
             "{\"format\":\"gcp-manifest\",\"classes\":\"classes.jsonl\",\"descriptors\":\"d.gcpd\",\"descriptor_dim\":3}\n"
             "{\"id\":\"a\",\"labelmap\":\"labels/a.pgm\"}\n");
  CHECK(error_of(manifest).find("does not match") != std::string::npos);
}

TEST_CASE("descriptor files reject truncation and bad magic") {
  DescriptorSet d;
  d.dim = 3;
  d.values = {1, 2, 3, 4, 5, 6};
  const auto bytes = encode_descriptors(d);
  CHECK(decode_descriptors(bytes, "mem").values == d.values);
  CHECK_THROWS_AS(decode_descriptors(bytes.substr(0, bytes.size() - 1), "mem"), Error);
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_descriptors(bad, "mem"), Error);
}

TEST_CASE("PGM reader handles comments and 16-bit maxval") {
  test::TempDir dir("pgm");
  write_text(dir / "c.pgm", std::string("P5\n# a comment\n2 1\n255\n") + char(3) + char(0));
  CHECK(read_label_map(dir / "c.pgm") == LabelMap(1, 2, std::vector<ClassId>{3, 0}));
  write_text(dir / "w.pgm", std::string("P5 1 1 65535\n") + char(1) + char(2));
  CHECK(read_label_map(dir / "w.pgm").at(0, 0) == 258);
  write_text(dir / "t.pgm", "P5 4 4 255\nab");
  CHECK_THROWS_AS(read_label_map(dir / "t.pgm"), Error);
  CHECK_THROWS_AS(read_label_map(dir / "x.bmp"), Error);
}
