#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "hep2/dataset.hpp"
#include "hep2/error.hpp"

using namespace hep2;
namespace fs = std::filesystem;

namespace {

ErrorKind parse_error(const std::string& text) {
  std::istringstream in(text);
  try {
    parse_manifest(in, "/root", false);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("manifest unexpectedly parsed");
  return ErrorKind::io;
}

std::string big_manifest(std::size_t n) {
  std::ostringstream m;
  m << "#classes,Homogeneous,Speckled,Nucleolar,Centromere,NuclearMembrane,Golgi\n";
  m << "id,image,mask,label\n";
  const char* names[] = {"Homogeneous", "Speckled", "Nucleolar", "Centromere", "NuclearMembrane", "Golgi"};
  for (std::size_t i = 0; i < n; ++i) m << "c" << i << ",cell.pgm,," << names[i % 6] << "\n";
  return m.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path / "images");
    fs::create_directories(path / "masks");
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("manifest parsing") {
  std::istringstream in(
      "# free comment\n"
      "#channel,grayscale\n"
      "id,image,mask,label,specimen\n"
      "a,img/a.pgm,mask/a.pgm,Speckled,s1\r\n"
      "b,/abs/b.pgm,,Homogeneous\n"
      "\n"
      "c,img/c.pgm,,Speckled,s2\n");
  const auto m = parse_manifest(in, "/data", false);
  CHECK(m.classes == std::vector<std::string>{"Speckled", "Homogeneous"});
  CHECK(m.channel == ChannelMode::grayscale);
  REQUIRE(m.samples.size() == 3);
  CHECK(m.samples[0].image == fs::path("/data/img/a.pgm"));
  CHECK(m.samples[0].mask == fs::path("/data/mask/a.pgm"));
  CHECK(m.samples[0].specimen == "s1");
  CHECK(m.samples[1].image == fs::path("/abs/b.pgm"));
  CHECK_FALSE(m.samples[1].mask.has_value());
  CHECK(m.samples[2].label == 0);
  CHECK(m.class_index("Homogeneous") == 1);
  CHECK_THROWS_AS(m.class_index("Golgi"), Error);
}

TEST_CASE("manifest errors") {
  CHECK(parse_error("a,b,c,d\n") == ErrorKind::data);
  CHECK(parse_error("id,image,mask,label\na,x.pgm,,L\na,y.pgm,,L\n") == ErrorKind::data);
  CHECK(parse_error("#classes,A,B\nid,image,mask,label\na,x.pgm,,C\n") == ErrorKind::data);
  CHECK(parse_error("#classes,A,A\nid,image,mask,label\n") == ErrorKind::data);
  CHECK(parse_error("id,image,mask,label\na,x.pgm,L\n") == ErrorKind::data);
  CHECK(parse_error("id,image,mask,label\n,x.pgm,,L\n") == ErrorKind::data);
  CHECK(parse_error("#channel,blue\nid,image,mask,label\n") == ErrorKind::data);
  CHECK(parse_error("id,image,mask,label\n") == ErrorKind::data);
  std::istringstream missing("id,image,mask,label\na,/nonexistent/x.pgm,,L\n");
  CHECK_THROWS_AS(parse_manifest(missing, "/", true), Error);
  CHECK_THROWS_AS(load_manifest("/nonexistent/manifest.csv"), Error);
}

TEST_CASE("a large manifest may reuse one image file") {
  std::istringstream in(big_manifest(13596));
  const auto m = parse_manifest(in, "/x", false);
  CHECK(m.samples.size() == 13596);
  CHECK(m.classes.size() == 6);
  CHECK(m.samples[13595].label == 13595 % 6);
}

TEST_CASE("default split sizes follow floor plus remainder") {
  std::istringstream in(big_manifest(13596));
  const auto m = parse_manifest(in, "/x", false);
  const auto s = split(m, SplitSpec{});
  CHECK(s.train.size() == 8701);
  CHECK(s.validation.size() == 2175);
  CHECK(s.test.size() == 2720);
  std::set<std::string> ids;
  for (const auto* part : {&s.train, &s.validation, &s.test})
    for (const auto& c : *part) ids.insert(c.id);
  CHECK(ids.size() == 13596);

  const auto again = split(m, SplitSpec{});
  CHECK(again.train.front().id == s.train.front().id);
  SplitSpec other;
  other.seed = 9;
  CHECK_FALSE(split(m, other).train.front().id == s.train.front().id);
}

TEST_CASE("split edge cases") {
  std::vector<std::size_t> labels(50);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 5 == 0 ? 1 : 0;
  const auto all = split_indices(labels, 2, {1.0, 0.0, 0.0, 3, false});
  CHECK(all.train.size() == 50);
  CHECK(all.validation.empty());
  CHECK(all.test.empty());

  const auto strat = split_indices(labels, 2, {0.5, 0.2, 0.3, 3, true});
  auto count = [&](const std::vector<std::size_t>& idx, std::size_t k) {
    return std::count_if(idx.begin(), idx.end(), [&](std::size_t i) { return labels[i] == k; });
  };
  CHECK(count(strat.train, 0) == 20);
  CHECK(count(strat.train, 1) == 5);
  CHECK(count(strat.validation, 1) == 2);
  CHECK(count(strat.test, 1) == 3);

  CHECK_THROWS_AS(split_indices(labels, 2, {0.5, 0.5, 0.5, 0, false}), Error);
  CHECK_THROWS_AS(split_indices(labels, 2, {1.2, -0.2, 0.0, 0, false}), Error);
  CHECK_THROWS_AS(split_indices(labels, 1, {1, 0, 0, 0, true}), Error);
}

TEST_CASE("loading samples with augmentation and alignment") {
  TempDir dir("hep2_test_dataset");
  RasterImage img{20, 30, 1, 255, std::vector<std::uint16_t>(600)};
  BinaryMask mask(20, 30);
  for (std::size_t r = 0; r < 20; ++r)
    for (std::size_t c = 0; c < 30; ++c) {
      const bool in = (r - 10.0) * (r - 10.0) / 36.0 + (c - 15.0) * (c - 15.0) / 144.0 <= 1.0;
      mask.set(r, c, in);
      img.samples[r * 30 + c] = static_cast<std::uint16_t>(in ? 50 + 5 * (c % 7) : 10);
    }
  write_netpbm(dir.path / "images" / "a.pgm", img);
  write_mask(dir.path / "masks" / "a.pgm", mask);
  write_netpbm(dir.path / "images" / "b.pgm", img);
  {
    std::ofstream m(dir.path / "manifest.csv");
    m << "#classes,P,Q\nid,image,mask,label\n"
      << "a,images/a.pgm,masks/a.pgm,Q\n"
      << "b,images/b.pgm,,P\n";
  }
  const auto man = load_manifest(dir.path / "manifest.csv");
  REQUIRE(man.samples.size() == 2);

  const auto plain = load_samples(man.samples, man.channel, {}, AugmentationPlan(90));
  REQUIRE(plain.size() == 8);
  CHECK(plain[0].id == "a");
  CHECK(plain[1].id == "a@90");
  CHECK(plain[4].id == "b");
  CHECK(plain[4].label == 0);
  CHECK(plain[0].image.height() == 78);

  const auto aligned = load_sample(man.samples[0], man.channel, {true, 78});
  CHECK(aligned.label == 1);
  try {
    load_sample(man.samples[1], man.channel, {true, 78});
    FAIL("expected a data error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::data);
    CHECK(std::string(e.what()).find("'b'") != std::string::npos);
  }
  CHECK_THROWS_AS(load_samples(man.samples, man.channel, {true, 78}), Error);

  const auto aug = augment_dataset(std::span(plain).first(1), AugmentationPlan(36));
  CHECK(aug.size() == 10);
  CHECK(aug[9].id == "a@324");

  write_manifest(dir.path / "copy.csv", man);
  const auto back = load_manifest(dir.path / "copy.csv");
  CHECK(back.classes == man.classes);
  CHECK(back.samples[0].image == man.samples[0].image);
  CHECK(back.samples[1].mask == std::nullopt);
}

TEST_CASE("grayscale manifests reject RGB rasters") {
  TempDir dir("hep2_test_dataset_rgb");
  write_netpbm(dir.path / "images" / "c.ppm", RasterImage{2, 2, 3, 255, std::vector<std::uint16_t>(12, 7)});
  CellSample s{"c", dir.path / "images" / "c.ppm", std::nullopt, 0, ""};
  CHECK_THROWS_AS(load_sample(s, ChannelMode::grayscale, {}), Error);
  CHECK_NOTHROW(load_sample(s, ChannelMode::green, {}));
}
