// Copyright 2026 The sonoclass Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "sonoclass/config.hpp"
#include "sonoclass/manifest.hpp"
#include "sonoclass/png_io.hpp"
#include "sonoclass/preprocess.hpp"
#include "sonoclass/rng.hpp"
#include "sonoclass/synthetic.hpp"
#include "test_util.hpp"

using namespace sonoclass;
using sonoclass::testutil::TempDir;
using sonoclass::testutil::read_file;
using sonoclass::testutil::thrown_code;
using sonoclass::testutil::write_file;

namespace {

GrayscaleImage random_image(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  GrayscaleImage img(h, w);
  for (double& p : img.pixels) p = std::floor(rng.uniform(0.0, 256.0));
  for (double& p : img.pixels) p = std::min(p, 255.0);
  return img;
}

// Hand-rolled PNG container so the decoder is tested against bytes the
// encoder under test never produced.
void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& payload) {
  const std::uint32_t len = static_cast<std::uint32_t>(payload.size());
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
  std::vector<std::uint8_t> body(type, type + 4);
  body.insert(body.end(), payload.begin(), payload.end());
  const auto crc = static_cast<std::uint32_t>(
      ::crc32(0L, body.data(), static_cast<uInt>(body.size())));
  out.insert(out.end(), body.begin(), body.end());
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(crc >> (8 * i)));
}

std::vector<std::uint8_t> make_png16(int height, int width,
                                     const std::vector<std::uint16_t>& samples) {
  std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  std::vector<std::uint8_t> ihdr;
  for (int v : {width, height}) {
    for (int i = 3; i >= 0; --i) ihdr.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  ihdr.insert(ihdr.end(), {16, 0, 0, 0, 0});  // depth 16, gray, default, none
  append_chunk(out, "IHDR", ihdr);

  std::vector<std::uint8_t> raw;
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);  // filter none
    for (int x = 0; x < width; ++x) {
      const std::uint16_t s = samples[static_cast<std::size_t>(y) * width + x];
      raw.push_back(static_cast<std::uint8_t>(s >> 8));
      raw.push_back(static_cast<std::uint8_t>(s & 0xff));
    }
  }
  uLongf bound = ::compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> idat(bound);
  REQUIRE(::compress2(idat.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 9) ==
          Z_OK);
  idat.resize(bound);
  append_chunk(out, "IDAT", idat);
  append_chunk(out, "IEND", {});
  return out;
}

ImageRecord record(const std::string& image_id, const std::string& patient_id, Label label,
                   SourceType source = SourceType::Still, const std::string& path = "",
                   bool augmented = false, const std::string& parent = "") {
  ImageRecord r;
  r.image_id = image_id;
  r.patient_id = patient_id;
  r.label = label;
  r.source = source;
  r.path = path.empty() ? image_id + ".png" : path;
  r.is_augmented = augmented;
  r.augment_parent = parent;
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// PNG codec

TEST_CASE("png round trip preserves pixels and dimensions") {
  for (auto [h, w] : {std::pair{1, 1}, {3, 5}, {64, 64}, {17, 33}}) {
    const GrayscaleImage img = random_image(h, w, 100 + h + w);
    const auto bytes = encode_png8(img);
    const PngReadResult back = decode_png(bytes);
    CHECK(back.image.height == h);
    CHECK(back.image.width == w);
    CHECK(back.bit_depth == 8);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
      CHECK(back.image.pixels[i] == img.pixels[i]);
    }
  }
}

TEST_CASE("png text chunks survive the round trip") {
  const GrayscaleImage img = random_image(4, 4, 7);
  const std::map<std::string, std::string> text = {
      {"config_hash", "abc123"}, {"image_id", "pos000_i001"}};
  const PngReadResult back = decode_png(encode_png8(img, text));
  CHECK(back.text == text);
}

TEST_CASE("png encoding is byte deterministic") {
  const GrayscaleImage img = random_image(32, 32, 9);
  CHECK(encode_png8(img) == encode_png8(img));
}

TEST_CASE("every scanline filter decodes to the same pixels") {
  const GrayscaleImage img = random_image(23, 31, 11);
  const auto reference = decode_png(encode_png8(img, {}, 0)).image.pixels;
  for (int filter = 1; filter <= 4; ++filter) {
    const auto pixels = decode_png(encode_png8(img, {}, filter)).image.pixels;
    CHECK(pixels == reference);
  }
}

TEST_CASE("png writer clamps and rounds intensities") {
  GrayscaleImage img(1, 4);
  img.pixels = {-5.0, 300.0, 17.4, 17.6};
  const PngReadResult back = decode_png(encode_png8(img));
  CHECK(back.image.pixels == std::vector<double>{0.0, 255.0, 17.0, 18.0});
}

TEST_CASE("sixteen bit grayscale reads rescaled into the byte range") {
  // 65535 = 257 * 255, so multiples of 257 map to exact integers.
  const std::vector<std::uint16_t> samples = {0, 257, 65535, 32896};
  const auto bytes = make_png16(2, 2, samples);
  const PngReadResult r = decode_png(bytes);
  CHECK(r.bit_depth == 16);
  CHECK(r.image.pixels[0] == 0.0);
  CHECK(r.image.pixels[1] == 1.0);
  CHECK(r.image.pixels[2] == 255.0);
  CHECK(r.image.pixels[3] == 128.0);
}

TEST_CASE("png decoder rejects garbage and color images") {
  CHECK(thrown_code([] { decode_png({1, 2, 3, 4}); }) == ErrorCode::UnsupportedImage);

  auto bytes = encode_png8(random_image(8, 8, 3));
  bytes.resize(bytes.size() / 2);
  CHECK(thrown_code([&] { decode_png(bytes); }).has_value());

  // RGB header: color type 2 in a hand-built container.
  std::vector<std::uint8_t> rgb = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  std::vector<std::uint8_t> ihdr = {0, 0, 0, 1, 0, 0, 0, 1, 8, 2, 0, 0, 0};
  append_chunk(rgb, "IHDR", ihdr);
  append_chunk(rgb, "IEND", {});
  CHECK(thrown_code([&] { decode_png(rgb); }) == ErrorCode::UnsupportedImage);
}

TEST_CASE("png file io writes and reads through disk") {
  TempDir dir("png");
  const GrayscaleImage img = random_image(12, 9, 21);
  write_png8(dir.sub("a.png"), img, {{"k", "v"}});
  const PngReadResult back = read_png(dir.sub("a.png"));
  CHECK(back.image.pixels == img.pixels);
  CHECK(back.text.at("k") == "v");
  CHECK(thrown_code([&] { read_png(dir.sub("missing.png")); }) == ErrorCode::MissingFile);
}

// ---------------------------------------------------------------------------
// Random source

TEST_CASE("rng streams are reproducible from the seed") {
  Rng a(99), b(99), c(100);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 50; ++i) {
    const auto va = a.next_u64();
    all_equal = all_equal && va == b.next_u64();
    any_diff = any_diff || va != c.next_u64();
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("uniform draws respect their ranges") {
  Rng rng(5);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.uniform(-3.5, 2.25);
    CHECK(v >= -3.5);
    CHECK(v <= 2.25);
  }
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto n = rng.uniform_int(7);
    CHECK(n < 7);
    seen.insert(n);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("gaussian draws have the requested moments") {
  Rng rng(17);
  double sum = 0.0, sq = 0.0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gaussian();
    sum += g;
    sq += g * g;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.03);
  CHECK(rng.gaussian(10.0, 0.0) == 10.0);
}

TEST_CASE("shuffle permutes deterministically") {
  std::vector<int> items(20);
  for (int i = 0; i < 20; ++i) items[i] = i;
  auto a = items, b = items;
  Rng r1(4), r2(4), r3(5);
  r1.shuffle(a);
  r2.shuffle(b);
  CHECK(a == b);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == items);
  auto c = items;
  r3.shuffle(c);
  CHECK(a != c);
}

TEST_CASE("rng state save and restore resumes the exact sequence") {
  Rng rng(23);
  for (int i = 0; i < 5; ++i) rng.next_u64();
  // One gaussian leaves the Box-Muller cache holding its pair value.
  rng.gaussian();
  const std::string state = rng.save_state();
  std::vector<double> expect;
  for (int i = 0; i < 6; ++i) expect.push_back(rng.gaussian());

  Rng fresh(0);
  fresh.restore_state(state);
  for (int i = 0; i < 6; ++i) CHECK(fresh.gaussian() == expect[i]);
}

TEST_CASE("derived seeds separate worker streams") {
  std::set<std::uint64_t> seeds;
  for (std::uint64_t stream = 0; stream < 200; ++stream) {
    seeds.insert(derive_seed(42, stream));
  }
  CHECK(seeds.size() == 200);
  CHECK(derive_seed(42, 3) == derive_seed(42, 3));
  CHECK(derive_seed(42, 3) != derive_seed(43, 3));
}

// ---------------------------------------------------------------------------
// Manifest

TEST_CASE("manifest save and load is the identity on records") {
  TempDir dir("manifest");
  Manifest m;
  m.records = {
      record("a1", "p1", Label::Positive),
      record("a2", "p1", Label::Positive, SourceType::VideoFrame),
      record("b1", "p2", Label::Negative),
      record("a1_aug1", "p1", Label::Positive, SourceType::Still, "a1_aug1.png", true, "a1"),
  };
  validate_manifest(m, false);
  save_manifest(m, dir.sub("m.csv"), "config_hash=deadbeef");
  const Manifest back = load_manifest(dir.sub("m.csv"), false);
  REQUIRE(back.records.size() == m.records.size());
  for (std::size_t i = 0; i < m.records.size(); ++i) CHECK(back.records[i] == m.records[i]);
  CHECK(read_file(dir.sub("m.csv")).rfind("# config_hash=deadbeef\n", 0) == 0);
}

TEST_CASE("manifest loader skips leading comment lines") {
  TempDir dir("manifest");
  write_file(dir.sub("m.csv"),
             "# one\n# two\nimage_id,patient_id,label,source,path,is_augmented,augment_parent\n"
             "x1,p1,positive,still,x1.png,0,\n"
             "y1,p2,negative,video_frame,y1.png,0,\n");
  const Manifest m = load_manifest(dir.sub("m.csv"), false);
  CHECK(m.records.size() == 2);
  CHECK(m.records[1].source == SourceType::VideoFrame);
  CHECK(m.base_dir == dir.str());
}

TEST_CASE("manifest validation rejects structural faults") {
  const auto check_invalid = [](std::vector<ImageRecord> records, ErrorCode expected) {
    Manifest m;
    m.records = std::move(records);
    CHECK(thrown_code([&] { validate_manifest(m, false); }) == expected);
  };

  check_invalid({record("a", "p1", Label::Positive), record("a", "p2", Label::Negative)},
                ErrorCode::DuplicateId);
  check_invalid({record("a", "p1", Label::Positive), record("b", "p1", Label::Negative)},
                ErrorCode::InconsistentPatientLabel);
  check_invalid({record("a_aug1", "p1", Label::Positive, SourceType::Still, "", true, "a")},
                ErrorCode::InvalidLineage);
  // Parent must itself be an original.
  check_invalid(
      {record("a", "p1", Label::Positive),
       record("a_aug1", "p1", Label::Positive, SourceType::Still, "", true, "a"),
       record("a_aug1_aug1", "p1", Label::Positive, SourceType::Still, "", true, "a_aug1")},
      ErrorCode::InvalidLineage);
  // Augmented row disagreeing with its parent's patient.
  check_invalid({record("a", "p1", Label::Positive), record("b", "p2", Label::Negative),
                 record("a_aug1", "p2", Label::Negative, SourceType::Still, "", true, "a")},
                ErrorCode::InvalidLineage);
}

TEST_CASE("manifest loader rejects malformed rows") {
  TempDir dir("manifest");
  const std::string header =
      "image_id,patient_id,label,source,path,is_augmented,augment_parent\n";

  write_file(dir.sub("short.csv"), header + "a,p1,positive,still,a.png,0\n");
  CHECK(thrown_code([&] { load_manifest(dir.sub("short.csv"), false); }) ==
        ErrorCode::MalformedRow);

  write_file(dir.sub("label.csv"), header + "a,p1,Positive,still,a.png,0,\n");
  CHECK(thrown_code([&] { load_manifest(dir.sub("label.csv"), false); }) ==
        ErrorCode::MalformedRow);

  write_file(dir.sub("flag.csv"), header + "a,p1,positive,still,a.png,2,\n");
  CHECK(thrown_code([&] { load_manifest(dir.sub("flag.csv"), false); }) ==
        ErrorCode::MalformedRow);

  write_file(dir.sub("source.csv"), header + "a,p1,positive,cine,a.png,0,\n");
  CHECK(thrown_code([&] { load_manifest(dir.sub("source.csv"), false); }) ==
        ErrorCode::MalformedRow);

  write_file(dir.sub("empty.csv"), "");
  CHECK(thrown_code([&] { load_manifest(dir.sub("empty.csv"), false); }) ==
        ErrorCode::MalformedRow);

  write_file(dir.sub("none.csv"), header);
  CHECK(load_manifest(dir.sub("none.csv"), false).records.empty());
}

TEST_CASE("file checking requires every referenced image on disk") {
  TempDir dir("manifest");
  write_png8(dir.sub("a.png"), random_image(4, 4, 1));
  write_file(dir.sub("m.csv"),
             "image_id,patient_id,label,source,path,is_augmented,augment_parent\n"
             "a,p1,positive,still,a.png,0,\n"
             "b,p2,negative,still,b.png,0,\n");
  CHECK(thrown_code([&] { load_manifest(dir.sub("m.csv"), true); }) == ErrorCode::MissingFile);
  CHECK(load_manifest(dir.sub("m.csv"), false).records.size() == 2);
}

TEST_CASE("summary counts match an independent scan") {
  Manifest m;
  Rng rng(31);
  std::size_t want_pos = 0, want_neg = 0, want_aug = 0, want_video = 0;
  std::set<std::string> pos_patients, neg_patients;
  for (int p = 0; p < 12; ++p) {
    const bool positive = p % 2 == 0;
    const std::string pid = "p" + std::to_string(p);
    const int n = 1 + static_cast<int>(rng.uniform_int(4));
    for (int i = 0; i < n; ++i) {
      ImageRecord r = record(pid + "_i" + std::to_string(i), pid,
                             positive ? Label::Positive : Label::Negative);
      if (rng.uniform01() < 0.3) {
        r.source = SourceType::VideoFrame;
        ++want_video;
      }
      (positive ? want_pos : want_neg) += 1;
      (positive ? pos_patients : neg_patients).insert(pid);
      m.records.push_back(r);
    }
  }
  m.records.push_back(record("p0_i0_aug1", "p0", Label::Positive, SourceType::Still, "", true,
                             "p0_i0"));
  want_aug = 1;
  want_pos += 1;
  validate_manifest(m, false);
  const DatasetSummary s = summarize(m);
  CHECK(s.n_images_positive == want_pos);
  CHECK(s.n_images_negative == want_neg);
  CHECK(s.n_patients_positive == pos_patients.size());
  CHECK(s.n_patients_negative == neg_patients.size());
  CHECK(s.n_augmented == want_aug);
  CHECK(s.n_video_frames == want_video);
}

TEST_CASE("summary handles a video frame evaluation set at full scale") {
  // Scale of the paper's second test set: 41,186 video frames per fold run.
  Manifest m;
  m.records.reserve(41186);
  for (int i = 0; i < 26250; ++i) {
    m.records.push_back(record("vp" + std::to_string(i), "vpp" + std::to_string(i / 50),
                               Label::Positive, SourceType::VideoFrame));
  }
  for (int i = 0; i < 14936; ++i) {
    m.records.push_back(record("vn" + std::to_string(i), "vnp" + std::to_string(i / 50),
                               Label::Negative, SourceType::VideoFrame));
  }
  validate_manifest(m, false);
  const DatasetSummary s = summarize(m);
  CHECK(s.total_images() == 41186);
  CHECK(s.n_video_frames == 41186);
  CHECK(s.n_images_positive == 26250);
  CHECK(s.n_images_negative == 14936);
}

// ---------------------------------------------------------------------------
// Preprocessing

TEST_CASE("intensity rescale maps the example grid exactly") {
  GrayscaleImage img(2, 2);
  img.pixels = {10, 20, 30, 40};
  const GrayscaleImage out = rescale_intensity(img);
  CHECK(out.pixels == std::vector<double>{0.0, 85.0, 170.0, 255.0});
}

TEST_CASE("constant images rescale to zero") {
  const GrayscaleImage out = rescale_intensity(GrayscaleImage(3, 3, 77.0));
  for (double p : out.pixels) CHECK(p == 0.0);
}

TEST_CASE("rescale is idempotent and spans the full range") {
  const GrayscaleImage img = random_image(20, 20, 41);
  const GrayscaleImage once = rescale_intensity(img);
  const GrayscaleImage twice = rescale_intensity(once);
  CHECK(once.pixels == twice.pixels);
  CHECK(*std::min_element(once.pixels.begin(), once.pixels.end()) == 0.0);
  CHECK(*std::max_element(once.pixels.begin(), once.pixels.end()) == 255.0);
}

TEST_CASE("center crop keeps the middle square") {
  GrayscaleImage img(480, 640);
  for (int y = 0; y < 480; ++y) {
    for (int x = 0; x < 640; ++x) img.at(y, x) = x;
  }
  const GrayscaleImage out = center_square_crop(img);
  CHECK(out.height == 480);
  CHECK(out.width == 480);
  CHECK(out.at(0, 0) == 80.0);
  CHECK(out.at(0, 479) == 559.0);

  // Odd trim discards the high-index side.
  GrayscaleImage tall(5, 4);
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 4; ++x) tall.at(y, x) = y;
  }
  const GrayscaleImage cropped = center_square_crop(tall);
  CHECK(cropped.height == 4);
  CHECK(cropped.at(0, 0) == 0.0);
  CHECK(cropped.at(3, 0) == 3.0);

  const GrayscaleImage square = random_image(7, 7, 2);
  CHECK(center_square_crop(square).pixels == square.pixels);
}

TEST_CASE("resize at the same side is the identity") {
  const GrayscaleImage img = random_image(16, 16, 5);
  CHECK(resize_square(img, 16).pixels == img.pixels);
}

TEST_CASE("resize matches a hand bilinear computation") {
  GrayscaleImage img(4, 4);
  for (int i = 0; i < 16; ++i) img.pixels[i] = i * 10.0;
  const GrayscaleImage out = resize_square(img, 2);
  // Output centers land at source coordinate 0.5 and 2.5 on each axis, so
  // each output pixel averages a 2x2 block.
  CHECK(out.at(0, 0) == doctest::Approx((0 + 10 + 40 + 50) / 4.0).epsilon(1e-12));
  CHECK(out.at(0, 1) == doctest::Approx((20 + 30 + 60 + 70) / 4.0).epsilon(1e-12));
  CHECK(out.at(1, 0) == doctest::Approx((80 + 90 + 120 + 130) / 4.0).epsilon(1e-12));
  CHECK(out.at(1, 1) == doctest::Approx((100 + 110 + 140 + 150) / 4.0).epsilon(1e-12));
}

TEST_CASE("resize never leaves the input intensity range") {
  const GrayscaleImage img = random_image(13, 13, 6);
  const double lo = *std::min_element(img.pixels.begin(), img.pixels.end());
  const double hi = *std::max_element(img.pixels.begin(), img.pixels.end());
  for (int target : {3, 7, 16, 40}) {
    const GrayscaleImage out = resize_square(img, target);
    CHECK(out.height == target);
    for (double p : out.pixels) {
      CHECK(p >= lo);
      CHECK(p <= hi);
    }
  }
  const GrayscaleImage up = resize_square(GrayscaleImage(1, 1, 42.0), 3);
  for (double p : up.pixels) CHECK(p == 42.0);
}

TEST_CASE("model input replicates one channel over three") {
  GrayscaleImage img(2, 2);
  img.pixels = {0.0, 51.0, 102.0, 255.0};
  const ModelInput in = to_model_input(img);
  CHECK(in.side() == 2);
  for (int c = 0; c < 3; ++c) {
    CHECK(in.at(c, 0, 0) == 0.0);
    CHECK(in.at(c, 0, 1) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(in.at(c, 1, 1) == 1.0);
  }
  CHECK(thrown_code([] { to_model_input(GrayscaleImage(2, 3, 0.0)); }) ==
        ErrorCode::NonSquareInput);
}

TEST_CASE("standardize runs rescale then crop then resize") {
  GrayscaleImage img(480, 640);
  Rng rng(8);
  for (double& p : img.pixels) p = rng.uniform(40.0, 90.0);
  const GrayscaleImage out = standardize(img, 512);
  CHECK(out.height == 512);
  CHECK(out.width == 512);
  // The rescale step runs before the crop, so the full-frame extrema pin the
  // range even when the crop removes them.
  for (double p : out.pixels) {
    CHECK(p >= 0.0);
    CHECK(p <= 255.0);
  }
  CHECK(thrown_code([] { standardize(GrayscaleImage(), 64); }) == ErrorCode::EmptyImage);
}

// ---------------------------------------------------------------------------
// Synthetic data

TEST_CASE("synthetic generation is byte deterministic") {
  TempDir a("synth"), b("synth");
  SynthConfig cfg;
  cfg.n_patients_per_class = 3;
  cfg.images_per_patient = 2;
  cfg.image_size = 32;
  cfg.seed = 7;
  generate_synthetic(cfg, a.str());
  generate_synthetic(cfg, b.str());

  namespace fs = std::filesystem;
  std::vector<std::string> rels;
  for (const auto& e : fs::recursive_directory_iterator(a.path())) {
    if (e.is_regular_file()) rels.push_back(fs::relative(e.path(), a.path()).string());
  }
  std::sort(rels.begin(), rels.end());
  CHECK(rels.size() == 13);  // 12 images + manifest
  for (const auto& rel : rels) {
    CHECK(read_file((a.path() / rel).string()) == read_file((b.path() / rel).string()));
  }
}

TEST_CASE("synthetic output loads as a valid manifest with expected shape") {
  TempDir dir("synth");
  SynthConfig cfg;
  cfg.n_patients_per_class = 4;
  cfg.images_per_patient = 3;
  cfg.image_size = 32;
  cfg.seed = 2;
  cfg.size_jitter = true;
  const Manifest m = generate_synthetic(cfg, dir.str());
  CHECK(m.records.size() == 24);
  const Manifest loaded = load_manifest(dir.sub("manifest.csv"), true);
  CHECK(loaded.records.size() == 24);
  const DatasetSummary s = summarize(loaded);
  CHECK(s.n_images_positive == 12);
  CHECK(s.n_patients_positive == 4);
  CHECK(s.n_augmented == 0);

  bool saw_nonsquare = false;
  for (const ImageRecord& r : loaded.records) {
    const PngReadResult png = read_png(loaded.resolve_path(r));
    saw_nonsquare = saw_nonsquare || png.image.height != png.image.width;
  }
  CHECK(saw_nonsquare);
}

TEST_CASE("full separation makes the mean intensity classifier near perfect") {
  TempDir dir("synth");
  SynthConfig cfg;
  cfg.n_patients_per_class = 20;
  cfg.images_per_patient = 3;
  cfg.image_size = 64;
  cfg.seed = 5;
  cfg.class_texture_separation = 1.0;
  const Manifest m = generate_synthetic(cfg, dir.str());

  // Brute-force rank statistic over per-image means of the raw pixels.
  std::vector<double> pos, neg;
  for (const ImageRecord& r : m.records) {
    const PngReadResult png = read_png(m.resolve_path(r));
    double sum = 0.0;
    for (double p : png.image.pixels) sum += p;
    (r.label == Label::Positive ? pos : neg).push_back(sum / png.image.pixels.size());
  }
  double wins = 0.0;
  for (double a : pos) {
    for (double b : neg) wins += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
  }
  CHECK(wins / (pos.size() * neg.size()) >= 0.95);
}

TEST_CASE("zero separation leaves class means statistically indistinguishable") {
  TempDir dir("synth");
  SynthConfig cfg;
  cfg.n_patients_per_class = 17;
  cfg.images_per_patient = 3;
  cfg.image_size = 64;
  cfg.seed = 6;
  cfg.class_texture_separation = 0.0;
  const Manifest m = generate_synthetic(cfg, dir.str());

  std::vector<double> pos, neg;
  for (const ImageRecord& r : m.records) {
    const PngReadResult png = read_png(m.resolve_path(r));
    double sum = 0.0;
    for (double p : png.image.pixels) sum += p;
    (r.label == Label::Positive ? pos : neg).push_back(sum / png.image.pixels.size());
  }
  REQUIRE(pos.size() + neg.size() > 100);
  const auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / v.size();
  };
  const auto var = [&](const std::vector<double>& v, double m0) {
    double s = 0.0;
    for (double x : v) s += (x - m0) * (x - m0);
    return s / (v.size() - 1);
  };
  const double mp = mean(pos), mn = mean(neg);
  const double se = std::sqrt(var(pos, mp) / pos.size() + var(neg, mn) / neg.size());
  CHECK(std::abs(mp - mn) < 3.5 * se);
}

TEST_CASE("class texture stays separable after standardization") {
  // Per-image contrast normalization removes absolute intensity cues, so
  // this is the signal training actually sees.
  TempDir dir("synth");
  SynthConfig cfg;
  cfg.n_patients_per_class = 12;
  cfg.images_per_patient = 3;
  cfg.image_size = 128;
  cfg.seed = 9;
  cfg.class_texture_separation = 1.0;
  const Manifest m = generate_synthetic(cfg, dir.str());

  const auto grain = [](const GrayscaleImage& img) {
    double s = 0.0;
    long n = 0;
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x + 1 < img.width; ++x) {
        s += std::abs(img.at(y, x + 1) - img.at(y, x));
        ++n;
      }
    }
    return s / n;
  };
  std::vector<double> pos, neg;
  for (const ImageRecord& r : m.records) {
    const GrayscaleImage std_img = standardize(read_png(m.resolve_path(r)).image, 128);
    (r.label == Label::Positive ? pos : neg).push_back(grain(std_img));
  }
  double wins = 0.0;
  for (double a : pos) {
    for (double b : neg) wins += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
  }
  CHECK(wins / (pos.size() * neg.size()) >= 0.9);
}

TEST_CASE("synthetic generator rejects bad configs") {
  TempDir dir("synth");
  SynthConfig cfg;
  cfg.n_patients_per_class = 0;
  CHECK(thrown_code([&] { generate_synthetic(cfg, dir.str()); }) == ErrorCode::InvalidConfig);
  cfg.n_patients_per_class = 2;
  cfg.class_texture_separation = 1.5;
  CHECK(thrown_code([&] { generate_synthetic(cfg, dir.str()); }) == ErrorCode::InvalidConfig);
}

// ---------------------------------------------------------------------------
// Run configuration

TEST_CASE("profile defaults validate and differ where they should") {
  const RunConfig desk = default_config("desk");
  validate_run_config(desk);
  CHECK(desk.image_size == 128);
  CHECK(desk.backbones == std::vector<std::string>{"efficientnet_b2"});

  const RunConfig repro = default_config("reproduction");
  validate_run_config(repro);
  CHECK(repro.image_size == 512);
  CHECK(repro.backbones.size() == 5);
  CHECK(repro.train.epochs == 60);
  CHECK(repro.train.batch_size == 16);
  CHECK(repro.train.lr_initial == 1e-4);
  CHECK(repro.train.lr_floor == 1e-6);

  CHECK(thrown_code([] { default_config("huge"); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("config round trips through its file format") {
  TempDir dir("config");
  RunConfig cfg = default_config("desk");
  cfg.seed = 1234;
  cfg.manifest = "data/m.csv";
  cfg.output_dir = "out7";
  cfg.backbones = {"resnet50", "densenet121"};
  cfg.train.epochs = 9;
  cfg.synth.class_texture_separation = 0.25;
  save_run_config(cfg, dir.sub("c.json"));
  const RunConfig back = load_run_config(dir.sub("c.json"));
  CHECK(serialize_run_config(back) == serialize_run_config(cfg));
  CHECK(back.seed == 1234);
  CHECK(back.backbones == cfg.backbones);
  CHECK(back.train.epochs == 9);
  CHECK(back.synth.class_texture_separation == 0.25);
}

TEST_CASE("serialization is canonical") {
  const RunConfig cfg = default_config("desk");
  CHECK(serialize_run_config(cfg) == serialize_run_config(cfg));
}

TEST_CASE("config hash ignores file locations but sees semantics") {
  RunConfig a = default_config("desk");
  RunConfig b = a;
  b.manifest = "/somewhere/else.csv";
  b.output_dir = "/tmp/other";
  b.test2_manifest = "t2.csv";
  b.weight_source = "w.bin";
  CHECK(config_hash(a) == config_hash(b));

  RunConfig c = a;
  c.seed = 1;
  CHECK(config_hash(a) != config_hash(c));
  RunConfig d = a;
  d.train.lr_initial = 5e-4;
  CHECK(config_hash(a) != config_hash(d));
  RunConfig e = a;
  e.backbones = {"xception"};
  CHECK(config_hash(a) != config_hash(e));
  CHECK(config_hash_hex(a).size() == 16);
}

TEST_CASE("config files reject unknown keys and unknown backbones") {
  TempDir dir("config");
  write_file(dir.sub("extra.json"), R"({"profile": "desk", "learning_rate": 0.1})");
  CHECK(thrown_code([&] { load_run_config(dir.sub("extra.json")); }) ==
        ErrorCode::InvalidConfig);

  write_file(dir.sub("bb.json"), R"({"profile": "desk", "backbone": "vgg16"})");
  CHECK(thrown_code([&] { load_run_config(dir.sub("bb.json")); }) ==
        ErrorCode::UnknownBackbone);

  write_file(dir.sub("dup.json"),
             R"({"profile": "desk", "backbone": ["resnet50", "resnet50"]})");
  CHECK(thrown_code([&] { load_run_config(dir.sub("dup.json")); }) == ErrorCode::InvalidConfig);

  write_file(dir.sub("one.json"), R"({"profile": "desk", "backbone": "xception"})");
  CHECK(load_run_config(dir.sub("one.json")).backbones ==
        std::vector<std::string>{"xception"});

  CHECK(thrown_code([&] { load_run_config(dir.sub("missing.json")); }) ==
        ErrorCode::MissingFile);
}

TEST_CASE("reproduction profile pins the training hyperparameters") {
  TempDir dir("config");
  write_file(dir.sub("pin.json"),
             R"({"profile": "reproduction", "train": {"epochs": 10}})");
  CHECK(thrown_code([&] { load_run_config(dir.sub("pin.json")); }) == ErrorCode::InvalidConfig);

  write_file(dir.sub("lr.json"),
             R"({"profile": "reproduction", "train": {"lr_initial": 0.001}})");
  CHECK(thrown_code([&] { load_run_config(dir.sub("lr.json")); }) == ErrorCode::InvalidConfig);

  write_file(dir.sub("size.json"), R"({"profile": "reproduction", "image_size": 128})");
  CHECK(thrown_code([&] { load_run_config(dir.sub("size.json")); }) == ErrorCode::InvalidConfig);

  // Optimizer internals are conventional defaults, not paper values, and
  // stay overridable.
  write_file(dir.sub("beta.json"),
             R"({"profile": "reproduction", "train": {"beta1": 0.95}})");
  CHECK(load_run_config(dir.sub("beta.json")).train.adamw.beta1 == 0.95);
}

TEST_CASE("profile override replaces the file's profile") {
  TempDir dir("config");
  write_file(dir.sub("r.json"), R"({"profile": "reproduction"})");
  const RunConfig cfg = load_run_config(dir.sub("r.json"), "desk");
  CHECK(cfg.profile == "desk");
  CHECK(cfg.image_size == 128);
}

TEST_CASE("augmentation ranges in the config are an audit trail only") {
  TempDir dir("config");
  write_file(dir.sub("aug.json"),
             R"({"profile": "desk", "augment": {"zoom_min": 0.8}})");
  CHECK(thrown_code([&] { load_run_config(dir.sub("aug.json")); }) == ErrorCode::InvalidConfig);
  write_file(dir.sub("aug_ok.json"),
             R"({"profile": "desk", "augment": {"zoom_min": 0.95, "zoom_max": 1.05,
                 "translate_max_frac": 0.05, "rotation_max_deg": 15.0}})");
  CHECK(load_run_config(dir.sub("aug_ok.json")).augment.zoom_min == 0.95);
}

TEST_CASE("config validation enforces field ranges") {
  RunConfig cfg = default_config("desk");
  cfg.k = 2;
  CHECK(thrown_code([&] { validate_run_config(cfg); }) == ErrorCode::InvalidConfig);
  cfg = default_config("desk");
  cfg.image_size = 8;
  CHECK(thrown_code([&] { validate_run_config(cfg); }) == ErrorCode::InvalidConfig);
  cfg = default_config("desk");
  cfg.backbones.clear();
  CHECK(thrown_code([&] { validate_run_config(cfg); }) == ErrorCode::InvalidConfig);
  cfg = default_config("desk");
  cfg.pretrained = true;
  CHECK(thrown_code([&] { validate_run_config(cfg); }) == ErrorCode::WeightsUnavailable);
  cfg = default_config("desk");
  cfg.train.epochs = 0;
  CHECK(thrown_code([&] { validate_run_config(cfg); }) == ErrorCode::InvalidConfig);
}
