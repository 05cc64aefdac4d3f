#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "hydra/config.hpp"
#include "hydra/dataset.hpp"
#include "hydra/errors.hpp"
#include "hydra/phantom.hpp"
#include "hydra/tensor_io.hpp"
#include "hydra/training.hpp"
#include "support.hpp"

using namespace hydra;
namespace fs = std::filesystem;

namespace {

DatasetManifest small_plan(int views, int train = 20, int val = 5, int test = 5) {
  RunConfig cfg;
  cfg.seed = 12;
  cfg.data.n_samples = train + val + test;
  cfg.data.train = train;
  cfg.data.val = val;
  cfg.data.test = test;
  return dataset_plan(cfg, views);
}

}  // namespace

TEST_CASE("phantom with no ellipses is zero") {
  PhantomConfig pc;
  pc.min_ellipses = pc.max_ellipses = 0;
  const Image x = gen_phantom(pc, 3);
  for (double v : x.data) CHECK(v == 0.0);
}

TEST_CASE("phantoms are deterministic in (seed, index)") {
  PhantomConfig pc;
  pc.seed = 99;
  CHECK(gen_phantom(pc, 4) == gen_phantom(pc, 4));
  CHECK_FALSE(gen_phantom(pc, 4) == gen_phantom(pc, 5));
  PhantomConfig other = pc;
  other.seed = 100;
  CHECK_FALSE(gen_phantom(pc, 4) == gen_phantom(other, 4));
}

TEST_CASE("1000 phantoms stay in range and inside the field of view") {
  PhantomConfig pc;
  pc.size = 64;
  pc.seed = 5;
  int nonzero = 0;
  for (int i = 0; i < 1000; ++i) {
    const Image x = gen_phantom(pc, i);
    bool any = false;
    for (int r = 0; r < 64; ++r)
      for (int c = 0; c < 64; ++c) {
        const double v = x(r, c);
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 1.0);
        if (!inside_field_of_view(64, r, c)) REQUIRE(v == 0.0);
        any = any || v > 0.0;
      }
    nonzero += any;
  }
  CHECK(nonzero == 1000);
}

TEST_CASE("tensor round trips bit for bit") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  Tensor t;
  t.shape = {3, 4, 5};
  t.dtype = DType::f64;
  for (int i = 0; i < 60; ++i) t.data.push_back(g(rng));
  t.data[7] = std::numeric_limits<double>::denorm_min();
  t.data[8] = -0.0;
  CHECK(decode_tensor(encode_tensor(t)) == t);

  Tensor f = t;
  f.dtype = DType::f32;
  for (auto& v : f.data) v = static_cast<float>(v);
  CHECK(decode_tensor(encode_tensor(f)) == f);

  hydra::test::TempDir dir("tensor");
  save_tensor(dir.path() / "t.tns", t);
  CHECK(load_tensor(dir.path() / "t.tns") == t);
}

TEST_CASE("scalar tensor round trips") {
  Tensor t;
  t.shape = {};
  t.data = {2.5};
  t.dtype = DType::f32;
  const auto bytes = encode_tensor(t);
  CHECK(bytes.size() == 16 + 4);
  CHECK(decode_tensor(bytes) == t);
}

TEST_CASE("tensor header layout") {
  Tensor t;
  t.shape = {2, 3};
  t.data.assign(6, 1.0);
  const auto b = encode_tensor(t);
  CHECK(std::string(b.begin(), b.begin() + 8) == "HYDRATNS");
  CHECK(b[8] == 1);
  CHECK(b[9] == 0);
  CHECK(b[10] == 2);
  for (int i = 11; i < 16; ++i) CHECK(b[i] == 0);
  CHECK(b[16] == 2);
  CHECK(b[24] == 3);
  CHECK(b.size() == 16 + 16 + 6 * 4);
}

TEST_CASE("malformed tensors raise parse errors") {
  Tensor t;
  t.shape = {4, 4};
  t.data.assign(16, 0.5);
  const auto good = encode_tensor(t);

  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{20}, good.size() - 1}) {
    std::vector<std::uint8_t> b(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(cut));
    CHECK_THROWS_AS(decode_tensor(b), ParseError);
  }
  auto magic = good;
  magic[0] = 'X';
  CHECK_THROWS_AS(decode_tensor(magic), ParseError);
  auto version = good;
  version[8] = 2;
  CHECK_THROWS_AS(decode_tensor(version), ParseError);
  auto dtype = good;
  dtype[9] = 7;
  CHECK_THROWS_AS(decode_tensor(dtype), ParseError);
  auto overflow = good;
  for (int i = 16; i < 32; ++i) overflow[i] = 0xff;
  CHECK_THROWS_AS(decode_tensor(overflow), ParseError);
  auto trailing = good;
  trailing.push_back(0);
  CHECK_THROWS_AS(decode_tensor(trailing), ParseError);
}

TEST_CASE("dataset shapes, determinism and integrity") {
  hydra::test::TempDir dir("dataset");
  const auto plan = small_plan(16);
  const auto m = build_dataset(plan, dir.path() / "a", false);
  const Dataset d = Dataset::open(dir.path() / "a");
  CHECK(d.count(Split::train) == 20);
  CHECK(d.count(Split::val) == 5);
  CHECK(d.count(Split::test) == 5);
  int noisy = 0;
  for (Split s : {Split::train, Split::val, Split::test})
    for (int i = 0; i < d.count(s); ++i) {
      const Sinogram y = d.noisy(s, i);
      CHECK(y.n_angles == 16);
      CHECK(y.n_detectors == 64);
      ++noisy;
    }
  CHECK(noisy == 30);
  d.verify_all();

  SUBCASE("splits are disjoint") {
    std::set<std::uint64_t> sources;
    for (const auto& f : m.samples) sources.insert(f.source);
    CHECK(sources.size() == m.samples.size());
  }

  SUBCASE("regeneration is byte identical") {
    build_dataset(plan, dir.path() / "b", false);
    for (const auto& [rel, hash] : m.hashes) {
      CHECK(read_file_bytes(dir.path() / "a" / rel) == read_file_bytes(dir.path() / "b" / rel));
    }
    CHECK(read_file_bytes(dir.path() / "a" / "manifest.json") ==
          read_file_bytes(dir.path() / "b" / "manifest.json"));
  }

  SUBCASE("overwrite needs force") {
    CHECK_THROWS_AS(build_dataset(plan, dir.path() / "a", false), DataError);
    CHECK_NOTHROW(build_dataset(plan, dir.path() / "a", true));
  }

  SUBCASE("tampering is detected") {
    const fs::path victim = dir.path() / "a" / d.sample(Split::train, 3).noisy;
    auto bytes = read_file_bytes(victim);
    bytes.back() ^= 0x01;
    std::ofstream(victim, std::ios::binary | std::ios::trunc)
        .write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    const Dataset again = Dataset::open(dir.path() / "a");
    CHECK_THROWS_AS(again.noisy(Split::train, 3), DataError);
    CHECK_THROWS_AS(again.verify_all(), DataError);
    CHECK_NOTHROW(again.noisy(Split::train, 4));
  }
}

TEST_CASE("view counts set the sinogram height") {
  hydra::test::TempDir dir("views");
  build_dataset(small_plan(16, 3, 1, 1), dir.path() / "v16", false);
  build_dataset(small_plan(32, 3, 1, 1), dir.path() / "v32", false);
  CHECK(Dataset::open(dir.path() / "v16").noisy(Split::test, 0).n_angles == 16);
  CHECK(Dataset::open(dir.path() / "v32").noisy(Split::test, 0).n_angles == 32);
}

TEST_CASE("manifest json round trips") {
  hydra::test::TempDir dir("manifest");
  const auto m = build_dataset(small_plan(8, 3, 2, 2), dir.path() / "d", false);
  CHECK(manifest_from_json(manifest_to_json(m)) == m);
  CHECK(Dataset::open(dir.path() / "d").manifest() == m);
}

TEST_CASE("training never reads phantom files") {
  hydra::test::TempDir dir("firewall");
  RunConfig cfg;
  cfg.seed = 4;
  cfg.geometry.image_size = 16;
  cfg.geometry.n_full_angles = 32;
  cfg.data.n_samples = 8;
  cfg.data.train = 4;
  cfg.data.val = 2;
  cfg.data.test = 2;
  build_dataset(dataset_plan(cfg, 8), dir.path() / "d", false);
  fs::remove_all(dir.path() / "d" / "phantoms");

  TrainConfig tc;
  tc.max_steps = 6;
  tc.network.widths = {1, 4, 1};
  tc.network.spectral_size = 16;
  tc.stopping.eval_every = 3;
  const auto r = train(Dataset::open(dir.path() / "d"), tc, dir.path() / "run");
  CHECK(r.final_step == 6);
  CHECK(fs::exists(dir.path() / "run" / "ckpt_6" / "index.json"));
  CHECK_THROWS_AS(Dataset::open(dir.path() / "d").phantom(Split::test, 0), DataError);
}
