#include "hydra/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <mutex>

#include "hydra/errors.hpp"
#include "hydra/noise.hpp"
#include "hydra/tensor_io.hpp"
#include "hydra/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace hydra {

namespace {

constexpr std::uint64_t kNoiseStream = 0x6e6f697365ULL;

std::string sample_name(const char* stem, int i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%05d.tns", stem, i);
  return buf;
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

std::vector<fs::path> list_slices(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("slice directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".tns") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw DataError("unknown split '" + name + "'");
}

int SplitSizes::count(Split s) const {
  switch (s) {
    case Split::train: return train;
    case Split::val: return val;
    case Split::test: return test;
  }
  return 0;
}

SplitSizes SplitSizes::from_ratio(int n) {
  SplitSizes s;
  s.val = static_cast<int>(n * 0.15);
  s.test = static_cast<int>(n * 0.15);
  s.train = n - s.val - s.test;
  return s;
}

json geometry_to_json(const Geometry& g) {
  return json{{"image_size", g.image_size},         {"n_detectors", g.n_detectors},
              {"detector_spacing", g.detector_spacing}, {"pixel_size", g.pixel_size},
              {"angles", g.angles},                 {"mask", g.mask}};
}

Geometry geometry_from_json(const json& j) {
  Geometry g;
  g.image_size = j.at("image_size").get<int>();
  g.n_detectors = j.at("n_detectors").get<int>();
  g.detector_spacing = j.at("detector_spacing").get<double>();
  g.pixel_size = j.at("pixel_size").get<double>();
  g.angles = j.at("angles").get<std::vector<double>>();
  g.mask = j.at("mask").get<std::vector<int>>();
  return g;
}

json manifest_to_json(const DatasetManifest& m) {
  json samples = json::array();
  for (const auto& s : m.samples)
    samples.push_back({{"split", to_string(s.split)},
                       {"index", s.index},
                       {"source", s.source},
                       {"noisy", s.noisy},
                       {"clean", s.clean},
                       {"phantom", s.phantom}});
  const auto& p = m.phantom;
  return json{{"format_version", m.format_version},
              {"seed", m.seed},
              {"geometry", geometry_to_json(m.geometry)},
              {"photons_per_bin", m.photons_per_bin},
              {"splits", {{"train", m.splits.train}, {"val", m.splits.val}, {"test", m.splits.test}}},
              {"phantom",
               {{"size", p.size},
                {"min_ellipses", p.min_ellipses},
                {"max_ellipses", p.max_ellipses},
                {"min_intensity", p.min_intensity},
                {"max_intensity", p.max_intensity},
                {"seed", p.seed}}},
              {"slices_dir", m.slices_dir},
              {"samples", samples},
              {"hashes", m.hashes}};
}

DatasetManifest manifest_from_json(const json& j) {
  try {
    DatasetManifest m;
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kManifestFormatVersion)
      throw DataError("unsupported manifest version " + std::to_string(m.format_version));
    m.seed = j.at("seed").get<std::uint64_t>();
    m.geometry = geometry_from_json(j.at("geometry"));
    m.photons_per_bin = j.at("photons_per_bin").get<double>();
    const auto& sp = j.at("splits");
    m.splits = {sp.at("train").get<int>(), sp.at("val").get<int>(), sp.at("test").get<int>()};
    const auto& p = j.at("phantom");
    m.phantom.size = p.at("size").get<int>();
    m.phantom.min_ellipses = p.at("min_ellipses").get<int>();
    m.phantom.max_ellipses = p.at("max_ellipses").get<int>();
    m.phantom.min_intensity = p.at("min_intensity").get<double>();
    m.phantom.max_intensity = p.at("max_intensity").get<double>();
    m.phantom.seed = p.at("seed").get<std::uint64_t>();
    m.slices_dir = j.at("slices_dir").get<std::string>();
    for (const auto& s : j.at("samples")) {
      SampleFiles f;
      f.split = parse_split(s.at("split").get<std::string>());
      f.index = s.at("index").get<int>();
      f.source = s.at("source").get<std::uint64_t>();
      f.noisy = s.at("noisy").get<std::string>();
      f.clean = s.at("clean").get<std::string>();
      f.phantom = s.at("phantom").get<std::string>();
      m.samples.push_back(std::move(f));
    }
    m.hashes = j.at("hashes").get<std::map<std::string, std::string>>();
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
}

DatasetManifest build_dataset(DatasetManifest plan, const fs::path& root, bool force, int threads) {
  if (plan.splits.total() < 1) throw ConfigError("dataset needs at least one sample");
  if (plan.phantom.size != plan.geometry.image_size)
    throw ConfigError("phantom size must equal the geometry image size");
  const RadonOperator op(plan.geometry);

  if (fs::exists(root / "manifest.json")) {
    if (!force) throw DataError("dataset already exists at " + root.string() + " (use --force)");
    for (const char* sub : {"train", "val", "test", "phantoms"}) fs::remove_all(root / sub);
    fs::remove(root / "manifest.json");
  }
  for (const char* sub : {"train", "val", "test"}) {
    fs::create_directories(root / sub);
    fs::create_directories(root / "phantoms" / sub);
  }

  std::vector<fs::path> slices;
  if (!plan.slices_dir.empty()) {
    slices = list_slices(plan.slices_dir);
    if (static_cast<int>(slices.size()) < plan.splits.total())
      throw DataError("slice directory holds fewer slices than requested samples");
  }

  plan.samples.clear();
  plan.hashes.clear();
  std::uint64_t source = 0;
  for (Split s : {Split::train, Split::val, Split::test}) {
    for (int i = 0; i < plan.splits.count(s); ++i) {
      SampleFiles f;
      f.split = s;
      f.index = i;
      f.source = source++;
      f.noisy = to_string(s) + "/" + sample_name("noisy", i);
      f.clean = to_string(s) + "/" + sample_name("clean", i);
      f.phantom = "phantoms/" + to_string(s) + "/" + sample_name("phantom", i);
      plan.samples.push_back(std::move(f));
    }
  }

  std::mutex hash_mutex;
  parallel_for(plan.samples.size(), threads, [&](std::size_t k) {
    const SampleFiles& f = plan.samples[k];
    Image x;
    if (slices.empty()) {
      x = gen_phantom(plan.phantom, f.source);
    } else {
      x = image_from_tensor(load_tensor(slices[f.source]));
      if (x.size != plan.geometry.image_size) throw DataError("slice size does not match geometry");
    }
    const Sinogram clean = radon_forward(op, x);
    const Sinogram noisy =
        apply_poisson_noise(clean, plan.photons_per_bin, stream_seed(plan.seed, kNoiseStream, f.source));
    std::pair<std::string, Tensor> outputs[] = {
        {f.phantom, to_tensor(x)}, {f.clean, to_tensor(clean)}, {f.noisy, to_tensor(noisy)}};
    for (auto& [rel, tensor] : outputs) {
      const auto bytes = encode_tensor(tensor);
      write_bytes(root / rel, bytes);
      const auto digest = sha256_hex(bytes);
      std::lock_guard lock(hash_mutex);
      plan.hashes[rel] = digest;
    }
  });

  std::ofstream out(root / "manifest.json", std::ios::trunc);
  if (!out) throw DataError("cannot write manifest");
  out << manifest_to_json(plan).dump(2) << "\n";
  return plan;
}

Dataset Dataset::open(const fs::path& root) {
  std::ifstream in(root / "manifest.json");
  if (!in) throw DataError("no manifest.json in " + root.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(std::string("manifest is not valid JSON: ") + e.what());
  }
  Dataset d;
  d.root_ = root;
  d.manifest_ = manifest_from_json(j);
  const auto& m = d.manifest_;
  if (static_cast<int>(m.samples.size()) != m.splits.total())
    throw DataError("manifest sample list does not match split sizes");
  for (const auto& s : m.samples)
    for (const auto* rel : {&s.noisy, &s.clean, &s.phantom})
      if (!m.hashes.contains(*rel)) throw DataError("manifest has no hash for " + *rel);
  RadonOperator check(m.geometry);  // validates geometry
  (void)check;
  return d;
}

const SampleFiles& Dataset::sample(Split s, int i) const {
  if (i < 0 || i >= count(s)) throw DataError("sample index out of range");
  for (const auto& f : manifest_.samples)
    if (f.split == s && f.index == i) return f;
  throw DataError("sample missing from manifest");
}

std::vector<std::uint8_t> Dataset::read_verified(const std::string& rel) const {
  auto bytes = read_file_bytes(root_ / rel);
  if (sha256_hex(bytes) != manifest_.hashes.at(rel))
    throw DataError("hash mismatch for " + rel + " (file modified since dataset creation)");
  return bytes;
}

Sinogram Dataset::noisy(Split s, int i) const {
  auto sino = sinogram_from_tensor(decode_tensor(read_verified(sample(s, i).noisy)));
  if (sino.n_angles != n_views() || sino.n_detectors != manifest_.geometry.n_detectors)
    throw DataError("sinogram shape does not match manifest geometry");
  return sino;
}

Sinogram Dataset::clean(Split s, int i) const {
  return sinogram_from_tensor(decode_tensor(read_verified(sample(s, i).clean)));
}

Image Dataset::phantom(Split s, int i) const {
  auto img = image_from_tensor(decode_tensor(read_verified(sample(s, i).phantom)));
  if (img.size != image_size()) throw DataError("phantom shape does not match manifest geometry");
  return img;
}

void Dataset::verify_all() const {
  for (const auto& [rel, digest] : manifest_.hashes) {
    const auto bytes = read_file_bytes(root_ / rel);
    if (sha256_hex(bytes) != digest) throw DataError("hash mismatch for " + rel);
    decode_tensor(bytes);
  }
}

}  // namespace hydra
