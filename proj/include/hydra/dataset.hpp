#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "hydra/image.hpp"
#include "hydra/phantom.hpp"
#include "hydra/radon.hpp"

namespace hydra {

enum class Split { train, val, test };

std::string to_string(Split s);
Split parse_split(const std::string& name);

struct SplitSizes {
  int train = 0;
  int val = 0;
  int test = 0;

  int total() const { return train + val + test; }
  int count(Split s) const;
  /// 70/15/15 of n, rounding toward the training split.
  static SplitSizes from_ratio(int n);
  bool operator==(const SplitSizes&) const = default;
};

/// File references of one sample, relative to the dataset root.
struct SampleFiles {
  Split split = Split::train;
  int index = 0;           ///< position within the split
  std::uint64_t source = 0;  ///< phantom generator index (or raw slice ordinal)
  std::string noisy;
  std::string clean;
  std::string phantom;

  bool operator==(const SampleFiles&) const = default;
};

inline constexpr int kManifestFormatVersion = 1;

struct DatasetManifest {
  int format_version = kManifestFormatVersion;
  std::uint64_t seed = 0;
  Geometry geometry;
  double photons_per_bin = 1000.0;
  SplitSizes splits;
  PhantomConfig phantom;
  /// Empty: ellipse phantoms. Otherwise a directory of square image tensors
  /// (sorted by file name) used as ground truth slices.
  std::string slices_dir;
  std::vector<SampleFiles> samples;
  std::map<std::string, std::string> hashes;  ///< relative path -> sha256

  bool operator==(const DatasetManifest&) const = default;
};

nlohmann::json geometry_to_json(const Geometry& g);
Geometry geometry_from_json(const nlohmann::json& j);
nlohmann::json manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);

/// Writes phantoms, clean and noisy sinograms for every split plus
/// manifest.json. Phantoms live under phantoms/ and are only read by
/// evaluation code. Refuses to overwrite an existing dataset unless `force`.
DatasetManifest build_dataset(DatasetManifest plan, const std::filesystem::path& root, bool force,
                              int threads = 1);

/// Read access to a persisted dataset. Every file read is checked against
/// the manifest hash; a mismatch throws DataError.
class Dataset {
 public:
  static Dataset open(const std::filesystem::path& root);

  const DatasetManifest& manifest() const { return manifest_; }
  const std::filesystem::path& root() const { return root_; }
  int count(Split s) const { return manifest_.splits.count(s); }
  int n_views() const { return static_cast<int>(manifest_.geometry.mask.size()); }
  int image_size() const { return manifest_.geometry.image_size; }

  /// Operator of the dataset geometry (norm not yet estimated).
  RadonOperator make_operator() const { return RadonOperator(manifest_.geometry); }

  Sinogram noisy(Split s, int i) const;
  Sinogram clean(Split s, int i) const;
  /// Ground truth for evaluation. Training code never calls this.
  Image phantom(Split s, int i) const;

  /// Checks every file listed in the manifest.
  void verify_all() const;

  /// File references of sample i of split s.
  const SampleFiles& sample(Split s, int i) const;

 private:
  std::vector<std::uint8_t> read_verified(const std::string& rel) const;

  std::filesystem::path root_;
  DatasetManifest manifest_;
};

}  // namespace hydra
