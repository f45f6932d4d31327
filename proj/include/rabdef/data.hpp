#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rabdef/matrix.hpp"
#include "rabdef/model.hpp"

namespace rabdef {

struct ImageShape {
  int height = 0;
  int width = 0;
  int channels = 0;

  int dims() const { return height * width * channels; }
  bool set() const { return height > 0 && width > 0 && channels > 0; }
  bool operator==(const ImageShape&) const = default;
};

struct Dataset {
  Mat features;             // samples x dims; image pixels scaled to [0, 1]
  std::vector<int> labels;  // class indices in [0, classes)
  int classes = 0;
  ImageShape image_shape;   // optional; dims() == features.cols when set

  int size() const { return features.rows; }
  void validate() const;
};

enum class Role { regular, poor, adversarial };

enum class AttackKind { label_flip, random_weights, backdoor };

struct ClientProfile {
  int id = 0;
  Role role = Role::regular;
  std::optional<AttackKind> attack;  // present iff role == adversarial
};

struct ClientShard {
  Dataset data;
  ClientProfile profile;
};

struct FederatedDataset {
  std::vector<ClientShard> clients;
  Dataset validation;  // server-held, used by the ordering defenses
  Dataset test;        // server-held, used for reported accuracy
};

// IDX image/label pair (big-endian headers, magic 0x00000803 / 0x00000801).
// Pixels are scaled by 1/255. Malformed input raises a format error.
Dataset load_idx(std::span<const uint8_t> image_bytes, std::span<const uint8_t> label_bytes);
Dataset load_idx_files(const std::string& image_path, const std::string& label_path);

// CIFAR-10 binary batches: 3073-byte records, label byte then three 1024-byte
// channel planes. Features come out row-major interleaved (h, w, c).
Dataset load_cifar_bin(std::span<const uint8_t> bytes);
Dataset load_cifar_files(const std::vector<std::string>& paths);

// Gaussian blobs around per-class centers drawn from the seed; balanced
// classes, shuffled order. dims that are perfect squares get a square
// image_shape so pattern attacks apply to synthetic data too.
Dataset synth_blobs(int classes, int dims, int per_class, double spread, uint64_t seed);

// Splits into per-client shards: regular clients draw IID, the last n_poor
// clients are label-skewed with at least `skew` of their samples from two
// designated classes. Shards are pairwise disjoint and cover the input.
std::vector<ClientShard> partition(const Dataset& data, int n_clients, int n_poor, double skew,
                                   uint64_t seed);

// Stratified split into (selected, rest) where selected holds round(fraction*n)
// samples apportioned across labels by largest remainder.
std::pair<Dataset, Dataset> validation_split(const Dataset& data, double fraction, uint64_t seed);

Batch to_batch(const Dataset& data);

std::vector<uint8_t> read_file_bytes(const std::string& path);

}  // namespace rabdef
