#include "rabdef/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "rabdef/error.hpp"
#include "rabdef/rng.hpp"

namespace rabdef {

namespace {

constexpr uint32_t kIdxImageMagic = 0x00000803;
constexpr uint32_t kIdxLabelMagic = 0x00000801;
constexpr size_t kCifarRecord = 3073;  // label byte + 3 x 1024 channel planes

uint32_t read_be32(std::span<const uint8_t> bytes, size_t offset) {
  return (static_cast<uint32_t>(bytes[offset]) << 24) |
         (static_cast<uint32_t>(bytes[offset + 1]) << 16) |
         (static_cast<uint32_t>(bytes[offset + 2]) << 8) |
         static_cast<uint32_t>(bytes[offset + 3]);
}

Dataset take_rows(const Dataset& data, const std::vector<int>& rows) {
  Dataset out;
  out.classes = data.classes;
  out.image_shape = data.image_shape;
  out.features = Mat(static_cast<int>(rows.size()), data.features.cols);
  out.labels.resize(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    auto src = data.features.row(rows[i]);
    std::copy(src.begin(), src.end(), out.features.row(static_cast<int>(i)).begin());
    out.labels[i] = data.labels[rows[i]];
  }
  return out;
}

int infer_classes(const std::vector<int>& labels) {
  int top = 0;
  for (int y : labels) top = std::max(top, y);
  return top + 1;
}

}  // namespace

void Dataset::validate() const {
  if (features.rows != static_cast<int>(labels.size()))
    fail(ErrorCode::shape_mismatch, "dataset label count does not match sample count");
  if (classes < 1) fail(ErrorCode::invalid_argument, "dataset needs at least one class");
  for (int y : labels) {
    if (y < 0 || y >= classes)
      fail(ErrorCode::invalid_argument, "dataset label outside class range");
  }
  if (image_shape.set() && image_shape.dims() != features.cols)
    fail(ErrorCode::shape_mismatch, "image shape does not match feature width");
}

Dataset load_idx(std::span<const uint8_t> image_bytes, std::span<const uint8_t> label_bytes) {
  if (image_bytes.size() < 16) fail(ErrorCode::format, "idx image stream truncated header");
  if (label_bytes.size() < 8) fail(ErrorCode::format, "idx label stream truncated header");
  uint32_t image_magic = read_be32(image_bytes, 0);
  if (image_magic != kIdxImageMagic)
    fail(ErrorCode::format, "idx image magic mismatch: got " + std::to_string(image_magic));
  uint32_t label_magic = read_be32(label_bytes, 0);
  if (label_magic != kIdxLabelMagic)
    fail(ErrorCode::format, "idx label magic mismatch: got " + std::to_string(label_magic));

  uint32_t count = read_be32(image_bytes, 4);
  uint32_t rows = read_be32(image_bytes, 8);
  uint32_t cols = read_be32(image_bytes, 12);
  uint32_t label_count = read_be32(label_bytes, 4);
  if (count != label_count)
    fail(ErrorCode::format, "idx image count " + std::to_string(count) +
                                " does not match label count " + std::to_string(label_count));
  size_t pixels = static_cast<size_t>(count) * rows * cols;
  if (image_bytes.size() != 16 + pixels)
    fail(ErrorCode::format, "idx image payload size mismatch");
  if (label_bytes.size() != 8 + count)
    fail(ErrorCode::format, "idx label payload size mismatch");
  if (count == 0) fail(ErrorCode::empty_input, "idx stream holds no samples");

  Dataset out;
  out.features = Mat(static_cast<int>(count), static_cast<int>(rows * cols));
  out.labels.resize(count);
  const double scale = 1.0 / 255.0;
  for (size_t i = 0; i < pixels; ++i) out.features.data[i] = image_bytes[16 + i] * scale;
  for (uint32_t i = 0; i < count; ++i) out.labels[i] = label_bytes[8 + i];
  out.classes = infer_classes(out.labels);
  out.image_shape = {static_cast<int>(rows), static_cast<int>(cols), 1};
  out.validate();
  return out;
}

Dataset load_idx_files(const std::string& image_path, const std::string& label_path) {
  auto images = read_file_bytes(image_path);
  auto labels = read_file_bytes(label_path);
  return load_idx(images, labels);
}

Dataset load_cifar_bin(std::span<const uint8_t> bytes) {
  if (bytes.empty() || bytes.size() % kCifarRecord != 0)
    fail(ErrorCode::format, "cifar stream length " + std::to_string(bytes.size()) +
                                " is not a multiple of " + std::to_string(kCifarRecord));
  size_t count = bytes.size() / kCifarRecord;
  Dataset out;
  out.features = Mat(static_cast<int>(count), 32 * 32 * 3);
  out.labels.resize(count);
  const double scale = 1.0 / 255.0;
  for (size_t s = 0; s < count; ++s) {
    const uint8_t* rec = bytes.data() + s * kCifarRecord;
    if (rec[0] > 9) fail(ErrorCode::format, "cifar label byte out of range");
    out.labels[s] = rec[0];
    auto row = out.features.row(static_cast<int>(s));
    for (int ch = 0; ch < 3; ++ch) {
      const uint8_t* plane = rec + 1 + ch * 1024;
      for (int p = 0; p < 1024; ++p) row[static_cast<size_t>(p) * 3 + ch] = plane[p] * scale;
    }
  }
  out.classes = 10;
  out.image_shape = {32, 32, 3};
  out.validate();
  return out;
}

Dataset load_cifar_files(const std::vector<std::string>& paths) {
  if (paths.empty()) fail(ErrorCode::empty_input, "no cifar files given");
  std::vector<uint8_t> all;
  for (const auto& path : paths) {
    auto bytes = read_file_bytes(path);
    all.insert(all.end(), bytes.begin(), bytes.end());
  }
  return load_cifar_bin(all);
}

Dataset synth_blobs(int classes, int dims, int per_class, double spread, uint64_t seed) {
  if (classes < 2) fail(ErrorCode::invalid_argument, "synth data needs at least two classes");
  if (dims < 1) fail(ErrorCode::invalid_argument, "synth data needs at least one dimension");
  if (per_class < 1) fail(ErrorCode::invalid_argument, "per_class must be positive");
  if (spread < 0.0) fail(ErrorCode::invalid_argument, "spread must be non-negative");

  Rng rng(seed);
  Mat centers(classes, dims);
  for (double& v : centers.data) v = rng.uniform(0.15, 0.65);

  int n = classes * per_class;
  Dataset out;
  out.classes = classes;
  out.features = Mat(n, dims);
  out.labels.resize(n);
  for (int k = 0; k < classes; ++k) {
    for (int s = 0; s < per_class; ++s) {
      int row = k * per_class + s;
      out.labels[row] = k;
      auto dst = out.features.row(row);
      auto center = centers.row(k);
      for (int d = 0; d < dims; ++d) dst[d] = center[d] + spread * rng.normal();
    }
  }
  // Shuffle so prefixes and strided subsets are class-mixed.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  Dataset shuffled = take_rows(out, order);
  int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(dims))));
  if (side * side == dims) shuffled.image_shape = {side, side, 1};
  shuffled.validate();
  return shuffled;
}

std::vector<ClientShard> partition(const Dataset& data, int n_clients, int n_poor, double skew,
                                   uint64_t seed) {
  data.validate();
  if (n_clients < 1) fail(ErrorCode::invalid_argument, "need at least one client");
  if (n_poor < 0 || n_poor > n_clients)
    fail(ErrorCode::invalid_argument, "poor client count outside [0, n_clients]");
  if (skew < 0.0 || skew > 1.0) fail(ErrorCode::invalid_argument, "skew must lie in [0, 1]");
  if (data.size() < n_clients)
    fail(ErrorCode::insufficient_data, "fewer samples than clients");

  int n = data.size();
  Rng rng(seed);

  // Per-class index pools, individually shuffled.
  std::vector<std::vector<int>> pools(data.classes);
  for (int i = 0; i < n; ++i) pools[data.labels[i]].push_back(i);
  for (auto& pool : pools) rng.shuffle(pool);

  int base = n / n_clients;
  int extra = n % n_clients;
  std::vector<int> quota(n_clients);
  for (int c = 0; c < n_clients; ++c) quota[c] = base + (c < extra ? 1 : 0);

  // Poor clients sit at the tail ids; serve their dominant-class share first.
  std::vector<std::vector<int>> shard_rows(n_clients);
  int first_poor = n_clients - n_poor;
  for (int p = 0; p < n_poor; ++p) {
    int client = first_poor + p;
    int class_a = (2 * p) % data.classes;
    int class_b = (2 * p + 1) % data.classes;
    int need = static_cast<int>(std::ceil(skew * quota[client]));
    auto& rows = shard_rows[client];
    for (int k = 0; k < need; ++k) {
      auto& pool = pools[k % 2 == 0 ? class_a : class_b];
      auto& other = pools[k % 2 == 0 ? class_b : class_a];
      if (!pool.empty()) {
        rows.push_back(pool.back());
        pool.pop_back();
      } else if (!other.empty()) {
        rows.push_back(other.back());
        other.pop_back();
      } else {
        fail(ErrorCode::insufficient_data,
             "not enough samples of the designated classes for poor client " +
                 std::to_string(client));
      }
    }
  }

  // Everything left forms one mixed pool that fills the remaining quotas.
  std::vector<int> rest;
  for (auto& pool : pools) rest.insert(rest.end(), pool.begin(), pool.end());
  rng.shuffle(rest);
  size_t cursor = 0;
  for (int c = 0; c < n_clients; ++c) {
    auto& rows = shard_rows[c];
    while (static_cast<int>(rows.size()) < quota[c]) rows.push_back(rest[cursor++]);
  }

  std::vector<ClientShard> shards(n_clients);
  for (int c = 0; c < n_clients; ++c) {
    shards[c].data = take_rows(data, shard_rows[c]);
    shards[c].profile.id = c;
    shards[c].profile.role = c >= first_poor ? Role::poor : Role::regular;
  }
  return shards;
}

std::pair<Dataset, Dataset> validation_split(const Dataset& data, double fraction, uint64_t seed) {
  data.validate();
  if (fraction <= 0.0 || fraction >= 1.0)
    fail(ErrorCode::invalid_argument, "split fraction must lie in (0, 1)");
  if (data.size() < 2) fail(ErrorCode::insufficient_data, "split needs at least two samples");

  int n = data.size();
  int target = static_cast<int>(std::lround(fraction * n));
  target = std::clamp(target, 1, n - 1);

  Rng rng(seed);
  std::vector<std::vector<int>> pools(data.classes);
  for (int i = 0; i < n; ++i) pools[data.labels[i]].push_back(i);
  for (auto& pool : pools) rng.shuffle(pool);

  // Largest-remainder apportionment keeps the split stratified and exact.
  std::vector<int> take(data.classes, 0);
  std::vector<std::pair<double, int>> remainders;
  int assigned = 0;
  for (int k = 0; k < data.classes; ++k) {
    double exact = fraction * pools[k].size();
    take[k] = static_cast<int>(std::floor(exact));
    take[k] = std::min<int>(take[k], static_cast<int>(pools[k].size()));
    assigned += take[k];
    remainders.push_back({exact - take[k], k});
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  for (size_t r = 0; assigned < target && r < remainders.size(); ++r) {
    int k = remainders[r].second;
    if (take[k] < static_cast<int>(pools[k].size())) {
      ++take[k];
      ++assigned;
    }
  }
  // Rounding can still leave a gap when some classes are exhausted.
  for (int k = 0; assigned < target && k < data.classes; ++k) {
    while (assigned < target && take[k] < static_cast<int>(pools[k].size())) {
      ++take[k];
      ++assigned;
    }
  }
  for (int k = 0; assigned > target && k < data.classes; ++k) {
    while (assigned > target && take[k] > 0) {
      --take[k];
      --assigned;
    }
  }

  std::vector<int> selected_rows;
  std::vector<int> rest_rows;
  for (int k = 0; k < data.classes; ++k) {
    for (size_t i = 0; i < pools[k].size(); ++i) {
      (static_cast<int>(i) < take[k] ? selected_rows : rest_rows).push_back(pools[k][i]);
    }
  }
  rng.shuffle(selected_rows);
  rng.shuffle(rest_rows);
  return {take_rows(data, selected_rows), take_rows(data, rest_rows)};
}

Batch to_batch(const Dataset& data) {
  Batch b;
  b.features = data.features;
  b.labels = data.labels;
  return b;
}

std::vector<uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open file: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorCode::io, "read failed: " + path);
  return bytes;
}

}  // namespace rabdef
