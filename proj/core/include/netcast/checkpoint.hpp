#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "netcast/tensor.hpp"

namespace netcast {

/// Checkpoints live in a directory holding `manifest.json` (array index plus
/// free-form meta) and `weights.bin` (contiguous little-endian float64).
/// The manifest is written last so a finished directory always has one.
class CheckpointWriter {
 public:
  void add(const std::string& name, const Tensor& t);
  /// `meta_json` must be a serialized JSON object; stored verbatim.
  void set_meta(std::string meta_json) { meta_json_ = std::move(meta_json); }
  void write(const std::filesystem::path& dir) const;

 private:
  struct Entry {
    std::string name;
    std::vector<std::size_t> shape;
  };
  std::vector<Entry> entries_;
  std::vector<double> payload_;
  std::string meta_json_ = "{}";
};

class CheckpointReader {
 public:
  explicit CheckpointReader(const std::filesystem::path& dir);

  bool has(const std::string& name) const;
  /// Throws errc::incompatible_checkpoint if the array is absent.
  Tensor get(const std::string& name) const;
  /// Array names in manifest order.
  std::vector<std::string> names() const;
  /// The manifest's meta object, serialized.
  const std::string& meta_json() const { return meta_json_; }

 private:
  struct Entry {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t offset = 0;
    std::size_t count = 0;
  };
  const Entry* find(const std::string& name) const;

  std::filesystem::path dir_;
  std::vector<Entry> entries_;
  std::vector<double> payload_;
  std::string meta_json_;
};

}  // namespace netcast
