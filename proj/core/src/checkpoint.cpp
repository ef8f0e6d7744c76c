#include "netcast/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "netcast/version.hpp"

namespace netcast {

namespace {

using nlohmann::json;

std::uint64_t to_little_endian(double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  if constexpr (std::endian::native == std::endian::big) {
    bits = __builtin_bswap64(bits);
  }
  return bits;
}

double from_little_endian(std::uint64_t bits) {
  if constexpr (std::endian::native == std::endian::big) {
    bits = __builtin_bswap64(bits);
  }
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

}  // namespace

void CheckpointWriter::add(const std::string& name, const Tensor& t) {
  for (const Entry& e : entries_) {
    require(e.name != name, errc::io_error, "duplicate checkpoint array '" + name + "'");
  }
  entries_.push_back({name, t.shape()});
  payload_.insert(payload_.end(), t.values().begin(), t.values().end());
}

void CheckpointWriter::write(const std::filesystem::path& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, errc::io_error, "cannot create checkpoint directory " + dir.string());

  {
    std::ofstream out(dir / "weights.bin", std::ios::binary | std::ios::trunc);
    require(out.good(), errc::io_error, "cannot open weights.bin for writing");
    for (double v : payload_) {
      std::uint64_t bits = to_little_endian(v);
      out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
    require(out.good(), errc::io_error, "short write to weights.bin");
  }

  json manifest;
  manifest["format_version"] = kCheckpointFormatVersion;
  manifest["meta"] = json::parse(meta_json_);
  json arrays = json::array();
  std::size_t offset = 0;
  for (const Entry& e : entries_) {
    std::size_t count = shape_product(e.shape);
    arrays.push_back({{"name", e.name},
                      {"shape", e.shape},
                      {"offset", offset},
                      {"count", count}});
    offset += count;
  }
  manifest["arrays"] = std::move(arrays);

  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  require(out.good(), errc::io_error, "cannot open manifest.json for writing");
  out << manifest.dump(2) << '\n';
  require(out.good(), errc::io_error, "short write to manifest.json");
}

CheckpointReader::CheckpointReader(const std::filesystem::path& dir) : dir_(dir) {
  std::ifstream in(dir / "manifest.json");
  require(in.good(), errc::incompatible_checkpoint,
          "no manifest.json in " + dir.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    fail(errc::incompatible_checkpoint, std::string("malformed manifest.json: ") + e.what());
  }
  require(manifest.value("format_version", -1) == kCheckpointFormatVersion,
          errc::incompatible_checkpoint,
          "unsupported checkpoint format version in " + dir.string());
  meta_json_ = manifest.value("meta", json::object()).dump();

  std::size_t total = 0;
  for (const json& a : manifest.at("arrays")) {
    Entry e;
    e.name = a.at("name").get<std::string>();
    e.shape = a.at("shape").get<std::vector<std::size_t>>();
    e.offset = a.at("offset").get<std::size_t>();
    e.count = a.at("count").get<std::size_t>();
    require(e.count == shape_product(e.shape), errc::incompatible_checkpoint,
            "array '" + e.name + "' count does not match its shape");
    total = std::max(total, e.offset + e.count);
    entries_.push_back(std::move(e));
  }

  std::ifstream bin(dir / "weights.bin", std::ios::binary);
  require(bin.good(), errc::incompatible_checkpoint, "no weights.bin in " + dir.string());
  payload_.resize(total);
  for (std::size_t i = 0; i < total; ++i) {
    std::uint64_t bits;
    bin.read(reinterpret_cast<char*>(&bits), sizeof bits);
    require(bin.good(), errc::incompatible_checkpoint,
            "weights.bin is shorter than the manifest promises");
    payload_[i] = from_little_endian(bits);
  }
}

const CheckpointReader::Entry* CheckpointReader::find(const std::string& name) const {
  for (const Entry& e : entries_) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

bool CheckpointReader::has(const std::string& name) const { return find(name) != nullptr; }

Tensor CheckpointReader::get(const std::string& name) const {
  const Entry* e = find(name);
  require(e != nullptr, errc::incompatible_checkpoint,
          "checkpoint has no array '" + name + "'");
  std::vector<double> vals(payload_.begin() + static_cast<std::ptrdiff_t>(e->offset),
                           payload_.begin() +
                               static_cast<std::ptrdiff_t>(e->offset + e->count));
  return Tensor(e->shape, std::move(vals));
}

std::vector<std::string> CheckpointReader::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const Entry& e : entries_) out.push_back(e.name);
  return out;
}

}  // namespace netcast
