#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lapace/classifiers/retrain_pool.hpp"
#include "lapace/data/schema.hpp"
#include "lapace/lgmvae/model.hpp"

namespace lapace::io {

using diffmath::Tensor;

// Container layout (little endian):
//   magic[8] "LAPACEAR" | u32 version | u32 kind | u64 payload size |
//   payload | u32 crc32 of everything before it
inline constexpr std::string_view kArtifactMagic = "LAPACEAR";
inline constexpr std::uint32_t kArtifactVersion = 1;

enum class ArtifactKind : std::uint32_t { kClassifier = 1, kLgmvae = 2 };
const char* to_string(ArtifactKind kind);

class ByteWriter {
 public:
  void u8(std::uint8_t v);
  void u32(std::uint32_t v);
  void i32(std::int32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void str(const std::string& s);
  void tensor(const Tensor& t);
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}
  std::uint8_t u8();
  std::uint32_t u32();
  std::int32_t i32();
  std::uint64_t u64();
  double f64();
  std::string str();
  Tensor tensor();
  bool done() const { return pos_ == bytes_.size(); }
  // Throws unless every byte has been consumed.
  void expect_done() const;

 private:
  std::string_view take(std::size_t n);
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::string pack(ArtifactKind kind, const std::string& payload);
// Verifies magic, version, kind and checksum; returns the payload.
std::string unpack(const std::string& container, ArtifactKind expected);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

struct ClassifierArtifact {
  data::TabularSchema schema;
  classifiers::ClassifierSpec spec;
  std::shared_ptr<const classifiers::Classifier> classifier;
};

std::string serialize_classifier(const ClassifierArtifact& artifact);
ClassifierArtifact deserialize_classifier(const std::string& container);
void save_classifier(const std::string& path, const ClassifierArtifact& artifact);
ClassifierArtifact load_classifier(const std::string& path);

std::string serialize_lgmvae(const lgmvae::LgmvaeModel& model);
lgmvae::LgmvaeModel deserialize_lgmvae(const std::string& container);
void save_lgmvae(const std::string& path, const lgmvae::LgmvaeModel& model);
lgmvae::LgmvaeModel load_lgmvae(const std::string& path);

}  // namespace lapace::io
