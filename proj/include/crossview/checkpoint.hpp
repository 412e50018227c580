#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "crossview/tensor.hpp"
#include "crossview/training.hpp"

namespace crossview {

// Binary container: a fixed 16-byte preamble, a JSON header describing every
// tensor, then the raw little-endian payload. See docs/checkpoint_format.md
// for the byte-exact layout. Writes are atomic (temp file + rename); loads
// validate magic, version, header/payload consistency and total file size,
// and reject truncated or inconsistent files without returning partial data.

class ContainerWriter {
 public:
  explicit ContainerWriter(std::string kind);
  nlohmann::json& header() { return header_; }
  void add_f32(const std::string& name, const std::vector<int>& shape, const float* data);
  void add_f64(const std::string& name, const std::vector<int>& shape, const double* data);
  void add_u64(const std::string& name, const std::vector<int>& shape, const std::uint64_t* data);
  void write(const std::filesystem::path& path);

 private:
  void add_raw(const std::string& name, const char* dtype, const std::vector<int>& shape,
               const void* data, std::size_t elem_size, std::size_t count);
  nlohmann::json header_;
  nlohmann::json tensors_ = nlohmann::json::array();
  std::vector<std::uint8_t> payload_;
};

class ContainerReader {
 public:
  explicit ContainerReader(const std::filesystem::path& path);
  const nlohmann::json& header() const { return header_; }
  const std::string& kind() const { return kind_; }
  bool has(const std::string& name) const;
  std::vector<std::string> tensor_names() const;
  Tensor<float> read_f32(const std::string& name) const;
  Tensor<double> read_f64(const std::string& name) const;
  std::vector<std::uint64_t> read_u64(const std::string& name) const;

 private:
  struct Record {
    std::string dtype;
    std::vector<int> shape;
    std::size_t offset = 0;
    std::size_t nbytes = 0;
  };
  const Record& find(const std::string& name, const char* dtype) const;
  nlohmann::json header_;
  std::string kind_;
  std::map<std::string, Record> records_;
  std::vector<std::uint8_t> payload_;
  std::filesystem::path path_;
};

void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);

}  // namespace crossview
