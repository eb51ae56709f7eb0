#pragma once

// Checkpoint container, all integers little-endian:
//   "TPNETCKP"  u32 version  u32 record_count
//   per record: u32 name_len, name bytes, u8 dtype, u32 ndim, u64 dims[ndim],
//               payload (product(dims) elements; utf8 payload is dims[0] bytes)
// dtype: 1 = f32, 2 = f64, 3 = i64, 4 = utf8.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "tpnet/tensor.hpp"

namespace tpnet::io {

inline constexpr char kCheckpointMagic[8] = {'T', 'P', 'N', 'E', 'T', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class DType : std::uint8_t { F32 = 1, F64 = 2, I64 = 3, Utf8 = 4 };

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Record {
  std::string name;
  DType dtype = DType::F32;
  Shape shape;
  std::vector<std::uint8_t> payload;  // little-endian element bytes
};

class Checkpoint {
 public:
  void put(const std::string& name, const Tensor& t);
  void put(const std::string& name, const TensorD& t);
  void put_int(const std::string& name, std::int64_t v);
  void put_real(const std::string& name, double v);
  void put_string(const std::string& name, const std::string& v);
  void put_record(Record r);

  bool contains(const std::string& name) const;
  const Record& get(const std::string& name) const;
  // Converts f32/f64 records to the requested precision.
  template <typename T>
  BasicTensor<T> tensor(const std::string& name) const;
  std::int64_t get_int(const std::string& name) const;
  double get_real(const std::string& name) const;
  std::string get_string(const std::string& name) const;

  const std::vector<Record>& records() const { return records_; }

 private:
  std::vector<Record> records_;
};

void save_checkpoint(const std::filesystem::path& file, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& file);

}  // namespace tpnet::io
