#include "tpnet/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace tpnet::io {

namespace {

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename U>
U get_le(const std::uint8_t* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(U{p[i]} << (8 * i));
  return v;
}

template <typename T>
using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;

template <typename T>
std::vector<std::uint8_t> encode(std::span<const T> values) {
  std::vector<std::uint8_t> out;
  out.reserve(values.size() * sizeof(T));
  for (T v : values) put_le(out, std::bit_cast<Bits<T>>(v));
  return out;
}

template <typename T>
std::vector<T> decode(const std::vector<std::uint8_t>& bytes) {
  std::vector<T> out(bytes.size() / sizeof(T));
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::bit_cast<T>(get_le<Bits<T>>(bytes.data() + i * sizeof(T)));
  return out;
}

std::size_t dtype_size(DType d) {
  switch (d) {
    case DType::F32: return 4;
    case DType::F64: return 8;
    case DType::I64: return 8;
    case DType::Utf8: return 1;
  }
  throw CheckpointError("checkpoint: unknown dtype " + std::to_string(static_cast<int>(d)));
}

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, std::string file) : b_(bytes), file_(std::move(file)) {}

  const std::uint8_t* take(std::size_t n, const char* what) {
    if (n > b_.size() - pos_) {
      throw CheckpointError("checkpoint: '" + file_ + "' truncated while reading " + what +
                            " at byte offset " + std::to_string(pos_));
    }
    const std::uint8_t* p = b_.data() + pos_;
    pos_ += n;
    return p;
  }
  template <typename U>
  U read(const char* what) {
    return get_le<U>(take(sizeof(U), what));
  }
  bool done() const { return pos_ == b_.size(); }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& b_;
  std::string file_;
  std::size_t pos_ = 0;
};

}  // namespace

void Checkpoint::put_record(Record r) {
  if (contains(r.name)) throw CheckpointError("checkpoint: duplicate record '" + r.name + "'");
  records_.push_back(std::move(r));
}

void Checkpoint::put(const std::string& name, const Tensor& t) {
  put_record({name, DType::F32, t.shape(), encode<float>(t.values())});
}

void Checkpoint::put(const std::string& name, const TensorD& t) {
  put_record({name, DType::F64, t.shape(), encode<double>(t.values())});
}

void Checkpoint::put_int(const std::string& name, std::int64_t v) {
  Record r{name, DType::I64, {1}, {}};
  put_le(r.payload, static_cast<std::uint64_t>(v));
  put_record(std::move(r));
}

void Checkpoint::put_real(const std::string& name, double v) {
  const double values[] = {v};
  put_record({name, DType::F64, {1}, encode<double>(values)});
}

void Checkpoint::put_string(const std::string& name, const std::string& v) {
  put_record({name, DType::Utf8, {v.size()}, std::vector<std::uint8_t>(v.begin(), v.end())});
}

bool Checkpoint::contains(const std::string& name) const {
  return std::any_of(records_.begin(), records_.end(),
                     [&](const Record& r) { return r.name == name; });
}

const Record& Checkpoint::get(const std::string& name) const {
  for (const auto& r : records_)
    if (r.name == name) return r;
  throw CheckpointError("checkpoint: no record named '" + name + "'");
}

template <typename T>
BasicTensor<T> Checkpoint::tensor(const std::string& name) const {
  const Record& r = get(name);
  std::vector<T> values;
  if (r.dtype == DType::F32) {
    for (float v : decode<float>(r.payload)) values.push_back(static_cast<T>(v));
  } else if (r.dtype == DType::F64) {
    for (double v : decode<double>(r.payload)) values.push_back(static_cast<T>(v));
  } else {
    throw CheckpointError("checkpoint: record '" + name + "' is not a floating-point tensor");
  }
  return BasicTensor<T>(r.shape, std::move(values));
}

std::int64_t Checkpoint::get_int(const std::string& name) const {
  const Record& r = get(name);
  if (r.dtype != DType::I64 || r.payload.size() != 8) {
    throw CheckpointError("checkpoint: record '" + name + "' is not an integer scalar");
  }
  return static_cast<std::int64_t>(get_le<std::uint64_t>(r.payload.data()));
}

double Checkpoint::get_real(const std::string& name) const {
  const Record& r = get(name);
  if (r.dtype != DType::F64 || r.payload.size() != 8) {
    throw CheckpointError("checkpoint: record '" + name + "' is not a real scalar");
  }
  return decode<double>(r.payload)[0];
}

std::string Checkpoint::get_string(const std::string& name) const {
  const Record& r = get(name);
  if (r.dtype != DType::Utf8) throw CheckpointError("checkpoint: record '" + name + "' is not a string");
  return {r.payload.begin(), r.payload.end()};
}

void save_checkpoint(const std::filesystem::path& file, const Checkpoint& ckpt) {
  std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  put_le(out, kCheckpointVersion);
  put_le(out, static_cast<std::uint32_t>(ckpt.records().size()));
  for (const auto& r : ckpt.records()) {
    put_le(out, static_cast<std::uint32_t>(r.name.size()));
    out.insert(out.end(), r.name.begin(), r.name.end());
    out.push_back(static_cast<std::uint8_t>(r.dtype));
    put_le(out, static_cast<std::uint32_t>(r.shape.size()));
    for (auto d : r.shape) put_le(out, static_cast<std::uint64_t>(d));
    out.insert(out.end(), r.payload.begin(), r.payload.end());
  }
  // Staged in a sibling file, then renamed over the target.
  const auto tmp = std::filesystem::path(file.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("checkpoint: cannot write '" + tmp.string() + "'");
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw CheckpointError("checkpoint: write to '" + tmp.string() + "' failed");
  }
  std::filesystem::rename(tmp, file);
}

Checkpoint load_checkpoint(const std::filesystem::path& file) {
  std::ifstream f(file, std::ios::binary);
  if (!f) throw CheckpointError("checkpoint: cannot open '" + file.string() + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                        std::istreambuf_iterator<char>());
  Reader in(bytes, file.string());
  if (std::memcmp(in.take(8, "magic"), kCheckpointMagic, 8) != 0) {
    throw CheckpointError("checkpoint: '" + file.string() + "' is not a tpnet checkpoint");
  }
  const auto version = in.read<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto count = in.read<std::uint32_t>("record count");
  Checkpoint ckpt;
  for (std::uint32_t i = 0; i < count; ++i) {
    Record r;
    const auto name_len = in.read<std::uint32_t>("name length");
    const auto* name = in.take(name_len, "name");
    r.name.assign(name, name + name_len);
    r.dtype = static_cast<DType>(*in.take(1, "dtype"));
    const std::size_t elem = dtype_size(r.dtype);
    const auto ndim = in.read<std::uint32_t>("rank");
    std::size_t n = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      r.shape.push_back(static_cast<std::size_t>(in.read<std::uint64_t>("dims")));
      n *= r.shape.back();
    }
    const auto* payload = in.take(n * elem, "payload");
    r.payload.assign(payload, payload + n * elem);
    ckpt.put_record(std::move(r));
  }
  if (!in.done()) {
    throw CheckpointError("checkpoint: '" + file.string() + "' has trailing bytes at offset " +
                          std::to_string(in.pos()));
  }
  return ckpt;
}

template BasicTensor<float> Checkpoint::tensor<float>(const std::string&) const;
template BasicTensor<double> Checkpoint::tensor<double>(const std::string&) const;

}  // namespace tpnet::io
