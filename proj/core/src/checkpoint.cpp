// Copyright 2026 The vitdiv Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "vitdiv/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace vitdiv {

namespace {

constexpr char kMagic[4] = {'V', 'D', 'C', 'K'};

class Writer {
 public:
  void u32(std::uint32_t v) { le(v); }
  void u64(std::uint64_t v) { le(v); }
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  template <typename U>
  void le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint32_t u32(const char* what) { return le<std::uint32_t>(what); }
  std::uint64_t u64(const char* what) { return le<std::uint64_t>(what); }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw ParseError(std::string("checkpoint truncated while reading ") + what, pos_);
    }
  }
  template <typename U>
  U le(const char* what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

std::string encode_meta(const std::map<std::string, std::string>& meta) {
  std::string out;
  for (const auto& [k, v] : meta) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw Error("checkpoint metadata key/value contains a reserved character: " + k);
    }
    out += k + "=" + v + "\n";
  }
  return out;
}

std::map<std::string, std::string> decode_meta(const std::string& text, std::size_t offset) {
  std::map<std::string, std::string> meta;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("checkpoint metadata line without '='", offset);
    meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return meta;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const CheckpointContents& contents) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);
  const std::string meta = encode_meta(contents.meta);
  w.u32(static_cast<std::uint32_t>(meta.size()));
  w.bytes(meta.data(), meta.size());
  w.u32(contents.float64 ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(contents.arrays.size()));
  for (const auto& a : contents.arrays) {
    w.u32(static_cast<std::uint32_t>(a.name.size()));
    w.bytes(a.name.data(), a.name.size());
    w.u32(static_cast<std::uint32_t>(a.shape.size()));
    std::int64_t n = 1;
    for (auto d : a.shape) {
      w.u64(static_cast<std::uint64_t>(d));
      n *= d;
    }
    if (n != static_cast<std::int64_t>(a.values.size())) {
      throw ShapeError("encode_checkpoint " + a.name, a.shape,
                       {static_cast<std::int64_t>(a.values.size())});
    }
    for (double v : a.values) {
      if (contents.float64) w.f64(v);
      else w.f32(static_cast<float>(v));
    }
  }
  return w.take();
}

CheckpointContents decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  const std::string magic = r.str(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw ParseError("bad checkpoint magic", 0);
  const auto version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version), 4);
  }
  CheckpointContents out;
  const auto meta_len = r.u32("metadata length");
  const auto meta_offset = r.pos();
  out.meta = decode_meta(r.str(meta_len, "metadata"), meta_offset);
  const auto dtype = r.u32("dtype");
  if (dtype > 1) throw ParseError("unknown checkpoint dtype " + std::to_string(dtype), r.pos() - 4);
  out.float64 = dtype == 1;
  const auto count = r.u32("array count");
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointArray a;
    a.name = r.str(r.u32("name length"), "name");
    const auto rank = r.u32("rank");
    std::int64_t n = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      const auto d = static_cast<std::int64_t>(r.u64("dims"));
      if (d <= 0) throw ParseError("non-positive extent in array " + a.name, r.pos() - 8);
      a.shape.push_back(d);
      n *= d;
    }
    a.values.reserve(static_cast<std::size_t>(n));
    for (std::int64_t k = 0; k < n; ++k) {
      a.values.push_back(out.float64 ? r.f64("values") : static_cast<double>(r.f32("values")));
    }
    out.arrays.push_back(std::move(a));
  }
  if (!r.done()) throw ParseError("trailing bytes after checkpoint payload", r.pos());
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path.string());
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const VisionTransformer<T>& model,
                     const std::map<std::string, std::string>& extra_meta) {
  CheckpointContents c;
  c.meta = extra_meta;
  for (const auto& [k, v] : model.config().to_map()) c.meta["model." + k] = v;
  c.float64 = std::is_same_v<T, double>;
  for (const auto& [name, tensor] : model.named_parameters()) {
    c.arrays.push_back({name, tensor.shape(), std::vector<double>(tensor.data().begin(), tensor.data().end())});
  }
  write_file(path, encode_checkpoint(c));
}

template <typename T>
VisionTransformer<T> load_checkpoint(const std::filesystem::path& path,
                                     std::map<std::string, std::string>* meta_out) {
  const CheckpointContents c = decode_checkpoint(read_file(path));
  std::map<std::string, std::string> model_keys;
  for (const auto& [k, v] : c.meta) {
    if (k.rfind("model.", 0) == 0) model_keys[k.substr(6)] = v;
  }
  VisionTransformer<T> model(ModelConfig::from_map(model_keys), 0);
  const auto expected = model.named_parameters().size();
  if (c.arrays.size() != expected) {
    throw ParseError("checkpoint has " + std::to_string(c.arrays.size()) + " arrays, model expects " +
                         std::to_string(expected),
                     0);
  }
  for (const auto& a : c.arrays) {
    std::vector<T> values(a.values.begin(), a.values.end());
    model.set_parameter(a.name, ad::Tensor<T>(a.shape, std::move(values)));
  }
  if (meta_out) *meta_out = c.meta;
  return model;
}

template void save_checkpoint(const std::filesystem::path&, const VisionTransformer<float>&,
                              const std::map<std::string, std::string>&);
template void save_checkpoint(const std::filesystem::path&, const VisionTransformer<double>&,
                              const std::map<std::string, std::string>&);
template VisionTransformer<float> load_checkpoint(const std::filesystem::path&,
                                                  std::map<std::string, std::string>*);
template VisionTransformer<double> load_checkpoint(const std::filesystem::path&,
                                                   std::map<std::string, std::string>*);

}  // namespace vitdiv
