// dpif/weights.cpp

// Copyright 2026  DPIF authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dpif/weights.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace dpif {

static_assert(std::endian::native == std::endian::little,
              "weight container assumes a little-endian host");

namespace {

constexpr char kMagicPrefix[] = "DPIFWT";
constexpr char kMagic[] = "DPIFWT01";

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  require(in.good(), ErrorCode::truncated_file,
          "weight container ends mid-record");
  return v;
}

}  // namespace

void WeightStore::put(const std::string& name, Tensor t) {
  require(!name.empty(), ErrorCode::invalid_argument,
          "weight record needs a name");
  entries_[name] = std::move(t);
}

const Tensor* WeightStore::find(const std::string& name) const {
  auto it = entries_.find(name);
  return it == entries_.end() ? nullptr : &it->second;
}

const Tensor& WeightStore::at(const std::string& name) const {
  const Tensor* t = find(name);
  require(t != nullptr, ErrorCode::not_found,
          "weight store has no record named " + name);
  return *t;
}

void WeightStore::save(std::ostream& out) const {
  out.write(kMagic, 8);
  write_pod<uint64_t>(out, entries_.size());
  for (const auto& [name, t] : entries_) {
    write_pod<uint32_t>(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<uint8_t>(out, t.dtype() == Dtype::f32 ? 0 : 1);
    write_pod<uint32_t>(out, static_cast<uint32_t>(t.rank()));
    for (int64_t e : t.shape()) write_pod<uint64_t>(out, static_cast<uint64_t>(e));
    if (t.dtype() == Dtype::f32) {
      const auto& v = t.vals<float>();
      out.write(reinterpret_cast<const char*>(v.data()),
                static_cast<std::streamsize>(v.size() * sizeof(float)));
    } else {
      const auto& v = t.vals<double>();
      out.write(reinterpret_cast<const char*>(v.data()),
                static_cast<std::streamsize>(v.size() * sizeof(double)));
    }
  }
  require(out.good(), ErrorCode::io, "failed writing weight container");
}

WeightStore WeightStore::load(std::istream& in) {
  char magic[8];
  in.read(magic, 8);
  require(in.gcount() == 8, ErrorCode::truncated_file,
          "weight container shorter than its magic");
  require(std::memcmp(magic, kMagicPrefix, 6) == 0, ErrorCode::bad_magic,
          "not a weight container (bad magic)");
  require(std::memcmp(magic, kMagic, 8) == 0, ErrorCode::bad_version,
          "unsupported weight container version " +
              std::string(magic + 6, 2));
  WeightStore store;
  uint64_t count = read_pod<uint64_t>(in);
  for (uint64_t r = 0; r < count; ++r) {
    uint32_t name_len = read_pod<uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    require(in.good(), ErrorCode::truncated_file, "record name cut short");
    uint8_t dt = read_pod<uint8_t>(in);
    require(dt <= 1, ErrorCode::record_mismatch,
            "record " + name + " has unknown dtype code " + std::to_string(dt));
    uint32_t rank = read_pod<uint32_t>(in);
    require(rank <= 8, ErrorCode::record_mismatch,
            "record " + name + " has implausible rank " + std::to_string(rank));
    Shape shape(rank);
    for (uint32_t i = 0; i < rank; ++i)
      shape[i] = static_cast<int64_t>(read_pod<uint64_t>(in));
    int64_t n = shape_numel(shape);
    Tensor t = Tensor::zeros(shape, dt == 0 ? Dtype::f32 : Dtype::f64);
    if (dt == 0) {
      auto& v = t.vals<float>();
      in.read(reinterpret_cast<char*>(v.data()),
              static_cast<std::streamsize>(n * sizeof(float)));
    } else {
      auto& v = t.vals<double>();
      in.read(reinterpret_cast<char*>(v.data()),
              static_cast<std::streamsize>(n * sizeof(double)));
    }
    require(in.good() || (in.eof() && r + 1 == count && in.gcount() ==
                              static_cast<std::streamsize>(
                                  n * (dt == 0 ? sizeof(float) : sizeof(double)))),
            ErrorCode::truncated_file, "record " + name + " payload cut short");
    store.put(name, std::move(t));
  }
  store.meta_.format_version = 1;
  return store;
}

void WeightStore::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  require(out.is_open(), ErrorCode::io, "cannot open " + path + " for write");
  save(out);
  out.close();
  require(out.good(), ErrorCode::io, "failed writing " + path);
}

WeightStore WeightStore::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.is_open(), ErrorCode::io, "cannot open " + path);
  return load(in);
}

}  // namespace dpif
