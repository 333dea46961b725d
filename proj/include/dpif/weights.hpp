// dpif/weights.hpp

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

#ifndef DPIF_WEIGHTS_HPP
#define DPIF_WEIGHTS_HPP

#include <iosfwd>
#include <map>
#include <string>

#include "dpif/tensor.hpp"

namespace dpif {

/// Named tensor container with a bit-exact binary serialization.
///
/// File layout (little-endian):
///   magic   "DPIFWT01" (8 bytes; trailing two digits are the version)
///   u64     record count
///   record  u32 name length, UTF-8 name bytes,
///           u8 dtype code (0 = f32, 1 = f64),
///           u32 rank, u64 extents[rank],
///           raw row-major payload
class WeightStore {
 public:
  struct Metadata {
    int format_version = 1;
    Dtype dtype = Dtype::f32;
    std::string provenance;  // in-memory annotation, not serialized
  };

  void put(const std::string& name, Tensor t);
  const Tensor* find(const std::string& name) const;
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return find(name) != nullptr; }
  size_t size() const { return entries_.size(); }

  const std::map<std::string, Tensor>& entries() const { return entries_; }
  Metadata& metadata() { return meta_; }
  const Metadata& metadata() const { return meta_; }

  void save(std::ostream& out) const;
  static WeightStore load(std::istream& in);

  void save_file(const std::string& path) const;
  static WeightStore load_file(const std::string& path);

 private:
  std::map<std::string, Tensor> entries_;
  Metadata meta_;
};

}  // namespace dpif

#endif  // DPIF_WEIGHTS_HPP
