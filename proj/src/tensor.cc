/**
 * Copyright 2026 The pipelab Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "pipelab/tensor.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace pipelab {

Tensor::Tensor(std::vector<int64_t> dims) : shape(std::move(dims)) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive");
    n *= d;
  }
  data.assign(n, 0.0);
}

void Tensor::CheckFinite(const std::string& what) const {
  for (double v : data) {
    if (!std::isfinite(v)) throw std::runtime_error("non-finite value in " + what);
  }
}

bool BitwiseEqual(const Tensor& a, const Tensor& b) {
  return a.shape == b.shape &&
         std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0;
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "tensor container assumes a little-endian host");

void Put32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void Put64(std::ostream& os, int64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }

uint32_t Get32(std::istream& is) {
  uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 4)) throw std::runtime_error("truncated tensor file");
  return v;
}

int64_t Get64(std::istream& is) {
  int64_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 8)) throw std::runtime_error("truncated tensor file");
  return v;
}

constexpr char kMagic[4] = {'P', 'L', 'T', 'N'};
constexpr uint32_t kVersion = 1;

}  // namespace

void WriteTensors(const NamedTensors& tensors, std::ostream& os) {
  os.write(kMagic, 4);
  Put32(os, kVersion);
  Put32(os, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    Put32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    Put32(os, static_cast<uint32_t>(t.shape.size()));
    for (int64_t d : t.shape) Put64(os, d);
    os.write(reinterpret_cast<const char*>(t.data.data()),
             static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  }
}

NamedTensors ReadTensors(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("not a tensor container");
  }
  if (Get32(is) != kVersion) throw std::runtime_error("unsupported tensor container version");
  const uint32_t count = Get32(is);
  NamedTensors out;
  for (uint32_t k = 0; k < count; ++k) {
    std::string name(Get32(is), '\0');
    if (!is.read(name.data(), static_cast<std::streamsize>(name.size()))) {
      throw std::runtime_error("truncated tensor file");
    }
    std::vector<int64_t> dims(Get32(is));
    for (int64_t& d : dims) d = Get64(is);
    Tensor t(dims);
    if (!is.read(reinterpret_cast<char*>(t.data.data()),
                 static_cast<std::streamsize>(t.data.size() * sizeof(double)))) {
      throw std::runtime_error("truncated tensor file");
    }
    out.emplace_back(std::move(name), std::move(t));
  }
  return out;
}

}  // namespace pipelab
