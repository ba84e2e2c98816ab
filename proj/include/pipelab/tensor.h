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

#ifndef PIPELAB_TENSOR_H_
#define PIPELAB_TENSOR_H_

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace pipelab {

// Dense row-major float64 tensor. Activations are kept as [s*b, h] with row
// index t*b + batch.
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int64_t> dims);

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int64_t rows() const { return shape.at(0); }
  int64_t cols() const { return shape.size() > 1 ? shape.at(1) : 1; }
  double* ptr() { return data.data(); }
  const double* ptr() const { return data.data(); }
  bool empty() const { return data.empty(); }

  // Throws std::runtime_error naming `what` when a value is NaN or inf.
  void CheckFinite(const std::string& what) const;
};

bool BitwiseEqual(const Tensor& a, const Tensor& b);

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

// Container: "PLTN" magic, u32 version, u32 count, then per tensor
// u32 name length, name, u32 rank, i64 dims, f64 data; all little-endian.
void WriteTensors(const NamedTensors& tensors, std::ostream& os);
NamedTensors ReadTensors(std::istream& is);

}  // namespace pipelab

#endif  // PIPELAB_TENSOR_H_
