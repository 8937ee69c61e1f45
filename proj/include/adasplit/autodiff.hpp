// Copyright 2026 The AdaSplit Authors.
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

#pragma once

// Define-by-run reverse-mode differentiation over dense row-major matrices.
//
// A Tape records every primitive executed through it. Learnable matrices live
// in Tensors owned by a ParameterStore; Tape::param() lifts one onto the tape
// and backward() accumulates into Tensor::grad(). Vectors are 1 x d rows.

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace adasplit::ad {

inline constexpr double kLayerNormEps = 1e-5;

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

class Tensor {
 public:
  Tensor() = default;
  Tensor(std::string name, Shape shape);
  Tensor(std::string name, Shape shape, std::vector<double> values);

  const std::string& name() const { return name_; }
  Shape shape() const { return shape_; }
  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool flag) { requires_grad_ = flag; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<double> grad() { return grad_; }
  std::span<const double> grad() const { return grad_; }

  double& at(std::size_t r, std::size_t c) { return values_[r * shape_.cols + c]; }
  double at(std::size_t r, std::size_t c) const {
    return values_[r * shape_.cols + c];
  }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values_).subspan(r * shape_.cols, shape_.cols);
  }

  void zero_grad();

 private:
  std::string name_;
  Shape shape_;
  std::vector<double> values_;
  std::vector<double> grad_;
  bool requires_grad_ = true;
};

// Owns every learnable matrix of a model under a stable canonical name.
// Iteration order is registration order.
class ParameterStore {
 public:
  Tensor& add(std::string name, Shape shape, bool requires_grad = true);
  Tensor& get(std::string_view name);
  const Tensor& get(std::string_view name) const;
  Tensor* find(std::string_view name);
  const Tensor* find(std::string_view name) const;

  std::vector<Tensor*> all();
  std::vector<const Tensor*> all() const;
  std::size_t size() const { return tensors_.size(); }
  std::size_t num_values() const;
  void zero_grad();

 private:
  std::vector<std::unique_ptr<Tensor>> tensors_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }

  Shape shape() const;
  std::span<const double> value() const;
  double item() const;
  double at(std::size_t r, std::size_t c) const;

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  // Leaf bound to a parameter. Repeated calls return the same node.
  Var param(Tensor& tensor);
  Var constant(Shape shape, std::vector<double> values);
  Var scalar(double value);
  // Embedding lookup straight from a table; gradients scatter back into it.
  Var gather_rows(Tensor& table, std::span<const std::size_t> rows);
  Var gather_rows(Tensor& table, std::initializer_list<std::size_t> rows) {
    return gather_rows(table, std::span<const std::size_t>(rows.begin(), rows.size()));
  }

  Var matmul(Var a, Var b, bool transpose_a, bool transpose_b);
  Var add(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double factor);
  Var neg(Var a);
  Var concat(std::span<const Var> parts, int axis);
  Var gather_rows(Var x, std::span<const std::size_t> rows);
  Var softmax(Var x, bool causal);
  // Row-wise, computed as x - logsumexp(x).
  Var log_softmax(Var x);
  Var layer_norm(Var x, Var gain, Var bias, double eps);
  Var sigmoid(Var x);
  Var tanh(Var x);
  Var relu(Var x);
  Var abs(Var x);
  Var log(Var x);
  Var sum(Var x);
  Var mean(Var x);

  // Populates gradients of every reachable parameter. Allowed once per tape.
  void backward(Var loss);

 private:
  friend class Var;

  enum class Op : std::uint8_t {
    kParam, kConstant, kGatherParam, kMatmul, kAdd, kMul, kScale, kNeg,
    kConcat, kGatherRows, kSoftmax, kLogSoftmax, kLayerNorm, kSigmoid, kTanh, kRelu,
    kAbs, kLog, kSum, kMean,
  };

  struct Node {
    Op op = Op::kConstant;
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    std::vector<int> inputs;
    Tensor* source = nullptr;
    std::vector<std::size_t> rows;
    std::vector<double> aux;
    double factor = 0.0;
    int axis = 0;
    bool flag_a = false;
    bool flag_b = false;
    bool needs_grad = false;
  };

  Var push(Node node);
  const Node& node(Var v) const;
  void check_owner(Var v, const char* op) const;
  bool any_needs_grad(std::initializer_list<Var> vars) const;
  void backprop_node(int id);

  std::vector<Node> nodes_;
  std::map<const Tensor*, int> param_nodes_;
  bool grad_enabled_ = true;
  bool backward_done_ = false;
};

// Free-function spelling of the primitives; each dispatches to the operand's tape.
Var matmul(Var a, Var b, bool transpose_a = false, bool transpose_b = false);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var neg(Var a);
Var concat(std::span<const Var> parts, int axis);
Var concat(std::initializer_list<Var> parts, int axis);
Var gather_rows(Var x, std::span<const std::size_t> rows);
Var softmax(Var x, bool causal = false);
Var log_softmax(Var x);
Var layer_norm(Var x, Var gain, Var bias, double eps = kLayerNormEps);
Var sigmoid(Var x);
Var tanh(Var x);
Var relu(Var x);
Var abs(Var x);
Var log(Var x);
Var sum(Var x);
Var mean(Var x);

// Element (r, c) of x as a 1 x 1 node.
Var pick(Var x, std::size_t r, std::size_t c);

}  // namespace adasplit::ad
