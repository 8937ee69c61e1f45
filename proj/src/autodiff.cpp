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

#include "adasplit/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "adasplit/errors.hpp"

namespace adasplit::ad {

namespace {

std::string describe(const char* op, Shape a, Shape b) {
  std::ostringstream out;
  out << op << ": incompatible shapes " << a.str() << " and " << b.str();
  return out.str();
}

// Output extent of one broadcast dimension; 0 when incompatible.
std::size_t broadcast_dim(std::size_t a, std::size_t b) {
  if (a == b) return a;
  if (a == 1) return b;
  if (b == 1) return a;
  return 0;
}

Shape broadcast_shape(const char* op, Shape a, Shape b) {
  Shape out{broadcast_dim(a.rows, b.rows), broadcast_dim(a.cols, b.cols)};
  if (out.rows == 0 || out.cols == 0) throw ShapeError(describe(op, a, b));
  return out;
}

inline std::size_t bidx(Shape s, std::size_t r, std::size_t c) {
  return (s.rows == 1 ? 0 : r) * s.cols + (s.cols == 1 ? 0 : c);
}

inline double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

std::string Shape::str() const {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

// ---------------------------------------------------------------------------
// Tensor / ParameterStore

Tensor::Tensor(std::string name, Shape shape)
    : name_(std::move(name)),
      shape_(shape),
      values_(shape.size(), 0.0),
      grad_(shape.size(), 0.0) {}

Tensor::Tensor(std::string name, Shape shape, std::vector<double> values)
    : name_(std::move(name)),
      shape_(shape),
      values_(std::move(values)),
      grad_(shape.size(), 0.0) {
  if (values_.size() != shape_.size()) {
    throw ShapeError("tensor '" + name_ + "': " + std::to_string(values_.size()) +
                     " values for shape " + shape_.str());
  }
}

void Tensor::zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

Tensor& ParameterStore::add(std::string name, Shape shape, bool requires_grad) {
  if (index_.contains(name)) {
    throw std::invalid_argument("duplicate parameter name: " + name);
  }
  index_.emplace(name, tensors_.size());
  tensors_.push_back(std::make_unique<Tensor>(std::move(name), shape));
  tensors_.back()->set_requires_grad(requires_grad);
  return *tensors_.back();
}

Tensor* ParameterStore::find(std::string_view name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : tensors_[it->second].get();
}

const Tensor* ParameterStore::find(std::string_view name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : tensors_[it->second].get();
}

Tensor& ParameterStore::get(std::string_view name) {
  Tensor* t = find(name);
  if (t == nullptr) throw std::out_of_range("unknown parameter: " + std::string(name));
  return *t;
}

const Tensor& ParameterStore::get(std::string_view name) const {
  const Tensor* t = find(name);
  if (t == nullptr) throw std::out_of_range("unknown parameter: " + std::string(name));
  return *t;
}

std::vector<Tensor*> ParameterStore::all() {
  std::vector<Tensor*> out;
  out.reserve(tensors_.size());
  for (auto& t : tensors_) out.push_back(t.get());
  return out;
}

std::vector<const Tensor*> ParameterStore::all() const {
  std::vector<const Tensor*> out;
  out.reserve(tensors_.size());
  for (const auto& t : tensors_) out.push_back(t.get());
  return out;
}

std::size_t ParameterStore::num_values() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t->shape().size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& t : tensors_) t->zero_grad();
}

// ---------------------------------------------------------------------------
// Var

Shape Var::shape() const { return tape_->node(*this).shape; }

std::span<const double> Var::value() const { return tape_->node(*this).value; }

double Var::item() const {
  const auto& n = tape_->node(*this);
  if (n.shape.size() != 1) throw ShapeError("item(): tensor of shape " + n.shape.str());
  return n.value[0];
}

double Var::at(std::size_t r, std::size_t c) const {
  const auto& n = tape_->node(*this);
  return n.value[r * n.shape.cols + c];
}

// ---------------------------------------------------------------------------
// Tape: recording

const Tape::Node& Tape::node(Var v) const { return nodes_[static_cast<std::size_t>(v.id_)]; }

void Tape::check_owner(Var v, const char* op) const {
  if (v.tape_ != this) {
    throw std::invalid_argument(std::string(op) + ": operand belongs to another tape");
  }
}

bool Tape::any_needs_grad(std::initializer_list<Var> vars) const {
  if (!grad_enabled_) return false;
  for (Var v : vars) {
    if (node(v).needs_grad) return true;
  }
  return false;
}

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::param(Tensor& tensor) {
  if (auto it = param_nodes_.find(&tensor); it != param_nodes_.end()) {
    return Var(this, it->second);
  }
  Node n;
  n.op = Op::kParam;
  n.shape = tensor.shape();
  n.value.assign(tensor.values().begin(), tensor.values().end());
  n.source = &tensor;
  n.needs_grad = grad_enabled_ && tensor.requires_grad();
  Var v = push(std::move(n));
  param_nodes_.emplace(&tensor, v.id_);
  return v;
}

Var Tape::constant(Shape shape, std::vector<double> values) {
  if (values.size() != shape.size()) {
    throw ShapeError("constant: " + std::to_string(values.size()) +
                     " values for shape " + shape.str());
  }
  Node n;
  n.op = Op::kConstant;
  n.shape = shape;
  n.value = std::move(values);
  return push(std::move(n));
}

Var Tape::scalar(double value) { return constant({1, 1}, {value}); }

Var Tape::gather_rows(Tensor& table, std::span<const std::size_t> rows) {
  const Shape ts = table.shape();
  Node n;
  n.op = Op::kGatherParam;
  n.shape = {rows.size(), ts.cols};
  n.value.resize(n.shape.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= ts.rows) {
      throw std::out_of_range("gather_rows: row " + std::to_string(rows[i]) +
                              " out of range for '" + table.name() + "' " + ts.str());
    }
    std::copy_n(table.values().begin() + static_cast<std::ptrdiff_t>(rows[i] * ts.cols),
                ts.cols, n.value.begin() + static_cast<std::ptrdiff_t>(i * ts.cols));
  }
  n.source = &table;
  n.rows.assign(rows.begin(), rows.end());
  n.needs_grad = grad_enabled_ && table.requires_grad();
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b, bool transpose_a, bool transpose_b) {
  check_owner(a, "matmul");
  check_owner(b, "matmul");
  const Shape sa = node(a).shape;
  const Shape sb = node(b).shape;
  const std::size_t m = transpose_a ? sa.cols : sa.rows;
  const std::size_t k = transpose_a ? sa.rows : sa.cols;
  const std::size_t kb = transpose_b ? sb.cols : sb.rows;
  const std::size_t p = transpose_b ? sb.rows : sb.cols;
  if (k != kb) throw ShapeError(describe("matmul", sa, sb));

  Node n;
  n.op = Op::kMatmul;
  n.shape = {m, p};
  n.value.assign(m * p, 0.0);
  const auto& av = node(a).value;
  const auto& bv = node(b).value;
  for (std::size_t i = 0; i < m; ++i) {
    double* out = n.value.data() + i * p;
    for (std::size_t t = 0; t < k; ++t) {
      const double x = transpose_a ? av[t * sa.cols + i] : av[i * sa.cols + t];
      if (x == 0.0) continue;
      if (!transpose_b) {
        const double* brow = bv.data() + t * sb.cols;
        for (std::size_t j = 0; j < p; ++j) out[j] += x * brow[j];
      } else {
        for (std::size_t j = 0; j < p; ++j) out[j] += x * bv[j * sb.cols + t];
      }
    }
  }
  n.inputs = {a.id_, b.id_};
  n.flag_a = transpose_a;
  n.flag_b = transpose_b;
  n.needs_grad = any_needs_grad({a, b});
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  check_owner(a, "add");
  check_owner(b, "add");
  const Shape sa = node(a).shape, sb = node(b).shape;
  const Shape s = broadcast_shape("add", sa, sb);
  Node n;
  n.op = Op::kAdd;
  n.shape = s;
  n.value.resize(s.size());
  const auto& av = node(a).value;
  const auto& bv = node(b).value;
  for (std::size_t r = 0; r < s.rows; ++r) {
    for (std::size_t c = 0; c < s.cols; ++c) {
      n.value[r * s.cols + c] = av[bidx(sa, r, c)] + bv[bidx(sb, r, c)];
    }
  }
  n.inputs = {a.id_, b.id_};
  n.needs_grad = any_needs_grad({a, b});
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  check_owner(a, "mul");
  check_owner(b, "mul");
  const Shape sa = node(a).shape, sb = node(b).shape;
  const Shape s = broadcast_shape("mul", sa, sb);
  Node n;
  n.op = Op::kMul;
  n.shape = s;
  n.value.resize(s.size());
  const auto& av = node(a).value;
  const auto& bv = node(b).value;
  for (std::size_t r = 0; r < s.rows; ++r) {
    for (std::size_t c = 0; c < s.cols; ++c) {
      n.value[r * s.cols + c] = av[bidx(sa, r, c)] * bv[bidx(sb, r, c)];
    }
  }
  n.inputs = {a.id_, b.id_};
  n.needs_grad = any_needs_grad({a, b});
  return push(std::move(n));
}

Var Tape::scale(Var a, double factor) {
  check_owner(a, "scale");
  Node n;
  n.op = Op::kScale;
  n.shape = node(a).shape;
  n.value = node(a).value;
  for (double& x : n.value) x *= factor;
  n.factor = factor;
  n.inputs = {a.id_};
  n.needs_grad = any_needs_grad({a});
  return push(std::move(n));
}

Var Tape::neg(Var a) {
  check_owner(a, "neg");
  Node n;
  n.op = Op::kNeg;
  n.shape = node(a).shape;
  n.value = node(a).value;
  for (double& x : n.value) x = -x;
  n.inputs = {a.id_};
  n.needs_grad = any_needs_grad({a});
  return push(std::move(n));
}

Var Tape::concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no operands");
  if (axis != 0 && axis != 1) throw std::invalid_argument("concat: axis must be 0 or 1");
  Node n;
  n.op = Op::kConcat;
  n.axis = axis;
  const Shape first = node(parts[0]).shape;
  Shape s = first;
  if (axis == 0) s.rows = 0; else s.cols = 0;
  for (Var p : parts) {
    check_owner(p, "concat");
    const Shape ps = node(p).shape;
    if (axis == 0) {
      if (ps.cols != first.cols) throw ShapeError(describe("concat(axis=0)", first, ps));
      s.rows += ps.rows;
    } else {
      if (ps.rows != first.rows) throw ShapeError(describe("concat(axis=1)", first, ps));
      s.cols += ps.cols;
    }
    n.inputs.push_back(p.id_);
    n.needs_grad = n.needs_grad || (grad_enabled_ && node(p).needs_grad);
  }
  n.shape = s;
  n.value.resize(s.size());
  if (axis == 0) {
    std::size_t offset = 0;
    for (Var p : parts) {
      const auto& pv = node(p).value;
      std::copy(pv.begin(), pv.end(), n.value.begin() + static_cast<std::ptrdiff_t>(offset));
      offset += pv.size();
    }
  } else {
    std::size_t col = 0;
    for (Var p : parts) {
      const Node& pn = node(p);
      for (std::size_t r = 0; r < s.rows; ++r) {
        for (std::size_t c = 0; c < pn.shape.cols; ++c) {
          n.value[r * s.cols + col + c] = pn.value[r * pn.shape.cols + c];
        }
      }
      col += pn.shape.cols;
    }
  }
  return push(std::move(n));
}

Var Tape::gather_rows(Var x, std::span<const std::size_t> rows) {
  check_owner(x, "gather_rows");
  const Shape xs = node(x).shape;
  Node n;
  n.op = Op::kGatherRows;
  n.shape = {rows.size(), xs.cols};
  n.value.resize(n.shape.size());
  const auto& xv = node(x).value;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= xs.rows) {
      throw std::out_of_range("gather_rows: row " + std::to_string(rows[i]) +
                              " out of range for " + xs.str());
    }
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(rows[i] * xs.cols), xs.cols,
                n.value.begin() + static_cast<std::ptrdiff_t>(i * xs.cols));
  }
  n.rows.assign(rows.begin(), rows.end());
  n.inputs = {x.id_};
  n.needs_grad = any_needs_grad({x});
  return push(std::move(n));
}

Var Tape::softmax(Var x, bool causal) {
  check_owner(x, "softmax");
  const Shape s = node(x).shape;
  if (s.cols == 0) throw ShapeError("softmax: empty axis in " + s.str());
  if (causal && s.rows > s.cols) {
    throw ShapeError("softmax(causal): more query rows than key columns in " + s.str());
  }
  Node n;
  n.op = Op::kSoftmax;
  n.shape = s;
  n.value.assign(s.size(), 0.0);
  n.flag_a = causal;
  const auto& xv = node(x).value;
  for (std::size_t r = 0; r < s.rows; ++r) {
    const std::size_t width = causal ? r + 1 : s.cols;
    const double* in = xv.data() + r * s.cols;
    double* out = n.value.data() + r * s.cols;
    const double mx = *std::max_element(in, in + width);
    double total = 0.0;
    for (std::size_t c = 0; c < width; ++c) {
      out[c] = std::exp(in[c] - mx);
      total += out[c];
    }
    for (std::size_t c = 0; c < width; ++c) out[c] /= total;
  }
  n.inputs = {x.id_};
  n.needs_grad = any_needs_grad({x});
  return push(std::move(n));
}

Var Tape::log_softmax(Var x) {
  check_owner(x, "log_softmax");
  const Shape s = node(x).shape;
  if (s.cols == 0) throw ShapeError("log_softmax: empty axis in " + s.str());
  Node n;
  n.op = Op::kLogSoftmax;
  n.shape = s;
  n.value.assign(s.size(), 0.0);
  const auto& xv = node(x).value;
  for (std::size_t r = 0; r < s.rows; ++r) {
    const double* in = xv.data() + r * s.cols;
    double* out = n.value.data() + r * s.cols;
    const double mx = *std::max_element(in, in + s.cols);
    double total = 0.0;
    for (std::size_t c = 0; c < s.cols; ++c) total += std::exp(in[c] - mx);
    const double shift = mx + std::log(total);
    for (std::size_t c = 0; c < s.cols; ++c) out[c] = in[c] - shift;
  }
  n.inputs = {x.id_};
  n.needs_grad = any_needs_grad({x});
  return push(std::move(n));
}

Var Tape::layer_norm(Var x, Var gain, Var bias, double eps) {
  check_owner(x, "layer_norm");
  check_owner(gain, "layer_norm");
  check_owner(bias, "layer_norm");
  const Shape s = node(x).shape;
  const Shape row{1, s.cols};
  if (node(gain).shape != row) throw ShapeError(describe("layer_norm(gain)", s, node(gain).shape));
  if (node(bias).shape != row) throw ShapeError(describe("layer_norm(bias)", s, node(bias).shape));
  Node n;
  n.op = Op::kLayerNorm;
  n.shape = s;
  n.value.resize(s.size());
  // aux holds the normalized input followed by one inverse std per row.
  n.aux.resize(s.size() + s.rows);
  const auto& xv = node(x).value;
  const auto& g = node(gain).value;
  const auto& b = node(bias).value;
  const double d = static_cast<double>(s.cols);
  for (std::size_t r = 0; r < s.rows; ++r) {
    const double* in = xv.data() + r * s.cols;
    double mu = 0.0;
    for (std::size_t c = 0; c < s.cols; ++c) mu += in[c];
    mu /= d;
    double var = 0.0;
    for (std::size_t c = 0; c < s.cols; ++c) var += (in[c] - mu) * (in[c] - mu);
    var /= d;
    const double inv_std = 1.0 / std::sqrt(var + eps);
    n.aux[s.size() + r] = inv_std;
    for (std::size_t c = 0; c < s.cols; ++c) {
      const double xhat = (in[c] - mu) * inv_std;
      n.aux[r * s.cols + c] = xhat;
      n.value[r * s.cols + c] = xhat * g[c] + b[c];
    }
  }
  n.factor = eps;
  n.inputs = {x.id_, gain.id_, bias.id_};
  n.needs_grad = any_needs_grad({x, gain, bias});
  return push(std::move(n));
}

namespace {
template <typename F>
std::vector<double> map_values(const std::vector<double>& in, F f) {
  std::vector<double> out(in.size());
  std::transform(in.begin(), in.end(), out.begin(), f);
  return out;
}
}  // namespace

Var Tape::sigmoid(Var x) {
  check_owner(x, "sigmoid");
  Node n;
  n.op = Op::kSigmoid;
  n.shape = node(x).shape;
  n.value = map_values(node(x).value, sigmoid_scalar);
  n.inputs = {x.id_};
  n.needs_grad = any_needs_grad({x});
  return push(std::move(n));
}

Var Tape::tanh(Var x) {
  check_owner(x, "tanh");
  Node n;
  n.op = Op::kTanh;
  n.shape = node(x).shape;
  n.value = map_values(node(x).value, [](double v) { return std::tanh(v); });
  n.inputs = {x.id_};
  n.needs_grad = any_needs_grad({x});
  return push(std::move(n));
}

Var Tape::relu(Var x) {
  check_owner(x, "relu");
  Node n;
  n.op = Op::kRelu;
  n.shape = node(x).shape;
  n.value = map_values(node(x).value, [](double v) { return v > 0.0 ? v : 0.0; });
  n.inputs = {x.id_};
  n.needs_grad = any_needs_grad({x});
  return push(std::move(n));
}

Var Tape::abs(Var x) {
  check_owner(x, "abs");
  Node n;
  n.op = Op::kAbs;
  n.shape = node(x).shape;
  n.value = map_values(node(x).value, [](double v) { return std::fabs(v); });
  n.inputs = {x.id_};
  n.needs_grad = any_needs_grad({x});
  return push(std::move(n));
}

Var Tape::log(Var x) {
  check_owner(x, "log");
  const auto& xv = node(x).value;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    if (!(xv[i] > 0.0)) {
      std::ostringstream msg;
      msg << "log: non-positive input " << xv[i] << " at flat index " << i;
      throw NumericError(msg.str());
    }
  }
  Node n;
  n.op = Op::kLog;
  n.shape = node(x).shape;
  n.value = map_values(xv, [](double v) { return std::log(v); });
  n.inputs = {x.id_};
  n.needs_grad = any_needs_grad({x});
  return push(std::move(n));
}

Var Tape::sum(Var x) {
  check_owner(x, "sum");
  Node n;
  n.op = Op::kSum;
  n.shape = {1, 1};
  double total = 0.0;
  for (double v : node(x).value) total += v;
  n.value = {total};
  n.inputs = {x.id_};
  n.needs_grad = any_needs_grad({x});
  return push(std::move(n));
}

Var Tape::mean(Var x) {
  check_owner(x, "mean");
  const auto& xv = node(x).value;
  if (xv.empty()) throw ShapeError("mean: empty tensor");
  Node n;
  n.op = Op::kMean;
  n.shape = {1, 1};
  double total = 0.0;
  for (double v : xv) total += v;
  n.value = {total / static_cast<double>(xv.size())};
  n.inputs = {x.id_};
  n.needs_grad = any_needs_grad({x});
  return push(std::move(n));
}

// ---------------------------------------------------------------------------
// Tape: backward

void Tape::backward(Var loss) {
  check_owner(loss, "backward");
  if (backward_done_) throw std::logic_error("backward: tape already consumed");
  if (nodes_.empty()) throw std::logic_error("backward: empty tape");
  const Shape ls = node(loss).shape;
  if (ls.size() != 1) throw ShapeError("backward: loss must be scalar, got " + ls.str());
  backward_done_ = true;
  if (!nodes_[static_cast<std::size_t>(loss.id_)].needs_grad) return;
  nodes_[static_cast<std::size_t>(loss.id_)].grad = {1.0};
  for (int id = loss.id_; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad || n.grad.empty()) continue;
    backprop_node(id);
  }
}

void Tape::backprop_node(int id) {
  // Inputs may be appended-to while we hold `n`; nodes_ never grows during backward.
  Node& n = nodes_[static_cast<std::size_t>(id)];
  const Shape s = n.shape;
  const std::vector<double>& g = n.grad;

  auto grad_of = [this](int in) -> std::vector<double>* {
    Node& src = nodes_[static_cast<std::size_t>(in)];
    if (!src.needs_grad) return nullptr;
    if (src.grad.empty()) src.grad.assign(src.shape.size(), 0.0);
    return &src.grad;
  };
  auto input = [this, &n](std::size_t i) -> const Node& {
    return nodes_[static_cast<std::size_t>(n.inputs[i])];
  };

  switch (n.op) {
    case Op::kConstant:
      break;
    case Op::kParam: {
      auto dst = n.source->grad();
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
      break;
    }
    case Op::kGatherParam: {
      auto dst = n.source->grad();
      const std::size_t cols = s.cols;
      for (std::size_t i = 0; i < n.rows.size(); ++i) {
        for (std::size_t c = 0; c < cols; ++c) dst[n.rows[i] * cols + c] += g[i * cols + c];
      }
      break;
    }
    case Op::kMatmul: {
      const Node& a = input(0);
      const Node& b = input(1);
      const Shape sa = a.shape, sb = b.shape;
      const bool ta = n.flag_a, tb = n.flag_b;
      const std::size_t m = s.rows, p = s.cols;
      const std::size_t k = ta ? sa.rows : sa.cols;
      if (auto* ga = grad_of(n.inputs[0])) {
        // dA_eff[i][t] = sum_j g[i][j] * B_eff[t][j]
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t t = 0; t < k; ++t) {
            double acc = 0.0;
            for (std::size_t j = 0; j < p; ++j) {
              const double bval = tb ? b.value[j * sb.cols + t] : b.value[t * sb.cols + j];
              acc += g[i * p + j] * bval;
            }
            if (ta) (*ga)[t * sa.cols + i] += acc; else (*ga)[i * sa.cols + t] += acc;
          }
        }
      }
      if (auto* gb = grad_of(n.inputs[1])) {
        // dB_eff[t][j] = sum_i A_eff[i][t] * g[i][j]
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t t = 0; t < k; ++t) {
            const double aval = ta ? a.value[t * sa.cols + i] : a.value[i * sa.cols + t];
            if (aval == 0.0) continue;
            for (std::size_t j = 0; j < p; ++j) {
              if (tb) (*gb)[j * sb.cols + t] += aval * g[i * p + j];
              else (*gb)[t * sb.cols + j] += aval * g[i * p + j];
            }
          }
        }
      }
      break;
    }
    case Op::kAdd: {
      for (std::size_t which = 0; which < 2; ++which) {
        if (auto* gx = grad_of(n.inputs[which])) {
          const Shape xs = input(which).shape;
          for (std::size_t r = 0; r < s.rows; ++r) {
            for (std::size_t c = 0; c < s.cols; ++c) (*gx)[bidx(xs, r, c)] += g[r * s.cols + c];
          }
        }
      }
      break;
    }
    case Op::kMul: {
      for (std::size_t which = 0; which < 2; ++which) {
        if (auto* gx = grad_of(n.inputs[which])) {
          const Node& other = input(1 - which);
          const Shape xs = input(which).shape;
          for (std::size_t r = 0; r < s.rows; ++r) {
            for (std::size_t c = 0; c < s.cols; ++c) {
              (*gx)[bidx(xs, r, c)] += g[r * s.cols + c] * other.value[bidx(other.shape, r, c)];
            }
          }
        }
      }
      break;
    }
    case Op::kScale:
      if (auto* gx = grad_of(n.inputs[0])) {
        for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += n.factor * g[i];
      }
      break;
    case Op::kNeg:
      if (auto* gx = grad_of(n.inputs[0])) {
        for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] -= g[i];
      }
      break;
    case Op::kConcat: {
      std::size_t offset = 0;
      for (std::size_t which = 0; which < n.inputs.size(); ++which) {
        const Shape ps = input(which).shape;
        if (auto* gx = grad_of(n.inputs[which])) {
          if (n.axis == 0) {
            for (std::size_t i = 0; i < ps.size(); ++i) (*gx)[i] += g[offset * s.cols + i];
          } else {
            for (std::size_t r = 0; r < s.rows; ++r) {
              for (std::size_t c = 0; c < ps.cols; ++c) {
                (*gx)[r * ps.cols + c] += g[r * s.cols + offset + c];
              }
            }
          }
        }
        offset += n.axis == 0 ? ps.rows : ps.cols;
      }
      break;
    }
    case Op::kGatherRows:
      if (auto* gx = grad_of(n.inputs[0])) {
        for (std::size_t i = 0; i < n.rows.size(); ++i) {
          for (std::size_t c = 0; c < s.cols; ++c) {
            (*gx)[n.rows[i] * s.cols + c] += g[i * s.cols + c];
          }
        }
      }
      break;
    case Op::kSoftmax:
      if (auto* gx = grad_of(n.inputs[0])) {
        for (std::size_t r = 0; r < s.rows; ++r) {
          const double* y = n.value.data() + r * s.cols;
          const double* gy = g.data() + r * s.cols;
          double dot = 0.0;
          for (std::size_t c = 0; c < s.cols; ++c) dot += gy[c] * y[c];
          for (std::size_t c = 0; c < s.cols; ++c) (*gx)[r * s.cols + c] += y[c] * (gy[c] - dot);
        }
      }
      break;
    case Op::kLogSoftmax:
      if (auto* gx = grad_of(n.inputs[0])) {
        for (std::size_t r = 0; r < s.rows; ++r) {
          const double* y = n.value.data() + r * s.cols;
          const double* gy = g.data() + r * s.cols;
          double total = 0.0;
          for (std::size_t c = 0; c < s.cols; ++c) total += gy[c];
          for (std::size_t c = 0; c < s.cols; ++c) {
            (*gx)[r * s.cols + c] += gy[c] - std::exp(y[c]) * total;
          }
        }
      }
      break;
    case Op::kLayerNorm: {
      const std::vector<double>& gain = input(1).value;
      const double d = static_cast<double>(s.cols);
      if (auto* gx = grad_of(n.inputs[0])) {
        for (std::size_t r = 0; r < s.rows; ++r) {
          const double inv_std = n.aux[s.size() + r];
          double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
          for (std::size_t c = 0; c < s.cols; ++c) {
            const double dxhat = g[r * s.cols + c] * gain[c];
            mean_dxhat += dxhat;
            mean_dxhat_xhat += dxhat * n.aux[r * s.cols + c];
          }
          mean_dxhat /= d;
          mean_dxhat_xhat /= d;
          for (std::size_t c = 0; c < s.cols; ++c) {
            const double dxhat = g[r * s.cols + c] * gain[c];
            const double xhat = n.aux[r * s.cols + c];
            (*gx)[r * s.cols + c] += inv_std * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat);
          }
        }
      }
      if (auto* gg = grad_of(n.inputs[1])) {
        for (std::size_t r = 0; r < s.rows; ++r) {
          for (std::size_t c = 0; c < s.cols; ++c) (*gg)[c] += g[r * s.cols + c] * n.aux[r * s.cols + c];
        }
      }
      if (auto* gb = grad_of(n.inputs[2])) {
        for (std::size_t r = 0; r < s.rows; ++r) {
          for (std::size_t c = 0; c < s.cols; ++c) (*gb)[c] += g[r * s.cols + c];
        }
      }
      break;
    }
    case Op::kSigmoid:
      if (auto* gx = grad_of(n.inputs[0])) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          (*gx)[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
        }
      }
      break;
    case Op::kTanh:
      if (auto* gx = grad_of(n.inputs[0])) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          (*gx)[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
        }
      }
      break;
    case Op::kRelu:
      if (auto* gx = grad_of(n.inputs[0])) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (n.value[i] > 0.0) (*gx)[i] += g[i];
        }
      }
      break;
    case Op::kAbs:
      if (auto* gx = grad_of(n.inputs[0])) {
        const auto& xv = input(0).value;
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (xv[i] > 0.0) (*gx)[i] += g[i];
          else if (xv[i] < 0.0) (*gx)[i] -= g[i];
        }
      }
      break;
    case Op::kLog:
      if (auto* gx = grad_of(n.inputs[0])) {
        const auto& xv = input(0).value;
        for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] / xv[i];
      }
      break;
    case Op::kSum:
      if (auto* gx = grad_of(n.inputs[0])) {
        for (double& v : *gx) v += g[0];
      }
      break;
    case Op::kMean:
      if (auto* gx = grad_of(n.inputs[0])) {
        const double share = g[0] / static_cast<double>(gx->size());
        for (double& v : *gx) v += share;
      }
      break;
  }
}

// ---------------------------------------------------------------------------
// Free functions

namespace {
Tape& tape_of(Var v, const char* op) {
  if (!v.valid()) throw std::invalid_argument(std::string(op) + ": unbound operand");
  return *v.tape();
}
}  // namespace

Var matmul(Var a, Var b, bool ta, bool tb) { return tape_of(a, "matmul").matmul(a, b, ta, tb); }
Var add(Var a, Var b) { return tape_of(a, "add").add(a, b); }
Var sub(Var a, Var b) { return add(a, neg(b)); }
Var mul(Var a, Var b) { return tape_of(a, "mul").mul(a, b); }
Var scale(Var a, double factor) { return tape_of(a, "scale").scale(a, factor); }
Var neg(Var a) { return tape_of(a, "neg").neg(a); }
Var concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no operands");
  return tape_of(parts[0], "concat").concat(parts, axis);
}
Var concat(std::initializer_list<Var> parts, int axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}
Var gather_rows(Var x, std::span<const std::size_t> rows) {
  return tape_of(x, "gather_rows").gather_rows(x, rows);
}
Var softmax(Var x, bool causal) { return tape_of(x, "softmax").softmax(x, causal); }
Var log_softmax(Var x) { return tape_of(x, "log_softmax").log_softmax(x); }
Var layer_norm(Var x, Var gain, Var bias, double eps) {
  return tape_of(x, "layer_norm").layer_norm(x, gain, bias, eps);
}
Var sigmoid(Var x) { return tape_of(x, "sigmoid").sigmoid(x); }
Var tanh(Var x) { return tape_of(x, "tanh").tanh(x); }
Var relu(Var x) { return tape_of(x, "relu").relu(x); }
Var abs(Var x) { return tape_of(x, "abs").abs(x); }
Var log(Var x) { return tape_of(x, "log").log(x); }
Var sum(Var x) { return tape_of(x, "sum").sum(x); }
Var mean(Var x) { return tape_of(x, "mean").mean(x); }

Var pick(Var x, std::size_t r, std::size_t c) {
  Tape& tape = tape_of(x, "pick");
  const Shape s = x.shape();
  if (r >= s.rows || c >= s.cols) {
    throw std::out_of_range("pick: (" + std::to_string(r) + "," + std::to_string(c) +
                            ") outside " + s.str());
  }
  std::vector<double> onehot(s.size(), 0.0);
  onehot[r * s.cols + c] = 1.0;
  return tape.sum(tape.mul(x, tape.constant(s, std::move(onehot))));
}

}  // namespace adasplit::ad
