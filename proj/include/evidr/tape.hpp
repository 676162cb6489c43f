// Copyright (c) 2026 the evidr authors
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode differentiable computation over row-major 2-D arrays.
// A Tape records one forward pass as a flat list of nodes; backward walks
// the list in reverse accumulating exact gradients. The scalar type is a
// template parameter: float for training, double for gradient verification.
//
// Broadcasting is deliberately narrow: for add/multiply the second operand
// may be same-shape, a row (1 x n), a column (m x 1), or a scalar (1 x 1).
// Every primitive checks its output for non-finite entries.
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "evidr/common.hpp"

namespace evidr {

template <typename T>
struct Tensor {
  int rows = 0, cols = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, T(0)) {}
  Tensor(int r, int c, std::vector<T> d) : rows(r), cols(c), data(std::move(d)) {}

  static Tensor scalar(T v) { return Tensor(1, 1, {v}); }
  static Tensor row(std::vector<T> d) {
    int n = static_cast<int>(d.size());
    return Tensor(1, n, std::move(d));
  }
  static Tensor column(std::vector<T> d) {
    int n = static_cast<int>(d.size());
    return Tensor(n, 1, std::move(d));
  }

  T& at(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  const T& at(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
  std::string shape_str() const {
    return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
  }
};

enum class OpKind : std::uint8_t {
  Leaf,
  Matmul,
  Add,
  Multiply,
  Affine,
  Concat,
  Relu,
  Sigmoid,
  Tanh,
  Softmax,
  LayerNorm,
  GruCell,
  WeightedSum,
  GatherRows,
  ScatterRows,
  Mean,
  Sum,
  Log,
  Exp,
  CrossEntropy,
  Reshape,
};

inline const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Matmul: return "matmul";
    case OpKind::Add: return "add";
    case OpKind::Multiply: return "multiply";
    case OpKind::Affine: return "affine";
    case OpKind::Concat: return "concat";
    case OpKind::Relu: return "relu";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Tanh: return "tanh";
    case OpKind::Softmax: return "softmax";
    case OpKind::LayerNorm: return "layer_norm";
    case OpKind::GruCell: return "gru_cell";
    case OpKind::WeightedSum: return "weighted_sum";
    case OpKind::GatherRows: return "gather_rows";
    case OpKind::ScatterRows: return "scatter_rows";
    case OpKind::Mean: return "mean";
    case OpKind::Sum: return "sum";
    case OpKind::Log: return "log";
    case OpKind::Exp: return "exp";
    case OpKind::CrossEntropy: return "cross_entropy";
    case OpKind::Reshape: return "reshape";
  }
  return "?";
}

struct OpAttrs {
  int axis = 0;                                 // concat
  double a = 1.0, b = 0.0;                      // affine: y = a*x + b
  double eps = 1e-5;                            // layer_norm
  double clamp_min = 0.0;                       // log / cross_entropy floor
  int target = -1;                              // cross_entropy class index
  int rows = 0, cols = 0;                       // reshape / scatter output rows
  std::vector<int> indices;                     // gather_rows
  std::vector<std::vector<int>> scatter_src;    // scatter_rows: per output row
  std::vector<std::uint8_t> mask;               // softmax column keep-mask
};

template <typename T>
class Tape {
 public:
  struct Node {
    OpKind op = OpKind::Leaf;
    std::vector<int> inputs;
    Tensor<T> value;
    Tensor<T> grad;     // allocated lazily during backward
    std::vector<T> aux; // saved forward intermediates
    OpAttrs attrs;
    bool requires_grad = false;
  };

  void reset() { nodes_.clear(); }
  int size() const { return static_cast<int>(nodes_.size()); }

  const Tensor<T>& value(int id) const { return nodes_[id].value; }
  const Tensor<T>* grad(int id) const {
    return nodes_[id].grad.data.empty() ? nullptr : &nodes_[id].grad;
  }

  int leaf(Tensor<T> v, bool requires_grad = false) {
    Node n;
    n.op = OpKind::Leaf;
    n.value = std::move(v);
    n.requires_grad = requires_grad;
    check_finite(n.value, OpKind::Leaf);
    nodes_.push_back(std::move(n));
    return size() - 1;
  }
  int constant(Tensor<T> v) { return leaf(std::move(v), false); }

  int apply(OpKind op, std::vector<int> inputs, OpAttrs attrs = {}) {
    Node n;
    n.op = op;
    n.inputs = std::move(inputs);
    n.attrs = std::move(attrs);
    for (int id : n.inputs)
      if (nodes_[id].requires_grad) n.requires_grad = true;
    forward(n);
    check_finite(n.value, op);
    nodes_.push_back(std::move(n));
    return size() - 1;
  }

  /// String-id dispatch over the primitive inventory.
  int apply_primitive(std::string_view op_id, const std::vector<int>& inputs,
                      OpAttrs attrs = {}) {
    struct Entry {
      std::string_view id;
      OpKind kind;
    };
    static constexpr Entry table[] = {
        {"matmul", OpKind::Matmul},       {"add", OpKind::Add},
        {"multiply", OpKind::Multiply},   {"affine", OpKind::Affine},
        {"concat", OpKind::Concat},       {"relu", OpKind::Relu},
        {"sigmoid", OpKind::Sigmoid},     {"tanh", OpKind::Tanh},
        {"softmax", OpKind::Softmax},     {"masked_softmax", OpKind::Softmax},
        {"layer_norm", OpKind::LayerNorm},{"gru_cell", OpKind::GruCell},
        {"weighted_sum", OpKind::WeightedSum}, {"gather_rows", OpKind::GatherRows},
        {"scatter_rows", OpKind::ScatterRows}, {"mean", OpKind::Mean},
        {"sum", OpKind::Sum},             {"log", OpKind::Log},
        {"exp", OpKind::Exp},             {"cross_entropy", OpKind::CrossEntropy},
        {"reshape", OpKind::Reshape},
    };
    for (const Entry& e : table)
      if (e.id == op_id) {
        if (op_id == "masked_softmax" && e.kind == OpKind::Softmax && attrs.mask.empty())
          throw model_error("masked_softmax requires a mask attribute");
        return apply(e.kind, inputs, std::move(attrs));
      }
    throw model_error("unknown primitive: " + std::string(op_id));
  }

  // Typed helpers keep call sites readable.
  int matmul(int a, int b) { return apply(OpKind::Matmul, {a, b}); }
  int add(int a, int b) { return apply(OpKind::Add, {a, b}); }
  int mul(int a, int b) { return apply(OpKind::Multiply, {a, b}); }
  int affine(int x, double a, double b) {
    OpAttrs at;
    at.a = a;
    at.b = b;
    return apply(OpKind::Affine, {x}, std::move(at));
  }
  int concat_rows(std::vector<int> ids) {
    OpAttrs at;
    at.axis = 0;
    return apply(OpKind::Concat, std::move(ids), std::move(at));
  }
  int concat_cols(std::vector<int> ids) {
    OpAttrs at;
    at.axis = 1;
    return apply(OpKind::Concat, std::move(ids), std::move(at));
  }
  int relu(int x) { return apply(OpKind::Relu, {x}); }
  int sigmoid(int x) { return apply(OpKind::Sigmoid, {x}); }
  int tanh_(int x) { return apply(OpKind::Tanh, {x}); }
  int softmax(int x) { return apply(OpKind::Softmax, {x}); }
  int masked_softmax(int x, std::vector<std::uint8_t> mask) {
    OpAttrs at;
    at.mask = std::move(mask);
    return apply(OpKind::Softmax, {x}, std::move(at));
  }
  int layer_norm(int x, int gain, int bias) { return apply(OpKind::LayerNorm, {x, gain, bias}); }
  int gru_cell(int xw, int h, int wh, int bh) { return apply(OpKind::GruCell, {xw, h, wh, bh}); }
  int weighted_sum(int w, int rows) { return apply(OpKind::WeightedSum, {w, rows}); }
  int gather_rows(int x, std::vector<int> indices) {
    OpAttrs at;
    at.indices = std::move(indices);
    return apply(OpKind::GatherRows, {x}, std::move(at));
  }
  int scatter_rows(int x, std::vector<std::vector<int>> src, int out_rows) {
    OpAttrs at;
    at.scatter_src = std::move(src);
    at.rows = out_rows;
    return apply(OpKind::ScatterRows, {x}, std::move(at));
  }
  int mean(int x) { return apply(OpKind::Mean, {x}); }
  int sum(int x) { return apply(OpKind::Sum, {x}); }
  int log_clamped(int x, double clamp_min) {
    OpAttrs at;
    at.clamp_min = clamp_min;
    return apply(OpKind::Log, {x}, std::move(at));
  }
  int exp_(int x) { return apply(OpKind::Exp, {x}); }
  int cross_entropy(int probs, int target, double clamp_min = 1e-12) {
    OpAttrs at;
    at.target = target;
    at.clamp_min = clamp_min;
    return apply(OpKind::CrossEntropy, {probs}, std::move(at));
  }
  int reshape(int x, int rows, int cols) {
    OpAttrs at;
    at.rows = rows;
    at.cols = cols;
    return apply(OpKind::Reshape, {x}, std::move(at));
  }

  /// Reverse pass from a scalar node. Gradients accumulate into every node
  /// on a path to a requires_grad leaf; read them back via grad(id).
  void backward(int loss_id) {
    Node& loss = nodes_[loss_id];
    if (loss.value.rows != 1 || loss.value.cols != 1)
      throw model_error("backward requires a scalar loss, got " + loss.value.shape_str());
    ensure_grad(loss_id);
    loss.grad.data[0] = T(1);
    for (int id = loss_id; id >= 0; --id) {
      Node& n = nodes_[id];
      if (n.grad.data.empty() || n.op == OpKind::Leaf) continue;
      backward_node(n);
    }
  }

 private:
  std::vector<Node> nodes_;

  void check_finite(const Tensor<T>& v, OpKind op) const {
    for (T x : v.data)
      if (!std::isfinite(static_cast<double>(x)))
        throw model_error(std::string("non-finite output in op ") + op_name(op));
  }

  void ensure_grad(int id) {
    Node& n = nodes_[id];
    if (n.grad.data.empty()) n.grad = Tensor<T>(n.value.rows, n.value.cols);
  }

  Tensor<T>& in_val(Node& n, int k) { return nodes_[n.inputs[k]].value; }

  // Allocates (if needed) and returns the grad of input k, or nullptr when
  // that input does not require gradients.
  Tensor<T>* in_grad(Node& n, int k) {
    Node& src = nodes_[n.inputs[k]];
    if (!src.requires_grad) return nullptr;
    if (src.grad.data.empty()) src.grad = Tensor<T>(src.value.rows, src.value.cols);
    return &src.grad;
  }

  [[noreturn]] void shape_error(OpKind op, const std::string& detail) const {
    throw model_error(std::string("shape mismatch in op ") + op_name(op) + ": " + detail);
  }

  enum class Bcast { Same, Row, Col, Scalar };

  Bcast broadcast_kind(OpKind op, const Tensor<T>& a, const Tensor<T>& b) const {
    if (a.same_shape(b)) return Bcast::Same;
    if (b.rows == 1 && b.cols == 1) return Bcast::Scalar;
    if (b.rows == 1 && b.cols == a.cols) return Bcast::Row;
    if (b.cols == 1 && b.rows == a.rows) return Bcast::Col;
    shape_error(op, a.shape_str() + " vs " + b.shape_str());
  }

  // ---- forward ----

  void forward(Node& n) {
    switch (n.op) {
      case OpKind::Matmul:
      case OpKind::WeightedSum: {
        const Tensor<T>& a = in_val(n, 0);
        const Tensor<T>& b = in_val(n, 1);
        if (a.cols != b.rows) shape_error(n.op, a.shape_str() + " * " + b.shape_str());
        Tensor<T> out(a.rows, b.cols);
        for (int i = 0; i < a.rows; ++i)
          for (int l = 0; l < a.cols; ++l) {
            T av = a.at(i, l);
            if (av == T(0)) continue;
            const T* brow = &b.data[static_cast<std::size_t>(l) * b.cols];
            T* orow = &out.data[static_cast<std::size_t>(i) * out.cols];
            for (int j = 0; j < b.cols; ++j) orow[j] += av * brow[j];
          }
        n.value = std::move(out);
        break;
      }
      case OpKind::Add:
      case OpKind::Multiply: {
        const Tensor<T>& a = in_val(n, 0);
        const Tensor<T>& b = in_val(n, 1);
        Bcast bc = broadcast_kind(n.op, a, b);
        Tensor<T> out(a.rows, a.cols);
        bool is_add = n.op == OpKind::Add;
        for (int i = 0; i < a.rows; ++i)
          for (int j = 0; j < a.cols; ++j) {
            T bv = bc == Bcast::Same     ? b.at(i, j)
                   : bc == Bcast::Row    ? b.at(0, j)
                   : bc == Bcast::Col    ? b.at(i, 0)
                                         : b.at(0, 0);
            out.at(i, j) = is_add ? a.at(i, j) + bv : a.at(i, j) * bv;
          }
        n.value = std::move(out);
        break;
      }
      case OpKind::Affine: {
        const Tensor<T>& x = in_val(n, 0);
        Tensor<T> out(x.rows, x.cols);
        T a = static_cast<T>(n.attrs.a), b = static_cast<T>(n.attrs.b);
        for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = a * x.data[i] + b;
        n.value = std::move(out);
        break;
      }
      case OpKind::Concat: {
        if (n.inputs.empty()) shape_error(n.op, "no inputs");
        if (n.attrs.axis == 0) {
          int cols = in_val(n, 0).cols, rows = 0;
          for (std::size_t k = 0; k < n.inputs.size(); ++k) {
            if (in_val(n, static_cast<int>(k)).cols != cols)
              shape_error(n.op, "column counts differ");
            rows += in_val(n, static_cast<int>(k)).rows;
          }
          Tensor<T> out(rows, cols);
          int r = 0;
          for (std::size_t k = 0; k < n.inputs.size(); ++k) {
            const Tensor<T>& v = in_val(n, static_cast<int>(k));
            std::copy(v.data.begin(), v.data.end(),
                      out.data.begin() + static_cast<std::size_t>(r) * cols);
            r += v.rows;
          }
          n.value = std::move(out);
        } else {
          int rows = in_val(n, 0).rows, cols = 0;
          for (std::size_t k = 0; k < n.inputs.size(); ++k) {
            if (in_val(n, static_cast<int>(k)).rows != rows)
              shape_error(n.op, "row counts differ");
            cols += in_val(n, static_cast<int>(k)).cols;
          }
          Tensor<T> out(rows, cols);
          int c = 0;
          for (std::size_t k = 0; k < n.inputs.size(); ++k) {
            const Tensor<T>& v = in_val(n, static_cast<int>(k));
            for (int i = 0; i < rows; ++i)
              std::copy(&v.data[static_cast<std::size_t>(i) * v.cols],
                        &v.data[static_cast<std::size_t>(i) * v.cols] + v.cols,
                        &out.data[static_cast<std::size_t>(i) * out.cols + c]);
            c += v.cols;
          }
          n.value = std::move(out);
        }
        break;
      }
      case OpKind::Relu: {
        const Tensor<T>& x = in_val(n, 0);
        Tensor<T> out(x.rows, x.cols);
        for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
        n.value = std::move(out);
        break;
      }
      case OpKind::Sigmoid: {
        const Tensor<T>& x = in_val(n, 0);
        Tensor<T> out(x.rows, x.cols);
        for (std::size_t i = 0; i < x.size(); ++i)
          out.data[i] = T(1) / (T(1) + std::exp(-x.data[i]));
        n.value = std::move(out);
        break;
      }
      case OpKind::Tanh: {
        const Tensor<T>& x = in_val(n, 0);
        Tensor<T> out(x.rows, x.cols);
        for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = std::tanh(x.data[i]);
        n.value = std::move(out);
        break;
      }
      case OpKind::Softmax: {
        const Tensor<T>& x = in_val(n, 0);
        const auto& mask = n.attrs.mask;
        if (!mask.empty() && static_cast<int>(mask.size()) != x.cols)
          shape_error(n.op, "mask length vs " + x.shape_str());
        Tensor<T> out(x.rows, x.cols);
        for (int i = 0; i < x.rows; ++i) {
          T mx = T(0);
          bool any = false;
          for (int j = 0; j < x.cols; ++j) {
            if (!mask.empty() && !mask[j]) continue;
            if (!any || x.at(i, j) > mx) mx = x.at(i, j);
            any = true;
          }
          if (!any) throw model_error("softmax over fully masked row");
          T denom = T(0);
          for (int j = 0; j < x.cols; ++j) {
            if (!mask.empty() && !mask[j]) continue;
            T e = std::exp(x.at(i, j) - mx);
            out.at(i, j) = e;
            denom += e;
          }
          for (int j = 0; j < x.cols; ++j) {
            if (!mask.empty() && !mask[j])
              out.at(i, j) = T(0);
            else
              out.at(i, j) /= denom;
          }
        }
        n.value = std::move(out);
        break;
      }
      case OpKind::LayerNorm: {
        const Tensor<T>& x = in_val(n, 0);
        const Tensor<T>& gain = in_val(n, 1);
        const Tensor<T>& bias = in_val(n, 2);
        if (gain.rows != 1 || gain.cols != x.cols || bias.rows != 1 || bias.cols != x.cols)
          shape_error(n.op, "gain/bias vs " + x.shape_str());
        Tensor<T> out(x.rows, x.cols);
        n.aux.resize(x.size() + static_cast<std::size_t>(x.rows));  // xhat rows, then inv_std
        T eps = static_cast<T>(n.attrs.eps);
        for (int i = 0; i < x.rows; ++i) {
          T mu = T(0);
          for (int j = 0; j < x.cols; ++j) mu += x.at(i, j);
          mu /= static_cast<T>(x.cols);
          T var = T(0);
          for (int j = 0; j < x.cols; ++j) {
            T d = x.at(i, j) - mu;
            var += d * d;
          }
          var /= static_cast<T>(x.cols);
          T istd = T(1) / std::sqrt(var + eps);
          n.aux[x.size() + i] = istd;
          for (int j = 0; j < x.cols; ++j) {
            T xh = (x.at(i, j) - mu) * istd;
            n.aux[static_cast<std::size_t>(i) * x.cols + j] = xh;
            out.at(i, j) = gain.at(0, j) * xh + bias.at(0, j);
          }
        }
        n.value = std::move(out);
        break;
      }
      case OpKind::GruCell: {
        // inputs: xw (m x 3h) = x-side projection incl. bias, h (m x h),
        // wh (h x 3h), bh (1 x 3h); gate layout [reset | update | candidate].
        const Tensor<T>& xw = in_val(n, 0);
        const Tensor<T>& h = in_val(n, 1);
        const Tensor<T>& wh = in_val(n, 2);
        const Tensor<T>& bh = in_val(n, 3);
        int hs = h.cols, m = h.rows;
        if (xw.rows != m || xw.cols != 3 * hs || wh.rows != hs || wh.cols != 3 * hs ||
            bh.rows != 1 || bh.cols != 3 * hs)
          shape_error(n.op, xw.shape_str() + ", " + h.shape_str() + ", " + wh.shape_str());
        Tensor<T> out(m, hs);
        n.aux.resize(static_cast<std::size_t>(m) * 4 * hs);  // r, z, ncand, hr_n per row
        std::vector<T> hr(static_cast<std::size_t>(3) * hs);
        for (int i = 0; i < m; ++i) {
          std::fill(hr.begin(), hr.end(), T(0));
          for (int l = 0; l < hs; ++l) {
            T hv = h.at(i, l);
            if (hv == T(0)) continue;
            const T* wrow = &wh.data[static_cast<std::size_t>(l) * wh.cols];
            for (int j = 0; j < 3 * hs; ++j) hr[j] += hv * wrow[j];
          }
          for (int j = 0; j < 3 * hs; ++j) hr[j] += bh.at(0, j);
          T* aux = &n.aux[static_cast<std::size_t>(i) * 4 * hs];
          for (int j = 0; j < hs; ++j) {
            T r = T(1) / (T(1) + std::exp(-(xw.at(i, j) + hr[j])));
            T z = T(1) / (T(1) + std::exp(-(xw.at(i, hs + j) + hr[hs + j])));
            T hn = hr[2 * hs + j];
            T nc = std::tanh(xw.at(i, 2 * hs + j) + r * hn);
            aux[j] = r;
            aux[hs + j] = z;
            aux[2 * hs + j] = nc;
            aux[3 * hs + j] = hn;
            out.at(i, j) = (T(1) - z) * nc + z * h.at(i, j);
          }
        }
        n.value = std::move(out);
        break;
      }
      case OpKind::GatherRows: {
        const Tensor<T>& x = in_val(n, 0);
        Tensor<T> out(static_cast<int>(n.attrs.indices.size()), x.cols);
        for (std::size_t k = 0; k < n.attrs.indices.size(); ++k) {
          int r = n.attrs.indices[k];
          if (r < 0 || r >= x.rows) shape_error(n.op, "row index out of range");
          std::copy(&x.data[static_cast<std::size_t>(r) * x.cols],
                    &x.data[static_cast<std::size_t>(r) * x.cols] + x.cols,
                    &out.data[k * x.cols]);
        }
        n.value = std::move(out);
        break;
      }
      case OpKind::ScatterRows: {
        const Tensor<T>& x = in_val(n, 0);
        if (static_cast<int>(n.attrs.scatter_src.size()) != n.attrs.rows)
          shape_error(n.op, "scatter map size vs output rows");
        Tensor<T> out(n.attrs.rows, x.cols);
        for (int i = 0; i < n.attrs.rows; ++i)
          for (int src : n.attrs.scatter_src[i]) {
            if (src < 0 || src >= x.rows) shape_error(n.op, "source row out of range");
            for (int j = 0; j < x.cols; ++j) out.at(i, j) += x.at(src, j);
          }
        n.value = std::move(out);
        break;
      }
      case OpKind::Mean:
      case OpKind::Sum: {
        const Tensor<T>& x = in_val(n, 0);
        if (x.size() == 0) shape_error(n.op, "empty input");
        T s = T(0);
        for (T v : x.data) s += v;
        if (n.op == OpKind::Mean) s /= static_cast<T>(x.size());
        n.value = Tensor<T>::scalar(s);
        break;
      }
      case OpKind::Log: {
        const Tensor<T>& x = in_val(n, 0);
        Tensor<T> out(x.rows, x.cols);
        T floor = static_cast<T>(n.attrs.clamp_min);
        for (std::size_t i = 0; i < x.size(); ++i) {
          T v = x.data[i] > floor ? x.data[i] : floor;
          if (v <= T(0)) throw model_error("log of non-positive value without clamp");
          out.data[i] = std::log(v);
        }
        n.value = std::move(out);
        break;
      }
      case OpKind::Exp: {
        const Tensor<T>& x = in_val(n, 0);
        Tensor<T> out(x.rows, x.cols);
        for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = std::exp(x.data[i]);
        n.value = std::move(out);
        break;
      }
      case OpKind::CrossEntropy: {
        const Tensor<T>& p = in_val(n, 0);
        if (p.rows != 1 || n.attrs.target < 0 || n.attrs.target >= p.cols)
          shape_error(n.op, "probabilities " + p.shape_str() + " target " +
                                std::to_string(n.attrs.target));
        T v = p.at(0, n.attrs.target);
        T floor = static_cast<T>(n.attrs.clamp_min);
        if (v < floor) v = floor;
        n.value = Tensor<T>::scalar(-std::log(v));
        break;
      }
      case OpKind::Reshape: {
        const Tensor<T>& x = in_val(n, 0);
        if (static_cast<std::size_t>(n.attrs.rows) * n.attrs.cols != x.size())
          shape_error(n.op, x.shape_str() + " to (" + std::to_string(n.attrs.rows) + "x" +
                                std::to_string(n.attrs.cols) + ")");
        n.value = Tensor<T>(n.attrs.rows, n.attrs.cols, x.data);
        break;
      }
      case OpKind::Leaf:
        break;
    }
  }

  // ---- backward ----

  void backward_node(Node& n) {
    const Tensor<T>& g = n.grad;
    switch (n.op) {
      case OpKind::Matmul:
      case OpKind::WeightedSum: {
        const Tensor<T>& a = in_val(n, 0);
        const Tensor<T>& b = in_val(n, 1);
        if (Tensor<T>* ga = in_grad(n, 0)) {
          // ga += g * b^T
          for (int i = 0; i < a.rows; ++i)
            for (int j = 0; j < b.cols; ++j) {
              T gv = g.at(i, j);
              if (gv == T(0)) continue;
              for (int l = 0; l < a.cols; ++l) ga->at(i, l) += gv * b.at(l, j);
            }
        }
        if (Tensor<T>* gb = in_grad(n, 1)) {
          // gb += a^T * g
          for (int i = 0; i < a.rows; ++i)
            for (int l = 0; l < a.cols; ++l) {
              T av = a.at(i, l);
              if (av == T(0)) continue;
              for (int j = 0; j < b.cols; ++j) gb->at(l, j) += av * g.at(i, j);
            }
        }
        break;
      }
      case OpKind::Add:
      case OpKind::Multiply: {
        const Tensor<T>& a = in_val(n, 0);
        const Tensor<T>& b = in_val(n, 1);
        Bcast bc = broadcast_kind(n.op, a, b);
        bool is_add = n.op == OpKind::Add;
        Tensor<T>* ga = in_grad(n, 0);
        Tensor<T>* gb = in_grad(n, 1);
        for (int i = 0; i < a.rows; ++i)
          for (int j = 0; j < a.cols; ++j) {
            T gv = g.at(i, j);
            if (gv == T(0)) continue;
            T bv = bc == Bcast::Same     ? b.at(i, j)
                   : bc == Bcast::Row    ? b.at(0, j)
                   : bc == Bcast::Col    ? b.at(i, 0)
                                         : b.at(0, 0);
            if (ga) ga->at(i, j) += is_add ? gv : gv * bv;
            if (gb) {
              T contrib = is_add ? gv : gv * a.at(i, j);
              switch (bc) {
                case Bcast::Same: gb->at(i, j) += contrib; break;
                case Bcast::Row: gb->at(0, j) += contrib; break;
                case Bcast::Col: gb->at(i, 0) += contrib; break;
                case Bcast::Scalar: gb->at(0, 0) += contrib; break;
              }
            }
          }
        break;
      }
      case OpKind::Affine: {
        if (Tensor<T>* gx = in_grad(n, 0)) {
          T a = static_cast<T>(n.attrs.a);
          for (std::size_t i = 0; i < g.size(); ++i) gx->data[i] += a * g.data[i];
        }
        break;
      }
      case OpKind::Concat: {
        if (n.attrs.axis == 0) {
          int r = 0;
          for (std::size_t k = 0; k < n.inputs.size(); ++k) {
            const Tensor<T>& v = in_val(n, static_cast<int>(k));
            if (Tensor<T>* gi = in_grad(n, static_cast<int>(k)))
              for (int i = 0; i < v.rows; ++i)
                for (int j = 0; j < v.cols; ++j) gi->at(i, j) += g.at(r + i, j);
            r += v.rows;
          }
        } else {
          int c = 0;
          for (std::size_t k = 0; k < n.inputs.size(); ++k) {
            const Tensor<T>& v = in_val(n, static_cast<int>(k));
            if (Tensor<T>* gi = in_grad(n, static_cast<int>(k)))
              for (int i = 0; i < v.rows; ++i)
                for (int j = 0; j < v.cols; ++j) gi->at(i, j) += g.at(i, c + j);
            c += v.cols;
          }
        }
        break;
      }
      case OpKind::Relu: {
        if (Tensor<T>* gx = in_grad(n, 0))
          for (std::size_t i = 0; i < g.size(); ++i)
            if (n.value.data[i] > T(0)) gx->data[i] += g.data[i];
        break;
      }
      case OpKind::Sigmoid: {
        if (Tensor<T>* gx = in_grad(n, 0))
          for (std::size_t i = 0; i < g.size(); ++i) {
            T y = n.value.data[i];
            gx->data[i] += g.data[i] * y * (T(1) - y);
          }
        break;
      }
      case OpKind::Tanh: {
        if (Tensor<T>* gx = in_grad(n, 0))
          for (std::size_t i = 0; i < g.size(); ++i) {
            T y = n.value.data[i];
            gx->data[i] += g.data[i] * (T(1) - y * y);
          }
        break;
      }
      case OpKind::Softmax: {
        if (Tensor<T>* gx = in_grad(n, 0)) {
          const Tensor<T>& y = n.value;
          for (int i = 0; i < y.rows; ++i) {
            T dot = T(0);
            for (int j = 0; j < y.cols; ++j) dot += g.at(i, j) * y.at(i, j);
            for (int j = 0; j < y.cols; ++j)
              gx->at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
          }
        }
        break;
      }
      case OpKind::LayerNorm: {
        const Tensor<T>& x = in_val(n, 0);
        const Tensor<T>& gain = in_val(n, 1);
        Tensor<T>* gx = in_grad(n, 0);
        Tensor<T>* ggain = in_grad(n, 1);
        Tensor<T>* gbias = in_grad(n, 2);
        int cols = x.cols;
        for (int i = 0; i < x.rows; ++i) {
          const T* xh = &n.aux[static_cast<std::size_t>(i) * cols];
          T istd = n.aux[x.size() + i];
          T sum_gxh = T(0), sum_gxh_xh = T(0);
          for (int j = 0; j < cols; ++j) {
            T gxh = g.at(i, j) * gain.at(0, j);
            sum_gxh += gxh;
            sum_gxh_xh += gxh * xh[j];
            if (ggain) ggain->at(0, j) += g.at(i, j) * xh[j];
            if (gbias) gbias->at(0, j) += g.at(i, j);
          }
          if (gx) {
            T inv_n = T(1) / static_cast<T>(cols);
            for (int j = 0; j < cols; ++j) {
              T gxh = g.at(i, j) * gain.at(0, j);
              gx->at(i, j) += istd * (gxh - inv_n * sum_gxh - xh[j] * inv_n * sum_gxh_xh);
            }
          }
        }
        break;
      }
      case OpKind::GruCell: {
        const Tensor<T>& h = in_val(n, 1);
        const Tensor<T>& wh = in_val(n, 2);
        int hs = h.cols, m = h.rows;
        Tensor<T>* gxw = in_grad(n, 0);
        Tensor<T>* gh = in_grad(n, 1);
        Tensor<T>* gwh = in_grad(n, 2);
        Tensor<T>* gbh = in_grad(n, 3);
        std::vector<T> ghr(static_cast<std::size_t>(3) * hs);
        for (int i = 0; i < m; ++i) {
          const T* aux = &n.aux[static_cast<std::size_t>(i) * 4 * hs];
          std::fill(ghr.begin(), ghr.end(), T(0));
          for (int j = 0; j < hs; ++j) {
            T r = aux[j], z = aux[hs + j], nc = aux[2 * hs + j], hn = aux[3 * hs + j];
            T gy = g.at(i, j);
            T gz = gy * (h.at(i, j) - nc);
            T gn = gy * (T(1) - z);
            T da_n = gn * (T(1) - nc * nc);
            T gr = da_n * hn;
            T da_r = gr * r * (T(1) - r);
            T da_z = gz * z * (T(1) - z);
            if (gxw) {
              gxw->at(i, j) += da_r;
              gxw->at(i, hs + j) += da_z;
              gxw->at(i, 2 * hs + j) += da_n;
            }
            ghr[j] = da_r;
            ghr[hs + j] = da_z;
            ghr[2 * hs + j] = da_n * r;
            if (gh) gh->at(i, j) += gy * z;
          }
          if (gh)
            for (int l = 0; l < hs; ++l) {
              T acc = T(0);
              const T* wrow = &wh.data[static_cast<std::size_t>(l) * wh.cols];
              for (int j = 0; j < 3 * hs; ++j) acc += ghr[j] * wrow[j];
              gh->at(i, l) += acc;
            }
          if (gwh)
            for (int l = 0; l < hs; ++l) {
              T hv = h.at(i, l);
              if (hv == T(0)) continue;
              for (int j = 0; j < 3 * hs; ++j) gwh->at(l, j) += hv * ghr[j];
            }
          if (gbh)
            for (int j = 0; j < 3 * hs; ++j) gbh->at(0, j) += ghr[j];
        }
        break;
      }
      case OpKind::GatherRows: {
        if (Tensor<T>* gx = in_grad(n, 0)) {
          int cols = gx->cols;
          for (std::size_t k = 0; k < n.attrs.indices.size(); ++k) {
            int r = n.attrs.indices[k];
            for (int j = 0; j < cols; ++j) gx->at(r, j) += g.data[k * cols + j];
          }
        }
        break;
      }
      case OpKind::ScatterRows: {
        if (Tensor<T>* gx = in_grad(n, 0)) {
          for (int i = 0; i < n.attrs.rows; ++i)
            for (int src : n.attrs.scatter_src[i])
              for (int j = 0; j < gx->cols; ++j) gx->at(src, j) += g.at(i, j);
        }
        break;
      }
      case OpKind::Mean: {
        if (Tensor<T>* gx = in_grad(n, 0)) {
          T gv = g.data[0] / static_cast<T>(gx->size());
          for (std::size_t i = 0; i < gx->size(); ++i) gx->data[i] += gv;
        }
        break;
      }
      case OpKind::Sum: {
        if (Tensor<T>* gx = in_grad(n, 0)) {
          T gv = g.data[0];
          for (std::size_t i = 0; i < gx->size(); ++i) gx->data[i] += gv;
        }
        break;
      }
      case OpKind::Log: {
        if (Tensor<T>* gx = in_grad(n, 0)) {
          const Tensor<T>& x = in_val(n, 0);
          T floor = static_cast<T>(n.attrs.clamp_min);
          for (std::size_t i = 0; i < x.size(); ++i)
            if (x.data[i] > floor) gx->data[i] += g.data[i] / x.data[i];
        }
        break;
      }
      case OpKind::Exp: {
        if (Tensor<T>* gx = in_grad(n, 0))
          for (std::size_t i = 0; i < g.size(); ++i)
            gx->data[i] += g.data[i] * n.value.data[i];
        break;
      }
      case OpKind::CrossEntropy: {
        if (Tensor<T>* gx = in_grad(n, 0)) {
          const Tensor<T>& p = in_val(n, 0);
          T v = p.at(0, n.attrs.target);
          T floor = static_cast<T>(n.attrs.clamp_min);
          if (v > floor) gx->at(0, n.attrs.target) -= g.data[0] / v;
        }
        break;
      }
      case OpKind::Reshape: {
        if (Tensor<T>* gx = in_grad(n, 0))
          for (std::size_t i = 0; i < g.size(); ++i) gx->data[i] += g.data[i];
        break;
      }
      case OpKind::Leaf:
        break;
    }
  }
};

}  // namespace evidr
