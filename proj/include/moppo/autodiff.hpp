#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace moppo {

/// Dense row-major matrix of doubles. Batches are rows.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> d);

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::size_t size() const { return data.size(); }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

/// Trainable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
};

/// Named parameters in insertion order.
class ParameterSet {
 public:
  Parameter& add(std::string name, Matrix value);
  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::vector<Parameter>& params() { return params_; }
  const std::vector<Parameter>& params() const { return params_; }
  std::size_t scalar_count() const;

  void zero_grad();
  /// Throws std::domain_error naming the first parameter with a NaN/Inf gradient.
  void check_finite_grads() const;

  friend bool operator==(const ParameterSet& a, const ParameterSet& b);

 private:
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

class Tape;

/// Handle to a value recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows; }
  std::size_t cols() const { return value().cols; }
};

/// Reverse-mode recording of one computation. Values are kept until the tape
/// is destroyed; backward() may run once per tape. Parameter gradients are
/// added to Parameter::grad, so several tapes accumulate until zero_grad().
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var param(Parameter& p);

  /// Seeds d(loss)/d(loss) = 1 and propagates. `loss` must be 1x1.
  void backward(Var loss);
  /// Gradient of the last backward() with respect to a recorded value.
  const Matrix& grad(Var v) const;

  struct Node {
    Matrix value;
    Matrix grad;
    Parameter* param = nullptr;
    std::function<void(Tape&, std::size_t self)> backward;
  };

  Var push(Matrix value, std::function<void(Tape&, std::size_t)> backward);
  Node& node(std::size_t id) { return nodes_[id]; }
  const Node& node(std::size_t id) const { return nodes_[id]; }
  /// Gradient buffer of a node, allocated on first use.
  Matrix& grad_buffer(std::size_t id);

 private:
  std::vector<Node> nodes_;
  bool done_ = false;
};

Var matmul(Var a, Var b);
/// a (n x m) plus a 1 x m row broadcast over rows.
Var add_row(Var a, Var row);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var elu(Var a);
Var tanh(Var a);
Var exp(Var a);
Var abs(Var a);
Var clamp(Var a, double lo, double hi);
/// Elementwise minimum; ties send the gradient to `a`.
Var minimum(Var a, Var b);
Var concat_cols(Var a, Var b);
/// Row-wise log-softmax over cells with mask != 0; masked cells are -inf with
/// zero gradient. A row without any legal cell throws std::invalid_argument.
Var masked_log_softmax(Var logits, std::span<const char> mask);
/// out(r, 0) = a(r, index[r]).
Var gather_cols(Var a, std::span<const std::size_t> index);
/// -sum_j exp(l_j) l_j per row over finite entries of a log-probability matrix.
Var entropy_rows(Var log_probs);
/// Row sums as an n x 1 column.
Var sum_cols(Var a);
/// Sum / mean of every entry as 1 x 1.
Var sum(Var a);
Var mean(Var a);

}  // namespace moppo
