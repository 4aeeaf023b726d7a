#include "moppo/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace moppo {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> d) : rows(r), cols(c), data(std::move(d)) {
  if (data.size() != r * c) throw std::invalid_argument("matrix data does not match its shape");
}

Parameter& ParameterSet::add(std::string name, Matrix value) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  index_.emplace(name, params_.size());
  Matrix grad(value.rows, value.cols);
  params_.push_back({std::move(name), std::move(value), std::move(grad)});
  return params_.back();
}

Parameter& ParameterSet::at(std::string_view name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter '" + std::string(name) + "'");
  return params_[it->second];
}

const Parameter& ParameterSet::at(std::string_view name) const { return const_cast<ParameterSet*>(this)->at(name); }

bool ParameterSet::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.data.begin(), p.grad.data.end(), 0.0);
}

void ParameterSet::check_finite_grads() const {
  for (const auto& p : params_) {
    for (std::size_t i = 0; i < p.grad.size(); ++i) {
      if (!std::isfinite(p.grad.data[i])) {
        throw std::domain_error("non-finite gradient in '" + p.name + "' at entry " + std::to_string(i));
      }
    }
  }
}

bool operator==(const ParameterSet& a, const ParameterSet& b) {
  if (a.params_.size() != b.params_.size()) return false;
  for (std::size_t i = 0; i < a.params_.size(); ++i) {
    if (a.params_[i].name != b.params_[i].name || a.params_[i].value != b.params_[i].value) return false;
  }
  return true;
}

const Matrix& Var::value() const { return tape->node(id).value; }

Var Tape::push(Matrix value, std::function<void(Tape&, std::size_t)> backward) {
  nodes_.push_back({std::move(value), {}, nullptr, std::move(backward)});
  return {this, nodes_.size() - 1};
}

Var Tape::constant(Matrix value) { return push(std::move(value), nullptr); }

Var Tape::param(Parameter& p) {
  Var v = push(p.value, nullptr);
  nodes_[v.id].param = &p;
  return v;
}

Matrix& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() != n.value.size()) n.grad = Matrix(n.value.rows, n.value.cols);
  return n.grad;
}

const Matrix& Tape::grad(Var v) const { return nodes_[v.id].grad; }

void Tape::backward(Var loss) {
  if (loss.tape != this) throw std::invalid_argument("backward: loss belongs to another tape");
  if (done_) throw std::logic_error("backward: this tape was already differentiated");
  const Matrix& lv = nodes_[loss.id].value;
  if (lv.rows != 1 || lv.cols != 1) throw std::invalid_argument("backward: loss must be a 1x1 scalar");
  done_ = true;
  grad_buffer(loss.id).data[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param) {
      for (std::size_t k = 0; k < n.grad.size(); ++k) n.param->grad.data[k] += n.grad.data[k];
    }
  }
}

namespace {

void require_same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw std::invalid_argument("operands live on different tapes");
}

void require_same_shape(Var a, Var b, const char* op) {
  require_same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

// Elementwise unary op given value function and derivative in terms of (x, y).
template <typename F, typename D>
Var unary(Var a, F f, D d) {
  const Matrix& x = a.value();
  Matrix y(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i) y.data[i] = f(x.data[i]);
  const std::size_t ai = a.id;
  return a.tape->push(std::move(y), [ai, d](Tape& t, std::size_t self) {
    const auto& node = t.node(self);
    const Matrix& xv = t.node(ai).value;
    Matrix& ga = t.grad_buffer(ai);
    for (std::size_t i = 0; i < xv.size(); ++i) ga.data[i] += node.grad.data[i] * d(xv.data[i], node.value.data[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  const Matrix& A = a.value();
  const Matrix& B = b.value();
  if (A.cols != B.rows) throw std::invalid_argument("matmul: inner dimensions differ");
  Matrix C(A.rows, B.cols);
  for (std::size_t i = 0; i < A.rows; ++i) {
    for (std::size_t k = 0; k < A.cols; ++k) {
      const double aik = A(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < B.cols; ++j) C(i, j) += aik * B(k, j);
    }
  }
  const std::size_t ai = a.id, bi = b.id;
  return a.tape->push(std::move(C), [ai, bi](Tape& t, std::size_t self) {
    const Matrix& G = t.node(self).grad;
    const Matrix& A = t.node(ai).value;
    const Matrix& B = t.node(bi).value;
    Matrix& GA = t.grad_buffer(ai);
    for (std::size_t i = 0; i < A.rows; ++i) {
      for (std::size_t k = 0; k < A.cols; ++k) {
        double s = 0;
        for (std::size_t j = 0; j < B.cols; ++j) s += G(i, j) * B(k, j);
        GA(i, k) += s;
      }
    }
    Matrix& GB = t.grad_buffer(bi);
    for (std::size_t i = 0; i < A.rows; ++i) {
      for (std::size_t k = 0; k < A.cols; ++k) {
        const double aik = A(i, k);
        if (aik == 0.0) continue;
        for (std::size_t j = 0; j < B.cols; ++j) GB(k, j) += aik * G(i, j);
      }
    }
  });
}

Var add_row(Var a, Var row) {
  require_same_tape(a, row);
  const Matrix& A = a.value();
  const Matrix& R = row.value();
  if (R.rows != 1 || R.cols != A.cols) throw std::invalid_argument("add_row: row must be 1 x cols");
  Matrix y = A;
  for (std::size_t i = 0; i < A.rows; ++i) {
    for (std::size_t j = 0; j < A.cols; ++j) y(i, j) += R(0, j);
  }
  const std::size_t ai = a.id, ri = row.id;
  return a.tape->push(std::move(y), [ai, ri](Tape& t, std::size_t self) {
    const Matrix& G = t.node(self).grad;
    Matrix& GA = t.grad_buffer(ai);
    Matrix& GR = t.grad_buffer(ri);
    for (std::size_t i = 0; i < G.rows; ++i) {
      for (std::size_t j = 0; j < G.cols; ++j) {
        GA(i, j) += G(i, j);
        GR(0, j) += G(i, j);
      }
    }
  });
}

namespace {

template <typename F, typename DA, typename DB>
Var binary(Var a, Var b, const char* op, F f, DA da, DB db) {
  require_same_shape(a, b, op);
  const Matrix& A = a.value();
  const Matrix& B = b.value();
  Matrix y(A.rows, A.cols);
  for (std::size_t i = 0; i < A.size(); ++i) y.data[i] = f(A.data[i], B.data[i]);
  const std::size_t ai = a.id, bi = b.id;
  return a.tape->push(std::move(y), [ai, bi, da, db](Tape& t, std::size_t self) {
    const Matrix& G = t.node(self).grad;
    const Matrix& A = t.node(ai).value;
    const Matrix& B = t.node(bi).value;
    Matrix& GA = t.grad_buffer(ai);
    for (std::size_t i = 0; i < G.size(); ++i) GA.data[i] += G.data[i] * da(A.data[i], B.data[i]);
    Matrix& GB = t.grad_buffer(bi);
    for (std::size_t i = 0; i < G.size(); ++i) GB.data[i] += G.data[i] * db(A.data[i], B.data[i]);
  });
}

}  // namespace

Var add(Var a, Var b) {
  return binary(a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
                [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
                [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
                [](double x, double) { return x; });
}

Var minimum(Var a, Var b) {
  return binary(
      a, b, "minimum", [](double x, double y) { return std::min(x, y); },
      [](double x, double y) { return x <= y ? 1.0 : 0.0; }, [](double x, double y) { return x <= y ? 0.0 : 1.0; });
}

Var scale(Var a, double c) {
  return unary(a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Var add_scalar(Var a, double c) {
  return unary(a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var elu(Var a) {
  return unary(a, [](double x) { return x > 0 ? x : std::expm1(x); },
               [](double x, double y) { return x > 0 ? 1.0 : y + 1.0; });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var abs(Var a) {
  return unary(a, [](double x) { return std::abs(x); },
               [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Var clamp(Var a, double lo, double hi) {
  return unary(a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
               [lo, hi](double x, double) { return x >= lo && x <= hi ? 1.0 : 0.0; });
}

Var concat_cols(Var a, Var b) {
  require_same_tape(a, b);
  const Matrix& A = a.value();
  const Matrix& B = b.value();
  if (A.rows != B.rows) throw std::invalid_argument("concat_cols: row counts differ");
  Matrix y(A.rows, A.cols + B.cols);
  for (std::size_t i = 0; i < A.rows; ++i) {
    for (std::size_t j = 0; j < A.cols; ++j) y(i, j) = A(i, j);
    for (std::size_t j = 0; j < B.cols; ++j) y(i, A.cols + j) = B(i, j);
  }
  const std::size_t ai = a.id, bi = b.id, ac = A.cols;
  return a.tape->push(std::move(y), [ai, bi, ac](Tape& t, std::size_t self) {
    const Matrix& G = t.node(self).grad;
    Matrix& GA = t.grad_buffer(ai);
    Matrix& GB = t.grad_buffer(bi);
    for (std::size_t i = 0; i < G.rows; ++i) {
      for (std::size_t j = 0; j < ac; ++j) GA(i, j) += G(i, j);
      for (std::size_t j = ac; j < G.cols; ++j) GB(i, j - ac) += G(i, j);
    }
  });
}

Var masked_log_softmax(Var logits, std::span<const char> mask) {
  const Matrix& X = logits.value();
  if (mask.size() != X.size()) throw std::invalid_argument("masked_log_softmax: mask shape mismatch");
  constexpr double ninf = -std::numeric_limits<double>::infinity();
  Matrix y(X.rows, X.cols, ninf);
  for (std::size_t i = 0; i < X.rows; ++i) {
    double mx = ninf;
    for (std::size_t j = 0; j < X.cols; ++j) {
      if (mask[i * X.cols + j]) mx = std::max(mx, X(i, j));
    }
    if (mx == ninf) throw std::invalid_argument("masked_log_softmax: row " + std::to_string(i) + " has no legal cell");
    double s = 0;
    for (std::size_t j = 0; j < X.cols; ++j) {
      if (mask[i * X.cols + j]) s += std::exp(X(i, j) - mx);
    }
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < X.cols; ++j) {
      if (mask[i * X.cols + j]) y(i, j) = X(i, j) - lse;
    }
  }
  const std::size_t xi = logits.id;
  std::vector<char> m(mask.begin(), mask.end());
  return logits.tape->push(std::move(y), [xi, m = std::move(m)](Tape& t, std::size_t self) {
    const Matrix& G = t.node(self).grad;
    const Matrix& Y = t.node(self).value;
    Matrix& GX = t.grad_buffer(xi);
    for (std::size_t i = 0; i < G.rows; ++i) {
      double gs = 0;
      for (std::size_t j = 0; j < G.cols; ++j) {
        if (m[i * G.cols + j]) gs += G(i, j);
      }
      for (std::size_t j = 0; j < G.cols; ++j) {
        if (m[i * G.cols + j]) GX(i, j) += G(i, j) - std::exp(Y(i, j)) * gs;
      }
    }
  });
}

Var gather_cols(Var a, std::span<const std::size_t> index) {
  const Matrix& A = a.value();
  if (index.size() != A.rows) throw std::invalid_argument("gather_cols: one index per row required");
  Matrix y(A.rows, 1);
  for (std::size_t i = 0; i < A.rows; ++i) {
    if (index[i] >= A.cols) throw std::out_of_range("gather_cols: column index out of range");
    y(i, 0) = A(i, index[i]);
  }
  const std::size_t ai = a.id;
  std::vector<std::size_t> idx(index.begin(), index.end());
  return a.tape->push(std::move(y), [ai, idx = std::move(idx)](Tape& t, std::size_t self) {
    const Matrix& G = t.node(self).grad;
    Matrix& GA = t.grad_buffer(ai);
    for (std::size_t i = 0; i < G.rows; ++i) GA(i, idx[i]) += G(i, 0);
  });
}

Var entropy_rows(Var log_probs) {
  const Matrix& L = log_probs.value();
  Matrix y(L.rows, 1);
  for (std::size_t i = 0; i < L.rows; ++i) {
    double h = 0;
    for (std::size_t j = 0; j < L.cols; ++j) {
      if (std::isfinite(L(i, j))) h -= std::exp(L(i, j)) * L(i, j);
    }
    y(i, 0) = h;
  }
  const std::size_t li = log_probs.id;
  return log_probs.tape->push(std::move(y), [li](Tape& t, std::size_t self) {
    const Matrix& G = t.node(self).grad;
    const Matrix& L = t.node(li).value;
    Matrix& GL = t.grad_buffer(li);
    for (std::size_t i = 0; i < L.rows; ++i) {
      for (std::size_t j = 0; j < L.cols; ++j) {
        if (std::isfinite(L(i, j))) GL(i, j) -= G(i, 0) * std::exp(L(i, j)) * (L(i, j) + 1.0);
      }
    }
  });
}

Var sum_cols(Var a) {
  const Matrix& A = a.value();
  Matrix y(A.rows, 1);
  for (std::size_t i = 0; i < A.rows; ++i) {
    for (std::size_t j = 0; j < A.cols; ++j) y(i, 0) += A(i, j);
  }
  const std::size_t ai = a.id;
  return a.tape->push(std::move(y), [ai](Tape& t, std::size_t self) {
    const Matrix& G = t.node(self).grad;
    Matrix& GA = t.grad_buffer(ai);
    for (std::size_t i = 0; i < GA.rows; ++i) {
      for (std::size_t j = 0; j < GA.cols; ++j) GA(i, j) += G(i, 0);
    }
  });
}

Var sum(Var a) {
  const Matrix& A = a.value();
  double s = 0;
  for (double v : A.data) s += v;
  const std::size_t ai = a.id;
  return a.tape->push(Matrix(1, 1, s), [ai](Tape& t, std::size_t self) {
    const double g = t.node(self).grad.data[0];
    Matrix& GA = t.grad_buffer(ai);
    for (double& v : GA.data) v += g;
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw std::invalid_argument("mean of an empty matrix");
  return scale(sum(a), 1.0 / n);
}

}  // namespace moppo
