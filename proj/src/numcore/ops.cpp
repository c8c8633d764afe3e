#include "csifb/numcore/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

namespace csifb::numcore {
namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<Mat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const Mat<T>>;

template <typename T>
using CMapRow = Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>;
template <typename T>
using MapRow = Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>;

template <typename T>
CMapRow<T> as_row(const Tensor<T>& t) {
  return CMapRow<T>(t.data(), static_cast<Eigen::Index>(t.size()));
}
template <typename T>
MapRow<T> as_row(Tensor<T>& t) {
  return MapRow<T>(t.data(), static_cast<Eigen::Index>(t.size()));
}

template <typename T>
MapMat<T> as_mat(Tensor<T>& t) {
  return MapMat<T>(t.data(), static_cast<Eigen::Index>(t.rows()),
                   static_cast<Eigen::Index>(t.cols()));
}
template <typename T>
CMapMat<T> as_mat(const Tensor<T>& t) {
  return CMapMat<T>(t.data(), static_cast<Eigen::Index>(t.rows()),
                    static_cast<Eigen::Index>(t.cols()));
}

template <typename T>
Tensor<T> from_mat(const Mat<T>& m) {
  Tensor<T> t = Tensor<T>::matrix(static_cast<std::size_t>(m.rows()),
                                  static_cast<std::size_t>(m.cols()));
  as_mat(t) = m;
  return t;
}

template <typename T>
T clamp_act(T x) {
  constexpr T lim = static_cast<T>(kActivationClamp);
  return std::clamp(x, -lim, lim);
}

template <typename T>
T sigmoid_scalar(T x) {
  return T{1} / (T{1} + std::exp(-clamp_act(x)));
}

template <typename T>
T tanh_scalar(T x) {
  return std::tanh(clamp_act(x));
}

template <typename T>
Tape<T>& tape_of(Var<T> v) {
  if (v.tape == nullptr) throw InvalidInput("variable is not bound to a tape");
  return *v.tape;
}

template <typename T>
void same_tape(Var<T> a, Var<T> b) {
  if (a.tape != b.tape) throw InvalidInput("operands recorded on different tapes");
}

std::string dims(std::size_t r, std::size_t c) {
  return "(" + std::to_string(r) + "," + std::to_string(c) + ")";
}

}  // namespace

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  same_tape(a, b);
  Tape<T>& tape = tape_of(a);
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul inner dimensions differ: " + dims(av.rows(), av.cols()) +
                         " x " + dims(bv.rows(), bv.cols()));
  }
  Mat<T> out = as_mat(av) * as_mat(bv);
  const bool rg = a.requires_grad() || b.requires_grad();
  const std::size_t id = tape.size();
  return tape.record(from_mat(out), rg, [a, b, id](Tape<T>& t) {
    const auto g = as_mat(t.grad(id));
    if (a.requires_grad()) as_mat(t.grad(a)).noalias() += g * as_mat(b.value()).transpose();
    if (b.requires_grad()) as_mat(t.grad(b)).noalias() += as_mat(a.value()).transpose() * g;
  });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  same_tape(a, b);
  Tape<T>& tape = tape_of(a);
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  if (!av.same_shape(bv)) {
    throw DimensionError("add shape mismatch: " + av.shape_string() + " vs " +
                         bv.shape_string());
  }
  Tensor<T> out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const bool rg = a.requires_grad() || b.requires_grad();
  const std::size_t id = tape.size();
  return tape.record(std::move(out), rg, [a, b, id](Tape<T>& t) {
    const Tensor<T>& g = t.grad(id);
    for (Var<T> v : {a, b}) {
      if (!v.requires_grad()) continue;
      Tensor<T>& gv = t.grad(v);
      for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
    }
  });
}

template <typename T>
Var<T> add_bias(Var<T> x, Var<T> bias) {
  same_tape(x, bias);
  Tape<T>& tape = tape_of(x);
  const Tensor<T>& xv = x.value();
  const Tensor<T>& bv = bias.value();
  if (bv.size() != xv.cols()) {
    throw DimensionError("bias length " + std::to_string(bv.size()) +
                         " does not match width " + std::to_string(xv.cols()));
  }
  Tensor<T> out = xv;
  const std::size_t n = xv.rows(), m = xv.cols();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < m; ++c) out[r * m + c] += bv[c];
  }
  const bool rg = x.requires_grad() || bias.requires_grad();
  const std::size_t id = tape.size();
  return tape.record(std::move(out), rg, [x, bias, id, n, m](Tape<T>& t) {
    const Tensor<T>& g = t.grad(id);
    if (x.requires_grad()) {
      Tensor<T>& gx = t.grad(x);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (bias.requires_grad()) {
      Tensor<T>& gb = t.grad(bias);
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < m; ++c) gb[c] += g[r * m + c];
      }
    }
  });
}

template <typename T>
Var<T> dense(Var<T> x, Var<T> w, Var<T> b) {
  same_tape(x, w);
  same_tape(x, b);
  Tape<T>& tape = tape_of(x);
  const Tensor<T>& xv = x.value();
  const Tensor<T>& wv = w.value();
  const Tensor<T>& bv = b.value();
  if (xv.cols() != wv.rows()) {
    throw DimensionError("dense input width " + std::to_string(xv.cols()) +
                         " does not match weight " + wv.shape_string());
  }
  if (bv.size() != wv.cols()) {
    throw DimensionError("dense bias length " + std::to_string(bv.size()) +
                         " does not match weight " + wv.shape_string());
  }
  Mat<T> out = as_mat(xv) * as_mat(wv);
  out.rowwise() += as_row(bv);
  const bool rg = x.requires_grad() || w.requires_grad() || b.requires_grad();
  const std::size_t id = tape.size();
  return tape.record(from_mat(out), rg, [x, w, b, id](Tape<T>& t) {
    const auto g = as_mat(t.grad(id));
    if (x.requires_grad()) as_mat(t.grad(x)).noalias() += g * as_mat(w.value()).transpose();
    if (w.requires_grad()) as_mat(t.grad(w)).noalias() += as_mat(x.value()).transpose() * g;
    if (b.requires_grad()) {
      Tensor<T>& gb = t.grad(b);
      as_row(gb) += g.colwise().sum();
    }
  });
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
  Tape<T>& tape = tape_of(x);
  Tensor<T> out = x.value();
  for (auto& v : out.storage()) v = sigmoid_scalar(v);
  const std::size_t id = tape.size();
  return tape.record(std::move(out), x.requires_grad(), [x, id](Tape<T>& t) {
    const Tensor<T>& g = t.grad(id);
    const Tensor<T>& y = t.value(Var<T>{&t, id});
    Tensor<T>& gx = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (T{1} - y[i]);
  });
}

template <typename T>
Var<T> tanh(Var<T> x) {
  Tape<T>& tape = tape_of(x);
  Tensor<T> out = x.value();
  for (auto& v : out.storage()) v = tanh_scalar(v);
  const std::size_t id = tape.size();
  return tape.record(std::move(out), x.requires_grad(), [x, id](Tape<T>& t) {
    const Tensor<T>& g = t.grad(id);
    const Tensor<T>& y = t.value(Var<T>{&t, id});
    Tensor<T>& gx = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (T{1} - y[i] * y[i]);
  });
}

template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias) {
  same_tape(x, gain);
  same_tape(x, bias);
  Tape<T>& tape = tape_of(x);
  const Tensor<T>& xv = x.value();
  const std::size_t n = xv.rows(), f = xv.cols();
  if (f < 2) throw DimensionError("layer_norm needs at least 2 features");
  if (gain.value().size() != f || bias.value().size() != f) {
    throw DimensionError("layer_norm gain/bias length must equal width " + std::to_string(f));
  }
  const Tensor<T>& gv = gain.value();
  const Tensor<T>& bv = bias.value();
  auto xhat = std::make_shared<Tensor<T>>(xv.shape());
  auto inv_std = std::make_shared<std::vector<T>>(n);
  Tensor<T> out(xv.shape());
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = xv.row(r);
    T mean{0};
    for (T v : row) mean += v;
    mean /= static_cast<T>(f);
    T var{0};
    for (T v : row) var += (v - mean) * (v - mean);
    var /= static_cast<T>(f);
    const T is = T{1} / std::sqrt(var + static_cast<T>(kLayerNormEps));
    (*inv_std)[r] = is;
    for (std::size_t c = 0; c < f; ++c) {
      const T h = (row[c] - mean) * is;
      (*xhat)(r, c) = h;
      out(r, c) = h * gv[c] + bv[c];
    }
  }
  const bool rg = x.requires_grad() || gain.requires_grad() || bias.requires_grad();
  const std::size_t id = tape.size();
  return tape.record(std::move(out), rg, [x, gain, bias, id, n, f, xhat, inv_std](Tape<T>& t) {
    const Tensor<T>& g = t.grad(id);
    const Tensor<T>& gv = gain.value();
    if (gain.requires_grad()) {
      Tensor<T>& gg = t.grad(gain);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < f; ++c) gg[c] += g(r, c) * (*xhat)(r, c);
    }
    if (bias.requires_grad()) {
      Tensor<T>& gb = t.grad(bias);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < f; ++c) gb[c] += g(r, c);
    }
    if (x.requires_grad()) {
      Tensor<T>& gx = t.grad(x);
      std::vector<T> dh(f);
      for (std::size_t r = 0; r < n; ++r) {
        T mean_dh{0}, mean_dh_h{0};
        for (std::size_t c = 0; c < f; ++c) {
          dh[c] = g(r, c) * gv[c];
          mean_dh += dh[c];
          mean_dh_h += dh[c] * (*xhat)(r, c);
        }
        mean_dh /= static_cast<T>(f);
        mean_dh_h /= static_cast<T>(f);
        for (std::size_t c = 0; c < f; ++c) {
          gx(r, c) += (*inv_std)[r] * (dh[c] - mean_dh - (*xhat)(r, c) * mean_dh_h);
        }
      }
    }
  });
}

template <typename T>
Var<T> mul_const(Var<T> x, const Tensor<T>& c) {
  Tape<T>& tape = tape_of(x);
  if (!x.value().same_shape(c)) {
    throw DimensionError("mul_const shape mismatch: " + x.value().shape_string() + " vs " +
                         c.shape_string());
  }
  Tensor<T> out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c[i];
  const std::size_t id = tape.size();
  return tape.record(std::move(out), x.requires_grad(), [x, c, id](Tape<T>& t) {
    const Tensor<T>& g = t.grad(id);
    Tensor<T>& gx = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * c[i];
  });
}

template <typename T>
Var<T> scale(Var<T> x, T s) {
  Tape<T>& tape = tape_of(x);
  Tensor<T> out = x.value();
  for (auto& v : out.storage()) v *= s;
  const std::size_t id = tape.size();
  return tape.record(std::move(out), x.requires_grad(), [x, s, id](Tape<T>& t) {
    const Tensor<T>& g = t.grad(id);
    Tensor<T>& gx = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * s;
  });
}

template <typename T>
Var<T> sum(Var<T> x) {
  Tape<T>& tape = tape_of(x);
  T total{0};
  for (T v : x.value().storage()) total += v;
  const std::size_t id = tape.size();
  return tape.record(Tensor<T>::vector(1, total), x.requires_grad(), [x, id](Tape<T>& t) {
    const T g = t.grad(id)[0];
    Tensor<T>& gx = t.grad(x);
    for (auto& v : gx.storage()) v += g;
  });
}

template <typename T>
Var<T> concat_cols(std::span<const Var<T>> parts) {
  if (parts.empty()) throw InvalidInput("concat_cols needs at least one operand");
  Tape<T>& tape = tape_of(parts[0]);
  const std::size_t n = parts[0].value().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  bool rg = false;
  for (const auto& p : parts) {
    same_tape(p, parts[0]);
    if (p.value().rows() != n) throw DimensionError("concat_cols row count mismatch");
    widths.push_back(p.value().cols());
    total += widths.back();
    rg = rg || p.requires_grad();
  }
  Tensor<T> out = Tensor<T>::matrix(n, total);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor<T>& pv = parts[k].value();
    for (std::size_t r = 0; r < n; ++r) {
      std::copy_n(pv.data() + r * widths[k], widths[k], out.data() + r * total + off);
    }
    off += widths[k];
  }
  std::vector<Var<T>> inputs(parts.begin(), parts.end());
  const std::size_t id = tape.size();
  return tape.record(std::move(out), rg,
                     [inputs = std::move(inputs), widths, n, total, id](Tape<T>& t) {
                       const Tensor<T>& g = t.grad(id);
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < inputs.size(); ++k) {
                         if (inputs[k].requires_grad()) {
                           Tensor<T>& gk = t.grad(inputs[k]);
                           for (std::size_t r = 0; r < n; ++r)
                             for (std::size_t c = 0; c < widths[k]; ++c)
                               gk[r * widths[k] + c] += g[r * total + off + c];
                         }
                         off += widths[k];
                       }
                     });
}

template <typename T>
Var<T> concat_rows(std::span<const Var<T>> parts) {
  if (parts.empty()) throw InvalidInput("concat_rows needs at least one operand");
  Tape<T>& tape = tape_of(parts[0]);
  const std::size_t m = parts[0].value().cols();
  std::size_t rows = 0;
  bool rg = false;
  for (const auto& p : parts) {
    same_tape(p, parts[0]);
    if (p.value().cols() != m) throw DimensionError("concat_rows column count mismatch");
    rows += p.value().rows();
    rg = rg || p.requires_grad();
  }
  Tensor<T> out = Tensor<T>::matrix(rows, m);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const Tensor<T>& pv = p.value();
    std::copy(pv.storage().begin(), pv.storage().end(), out.data() + off);
    off += pv.size();
  }
  std::vector<Var<T>> inputs(parts.begin(), parts.end());
  const std::size_t id = tape.size();
  return tape.record(std::move(out), rg, [inputs = std::move(inputs), id](Tape<T>& t) {
    const Tensor<T>& g = t.grad(id);
    std::size_t off = 0;
    for (const auto& in : inputs) {
      const std::size_t len = in.value().size();
      if (in.requires_grad()) {
        Tensor<T>& gi = t.grad(in);
        for (std::size_t i = 0; i < len; ++i) gi[i] += g[off + i];
      }
      off += len;
    }
  });
}

template <typename T>
Var<T> slice_cols(Var<T> x, std::size_t offset, std::size_t count) {
  Tape<T>& tape = tape_of(x);
  const Tensor<T>& xv = x.value();
  const std::size_t n = xv.rows(), m = xv.cols();
  if (count == 0 || offset + count > m) throw RangeError("slice_cols out of range");
  Tensor<T> out = Tensor<T>::matrix(n, count);
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(xv.data() + r * m + offset, count, out.data() + r * count);
  }
  const std::size_t id = tape.size();
  return tape.record(std::move(out), x.requires_grad(), [x, offset, count, n, m, id](Tape<T>& t) {
    const Tensor<T>& g = t.grad(id);
    Tensor<T>& gx = t.grad(x);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < count; ++c) gx[r * m + offset + c] += g[r * count + c];
  });
}

template <typename T>
Var<T> slice_rows(Var<T> x, std::size_t offset, std::size_t count) {
  Tape<T>& tape = tape_of(x);
  const Tensor<T>& xv = x.value();
  const std::size_t n = xv.rows(), m = xv.cols();
  if (count == 0 || offset + count > n) throw RangeError("slice_rows out of range");
  Tensor<T> out = Tensor<T>::matrix(count, m);
  std::copy_n(xv.data() + offset * m, count * m, out.data());
  const std::size_t id = tape.size();
  return tape.record(std::move(out), x.requires_grad(), [x, offset, count, m, id](Tape<T>& t) {
    const Tensor<T>& g = t.grad(id);
    Tensor<T>& gx = t.grad(x);
    for (std::size_t i = 0; i < count * m; ++i) gx[offset * m + i] += g[i];
  });
}

template <typename T>
Var<T> straight_through(Var<T> x, const std::function<T(T)>& fn) {
  Tape<T>& tape = tape_of(x);
  Tensor<T> out = x.value();
  for (auto& v : out.storage()) v = fn(v);
  const std::size_t id = tape.size();
  return tape.record(std::move(out), x.requires_grad(), [x, id](Tape<T>& t) {
    const Tensor<T>& g = t.grad(id);
    Tensor<T>& gx = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

// ---- recurrent cells ----------------------------------------------------

template <typename T>
Var<T> lstm_cell_step(Var<T> x, Var<T> state, const LstmVars<T>& p) {
  Tape<T>& tape = tape_of(x);
  const Tensor<T>& xv = x.value();
  const Tensor<T>& sv = state.value();
  const Tensor<T>& wx = p.wx.value();
  const Tensor<T>& wh = p.wh.value();
  const Tensor<T>& bv = p.b.value();
  const std::size_t hid = wh.rows();
  const std::size_t batch = xv.rows();
  if (wh.cols() != 4 * hid || wx.cols() != 4 * hid || bv.size() != 4 * hid) {
    throw DimensionError("lstm parameter shapes inconsistent with hidden size " +
                         std::to_string(hid));
  }
  if (xv.cols() != wx.rows()) {
    throw DimensionError("lstm input width " + std::to_string(xv.cols()) +
                         " does not match wx " + wx.shape_string());
  }
  if (sv.rows() != batch || sv.cols() != 2 * hid) {
    throw DimensionError("lstm state must be " + dims(batch, 2 * hid) + ", got " +
                         sv.shape_string());
  }

  const auto S = as_mat(sv);
  const Mat<T> h_prev = S.leftCols(static_cast<Eigen::Index>(hid));
  Mat<T> act = as_mat(xv) * as_mat(wx);
  act.noalias() += h_prev * as_mat(wh);
  act.rowwise() += as_row(bv);

  auto cache_act = std::make_shared<Mat<T>>(batch, 4 * hid);
  auto tanh_c = std::make_shared<Mat<T>>(batch, hid);
  Tensor<T> out = Tensor<T>::matrix(batch, 2 * hid);
  for (std::size_t r = 0; r < batch; ++r) {
    for (std::size_t j = 0; j < hid; ++j) {
      const T i = sigmoid_scalar(act(r, j));
      const T f = sigmoid_scalar(act(r, hid + j));
      const T g = tanh_scalar(act(r, 2 * hid + j));
      const T o = sigmoid_scalar(act(r, 3 * hid + j));
      const T c = f * sv(r, hid + j) + i * g;
      const T tc = tanh_scalar(c);
      (*cache_act)(r, j) = i;
      (*cache_act)(r, hid + j) = f;
      (*cache_act)(r, 2 * hid + j) = g;
      (*cache_act)(r, 3 * hid + j) = o;
      (*tanh_c)(r, j) = tc;
      out(r, j) = o * tc;
      out(r, hid + j) = c;
    }
  }

  const bool rg = x.requires_grad() || state.requires_grad() || p.wx.requires_grad() ||
                  p.wh.requires_grad() || p.b.requires_grad();
  const std::size_t id = tape.size();
  return tape.record(
      std::move(out), rg, [x, state, p, hid, batch, cache_act, tanh_c, id](Tape<T>& t) {
        const Tensor<T>& g = t.grad(id);
        const Tensor<T>& sv = state.value();
        const Mat<T>& a = *cache_act;
        Mat<T> d_act(batch, 4 * hid);
        Mat<T> dc_prev(batch, hid);
        for (std::size_t r = 0; r < batch; ++r) {
          for (std::size_t j = 0; j < hid; ++j) {
            const T i = a(r, j), f = a(r, hid + j), gg = a(r, 2 * hid + j),
                    o = a(r, 3 * hid + j);
            const T tc = (*tanh_c)(r, j);
            const T dh = g(r, j);
            const T dc = g(r, hid + j) + dh * o * (T{1} - tc * tc);
            const T d_o = dh * tc;
            const T d_i = dc * gg;
            const T d_g = dc * i;
            const T d_f = dc * sv(r, hid + j);
            dc_prev(r, j) = dc * f;
            d_act(r, j) = d_i * i * (T{1} - i);
            d_act(r, hid + j) = d_f * f * (T{1} - f);
            d_act(r, 2 * hid + j) = d_g * (T{1} - gg * gg);
            d_act(r, 3 * hid + j) = d_o * o * (T{1} - o);
          }
        }
        if (x.requires_grad()) {
          as_mat(t.grad(x)).noalias() += d_act * as_mat(p.wx.value()).transpose();
        }
        if (state.requires_grad()) {
          auto gs = as_mat(t.grad(state));
          gs.leftCols(static_cast<Eigen::Index>(hid)).noalias() +=
              d_act * as_mat(p.wh.value()).transpose();
          gs.rightCols(static_cast<Eigen::Index>(hid)) += dc_prev;
        }
        if (p.wx.requires_grad()) {
          as_mat(t.grad(p.wx)).noalias() += as_mat(x.value()).transpose() * d_act;
        }
        if (p.wh.requires_grad()) {
          const Mat<T> h_prev = as_mat(sv).leftCols(static_cast<Eigen::Index>(hid));
          as_mat(t.grad(p.wh)).noalias() += h_prev.transpose() * d_act;
        }
        if (p.b.requires_grad()) {
          Tensor<T>& gb = t.grad(p.b);
          as_row(gb) += d_act.colwise().sum();
        }
      });
}

template <typename T>
std::pair<Var<T>, Var<T>> lstm_cell_step(Var<T> x, Var<T> h_prev, Var<T> c_prev,
                                         const LstmVars<T>& p) {
  const std::size_t hid = p.wh.value().rows();
  if (h_prev.value().cols() != hid || c_prev.value().cols() != hid) {
    throw DimensionError("lstm h/c width must equal hidden size " + std::to_string(hid));
  }
  const Var<T> hc[] = {h_prev, c_prev};
  Var<T> state = lstm_cell_step(x, concat_cols<T>(hc), p);
  return {slice_cols(state, 0, hid), slice_cols(state, hid, hid)};
}

template <typename T>
Var<T> gru_cell_step(Var<T> x, Var<T> h_prev, const GruVars<T>& p) {
  Tape<T>& tape = tape_of(x);
  const Tensor<T>& xv = x.value();
  const Tensor<T>& hv = h_prev.value();
  const Tensor<T>& wx = p.wx.value();
  const Tensor<T>& wh = p.wh.value();
  const std::size_t hid = wh.rows();
  const std::size_t batch = xv.rows();
  if (wh.cols() != 3 * hid || wx.cols() != 3 * hid || p.bx.value().size() != 3 * hid ||
      p.bh.value().size() != 3 * hid) {
    throw DimensionError("gru parameter shapes inconsistent with hidden size " +
                         std::to_string(hid));
  }
  if (xv.cols() != wx.rows()) {
    throw DimensionError("gru input width " + std::to_string(xv.cols()) +
                         " does not match wx " + wx.shape_string());
  }
  if (hv.rows() != batch || hv.cols() != hid) {
    throw DimensionError("gru state must be " + dims(batch, hid) + ", got " + hv.shape_string());
  }
  const auto bx = as_row(p.bx.value());
  const auto bh = as_row(p.bh.value());
  Mat<T> xr = as_mat(xv) * as_mat(wx);
  xr.rowwise() += bx;
  auto hr = std::make_shared<Mat<T>>(as_mat(hv) * as_mat(wh));
  hr->rowwise() += bh;

  auto act = std::make_shared<Mat<T>>(batch, 3 * hid);
  Tensor<T> out = Tensor<T>::matrix(batch, hid);
  for (std::size_t r = 0; r < batch; ++r) {
    for (std::size_t j = 0; j < hid; ++j) {
      const T rg = sigmoid_scalar(xr(r, j) + (*hr)(r, j));
      const T z = sigmoid_scalar(xr(r, hid + j) + (*hr)(r, hid + j));
      const T n = tanh_scalar(xr(r, 2 * hid + j) + rg * (*hr)(r, 2 * hid + j));
      (*act)(r, j) = rg;
      (*act)(r, hid + j) = z;
      (*act)(r, 2 * hid + j) = n;
      out(r, j) = (T{1} - z) * n + z * hv(r, j);
    }
  }

  const bool rg = x.requires_grad() || h_prev.requires_grad() || p.wx.requires_grad() ||
                  p.wh.requires_grad() || p.bx.requires_grad() || p.bh.requires_grad();
  const std::size_t id = tape.size();
  return tape.record(std::move(out), rg, [x, h_prev, p, hid, batch, act, hr, id](Tape<T>& t) {
    const Tensor<T>& g = t.grad(id);
    const Tensor<T>& hv = h_prev.value();
    const Mat<T>& a = *act;
    Mat<T> d_x(batch, 3 * hid);
    Mat<T> d_h(batch, 3 * hid);
    Mat<T> dh_direct(batch, hid);
    for (std::size_t r = 0; r < batch; ++r) {
      for (std::size_t j = 0; j < hid; ++j) {
        const T rr = a(r, j), z = a(r, hid + j), n = a(r, 2 * hid + j);
        const T dout = g(r, j);
        const T dn = dout * (T{1} - z);
        const T dz = dout * (hv(r, j) - n);
        dh_direct(r, j) = dout * z;
        const T dan = dn * (T{1} - n * n);
        const T dr = dan * (*hr)(r, 2 * hid + j);
        const T dar = dr * rr * (T{1} - rr);
        const T daz = dz * z * (T{1} - z);
        d_x(r, j) = dar;
        d_x(r, hid + j) = daz;
        d_x(r, 2 * hid + j) = dan;
        d_h(r, j) = dar;
        d_h(r, hid + j) = daz;
        d_h(r, 2 * hid + j) = dan * rr;
      }
    }
    if (x.requires_grad()) as_mat(t.grad(x)).noalias() += d_x * as_mat(p.wx.value()).transpose();
    if (h_prev.requires_grad()) {
      auto gh = as_mat(t.grad(h_prev));
      gh += dh_direct;
      gh.noalias() += d_h * as_mat(p.wh.value()).transpose();
    }
    if (p.wx.requires_grad()) as_mat(t.grad(p.wx)).noalias() += as_mat(x.value()).transpose() * d_x;
    if (p.wh.requires_grad()) as_mat(t.grad(p.wh)).noalias() += as_mat(hv).transpose() * d_h;
    if (p.bx.requires_grad()) {
      Tensor<T>& gb = t.grad(p.bx);
      as_row(gb) += d_x.colwise().sum();
    }
    if (p.bh.requires_grad()) {
      Tensor<T>& gb = t.grad(p.bh);
      as_row(gb) += d_h.colwise().sum();
    }
  });
}

template <typename T>
std::size_t CellVars<T>::hidden() const {
  return type == CellType::lstm ? lstm.wh.value().rows() : gru.wh.value().rows();
}

namespace {

template <typename T>
std::vector<Var<T>> run_direction(Var<T> seq, std::size_t steps, std::size_t batch,
                                  const CellVars<T>& cell, bool reverse) {
  Tape<T>& tape = tape_of(seq);
  const std::size_t hid = cell.hidden();
  const bool lstm = cell.type == CellType::lstm;
  Var<T> state = tape.constant(Tensor<T>::matrix(batch, lstm ? 2 * hid : hid));
  std::vector<Var<T>> outputs(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t t = reverse ? steps - 1 - s : s;
    Var<T> xt = steps == 1 ? seq : slice_rows(seq, t * batch, batch);
    if (lstm) {
      state = lstm_cell_step(xt, state, cell.lstm);
      outputs[t] = slice_cols(state, 0, hid);
    } else {
      state = gru_cell_step(xt, state, cell.gru);
      outputs[t] = state;
    }
  }
  return outputs;
}

}  // namespace

template <typename T>
Var<T> bi_sequence(Var<T> seq, std::size_t steps, std::size_t batch, const BiCellVars<T>& cells) {
  if (steps == 0 || batch == 0) throw InvalidInput("bi_sequence needs at least one step");
  if (seq.value().rows() != steps * batch) {
    throw DimensionError("bi_sequence expects " + std::to_string(steps * batch) +
                         " rows, got " + std::to_string(seq.value().rows()));
  }
  const auto fwd = run_direction(seq, steps, batch, cells.fwd, false);
  const auto bwd = run_direction(seq, steps, batch, cells.bwd, true);
  std::vector<Var<T>> rows(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const Var<T> pair[] = {fwd[t], bwd[t]};
    rows[t] = concat_cols<T>(pair);
  }
  return steps == 1 ? rows[0] : concat_rows<T>(rows);
}

std::size_t mask_length(std::span<const bool> mask) {
  std::size_t k = 0;
  while (k < mask.size() && mask[k]) ++k;
  for (std::size_t i = k; i < mask.size(); ++i) {
    if (mask[i]) throw InvalidInput("mask must be a contiguous prefix of real subbands");
  }
  if (k == 0) throw InvalidInput("mask selects no subbands");
  return k;
}

template <typename T>
Var<T> bi_sequence_masked(Var<T> seq, std::span<const bool> mask, const BiCellVars<T>& cells) {
  const std::size_t k_max = seq.value().rows();
  if (mask.size() != k_max) throw DimensionError("mask length must equal sequence length");
  const std::size_t k = mask_length(mask);
  Var<T> real = k == k_max ? seq : slice_rows(seq, 0, k);
  Var<T> out = bi_sequence(real, k, 1, cells);
  if (k == k_max) return out;
  const std::size_t width = out.value().cols();
  const Var<T> parts[] = {out, seq.tape->constant(Tensor<T>::matrix(k_max - k, width))};
  return concat_rows<T>(parts);
}

template <typename T>
Var<T> layer_norm_masked(Var<T> x, Var<T> gain, Var<T> bias, std::span<const bool> mask) {
  const std::size_t k_max = x.value().rows();
  if (mask.size() != k_max) throw DimensionError("mask length must equal row count");
  const std::size_t k = mask_length(mask);
  if (k == k_max) return layer_norm(x, gain, bias);
  const Var<T> parts[] = {layer_norm(slice_rows(x, 0, k), gain, bias),
                          x.tape->constant(Tensor<T>::matrix(k_max - k, x.value().cols()))};
  return concat_rows<T>(parts);
}

#define CSIFB_INSTANTIATE_OPS(T)                                                          \
  template Var<T> matmul(Var<T>, Var<T>);                                                 \
  template Var<T> add(Var<T>, Var<T>);                                                    \
  template Var<T> add_bias(Var<T>, Var<T>);                                               \
  template Var<T> dense(Var<T>, Var<T>, Var<T>);                                          \
  template Var<T> sigmoid(Var<T>);                                                        \
  template Var<T> tanh(Var<T>);                                                           \
  template Var<T> layer_norm(Var<T>, Var<T>, Var<T>);                                     \
  template Var<T> layer_norm_masked(Var<T>, Var<T>, Var<T>, std::span<const bool>);       \
  template Var<T> mul_const(Var<T>, const Tensor<T>&);                                    \
  template Var<T> scale(Var<T>, T);                                                       \
  template Var<T> sum(Var<T>);                                                            \
  template Var<T> concat_cols(std::span<const Var<T>>);                                   \
  template Var<T> concat_rows(std::span<const Var<T>>);                                   \
  template Var<T> slice_cols(Var<T>, std::size_t, std::size_t);                           \
  template Var<T> slice_rows(Var<T>, std::size_t, std::size_t);                           \
  template Var<T> straight_through(Var<T>, const std::function<T(T)>&);                   \
  template Var<T> lstm_cell_step(Var<T>, Var<T>, const LstmVars<T>&);                     \
  template std::pair<Var<T>, Var<T>> lstm_cell_step(Var<T>, Var<T>, Var<T>,               \
                                                    const LstmVars<T>&);                  \
  template Var<T> gru_cell_step(Var<T>, Var<T>, const GruVars<T>&);                       \
  template struct CellVars<T>;                                                            \
  template Var<T> bi_sequence(Var<T>, std::size_t, std::size_t, const BiCellVars<T>&);    \
  template Var<T> bi_sequence_masked(Var<T>, std::span<const bool>, const BiCellVars<T>&);

CSIFB_INSTANTIATE_OPS(float)
CSIFB_INSTANTIATE_OPS(double)

#undef CSIFB_INSTANTIATE_OPS

}  // namespace csifb::numcore
