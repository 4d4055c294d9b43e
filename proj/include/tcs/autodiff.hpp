#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <memory>
#include <vector>

#include "tcs/tensor.hpp"

namespace tcs::ad {

// Reverse-mode tape over whole tensors. A forward pass appends nodes in
// creation order; backward() walks them in reverse, each node scattering its
// gradient into its parents. Leaves can be bound to external tensors so
// parameter values are never copied onto the tape.

struct Node {
  Tensor value;                // owned result (unused when bound)
  const Tensor* bound = nullptr;
  std::vector<double> grad;
  bool requires_grad = false;
  std::function<void(Node&)> backward;

  const Tensor& val() const { return bound ? *bound : value; }

  std::vector<double>& ensure_grad() {
    if (grad.size() != val().size()) grad.assign(val().size(), 0.0);
    return grad;
  }
};

class Var {
 public:
  Var() = default;
  explicit Var(Node* n) : n_(n) {}
  const Tensor& value() const { return n_->val(); }
  const std::vector<double>& grad() const { return n_->grad; }
  bool valid() const { return n_ != nullptr; }
  Node* node() const { return n_; }

 private:
  Node* n_ = nullptr;
};

class Tape {
 public:
  // Leaf referencing an external tensor; no copy is made, so the tensor must
  // outlive the tape.
  Var leaf(const Tensor* t, bool requires_grad) {
    Node& n = push();
    n.bound = t;
    n.requires_grad = requires_grad;
    return Var(&n);
  }

  Var constant(Tensor t) {
    Node& n = push();
    n.value = std::move(t);
    return Var(&n);
  }

  // y = x * W^T + b, x: B x n, W: m x n, b: m.
  Var affine(Var x, Var w, Var b) {
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    const Tensor& bv = b.value();
    const int B = xv.rows(), n = xv.cols(), m = wv.rows();
    check(wv.cols() == n, "affine: weight shape mismatch");
    check(static_cast<int>(bv.size()) == m, "affine: bias shape mismatch");
    Node& out = make({B, m}, {x, w, b});
    Tensor& y = out.value;
    for (int r = 0; r < B; ++r) {
      const double* xr = &xv.values[static_cast<std::size_t>(r) * n];
      double* yr = &y.values[static_cast<std::size_t>(r) * m];
      for (int j = 0; j < m; ++j) {
        const double* wj = &wv.values[static_cast<std::size_t>(j) * n];
        double acc = bv.values[j];
        for (int i = 0; i < n; ++i) acc += xr[i] * wj[i];
        yr[j] = acc;
      }
    }
    Node* xn = x.node();
    Node* wn = w.node();
    Node* bn = b.node();
    out.backward = [xn, wn, bn, B, n, m](Node& self) {
      const std::vector<double>& gy = self.grad;
      const Tensor& xv = xn->val();
      const Tensor& wv = wn->val();
      if (xn->requires_grad) {
        auto& gx = xn->ensure_grad();
        for (int r = 0; r < B; ++r) {
          const double* gyr = &gy[static_cast<std::size_t>(r) * m];
          double* gxr = &gx[static_cast<std::size_t>(r) * n];
          for (int j = 0; j < m; ++j) {
            const double g = gyr[j];
            if (g == 0.0) continue;
            const double* wj = &wv.values[static_cast<std::size_t>(j) * n];
            for (int i = 0; i < n; ++i) gxr[i] += g * wj[i];
          }
        }
      }
      if (wn->requires_grad) {
        auto& gw = wn->ensure_grad();
        for (int r = 0; r < B; ++r) {
          const double* gyr = &gy[static_cast<std::size_t>(r) * m];
          const double* xr = &xv.values[static_cast<std::size_t>(r) * n];
          for (int j = 0; j < m; ++j) {
            const double g = gyr[j];
            if (g == 0.0) continue;
            double* gwj = &gw[static_cast<std::size_t>(j) * n];
            for (int i = 0; i < n; ++i) gwj[i] += g * xr[i];
          }
        }
      }
      if (bn->requires_grad) {
        auto& gb = bn->ensure_grad();
        for (int r = 0; r < B; ++r)
          for (int j = 0; j < m; ++j) gb[j] += gy[static_cast<std::size_t>(r) * m + j];
      }
    };
    return Var(&out);
  }

  Var concat_cols(Var a, Var b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const int B = av.rows(), p = av.cols(), q = bv.cols();
    check(bv.rows() == B, "concat_cols: row mismatch");
    Node& out = make({B, p + q}, {a, b});
    for (int r = 0; r < B; ++r) {
      for (int i = 0; i < p; ++i) out.value.at(r, i) = av.at(r, i);
      for (int i = 0; i < q; ++i) out.value.at(r, p + i) = bv.at(r, i);
    }
    Node* an = a.node();
    Node* bn = b.node();
    out.backward = [an, bn, B, p, q](Node& self) {
      if (an->requires_grad) {
        auto& ga = an->ensure_grad();
        for (int r = 0; r < B; ++r)
          for (int i = 0; i < p; ++i)
            ga[static_cast<std::size_t>(r) * p + i] +=
                self.grad[static_cast<std::size_t>(r) * (p + q) + i];
      }
      if (bn->requires_grad) {
        auto& gb = bn->ensure_grad();
        for (int r = 0; r < B; ++r)
          for (int i = 0; i < q; ++i)
            gb[static_cast<std::size_t>(r) * q + i] +=
                self.grad[static_cast<std::size_t>(r) * (p + q) + p + i];
      }
    };
    return Var(&out);
  }

  Var add(Var a, Var b) {
    return elementwise_binary(a, b, [](double x, double y) { return x + y; },
                              [](Node& self, Node* an, Node* bn) {
                                if (an->requires_grad) {
                                  auto& g = an->ensure_grad();
                                  for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                                }
                                if (bn->requires_grad) {
                                  auto& g = bn->ensure_grad();
                                  for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                                }
                              });
  }

  Var sub(Var a, Var b) {
    return elementwise_binary(a, b, [](double x, double y) { return x - y; },
                              [](Node& self, Node* an, Node* bn) {
                                if (an->requires_grad) {
                                  auto& g = an->ensure_grad();
                                  for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                                }
                                if (bn->requires_grad) {
                                  auto& g = bn->ensure_grad();
                                  for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
                                }
                              });
  }

  Var mul(Var a, Var b) {
    Node* an = a.node();
    Node* bn = b.node();
    return elementwise_binary(a, b, [](double x, double y) { return x * y; },
                              [an, bn](Node& self, Node*, Node*) {
                                const Tensor& av = an->val();
                                const Tensor& bv = bn->val();
                                if (an->requires_grad) {
                                  auto& g = an->ensure_grad();
                                  for (std::size_t i = 0; i < g.size(); ++i)
                                    g[i] += self.grad[i] * bv.values[i];
                                }
                                if (bn->requires_grad) {
                                  auto& g = bn->ensure_grad();
                                  for (std::size_t i = 0; i < g.size(); ++i)
                                    g[i] += self.grad[i] * av.values[i];
                                }
                              });
  }

  // Elementwise max; ties route the gradient to the first argument.
  Var ewmax(Var a, Var b) {
    Node* an = a.node();
    Node* bn = b.node();
    return elementwise_binary(a, b, [](double x, double y) { return x >= y ? x : y; },
                              [an, bn](Node& self, Node*, Node*) {
                                const Tensor& av = an->val();
                                const Tensor& bv = bn->val();
                                for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                  if (av.values[i] >= bv.values[i]) {
                                    if (an->requires_grad) an->ensure_grad()[i] += self.grad[i];
                                  } else if (bn->requires_grad) {
                                    bn->ensure_grad()[i] += self.grad[i];
                                  }
                                }
                              });
  }

  Var sigmoid(Var x) {
    return elementwise_unary(x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
                             [](double, double y, double gy) { return gy * y * (1.0 - y); });
  }

  Var tanh_(Var x) {
    return elementwise_unary(x, [](double v) { return std::tanh(v); },
                             [](double, double y, double gy) { return gy * (1.0 - y * y); });
  }

  Var relu(Var x) {
    return elementwise_unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
                             [](double v, double, double gy) { return v > 0.0 ? gy : 0.0; });
  }

  // log(max(x, floor)); gradient is zero where the floor binds.
  Var log_floor(Var x, double floor = 1e-12) {
    return elementwise_unary(
        x, [floor](double v) { return std::log(v < floor ? floor : v); },
        [floor](double v, double, double gy) { return v < floor ? 0.0 : gy / v; });
  }

  Var scale(Var x, double c) {
    return elementwise_unary(x, [c](double v) { return c * v; },
                             [c](double, double, double gy) { return gy * c; });
  }

  Var sum_all(Var x) {
    Node& out = make({1}, {x});
    double acc = 0.0;
    for (double v : x.value().values) acc += v;
    out.value.values[0] = acc;
    Node* xn = x.node();
    out.backward = [xn](Node& self) {
      if (!xn->requires_grad) return;
      auto& g = xn->ensure_grad();
      const double gy = self.grad[0];
      for (double& gi : g) gi += gy;
    };
    return Var(&out);
  }

  // Row-wise softmax with max subtraction.
  Var softmax_rows(Var x) {
    const Tensor& xv = x.value();
    const int B = xv.rows(), n = xv.cols();
    Node& out = make({B, n}, {x});
    Tensor& y = out.value;
    for (int r = 0; r < B; ++r) {
      const double* xr = &xv.values[static_cast<std::size_t>(r) * n];
      double* yr = &y.values[static_cast<std::size_t>(r) * n];
      double mx = xr[0];
      for (int i = 1; i < n; ++i) mx = std::max(mx, xr[i]);
      double sum = 0.0;
      for (int i = 0; i < n; ++i) {
        yr[i] = std::exp(xr[i] - mx);
        sum += yr[i];
      }
      for (int i = 0; i < n; ++i) yr[i] /= sum;
    }
    Node* xn = x.node();
    out.backward = [xn, B, n](Node& self) {
      if (!xn->requires_grad) return;
      auto& gx = xn->ensure_grad();
      const Tensor& y = self.value;
      for (int r = 0; r < B; ++r) {
        const double* yr = &y.values[static_cast<std::size_t>(r) * n];
        const double* gyr = &self.grad[static_cast<std::size_t>(r) * n];
        double dot = 0.0;
        for (int i = 0; i < n; ++i) dot += gyr[i] * yr[i];
        for (int i = 0; i < n; ++i)
          gx[static_cast<std::size_t>(r) * n + i] += yr[i] * (gyr[i] - dot);
      }
    };
    return Var(&out);
  }

  // Row-wise log-softmax (stable fused form).
  Var log_softmax_rows(Var x) {
    const Tensor& xv = x.value();
    const int B = xv.rows(), n = xv.cols();
    Node& out = make({B, n}, {x});
    Tensor& y = out.value;
    for (int r = 0; r < B; ++r) {
      const double* xr = &xv.values[static_cast<std::size_t>(r) * n];
      double* yr = &y.values[static_cast<std::size_t>(r) * n];
      double mx = xr[0];
      for (int i = 1; i < n; ++i) mx = std::max(mx, xr[i]);
      double sum = 0.0;
      for (int i = 0; i < n; ++i) sum += std::exp(xr[i] - mx);
      const double lse = mx + std::log(sum);
      for (int i = 0; i < n; ++i) yr[i] = xr[i] - lse;
    }
    Node* xn = x.node();
    out.backward = [xn, B, n](Node& self) {
      if (!xn->requires_grad) return;
      auto& gx = xn->ensure_grad();
      const Tensor& y = self.value;
      for (int r = 0; r < B; ++r) {
        const double* yr = &y.values[static_cast<std::size_t>(r) * n];
        const double* gyr = &self.grad[static_cast<std::size_t>(r) * n];
        double gsum = 0.0;
        for (int i = 0; i < n; ++i) gsum += gyr[i];
        for (int i = 0; i < n; ++i)
          gx[static_cast<std::size_t>(r) * n + i] += gyr[i] - std::exp(yr[i]) * gsum;
      }
    };
    return Var(&out);
  }

  // Row-wise layer norm on pre-activations, population variance.
  Var layer_norm_rows(Var x, Var gain, Var bias, double eps) {
    const Tensor& xv = x.value();
    const int B = xv.rows(), n = xv.cols();
    check(static_cast<int>(gain.value().size()) == n &&
              static_cast<int>(bias.value().size()) == n,
          "layer_norm_rows: gain/bias length mismatch");
    Node& out = make({B, n}, {x, gain, bias});
    // Cache normalized values and inverse stddev per row for the backward.
    auto xhat = std::make_shared<std::vector<double>>(static_cast<std::size_t>(B) * n);
    auto inv_std = std::make_shared<std::vector<double>>(B);
    const Tensor& gv = gain.value();
    const Tensor& bv = bias.value();
    for (int r = 0; r < B; ++r) {
      const double* xr = &xv.values[static_cast<std::size_t>(r) * n];
      double mean = 0.0;
      for (int i = 0; i < n; ++i) mean += xr[i];
      mean /= n;
      double var = 0.0;
      for (int i = 0; i < n; ++i) var += (xr[i] - mean) * (xr[i] - mean);
      var /= n;
      const double inv = 1.0 / std::sqrt(var + eps);
      (*inv_std)[r] = inv;
      for (int i = 0; i < n; ++i) {
        const double h = (xr[i] - mean) * inv;
        (*xhat)[static_cast<std::size_t>(r) * n + i] = h;
        out.value.values[static_cast<std::size_t>(r) * n + i] = gv.values[i] * h + bv.values[i];
      }
    }
    Node* xn = x.node();
    Node* gn = gain.node();
    Node* bn = bias.node();
    out.backward = [xn, gn, bn, xhat, inv_std, B, n](Node& self) {
      const Tensor& gv = gn->val();
      for (int r = 0; r < B; ++r) {
        const double* gyr = &self.grad[static_cast<std::size_t>(r) * n];
        const double* hr = &(*xhat)[static_cast<std::size_t>(r) * n];
        if (xn->requires_grad) {
          auto& gx = xn->ensure_grad();
          double mean_gh = 0.0, mean_ghh = 0.0;
          for (int i = 0; i < n; ++i) {
            const double gh = gyr[i] * gv.values[i];
            mean_gh += gh;
            mean_ghh += gh * hr[i];
          }
          mean_gh /= n;
          mean_ghh /= n;
          const double inv = (*inv_std)[r];
          for (int i = 0; i < n; ++i) {
            const double gh = gyr[i] * gv.values[i];
            gx[static_cast<std::size_t>(r) * n + i] += (gh - mean_gh - hr[i] * mean_ghh) * inv;
          }
        }
        if (gn->requires_grad) {
          auto& gg = gn->ensure_grad();
          for (int i = 0; i < n; ++i) gg[i] += gyr[i] * hr[i];
        }
        if (bn->requires_grad) {
          auto& gb = bn->ensure_grad();
          for (int i = 0; i < n; ++i) gb[i] += gyr[i];
        }
      }
    };
    return Var(&out);
  }

  // Extracts row r of a matrix as a vector.
  Var row(Var x, int r) {
    const Tensor& xv = x.value();
    const int n = xv.cols();
    check(r >= 0 && r < xv.rows(), "row: index out of range");
    Node& out = make({n}, {x});
    for (int i = 0; i < n; ++i) out.value.values[i] = xv.at(r, i);
    Node* xn = x.node();
    out.backward = [xn, r, n](Node& self) {
      if (!xn->requires_grad) return;
      auto& gx = xn->ensure_grad();
      for (int i = 0; i < n; ++i) gx[static_cast<std::size_t>(r) * n + i] += self.grad[i];
    };
    return Var(&out);
  }

  // Extracts column c of a matrix as a vector of length rows.
  Var col(Var x, int c) {
    const Tensor& xv = x.value();
    const int B = xv.rows(), n = xv.cols();
    check(c >= 0 && c < n, "col: index out of range");
    Node& out = make({B}, {x});
    for (int r = 0; r < B; ++r) out.value.values[r] = xv.at(r, c);
    Node* xn = x.node();
    out.backward = [xn, c, B, n](Node& self) {
      if (!xn->requires_grad) return;
      auto& gx = xn->ensure_grad();
      for (int r = 0; r < B; ++r) gx[static_cast<std::size_t>(r) * n + c] += self.grad[r];
    };
    return Var(&out);
  }

  // Convex/linear combination of same-shaped tensors: sum_k coeffs[k] * parts[k].
  Var mix(const std::vector<Var>& parts, Var coeffs) {
    check(!parts.empty(), "mix: no parts");
    const Tensor& cv = coeffs.value();
    check(cv.size() == parts.size(), "mix: coefficient count mismatch");
    std::vector<Var> inputs = parts;
    inputs.push_back(coeffs);
    Node& out = make(parts[0].value().shape, inputs);
    const std::size_t sz = out.value.size();
    for (std::size_t k = 0; k < parts.size(); ++k) {
      const Tensor& pv = parts[k].value();
      check(pv.size() == sz, "mix: part shape mismatch");
      const double c = cv.values[k];
      for (std::size_t i = 0; i < sz; ++i) out.value.values[i] += c * pv.values[i];
    }
    std::vector<Node*> part_nodes;
    part_nodes.reserve(parts.size());
    for (const Var& p : parts) part_nodes.push_back(p.node());
    Node* cn = coeffs.node();
    out.backward = [part_nodes, cn, sz](Node& self) {
      const Tensor& cv = cn->val();
      for (std::size_t k = 0; k < part_nodes.size(); ++k) {
        Node* pn = part_nodes[k];
        if (pn->requires_grad) {
          auto& gp = pn->ensure_grad();
          const double c = cv.values[k];
          for (std::size_t i = 0; i < sz; ++i) gp[i] += c * self.grad[i];
        }
        if (cn->requires_grad) {
          const Tensor& pv = pn->val();
          double dot = 0.0;
          for (std::size_t i = 0; i < sz; ++i) dot += pv.values[i] * self.grad[i];
          cn->ensure_grad()[k] += dot;
        }
      }
    };
    return Var(&out);
  }

  // Sum over t of cosine similarity between adjacent rows of a T x K matrix.
  Var cosine_adjacent_sum(Var x) {
    const Tensor& xv = x.value();
    const int T = xv.rows(), K = xv.cols();
    check(T >= 2, "cosine_adjacent_sum: need at least two rows");
    Node& out = make({1}, {x});
    double total = 0.0;
    for (int t = 0; t + 1 < T; ++t) {
      const double* a = &xv.values[static_cast<std::size_t>(t) * K];
      const double* b = a + K;
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (int i = 0; i < K; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
      }
      check(na > 0.0 && nb > 0.0, "cosine_adjacent_sum: zero-norm row");
      total += dot / std::sqrt(na * nb);
    }
    out.value.values[0] = total;
    Node* xn = x.node();
    out.backward = [xn, T, K](Node& self) {
      if (!xn->requires_grad) return;
      auto& gx = xn->ensure_grad();
      const Tensor& xv = xn->val();
      const double gy = self.grad[0];
      for (int t = 0; t + 1 < T; ++t) {
        const double* a = &xv.values[static_cast<std::size_t>(t) * K];
        const double* b = a + K;
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (int i = 0; i < K; ++i) {
          dot += a[i] * b[i];
          na += a[i] * a[i];
          nb += b[i] * b[i];
        }
        const double norm_a = std::sqrt(na), norm_b = std::sqrt(nb);
        const double s = dot / (norm_a * norm_b);
        double* ga = &gx[static_cast<std::size_t>(t) * K];
        double* gb = ga + K;
        for (int i = 0; i < K; ++i) {
          ga[i] += gy * (b[i] / (norm_a * norm_b) - s * a[i] / na);
          gb[i] += gy * (a[i] / (norm_a * norm_b) - s * b[i] / nb);
        }
      }
    };
    return Var(&out);
  }

  // Picks logp[r][labels[r]] per row; returns a length-B vector.
  Var gather_labels(Var logp, const std::vector<int>& labels) {
    const Tensor& lv = logp.value();
    const int B = lv.rows(), n = lv.cols();
    check(static_cast<int>(labels.size()) == B, "gather_labels: label count mismatch");
    Node& out = make({B}, {logp});
    for (int r = 0; r < B; ++r) {
      check(labels[r] >= 0 && labels[r] < n, "gather_labels: label out of range");
      out.value.values[r] = lv.at(r, labels[r]);
    }
    Node* xn = logp.node();
    auto labels_copy = std::make_shared<std::vector<int>>(labels);
    out.backward = [xn, labels_copy, B, n](Node& self) {
      if (!xn->requires_grad) return;
      auto& gx = xn->ensure_grad();
      for (int r = 0; r < B; ++r)
        gx[static_cast<std::size_t>(r) * n + (*labels_copy)[r]] += self.grad[r];
    };
    return Var(&out);
  }

  void backward(Var loss) {
    check(loss.value().size() == 1, "backward: loss must be scalar");
    loss.node()->ensure_grad()[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      Node& n = *it;
      if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
      n.backward(n);
    }
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  Node& push() {
    nodes_.emplace_back();
    return nodes_.back();
  }

  Node& make(std::vector<int> shape, const std::vector<Var>& inputs) {
    Node& n = push();
    n.value = Tensor(std::move(shape));
    for (const Var& v : inputs) n.requires_grad = n.requires_grad || v.node()->requires_grad;
    return n;
  }

  template <typename FwdFn, typename BwdFn>
  Var elementwise_binary(Var a, Var b, FwdFn fwd, BwdFn bwd) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    check(av.shape == bv.shape, "elementwise: shape mismatch");
    Node& out = make(av.shape, {a, b});
    for (std::size_t i = 0; i < av.size(); ++i)
      out.value.values[i] = fwd(av.values[i], bv.values[i]);
    Node* an = a.node();
    Node* bn = b.node();
    out.backward = [an, bn, bwd](Node& self) { bwd(self, an, bn); };
    return Var(&out);
  }

  // bwd(x_i, y_i, gy_i) -> gx_i contribution.
  template <typename FwdFn, typename BwdFn>
  Var elementwise_unary(Var x, FwdFn fwd, BwdFn bwd) {
    const Tensor& xv = x.value();
    Node& out = make(xv.shape, {x});
    for (std::size_t i = 0; i < xv.size(); ++i) out.value.values[i] = fwd(xv.values[i]);
    Node* xn = x.node();
    out.backward = [xn, bwd](Node& self) {
      if (!xn->requires_grad) return;
      auto& gx = xn->ensure_grad();
      const Tensor& xv = xn->val();
      for (std::size_t i = 0; i < gx.size(); ++i)
        gx[i] += bwd(xv.values[i], self.value.values[i], self.grad[i]);
    };
    return Var(&out);
  }

  std::deque<Node> nodes_;
};

}  // namespace tcs::ad
