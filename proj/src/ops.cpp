#include "maelab/ops.hpp"

#include <cmath>
#include <string>

namespace maelab::ops {

namespace {

bool track(const Tensor& t) { return grad_enabled() && t.requires_grad; }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape != b.shape) {
        throw TensorError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) +
                          "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                          "x" + std::to_string(b.cols()));
    }
}

Tensor finish(Tensor out, const char* op, std::vector<Tensor> parents,
              std::function<void(const Tensor&)> backward_fn) {
    check_finite(*out.data, op);
    opstats_record(op, out.rows(), out.cols());
    if (out.requires_grad) {
        out.node = std::make_shared<Node>();
        out.node->op = op;
        out.node->parents = std::move(parents);
        out.node->backward = std::move(backward_fn);
    }
    return out;
}

void accumulate(const Tensor& p, const std::vector<double>& delta) {
    if (!p.grad) return;
    double* g = p.grad->data();
    for (size_t i = 0; i < delta.size(); ++i) g[i] += delta[i];
}

double stable_sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

double stable_softplus(double x) {
    // log(1 + e^x) without overflow on either tail.
    if (x > 34.0) return x;
    if (x < -34.0) return std::exp(x);
    return std::log1p(std::exp(-std::fabs(x))) + (x > 0.0 ? x : 0.0);
}

// ---- matmul kernels, row-major, register-tiled for the small-matrix
// shapes transformer blocks produce. Per-element accumulation order
// matches the naive loops, so results are bitwise reproducible.

// C[m,n] += A[m,k] * B[k,n]
void mm_nn_acc(const double* __restrict a, const double* __restrict b, double* __restrict c,
               int m, int k, int n) {
    int i = 0;
    for (; i + 4 <= m; i += 4) {
        const double* a0 = a + static_cast<size_t>(i) * k;
        const double* a1 = a0 + k;
        const double* a2 = a1 + k;
        const double* a3 = a2 + k;
        double* c0 = c + static_cast<size_t>(i) * n;
        double* c1 = c0 + n;
        double* c2 = c1 + n;
        double* c3 = c2 + n;
        for (int p = 0; p < k; ++p) {
            const double v0 = a0[p], v1 = a1[p], v2 = a2[p], v3 = a3[p];
            const double* bp = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) {
                const double bj = bp[j];
                c0[j] += v0 * bj;
                c1[j] += v1 * bj;
                c2[j] += v2 * bj;
                c3[j] += v3 * bj;
            }
        }
    }
    for (; i < m; ++i) {
        const double* ai = a + static_cast<size_t>(i) * k;
        double* ci = c + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = ai[p];
            const double* bp = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

// C[m,n] += A[m,k] * B[n,k]^T
void mm_nt_acc(const double* __restrict a, const double* __restrict b, double* __restrict c,
               int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<size_t>(i) * k;
        double* ci = c + static_cast<size_t>(i) * n;
        int j = 0;
        for (; j + 4 <= n; j += 4) {
            const double* b0 = b + static_cast<size_t>(j) * k;
            const double* b1 = b0 + k;
            const double* b2 = b1 + k;
            const double* b3 = b2 + k;
            double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
            for (int p = 0; p < k; ++p) {
                const double av = ai[p];
                s0 += av * b0[p];
                s1 += av * b1[p];
                s2 += av * b2[p];
                s3 += av * b3[p];
            }
            ci[j] += s0;
            ci[j + 1] += s1;
            ci[j + 2] += s2;
            ci[j + 3] += s3;
        }
        for (; j < n; ++j) {
            const double* bj = b + static_cast<size_t>(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] += acc;
        }
    }
}

// C[k,n] += A[m,k]^T * B[m,n]
void mm_tn_acc(const double* __restrict a, const double* __restrict b, double* __restrict c,
               int m, int k, int n) {
    int p = 0;
    for (; p + 4 <= k; p += 4) {
        double* c0 = c + static_cast<size_t>(p) * n;
        double* c1 = c0 + n;
        double* c2 = c1 + n;
        double* c3 = c2 + n;
        for (int i = 0; i < m; ++i) {
            const double* ai = a + static_cast<size_t>(i) * k + p;
            const double* bi = b + static_cast<size_t>(i) * n;
            const double v0 = ai[0], v1 = ai[1], v2 = ai[2], v3 = ai[3];
            for (int j = 0; j < n; ++j) {
                const double bj = bi[j];
                c0[j] += v0 * bj;
                c1[j] += v1 * bj;
                c2[j] += v2 * bj;
                c3[j] += v3 * bj;
            }
        }
    }
    for (; p < k; ++p) {
        double* cp = c + static_cast<size_t>(p) * n;
        for (int i = 0; i < m; ++i) {
            const double av = a[static_cast<size_t>(i) * k + p];
            const double* bi = b + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) cp[j] += av * bi[j];
        }
    }
}

Tensor elementwise_unary(const Tensor& a, const char* op, double (*fwd)(double),
                         double (*dfdx)(double)) {
    Tensor out = Tensor::uninitialized(a.rows(), a.cols(), track(a));
    const double* x = a.data->data();
    double* y = out.data->data();
    const size_t n = a.numel();
    for (size_t i = 0; i < n; ++i) y[i] = fwd(x[i]);
    return finish(std::move(out), op, {a}, [a, dfdx](const Tensor& o) {
        if (!a.grad) return;
        const double* x = a.data->data();
        const double* g = o.grad->data();
        double* ga = a.grad->data();
        for (size_t i = 0; i < o.numel(); ++i) ga[i] += g[i] * dfdx(x[i]);
    });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out = Tensor::uninitialized(a.rows(), a.cols(), track(a) || track(b));
    for (size_t i = 0; i < out.numel(); ++i) (*out.data)[i] = (*a.data)[i] + (*b.data)[i];
    return finish(std::move(out), "add", {a, b}, [a, b](const Tensor& o) {
        accumulate(a, *o.grad);
        accumulate(b, *o.grad);
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor out = Tensor::uninitialized(a.rows(), a.cols(), track(a) || track(b));
    for (size_t i = 0; i < out.numel(); ++i) (*out.data)[i] = (*a.data)[i] - (*b.data)[i];
    return finish(std::move(out), "sub", {a, b}, [a, b](const Tensor& o) {
        accumulate(a, *o.grad);
        if (b.grad) {
            double* g = b.grad->data();
            const double* og = o.grad->data();
            for (size_t i = 0; i < o.numel(); ++i) g[i] -= og[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor out = Tensor::uninitialized(a.rows(), a.cols(), track(a) || track(b));
    for (size_t i = 0; i < out.numel(); ++i) (*out.data)[i] = (*a.data)[i] * (*b.data)[i];
    return finish(std::move(out), "mul", {a, b}, [a, b](const Tensor& o) {
        const double* og = o.grad->data();
        if (a.grad) {
            double* g = a.grad->data();
            const double* bv = b.data->data();
            for (size_t i = 0; i < o.numel(); ++i) g[i] += og[i] * bv[i];
        }
        if (b.grad) {
            double* g = b.grad->data();
            const double* av = a.data->data();
            for (size_t i = 0; i < o.numel(); ++i) g[i] += og[i] * av[i];
        }
    });
}

Tensor scale(const Tensor& a, double s) {
    Tensor out = Tensor::uninitialized(a.rows(), a.cols(), track(a));
    for (size_t i = 0; i < out.numel(); ++i) (*out.data)[i] = (*a.data)[i] * s;
    return finish(std::move(out), "scale", {a}, [a, s](const Tensor& o) {
        if (!a.grad) return;
        double* g = a.grad->data();
        const double* og = o.grad->data();
        for (size_t i = 0; i < o.numel(); ++i) g[i] += og[i] * s;
    });
}

Tensor add_scalar(const Tensor& a, double s) {
    Tensor out = Tensor::uninitialized(a.rows(), a.cols(), track(a));
    for (size_t i = 0; i < out.numel(); ++i) (*out.data)[i] = (*a.data)[i] + s;
    return finish(std::move(out), "add_scalar", {a},
                  [a](const Tensor& o) { accumulate(a, *o.grad); });
}

Tensor abs_val(const Tensor& a) {
    return elementwise_unary(
        a, "abs", [](double x) { return std::fabs(x); },
        [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor pow_scalar(const Tensor& a, double p) {
    if (p == 0.0) {
        // x^0 == 1 with zero derivative; emit a constant.
        return Tensor::full(a.rows(), a.cols(), 1.0);
    }
    Tensor out = Tensor::uninitialized(a.rows(), a.cols(), track(a));
    for (size_t i = 0; i < out.numel(); ++i) (*out.data)[i] = std::pow((*a.data)[i], p);
    return finish(std::move(out), "pow_scalar", {a}, [a, p](const Tensor& o) {
        if (!a.grad) return;
        const double* x = a.data->data();
        const double* og = o.grad->data();
        double* g = a.grad->data();
        for (size_t i = 0; i < o.numel(); ++i) g[i] += og[i] * p * std::pow(x[i], p - 1.0);
    });
}

Tensor sigmoid(const Tensor& a) {
    Tensor out = Tensor::uninitialized(a.rows(), a.cols(), track(a));
    for (size_t i = 0; i < out.numel(); ++i) (*out.data)[i] = stable_sigmoid((*a.data)[i]);
    return finish(std::move(out), "sigmoid", {a}, [a](const Tensor& o) {
        if (!a.grad) return;
        const double* y = o.data->data();
        const double* og = o.grad->data();
        double* g = a.grad->data();
        for (size_t i = 0; i < o.numel(); ++i) g[i] += og[i] * y[i] * (1.0 - y[i]);
    });
}

Tensor softplus(const Tensor& a) {
    return elementwise_unary(a, "softplus", &stable_softplus, &stable_sigmoid);
}

Tensor gelu(const Tensor& a) {
    constexpr double inv_sqrt2 = 0.7071067811865476;
    constexpr double inv_sqrt2pi = 0.3989422804014327;
    return elementwise_unary(
        a, "gelu",
        [](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); },
        [](double x) {
            double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
            double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
            return cdf + x * pdf;
        });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) {
        throw TensorError("matmul: inner extents differ, " + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + " * " + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()));
    }
    const int m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out = Tensor::zeros(m, n, track(a) || track(b));
    mm_nn_acc(a.data->data(), b.data->data(), out.data->data(), m, k, n);
    return finish(std::move(out), "matmul", {a, b}, [a, b, m, k, n](const Tensor& o) {
        if (a.grad) mm_nt_acc(o.grad->data(), b.data->data(), a.grad->data(), m, n, k);
        if (b.grad) mm_tn_acc(a.data->data(), o.grad->data(), b.grad->data(), m, k, n);
    });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.cols()) {
        throw TensorError("matmul_nt: inner extents differ, " + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + " * (" + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()) + ")^T");
    }
    const int m = a.rows(), k = a.cols(), n = b.rows();
    Tensor out = Tensor::zeros(m, n, track(a) || track(b));
    mm_nt_acc(a.data->data(), b.data->data(), out.data->data(), m, k, n);
    return finish(std::move(out), "matmul_nt", {a, b}, [a, b, m, k, n](const Tensor& o) {
        // dA += G * B ; dB += G^T * A
        if (a.grad) mm_nn_acc(o.grad->data(), b.data->data(), a.grad->data(), m, n, k);
        if (b.grad) mm_tn_acc(o.grad->data(), a.data->data(), b.grad->data(), m, n, k);
    });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols()) {
        throw TensorError("linear: shape mismatch " + std::to_string(x.rows()) + "x" +
                          std::to_string(x.cols()) + " * " + std::to_string(w.rows()) + "x" +
                          std::to_string(w.cols()) + " + 1x" + std::to_string(b.cols()));
    }
    const int m = x.rows(), k = x.cols(), n = w.cols();
    Tensor out = Tensor::uninitialized(m, n, track(x) || track(w) || track(b));
    for (int i = 0; i < m; ++i) {
        double* row = out.data->data() + static_cast<size_t>(i) * n;
        const double* bias = b.data->data();
        for (int j = 0; j < n; ++j) row[j] = bias[j];
    }
    mm_nn_acc(x.data->data(), w.data->data(), out.data->data(), m, k, n);
    return finish(std::move(out), "linear", {x, w, b}, [x, w, b, m, k, n](const Tensor& o) {
        const double* og = o.grad->data();
        if (x.grad) mm_nt_acc(og, w.data->data(), x.grad->data(), m, n, k);
        if (w.grad) mm_tn_acc(x.data->data(), og, w.grad->data(), m, k, n);
        if (b.grad) {
            double* gb = b.grad->data();
            for (int i = 0; i < m; ++i) {
                const double* row = og + static_cast<size_t>(i) * n;
                for (int j = 0; j < n; ++j) gb[j] += row[j];
            }
        }
    });
}

Tensor transpose(const Tensor& a) {
    const int m = a.rows(), n = a.cols();
    Tensor out = Tensor::uninitialized(n, m, track(a));
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
    }
    return finish(std::move(out), "transpose", {a}, [a, m, n](const Tensor& o) {
        if (!a.grad) return;
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) {
                (*a.grad)[static_cast<size_t>(i) * n + j] += o.grad->at(static_cast<size_t>(j) * m + i);
            }
        }
    });
}

Tensor reshape(const Tensor& a, int rows, int cols) {
    if (static_cast<size_t>(rows) * cols != a.numel()) {
        throw TensorError("reshape: element count mismatch");
    }
    Tensor out = Tensor::uninitialized(rows, cols, track(a));
    *out.data = *a.data;
    return finish(std::move(out), "reshape", {a},
                  [a](const Tensor& o) { accumulate(a, *o.grad); });
}

Tensor softmax_rows(const Tensor& a) {
    const int m = a.rows(), n = a.cols();
    Tensor out = Tensor::uninitialized(m, n, track(a));
    for (int i = 0; i < m; ++i) {
        const double* x = a.data->data() + static_cast<size_t>(i) * n;
        double* y = out.data->data() + static_cast<size_t>(i) * n;
        double mx = x[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, x[j]);
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            y[j] = std::exp(x[j] - mx);
            sum += y[j];
        }
        for (int j = 0; j < n; ++j) y[j] /= sum;
    }
    return finish(std::move(out), "softmax_rows", {a}, [a, m, n](const Tensor& o) {
        if (!a.grad) return;
        for (int i = 0; i < m; ++i) {
            const double* y = o.data->data() + static_cast<size_t>(i) * n;
            const double* g = o.grad->data() + static_cast<size_t>(i) * n;
            double* ga = a.grad->data() + static_cast<size_t>(i) * n;
            double dot = 0.0;
            for (int j = 0; j < n; ++j) dot += g[j] * y[j];
            for (int j = 0; j < n; ++j) ga[j] += y[j] * (g[j] - dot);
        }
    });
}

Tensor layer_norm_rows(const Tensor& a, double eps) {
    const int m = a.rows(), n = a.cols();
    Tensor out = Tensor::uninitialized(m, n, track(a));
    auto inv_std = std::make_shared<std::vector<double>>(m);
    for (int i = 0; i < m; ++i) {
        const double* x = a.data->data() + static_cast<size_t>(i) * n;
        double* y = out.data->data() + static_cast<size_t>(i) * n;
        double mean = 0.0;
        for (int j = 0; j < n; ++j) mean += x[j];
        mean /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) {
            double d = x[j] - mean;
            var += d * d;
        }
        var /= n;
        double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[i] = is;
        for (int j = 0; j < n; ++j) y[j] = (x[j] - mean) * is;
    }
    return finish(std::move(out), "layer_norm_rows", {a},
                  [a, m, n, inv_std](const Tensor& o) {
                      if (!a.grad) return;
                      for (int i = 0; i < m; ++i) {
                          const double* y = o.data->data() + static_cast<size_t>(i) * n;
                          const double* g = o.grad->data() + static_cast<size_t>(i) * n;
                          double* ga = a.grad->data() + static_cast<size_t>(i) * n;
                          double g_mean = 0.0, gy_mean = 0.0;
                          for (int j = 0; j < n; ++j) {
                              g_mean += g[j];
                              gy_mean += g[j] * y[j];
                          }
                          g_mean /= n;
                          gy_mean /= n;
                          const double is = (*inv_std)[i];
                          for (int j = 0; j < n; ++j) {
                              ga[j] += is * (g[j] - g_mean - y[j] * gy_mean);
                          }
                      }
                  });
}

Tensor layer_norm_affine(const Tensor& a, const Tensor& gain, const Tensor& shift, double eps) {
    const int m = a.rows(), n = a.cols();
    if (gain.rows() != 1 || gain.cols() != n || shift.rows() != 1 || shift.cols() != n) {
        throw TensorError("layer_norm_affine: gain/shift must be [1, " + std::to_string(n) + "]");
    }
    Tensor out = Tensor::uninitialized(m, n, track(a) || track(gain) || track(shift));
    auto mean_vec = std::make_shared<std::vector<double>>(m);
    auto inv_std = std::make_shared<std::vector<double>>(m);
    const double* gv = gain.data->data();
    const double* sv = shift.data->data();
    for (int i = 0; i < m; ++i) {
        const double* x = a.data->data() + static_cast<size_t>(i) * n;
        double* y = out.data->data() + static_cast<size_t>(i) * n;
        double mean = 0.0;
        for (int j = 0; j < n; ++j) mean += x[j];
        mean /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) {
            const double d = x[j] - mean;
            var += d * d;
        }
        var /= n;
        const double is = 1.0 / std::sqrt(var + eps);
        (*mean_vec)[i] = mean;
        (*inv_std)[i] = is;
        for (int j = 0; j < n; ++j) y[j] = (x[j] - mean) * is * gv[j] + sv[j];
    }
    return finish(std::move(out), "layer_norm_affine", {a, gain, shift},
                  [a, gain, shift, m, n, mean_vec, inv_std](const Tensor& o) {
                      const double* gv = gain.data->data();
                      const double* og = o.grad->data();
                      for (int i = 0; i < m; ++i) {
                          const double* x = a.data->data() + static_cast<size_t>(i) * n;
                          const double* g = og + static_cast<size_t>(i) * n;
                          const double mean = (*mean_vec)[i];
                          const double is = (*inv_std)[i];
                          if (gain.grad || shift.grad) {
                              double* gg = gain.grad ? gain.grad->data() : nullptr;
                              double* gs = shift.grad ? shift.grad->data() : nullptr;
                              for (int j = 0; j < n; ++j) {
                                  if (gg) gg[j] += g[j] * (x[j] - mean) * is;
                                  if (gs) gs[j] += g[j];
                              }
                          }
                          if (a.grad) {
                              double gn_mean = 0.0, gny_mean = 0.0;
                              for (int j = 0; j < n; ++j) {
                                  const double gn = g[j] * gv[j];
                                  const double y = (x[j] - mean) * is;
                                  gn_mean += gn;
                                  gny_mean += gn * y;
                              }
                              gn_mean /= n;
                              gny_mean /= n;
                              double* ga = a.grad->data() + static_cast<size_t>(i) * n;
                              for (int j = 0; j < n; ++j) {
                                  const double gn = g[j] * gv[j];
                                  const double y = (x[j] - mean) * is;
                                  ga[j] += is * (gn - gn_mean - y * gny_mean);
                              }
                          }
                      }
                  });
}

Tensor mul_rowvec(const Tensor& a, const Tensor& v) {
    if (v.rows() != 1 || v.cols() != a.cols()) {
        throw TensorError("mul_rowvec: vector must be [1, " + std::to_string(a.cols()) + "]");
    }
    const int m = a.rows(), n = a.cols();
    Tensor out = Tensor::uninitialized(m, n, track(a) || track(v));
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) out.at(i, j) = a.at(i, j) * (*v.data)[j];
    }
    return finish(std::move(out), "mul_rowvec", {a, v}, [a, v, m, n](const Tensor& o) {
        const double* og = o.grad->data();
        if (a.grad) {
            double* g = a.grad->data();
            const double* vv = v.data->data();
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < n; ++j) {
                    g[static_cast<size_t>(i) * n + j] += og[static_cast<size_t>(i) * n + j] * vv[j];
                }
            }
        }
        if (v.grad) {
            double* g = v.grad->data();
            const double* av = a.data->data();
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < n; ++j) {
                    g[j] += og[static_cast<size_t>(i) * n + j] * av[static_cast<size_t>(i) * n + j];
                }
            }
        }
    });
}

Tensor add_rowvec(const Tensor& a, const Tensor& v) {
    if (v.rows() != 1 || v.cols() != a.cols()) {
        throw TensorError("add_rowvec: vector must be [1, " + std::to_string(a.cols()) + "]");
    }
    const int m = a.rows(), n = a.cols();
    Tensor out = Tensor::uninitialized(m, n, track(a) || track(v));
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) out.at(i, j) = a.at(i, j) + (*v.data)[j];
    }
    return finish(std::move(out), "add_rowvec", {a, v}, [a, v, m, n](const Tensor& o) {
        const double* og = o.grad->data();
        accumulate(a, *o.grad);
        if (v.grad) {
            double* g = v.grad->data();
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < n; ++j) g[j] += og[static_cast<size_t>(i) * n + j];
            }
        }
    });
}

Tensor sum_all(const Tensor& a) {
    Tensor out = Tensor::uninitialized(1, 1, track(a));
    double s = 0.0;
    for (double v : *a.data) s += v;
    (*out.data)[0] = s;
    return finish(std::move(out), "sum_all", {a}, [a](const Tensor& o) {
        if (!a.grad) return;
        const double g = (*o.grad)[0];
        for (double& v : *a.grad) v += g;
    });
}

Tensor mean_all(const Tensor& a) {
    Tensor out = Tensor::uninitialized(1, 1, track(a));
    double s = 0.0;
    for (double v : *a.data) s += v;
    (*out.data)[0] = s / static_cast<double>(a.numel());
    return finish(std::move(out), "mean_all", {a}, [a](const Tensor& o) {
        if (!a.grad) return;
        const double g = (*o.grad)[0] / static_cast<double>(a.numel());
        for (double& v : *a.grad) v += g;
    });
}

Tensor mean_over_rows(const Tensor& a) {
    const int m = a.rows(), n = a.cols();
    Tensor out = Tensor::zeros(1, n, track(a));
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) (*out.data)[j] += a.at(i, j);
    }
    for (int j = 0; j < n; ++j) (*out.data)[j] /= m;
    return finish(std::move(out), "mean_over_rows", {a}, [a, m, n](const Tensor& o) {
        if (!a.grad) return;
        const double* og = o.grad->data();
        double* g = a.grad->data();
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) g[static_cast<size_t>(i) * n + j] += og[j] / m;
        }
    });
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& indices) {
    const int n = a.cols();
    if (indices.empty()) throw TensorError("gather_rows: empty index list");
    for (int idx : indices) {
        if (idx < 0 || idx >= a.rows()) {
            throw TensorError("gather_rows: index " + std::to_string(idx) + " out of range");
        }
    }
    const int m = static_cast<int>(indices.size());
    Tensor out = Tensor::uninitialized(m, n, track(a));
    for (int r = 0; r < m; ++r) {
        const double* src = a.data->data() + static_cast<size_t>(indices[r]) * n;
        double* dst = out.data->data() + static_cast<size_t>(r) * n;
        for (int j = 0; j < n; ++j) dst[j] = src[j];
    }
    return finish(std::move(out), "gather_rows", {a}, [a, indices, n](const Tensor& o) {
        if (!a.grad) return;
        for (size_t r = 0; r < indices.size(); ++r) {
            double* dst = a.grad->data() + static_cast<size_t>(indices[r]) * n;
            const double* src = o.grad->data() + r * n;
            for (int j = 0; j < n; ++j) dst[j] += src[j];
        }
    });
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.cols()) throw TensorError("concat_rows: column counts differ");
    const int n = a.cols();
    Tensor out = Tensor::uninitialized(a.rows() + b.rows(), n, track(a) || track(b));
    std::copy(a.data->begin(), a.data->end(), out.data->begin());
    std::copy(b.data->begin(), b.data->end(), out.data->begin() + a.numel());
    return finish(std::move(out), "concat_rows", {a, b}, [a, b](const Tensor& o) {
        const double* og = o.grad->data();
        if (a.grad) {
            double* g = a.grad->data();
            for (size_t i = 0; i < a.numel(); ++i) g[i] += og[i];
        }
        if (b.grad) {
            double* g = b.grad->data();
            const double* src = og + a.numel();
            for (size_t i = 0; i < b.numel(); ++i) g[i] += src[i];
        }
    });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw TensorError("concat_cols: no inputs");
    const int m = parts[0].rows();
    int total = 0;
    bool rg = false;
    for (const Tensor& p : parts) {
        if (p.rows() != m) throw TensorError("concat_cols: row counts differ");
        total += p.cols();
        rg = rg || track(p);
    }
    Tensor out = Tensor::uninitialized(m, total, rg);
    int off = 0;
    for (const Tensor& p : parts) {
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < p.cols(); ++j) out.at(i, off + j) = p.at(i, j);
        }
        off += p.cols();
    }
    return finish(std::move(out), "concat_cols", parts, [parts, m, total](const Tensor& o) {
        int off = 0;
        for (const Tensor& p : parts) {
            if (p.grad) {
                const int pc = p.cols();
                for (int i = 0; i < m; ++i) {
                    double* g = p.grad->data() + static_cast<size_t>(i) * pc;
                    const double* og = o.grad->data() + static_cast<size_t>(i) * total + off;
                    for (int j = 0; j < pc; ++j) g[j] += og[j];
                }
            }
            off += p.cols();
        }
    });
}

Tensor slice_cols(const Tensor& a, int start, int len) {
    if (start < 0 || len <= 0 || start + len > a.cols()) {
        throw TensorError("slice_cols: range [" + std::to_string(start) + ", " +
                          std::to_string(start + len) + ") outside 0.." +
                          std::to_string(a.cols()));
    }
    const int m = a.rows(), n = a.cols();
    Tensor out = Tensor::uninitialized(m, len, track(a));
    for (int i = 0; i < m; ++i) {
        const double* src = a.data->data() + static_cast<size_t>(i) * n + start;
        double* dst = out.data->data() + static_cast<size_t>(i) * len;
        for (int j = 0; j < len; ++j) dst[j] = src[j];
    }
    return finish(std::move(out), "slice_cols", {a}, [a, start, len, m, n](const Tensor& o) {
        if (!a.grad) return;
        for (int i = 0; i < m; ++i) {
            double* dst = a.grad->data() + static_cast<size_t>(i) * n + start;
            const double* src = o.grad->data() + static_cast<size_t>(i) * len;
            for (int j = 0; j < len; ++j) dst[j] += src[j];
        }
    });
}

Tensor repeat_row(const Tensor& a, int m) {
    if (a.rows() != 1) throw TensorError("repeat_row: input must be [1, n]");
    if (m <= 0) throw TensorError("repeat_row: repeat count must be positive");
    const int n = a.cols();
    Tensor out = Tensor::uninitialized(m, n, track(a));
    for (int i = 0; i < m; ++i) {
        double* dst = out.data->data() + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) dst[j] = (*a.data)[j];
    }
    return finish(std::move(out), "repeat_row", {a}, [a, m, n](const Tensor& o) {
        if (!a.grad) return;
        double* g = a.grad->data();
        for (int i = 0; i < m; ++i) {
            const double* src = o.grad->data() + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) g[j] += src[j];
        }
    });
}

}  // namespace maelab::ops
