#include "transmusic/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

#include "transmusic/errors.hpp"

namespace transmusic::nn {

namespace {

std::size_t shape_size(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

// Rank-1 tensors behave as a single row for row-wise ops.
void as_rows(const Shape& s, std::size_t& rows, std::size_t& cols) {
    if (s.size() == 1) {
        rows = 1;
        cols = s[0];
    } else if (s.size() == 2) {
        rows = s[0];
        cols = s[1];
    } else {
        throw ConfigError("tensors are rank-1 or rank-2");
    }
}

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
    if (a != b) throw ConfigError(std::string(op) + ": shape mismatch");
}

} // namespace

const Shape& Tensor::shape() const {
    if (!defined()) throw ConfigError("undefined tensor");
    return tape_->nodes_[id_].shape;
}

const std::vector<double>& Tensor::values() const {
    if (!defined()) throw ConfigError("undefined tensor");
    return tape_->nodes_[id_].value;
}

std::size_t Tensor::size() const { return values().size(); }

double Tensor::scalar() const {
    const auto& v = values();
    if (v.size() != 1) throw ConfigError("scalar() on a multi-element tensor");
    return v[0];
}

const Tape::Node& Tape::node(const Tensor& t) const {
    check_same_tape(t);
    return nodes_[t.id_];
}

Tape::Node& Tape::node(const Tensor& t) {
    check_same_tape(t);
    return nodes_[t.id_];
}

void Tape::check_same_tape(const Tensor& t) const {
    if (t.tape_ != this) throw ConfigError("tensor belongs to a different tape");
}

void Tape::check_finite(const std::vector<double>& values, const char* op) {
    double acc = 0.0;
    for (double v : values) acc += std::abs(v);
    if (!std::isfinite(acc))
        throw NumericError(std::string(op) + ": non-finite values");
}

Tensor Tape::push(Shape shape, std::vector<double> value, bool tracked,
                  std::function<void(Tape&)> backward) {
    if (value.size() != shape_size(shape)) throw ConfigError("value count does not match shape");
    Node n;
    n.shape = std::move(shape);
    n.value = std::move(value);
    n.tracked = tracked;
    n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Tensor(this, nodes_.size() - 1);
}

std::vector<double>& Tape::grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
    return n.grad;
}

Tensor Tape::constant(Shape shape, std::vector<double> values) {
    check_finite(values, "constant");
    return push(std::move(shape), std::move(values), false, nullptr);
}

Tensor Tape::leaf(Shape shape, std::vector<double> values) {
    check_finite(values, "leaf");
    return push(std::move(shape), std::move(values), true, nullptr);
}

Tensor Tape::scalar_constant(double v) { return constant({1}, {v}); }

Tensor Tape::matmul(Tensor a, Tensor b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    if (nb.shape.size() != 2) throw ConfigError("matmul: right side must be rank-2");
    const bool vec = na.shape.size() == 1;
    const std::size_t n = vec ? 1 : na.shape[0];
    const std::size_t k = vec ? na.shape[0] : na.shape[1];
    const std::size_t m = nb.shape[1];
    if (k != nb.shape[0]) throw ConfigError("matmul: inner dimensions differ");

    std::vector<double> out(n * m, 0.0);
    {
        const double* pa = na.value.data();
        const double* pb = nb.value.data();
        double* po = out.data();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t kk = 0; kk < k; ++kk) {
                const double aik = pa[i * k + kk];
                const double* brow = pb + kk * m;
                double* orow = po + i * m;
                for (std::size_t j = 0; j < m; ++j) orow[j] += aik * brow[j];
            }
        }
    }
    check_finite(out, "matmul");

    const bool tracked = na.tracked || nb.tracked;
    const std::size_t ia = a.id(), ib = b.id();
    Tensor result = push(vec ? Shape{m} : Shape{n, m}, std::move(out), tracked, nullptr);
    if (tracked) {
        const std::size_t self = result.id();
        nodes_[self].backward = [ia, ib, self, n, k, m](Tape& t) {
            const std::vector<double>& dc = t.nodes_[self].grad;
            const std::vector<double>& av = t.nodes_[ia].value;
            const std::vector<double>& bv = t.nodes_[ib].value;
            if (t.nodes_[ia].tracked) {
                std::vector<double>& da = t.grad_buffer(ia);
                for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        const double* drow = dc.data() + i * m;
                        const double* brow = bv.data() + kk * m;
                        double s = 0.0;
                        for (std::size_t j = 0; j < m; ++j) s += drow[j] * brow[j];
                        da[i * k + kk] += s;
                    }
                }
            }
            if (t.nodes_[ib].tracked) {
                std::vector<double>& db = t.grad_buffer(ib);
                for (std::size_t i = 0; i < n; ++i) {
                    const double* drow = dc.data() + i * m;
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        const double aik = av[i * k + kk];
                        double* brow = db.data() + kk * m;
                        for (std::size_t j = 0; j < m; ++j) brow[j] += aik * drow[j];
                    }
                }
            }
        };
    }
    return result;
}

Tensor Tape::add(Tensor a, Tensor b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    require_same_shape(na.shape, nb.shape, "add");
    std::vector<double> out(na.value.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = na.value[i] + nb.value[i];
    check_finite(out, "add");
    const bool tracked = na.tracked || nb.tracked;
    Tensor result = push(na.shape, std::move(out), tracked, nullptr);
    if (tracked) {
        const std::size_t self = result.id(), ia = a.id(), ib = b.id();
        nodes_[self].backward = [self, ia, ib](Tape& t) {
            const std::vector<double>& d = t.nodes_[self].grad;
            for (std::size_t target : {ia, ib}) {
                if (!t.nodes_[target].tracked) continue;
                std::vector<double>& g = t.grad_buffer(target);
                for (std::size_t i = 0; i < d.size(); ++i) g[i] += d[i];
            }
        };
    }
    return result;
}

Tensor Tape::subtract(Tensor a, Tensor b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    require_same_shape(na.shape, nb.shape, "subtract");
    std::vector<double> out(na.value.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = na.value[i] - nb.value[i];
    check_finite(out, "subtract");
    const bool tracked = na.tracked || nb.tracked;
    Tensor result = push(na.shape, std::move(out), tracked, nullptr);
    if (tracked) {
        const std::size_t self = result.id(), ia = a.id(), ib = b.id();
        nodes_[self].backward = [self, ia, ib](Tape& t) {
            const std::vector<double>& d = t.nodes_[self].grad;
            if (t.nodes_[ia].tracked) {
                std::vector<double>& g = t.grad_buffer(ia);
                for (std::size_t i = 0; i < d.size(); ++i) g[i] += d[i];
            }
            if (t.nodes_[ib].tracked) {
                std::vector<double>& g = t.grad_buffer(ib);
                for (std::size_t i = 0; i < d.size(); ++i) g[i] -= d[i];
            }
        };
    }
    return result;
}

Tensor Tape::add_row(Tensor x, Tensor bias) {
    const Node& nx = node(x);
    const Node& nb = node(bias);
    if (nb.shape.size() != 1) throw ConfigError("add_row: bias must be rank-1");
    std::size_t rows, cols;
    as_rows(nx.shape, rows, cols);
    if (cols != nb.shape[0]) throw ConfigError("add_row: width mismatch");
    std::vector<double> out(nx.value.size());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = nx.value[r * cols + c] + nb.value[c];
    check_finite(out, "add_row");
    const bool tracked = nx.tracked || nb.tracked;
    Tensor result = push(nx.shape, std::move(out), tracked, nullptr);
    if (tracked) {
        const std::size_t self = result.id(), ix = x.id(), ib = bias.id();
        nodes_[self].backward = [self, ix, ib, rows, cols](Tape& t) {
            const std::vector<double>& d = t.nodes_[self].grad;
            if (t.nodes_[ix].tracked) {
                std::vector<double>& g = t.grad_buffer(ix);
                for (std::size_t i = 0; i < d.size(); ++i) g[i] += d[i];
            }
            if (t.nodes_[ib].tracked) {
                std::vector<double>& g = t.grad_buffer(ib);
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < cols; ++c) g[c] += d[r * cols + c];
            }
        };
    }
    return result;
}

Tensor Tape::scale(Tensor a, double factor) {
    const Node& na = node(a);
    if (!std::isfinite(factor)) throw NumericError("scale: non-finite factor");
    std::vector<double> out(na.value.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = na.value[i] * factor;
    check_finite(out, "scale");
    Tensor result = push(na.shape, std::move(out), na.tracked, nullptr);
    if (na.tracked) {
        const std::size_t self = result.id(), ia = a.id();
        nodes_[self].backward = [self, ia, factor](Tape& t) {
            const std::vector<double>& d = t.nodes_[self].grad;
            std::vector<double>& g = t.grad_buffer(ia);
            for (std::size_t i = 0; i < d.size(); ++i) g[i] += factor * d[i];
        };
    }
    return result;
}

Tensor Tape::multiply(Tensor a, Tensor b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    require_same_shape(na.shape, nb.shape, "multiply");
    std::vector<double> out(na.value.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = na.value[i] * nb.value[i];
    check_finite(out, "multiply");
    const bool tracked = na.tracked || nb.tracked;
    Tensor result = push(na.shape, std::move(out), tracked, nullptr);
    if (tracked) {
        const std::size_t self = result.id(), ia = a.id(), ib = b.id();
        nodes_[self].backward = [self, ia, ib](Tape& t) {
            const std::vector<double>& d = t.nodes_[self].grad;
            const std::vector<double>& av = t.nodes_[ia].value;
            const std::vector<double>& bv = t.nodes_[ib].value;
            if (t.nodes_[ia].tracked) {
                std::vector<double>& g = t.grad_buffer(ia);
                for (std::size_t i = 0; i < d.size(); ++i) g[i] += d[i] * bv[i];
            }
            if (t.nodes_[ib].tracked) {
                std::vector<double>& g = t.grad_buffer(ib);
                for (std::size_t i = 0; i < d.size(); ++i) g[i] += d[i] * av[i];
            }
        };
    }
    return result;
}

Tensor Tape::transpose(Tensor a) {
    const Node& na = node(a);
    if (na.shape.size() != 2) throw ConfigError("transpose: rank-2 only");
    const std::size_t n = na.shape[0], m = na.shape[1];
    std::vector<double> out(na.value.size());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) out[j * n + i] = na.value[i * m + j];
    Tensor result = push({m, n}, std::move(out), na.tracked, nullptr);
    if (na.tracked) {
        const std::size_t self = result.id(), ia = a.id();
        nodes_[self].backward = [self, ia, n, m](Tape& t) {
            const std::vector<double>& d = t.nodes_[self].grad;
            std::vector<double>& g = t.grad_buffer(ia);
            for (std::size_t j = 0; j < m; ++j)
                for (std::size_t i = 0; i < n; ++i) g[i * m + j] += d[j * n + i];
        };
    }
    return result;
}

Tensor Tape::relu(Tensor a) {
    const Node& na = node(a);
    std::vector<double> out(na.value.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = na.value[i] > 0.0 ? na.value[i] : 0.0;
    check_finite(out, "relu");
    Tensor result = push(na.shape, std::move(out), na.tracked, nullptr);
    if (na.tracked) {
        const std::size_t self = result.id(), ia = a.id();
        nodes_[self].backward = [self, ia](Tape& t) {
            const std::vector<double>& d = t.nodes_[self].grad;
            const std::vector<double>& x = t.nodes_[ia].value;
            std::vector<double>& g = t.grad_buffer(ia);
            for (std::size_t i = 0; i < d.size(); ++i)
                if (x[i] > 0.0) g[i] += d[i];
        };
    }
    return result;
}

Tensor Tape::tanh_activation(Tensor a) {
    const Node& na = node(a);
    std::vector<double> out(na.value.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(na.value[i]);
    check_finite(out, "tanh");
    Tensor result = push(na.shape, std::move(out), na.tracked, nullptr);
    if (na.tracked) {
        const std::size_t self = result.id(), ia = a.id();
        nodes_[self].backward = [self, ia](Tape& t) {
            const std::vector<double>& d = t.nodes_[self].grad;
            const std::vector<double>& y = t.nodes_[self].value;
            std::vector<double>& g = t.grad_buffer(ia);
            for (std::size_t i = 0; i < d.size(); ++i) g[i] += d[i] * (1.0 - y[i] * y[i]);
        };
    }
    return result;
}

Tensor Tape::square(Tensor a) {
    const Node& na = node(a);
    std::vector<double> out(na.value.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = na.value[i] * na.value[i];
    check_finite(out, "square");
    Tensor result = push(na.shape, std::move(out), na.tracked, nullptr);
    if (na.tracked) {
        const std::size_t self = result.id(), ia = a.id();
        nodes_[self].backward = [self, ia](Tape& t) {
            const std::vector<double>& d = t.nodes_[self].grad;
            const std::vector<double>& x = t.nodes_[ia].value;
            std::vector<double>& g = t.grad_buffer(ia);
            for (std::size_t i = 0; i < d.size(); ++i) g[i] += 2.0 * x[i] * d[i];
        };
    }
    return result;
}

Tensor Tape::sqrt_clamped(Tensor a) {
    const Node& na = node(a);
    std::vector<double> out(na.value.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(std::max(na.value[i], 0.0));
    check_finite(out, "sqrt");
    Tensor result = push(na.shape, std::move(out), na.tracked, nullptr);
    if (na.tracked) {
        const std::size_t self = result.id(), ia = a.id();
        nodes_[self].backward = [self, ia](Tape& t) {
            const std::vector<double>& d = t.nodes_[self].grad;
            const std::vector<double>& y = t.nodes_[self].value;
            std::vector<double>& g = t.grad_buffer(ia);
            for (std::size_t i = 0; i < d.size(); ++i)
                if (y[i] > 0.0) g[i] += 0.5 * d[i] / y[i];
        };
    }
    return result;
}

Tensor Tape::log_clamped(Tensor a, double floor) {
    if (!(floor > 0.0)) throw ConfigError("log floor must be positive");
    const Node& na = node(a);
    std::vector<double> out(na.value.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(std::max(na.value[i], floor));
    check_finite(out, "log");
    Tensor result = push(na.shape, std::move(out), na.tracked, nullptr);
    if (na.tracked) {
        const std::size_t self = result.id(), ia = a.id();
        nodes_[self].backward = [self, ia, floor](Tape& t) {
            const std::vector<double>& d = t.nodes_[self].grad;
            const std::vector<double>& x = t.nodes_[ia].value;
            std::vector<double>& g = t.grad_buffer(ia);
            for (std::size_t i = 0; i < d.size(); ++i)
                if (x[i] > floor) g[i] += d[i] / x[i];
        };
    }
    return result;
}

Tensor Tape::wrap_half_turn(Tensor a) {
    const Node& na = node(a);
    const double pi = std::numbers::pi;
    std::vector<double> out(na.value.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = na.value[i] - pi * std::floor(na.value[i] / pi + 0.5);
    check_finite(out, "wrap");
    Tensor result = push(na.shape, std::move(out), na.tracked, nullptr);
    if (na.tracked) {
        const std::size_t self = result.id(), ia = a.id();
        nodes_[self].backward = [self, ia](Tape& t) {
            const std::vector<double>& d = t.nodes_[self].grad;
            std::vector<double>& g = t.grad_buffer(ia);
            for (std::size_t i = 0; i < d.size(); ++i) g[i] += d[i];
        };
    }
    return result;
}

Tensor Tape::slice_columns(Tensor a, std::size_t start, std::size_t len) {
    const Node& na = node(a);
    std::size_t rows, cols;
    as_rows(na.shape, rows, cols);
    if (len == 0 || start + len > cols) throw ConfigError("slice out of range");
    std::vector<double> out(rows * len);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < len; ++c) out[r * len + c] = na.value[r * cols + start + c];
    Shape shape = na.shape.size() == 1 ? Shape{len} : Shape{rows, len};
    Tensor result = push(std::move(shape), std::move(out), na.tracked, nullptr);
    if (na.tracked) {
        const std::size_t self = result.id(), ia = a.id();
        nodes_[self].backward = [self, ia, start, len, rows, cols](Tape& t) {
            const std::vector<double>& d = t.nodes_[self].grad;
            std::vector<double>& g = t.grad_buffer(ia);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < len; ++c) g[r * cols + start + c] += d[r * len + c];
        };
    }
    return result;
}

Tensor Tape::concat_columns(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ConfigError("concat of nothing");
    std::size_t rows = 0, total = 0;
    bool rank1 = false;
    bool tracked = false;
    for (std::size_t p = 0; p < parts.size(); ++p) {
        const Node& np = node(parts[p]);
        std::size_t r, c;
        as_rows(np.shape, r, c);
        if (p == 0) {
            rows = r;
            rank1 = np.shape.size() == 1;
        } else if (r != rows || (np.shape.size() == 1) != rank1) {
            throw ConfigError("concat: row mismatch");
        }
        total += c;
        tracked = tracked || np.tracked;
    }
    std::vector<double> out(rows * total);
    std::size_t offset = 0;
    for (const Tensor& p : parts) {
        const Node& np = node(p);
        std::size_t r, c;
        as_rows(np.shape, r, c);
        for (std::size_t rr = 0; rr < rows; ++rr)
            for (std::size_t cc = 0; cc < c; ++cc) out[rr * total + offset + cc] = np.value[rr * c + cc];
        offset += c;
    }
    Shape shape = rank1 ? Shape{total} : Shape{rows, total};
    Tensor result = push(std::move(shape), std::move(out), tracked, nullptr);
    if (tracked) {
        std::vector<std::size_t> ids;
        std::vector<std::size_t> widths;
        for (const Tensor& p : parts) {
            ids.push_back(p.id());
            std::size_t r, c;
            as_rows(node(p).shape, r, c);
            widths.push_back(c);
        }
        const std::size_t self = result.id();
        nodes_[self].backward = [self, ids, widths, rows, total](Tape& t) {
            const std::vector<double>& d = t.nodes_[self].grad;
            std::size_t offset = 0;
            for (std::size_t p = 0; p < ids.size(); ++p) {
                const std::size_t c = widths[p];
                if (t.nodes_[ids[p]].tracked) {
                    std::vector<double>& g = t.grad_buffer(ids[p]);
                    for (std::size_t rr = 0; rr < rows; ++rr)
                        for (std::size_t cc = 0; cc < c; ++cc) g[rr * c + cc] += d[rr * total + offset + cc];
                }
                offset += c;
            }
        };
    }
    return result;
}

Tensor Tape::gather(Tensor a, std::vector<std::size_t> indexes) {
    const Node& na = node(a);
    if (na.shape.size() != 1) throw ConfigError("gather: rank-1 only");
    std::vector<double> out(indexes.size());
    for (std::size_t i = 0; i < indexes.size(); ++i) {
        if (indexes[i] >= na.value.size()) throw ConfigError("gather index out of range");
        out[i] = na.value[indexes[i]];
    }
    Tensor result = push({indexes.size()}, std::move(out), na.tracked, nullptr);
    if (na.tracked) {
        const std::size_t self = result.id(), ia = a.id();
        nodes_[self].backward = [self, ia, idx = std::move(indexes)](Tape& t) {
            const std::vector<double>& d = t.nodes_[self].grad;
            std::vector<double>& g = t.grad_buffer(ia);
            for (std::size_t i = 0; i < idx.size(); ++i) g[idx[i]] += d[i];
        };
    }
    return result;
}

Tensor Tape::select(Tensor a, std::size_t index) {
    const Node& na = node(a);
    if (na.shape.size() != 1) throw ConfigError("select: rank-1 only");
    if (index >= na.value.size()) throw ConfigError("select index out of range");
    Tensor result = push({1}, {na.value[index]}, na.tracked, nullptr);
    if (na.tracked) {
        const std::size_t self = result.id(), ia = a.id();
        nodes_[self].backward = [self, ia, index](Tape& t) {
            t.grad_buffer(ia)[index] += t.nodes_[self].grad[0];
        };
    }
    return result;
}

Tensor Tape::reshape(Tensor a, Shape shape) {
    const Node& na = node(a);
    if (shape_size(shape) != na.value.size()) throw ConfigError("reshape changes element count");
    Tensor result = push(std::move(shape), na.value, na.tracked, nullptr);
    if (na.tracked) {
        const std::size_t self = result.id(), ia = a.id();
        nodes_[self].backward = [self, ia](Tape& t) {
            const std::vector<double>& d = t.nodes_[self].grad;
            std::vector<double>& g = t.grad_buffer(ia);
            for (std::size_t i = 0; i < d.size(); ++i) g[i] += d[i];
        };
    }
    return result;
}

Tensor Tape::mean_rows(Tensor a) {
    const Node& na = node(a);
    if (na.shape.size() != 2) throw ConfigError("mean_rows: rank-2 only");
    const std::size_t n = na.shape[0], m = na.shape[1];
    if (n == 0) throw ConfigError("mean_rows: empty input");
    std::vector<double> out(m, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) out[j] += na.value[i * m + j];
    const double inv = 1.0 / static_cast<double>(n);
    for (double& v : out) v *= inv;
    check_finite(out, "mean_rows");
    Tensor result = push({m}, std::move(out), na.tracked, nullptr);
    if (na.tracked) {
        const std::size_t self = result.id(), ia = a.id();
        nodes_[self].backward = [self, ia, n, m, inv](Tape& t) {
            const std::vector<double>& d = t.nodes_[self].grad;
            std::vector<double>& g = t.grad_buffer(ia);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j) g[i * m + j] += d[j] * inv;
        };
    }
    return result;
}

Tensor Tape::mean_all(Tensor a) {
    const Node& na = node(a);
    if (na.value.empty()) throw ConfigError("mean of nothing");
    double s = 0.0;
    for (double v : na.value) s += v;
    const double inv = 1.0 / static_cast<double>(na.value.size());
    const double mean = s * inv;
    if (!std::isfinite(mean)) throw NumericError("mean_all: non-finite");
    Tensor result = push({1}, {mean}, na.tracked, nullptr);
    if (na.tracked) {
        const std::size_t self = result.id(), ia = a.id();
        nodes_[self].backward = [self, ia, inv](Tape& t) {
            const double d = t.nodes_[self].grad[0];
            std::vector<double>& g = t.grad_buffer(ia);
            for (double& v : g) v += d * inv;
        };
    }
    return result;
}

Tensor Tape::sum_all(Tensor a) {
    const Node& na = node(a);
    double s = 0.0;
    for (double v : na.value) s += v;
    if (!std::isfinite(s)) throw NumericError("sum_all: non-finite");
    Tensor result = push({1}, {s}, na.tracked, nullptr);
    if (na.tracked) {
        const std::size_t self = result.id(), ia = a.id();
        nodes_[self].backward = [self, ia](Tape& t) {
            const double d = t.nodes_[self].grad[0];
            std::vector<double>& g = t.grad_buffer(ia);
            for (double& v : g) v += d;
        };
    }
    return result;
}

Tensor Tape::softmax_rows(Tensor a) {
    const Node& na = node(a);
    std::size_t rows, cols;
    as_rows(na.shape, rows, cols);
    if (cols == 0) throw ConfigError("softmax: empty rows");
    std::vector<double> out(na.value.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = na.value.data() + r * cols;
        double* y = out.data() + r * cols;
        double top = x[0];
        for (std::size_t c = 1; c < cols; ++c) top = std::max(top, x[c]);
        double z = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            y[c] = std::exp(x[c] - top);
            z += y[c];
        }
        const double inv = 1.0 / z;
        for (std::size_t c = 0; c < cols; ++c) y[c] *= inv;
    }
    check_finite(out, "softmax");
    Tensor result = push(na.shape, std::move(out), na.tracked, nullptr);
    if (na.tracked) {
        const std::size_t self = result.id(), ia = a.id();
        nodes_[self].backward = [self, ia, rows, cols](Tape& t) {
            const std::vector<double>& d = t.nodes_[self].grad;
            const std::vector<double>& y = t.nodes_[self].value;
            std::vector<double>& g = t.grad_buffer(ia);
            for (std::size_t r = 0; r < rows; ++r) {
                const double* dr = d.data() + r * cols;
                const double* yr = y.data() + r * cols;
                double dot = 0.0;
                for (std::size_t c = 0; c < cols; ++c) dot += dr[c] * yr[c];
                double* gr = g.data() + r * cols;
                for (std::size_t c = 0; c < cols; ++c) gr[c] += yr[c] * (dr[c] - dot);
            }
        };
    }
    return result;
}

Tensor Tape::layer_norm(Tensor x, Tensor gain, Tensor bias) {
    constexpr double kEps = 1e-5;
    const Node& nx = node(x);
    const Node& ng = node(gain);
    const Node& nb = node(bias);
    if (ng.shape.size() != 1 || nb.shape.size() != 1) throw ConfigError("layer_norm: rank-1 gain/bias");
    std::size_t rows, cols;
    as_rows(nx.shape, rows, cols);
    if (ng.shape[0] != cols || nb.shape[0] != cols) throw ConfigError("layer_norm: width mismatch");

    std::vector<double> out(nx.value.size());
    auto hat = std::make_shared<std::vector<double>>(nx.value.size());
    auto inv_std = std::make_shared<std::vector<double>>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = nx.value.data() + r * cols;
        double mu = 0.0;
        for (std::size_t c = 0; c < cols; ++c) mu += xr[c];
        mu /= static_cast<double>(cols);
        double var = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            const double dv = xr[c] - mu;
            var += dv * dv;
        }
        var /= static_cast<double>(cols);
        const double inv = 1.0 / std::sqrt(var + kEps);
        (*inv_std)[r] = inv;
        double* hr = hat->data() + r * cols;
        double* yr = out.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) {
            hr[c] = (xr[c] - mu) * inv;
            yr[c] = ng.value[c] * hr[c] + nb.value[c];
        }
    }
    check_finite(out, "layer_norm");

    const bool tracked = nx.tracked || ng.tracked || nb.tracked;
    Tensor result = push(nx.shape, std::move(out), tracked, nullptr);
    if (tracked) {
        const std::size_t self = result.id(), ix = x.id(), ig = gain.id(), ib = bias.id();
        nodes_[self].backward = [self, ix, ig, ib, rows, cols, hat, inv_std](Tape& t) {
            const std::vector<double>& d = t.nodes_[self].grad;
            const std::vector<double>& gv = t.nodes_[ig].value;
            if (t.nodes_[ig].tracked) {
                std::vector<double>& gg = t.grad_buffer(ig);
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < cols; ++c) gg[c] += d[r * cols + c] * (*hat)[r * cols + c];
            }
            if (t.nodes_[ib].tracked) {
                std::vector<double>& gb = t.grad_buffer(ib);
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < cols; ++c) gb[c] += d[r * cols + c];
            }
            if (t.nodes_[ix].tracked) {
                std::vector<double>& gx = t.grad_buffer(ix);
                const double invn = 1.0 / static_cast<double>(cols);
                for (std::size_t r = 0; r < rows; ++r) {
                    const double* dr = d.data() + r * cols;
                    const double* hr = hat->data() + r * cols;
                    double sum_gd = 0.0, sum_gdh = 0.0;
                    for (std::size_t c = 0; c < cols; ++c) {
                        const double gd = gv[c] * dr[c];
                        sum_gd += gd;
                        sum_gdh += gd * hr[c];
                    }
                    const double inv = (*inv_std)[r];
                    double* gr = gx.data() + r * cols;
                    for (std::size_t c = 0; c < cols; ++c) {
                        const double gd = gv[c] * dr[c];
                        gr[c] += inv * (gd - invn * sum_gd - hr[c] * invn * sum_gdh);
                    }
                }
            }
        };
    }
    return result;
}

Tensor Tape::normalize_by_max(Tensor a) {
    const Node& na = node(a);
    if (na.value.empty()) throw ConfigError("normalize_by_max: empty input");
    std::size_t top = 0;
    for (std::size_t i = 1; i < na.value.size(); ++i)
        if (na.value[i] > na.value[top]) top = i;
    const double peak = na.value[top];
    if (!(peak > 0.0)) throw NumericError("normalize_by_max needs a positive maximum");
    const double inv = 1.0 / peak;
    std::vector<double> out(na.value.size());
    // True division keeps the peak at exactly one.
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = na.value[i] / peak;
    check_finite(out, "normalize_by_max");
    Tensor result = push(na.shape, std::move(out), na.tracked, nullptr);
    if (na.tracked) {
        const std::size_t self = result.id(), ia = a.id();
        nodes_[self].backward = [self, ia, top, inv](Tape& t) {
            const std::vector<double>& d = t.nodes_[self].grad;
            const std::vector<double>& y = t.nodes_[self].value;
            std::vector<double>& g = t.grad_buffer(ia);
            double dot = 0.0;
            for (std::size_t i = 0; i < d.size(); ++i) {
                g[i] += d[i] * inv;
                dot += d[i] * y[i];
            }
            g[top] -= inv * dot;
        };
    }
    return result;
}

Tensor Tape::stop_gradient(Tensor a) {
    const Node& na = node(a);
    return push(na.shape, na.value, false, nullptr);
}

Tensor Tape::subspace_spectrum(Tensor subspace_vec, std::shared_ptr<const ComplexMatrix> steering,
                               double floor) {
    if (!steering) throw ConfigError("subspace_spectrum: missing steering table");
    if (!(floor > 0.0)) throw ConfigError("subspace_spectrum: floor must be positive");
    const Node& ne = node(subspace_vec);
    const std::size_t m = steering->cols();
    const std::size_t grid = steering->rows();
    if (ne.shape.size() != 1 || ne.shape[0] != 2 * m * m)
        throw ConfigError("subspace_spectrum: input must hold 2*M*M values");

    const std::vector<double>& e = ne.value;
    const std::size_t mm = m * m;
    // w[g, k] = En(:, k)^H a(grid g); saved for the backward pass.
    auto w = std::make_shared<std::vector<double>>(2 * grid * m);
    std::vector<double> out(grid);
    for (std::size_t g = 0; g < grid; ++g) {
        double denom = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            double wr = 0.0, wi = 0.0;
            const double* er = e.data() + k * m;
            const double* ei = e.data() + mm + k * m;
            for (std::size_t i = 0; i < m; ++i) {
                const cdouble a = (*steering)(g, i);
                wr += er[i] * a.real() + ei[i] * a.imag();
                wi += er[i] * a.imag() - ei[i] * a.real();
            }
            (*w)[2 * (g * m + k)] = wr;
            (*w)[2 * (g * m + k) + 1] = wi;
            denom += wr * wr + wi * wi;
        }
        out[g] = 1.0 / (denom + floor);
    }
    check_finite(out, "subspace_spectrum");

    Tensor result = push({grid}, std::move(out), ne.tracked, nullptr);
    if (ne.tracked) {
        const std::size_t self = result.id(), ie = subspace_vec.id();
        nodes_[self].backward = [self, ie, steering, w, m, mm, grid](Tape& t) {
            const std::vector<double>& d = t.nodes_[self].grad;
            const std::vector<double>& y = t.nodes_[self].value;
            std::vector<double>& g = t.grad_buffer(ie);
            for (std::size_t gi = 0; gi < grid; ++gi) {
                // y = 1/(s + floor), so ds = -d * y^2
                const double ds = -d[gi] * y[gi] * y[gi];
                if (ds == 0.0) continue;
                for (std::size_t k = 0; k < m; ++k) {
                    const double wr = (*w)[2 * (gi * m + k)];
                    const double wi = (*w)[2 * (gi * m + k) + 1];
                    double* gr = g.data() + k * m;
                    double* gim = g.data() + mm + k * m;
                    for (std::size_t i = 0; i < m; ++i) {
                        const cdouble a = (*steering)(gi, i);
                        // s = |w|^2 with w linear in the entries:
                        // d s / d re = 2 Re(conj(w) a), d s / d im = 2 Im(conj(w) a)
                        gr[i] += ds * 2.0 * (wr * a.real() + wi * a.imag());
                        gim[i] += ds * 2.0 * (wr * a.imag() - wi * a.real());
                    }
                }
            }
        };
    }
    return result;
}

void Tape::backward(Tensor loss) {
    const Node& nl = node(loss);
    if (nl.value.size() != 1) throw ConfigError("backward: loss must be a single element");
    grad_buffer(loss.id())[0] += 1.0;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.grad.empty() && n.backward) n.backward(*this);
    }
    for (const Node& n : nodes_) {
        if (n.grad.empty()) continue;
        double acc = 0.0;
        for (double v : n.grad) acc += std::abs(v);
        if (!std::isfinite(acc)) throw NumericError("backward produced non-finite gradients");
    }
}

const std::vector<double>& Tape::grad(Tensor t) const {
    return node(t).grad;
}

} // namespace transmusic::nn
