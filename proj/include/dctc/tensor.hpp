#pragma once
// Dense 64-bit tensors on a reverse-mode tape. The tape is rebuilt per
// training step (define-by-run); a Tensor is a cheap handle into it.
// Matrix products go through Eigen, everything else is plain loops.

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace dctc {

using Shape = std::vector<int>;

inline long numel(const Shape& s) {
    long n = 1;
    for (int d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        out += std::to_string(s[i]);
        if (i + 1 < s.size()) out += ",";
    }
    return out + "]";
}

struct ShapeError : std::runtime_error {
    ShapeError(const std::string& op, const std::string& detail)
        : std::runtime_error(op + ": " + detail), op_name(op) {}
    std::string op_name;
};

class Tape;

struct Tensor {
    Tape* tape = nullptr;
    int id = -1;

    const Shape& shape() const;
    const std::vector<double>& value() const;
    const std::vector<double>& grad() const;
    double scalar() const;
    long size() const { return numel(shape()); }
};

class Tape {
public:
    struct Node {
        Shape shape;
        std::vector<double> val;
        std::vector<double> grad;
        std::function<void()> back;  // empty for leaves
        bool leaf = false;
    };

    Tensor leaf(Shape shape, std::vector<double> data) {
        if (numel(shape) != static_cast<long>(data.size()))
            throw ShapeError("leaf", "shape " + shape_str(shape) + " does not match data length " +
                                         std::to_string(data.size()));
        Node n;
        n.shape = std::move(shape);
        n.val = std::move(data);
        n.grad.assign(n.val.size(), 0.0);
        n.leaf = true;
        nodes_.push_back(std::move(n));
        return Tensor{this, static_cast<int>(nodes_.size()) - 1};
    }

    Tensor scalar_leaf(double v) { return leaf({1}, {v}); }

    int emit(Shape shape) {
        Node n;
        n.shape = std::move(shape);
        n.val.assign(static_cast<std::size_t>(numel(n.shape)), 0.0);
        n.grad.assign(n.val.size(), 0.0);
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    Node& at(int id) { return nodes_[static_cast<std::size_t>(id)]; }
    const Node& at(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
    std::size_t node_count() const { return nodes_.size(); }

    // Gradients of interior nodes are recomputed per call; leaf gradients
    // accumulate across calls until reset().
    void backward(const Tensor& loss) {
        if (loss.tape != this) throw std::invalid_argument("backward: loss from another tape");
        if (numel(at(loss.id).shape) != 1)
            throw ShapeError("backward", "loss must be scalar, got " + shape_str(at(loss.id).shape));
        for (auto& n : nodes_)
            if (!n.leaf) std::fill(n.grad.begin(), n.grad.end(), 0.0);
        at(loss.id).grad[0] += 1.0;
        for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
            Node& n = nodes_[static_cast<std::size_t>(i)];
            if (n.back && has_nonzero(n.grad)) n.back();
        }
    }

    void reset() { nodes_.clear(); }

private:
    static bool has_nonzero(const std::vector<double>& g) {
        for (double x : g)
            if (x != 0.0) return true;
        return false;
    }

    std::vector<Node> nodes_;
};

inline const Shape& Tensor::shape() const { return tape->at(id).shape; }
inline const std::vector<double>& Tensor::value() const { return tape->at(id).val; }
inline const std::vector<double>& Tensor::grad() const { return tape->at(id).grad; }
inline double Tensor::scalar() const {
    if (size() != 1) throw ShapeError("scalar", "tensor has shape " + shape_str(shape()));
    return value()[0];
}

namespace detail {

inline void require_same_tape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.tape != b.tape) throw std::invalid_argument(std::string(op) + ": tensors from different tapes");
}

inline void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ShapeError(op, "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const EMat>;
using MMap = Eigen::Map<EMat>;

}  // namespace detail

// ---------------------------------------------------------------- arithmetic

inline Tensor add(const Tensor& a, const Tensor& b) {
    detail::require_same_tape("add", a, b);
    Tape& t = *a.tape;
    // Row-broadcast: [m,n] + [n]
    const bool bcast = a.shape().size() == 2 && b.shape().size() == 1 && a.shape()[1] == b.shape()[0];
    if (!bcast) detail::require_same_shape("add", a, b);
    int out = t.emit(a.shape());
    auto& o = t.at(out);
    const auto& av = t.at(a.id).val;
    const auto& bv = t.at(b.id).val;
    if (bcast) {
        const int m = a.shape()[0], n = a.shape()[1];
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < n; ++c) o.val[static_cast<std::size_t>(r) * n + c] = av[static_cast<std::size_t>(r) * n + c] + bv[static_cast<std::size_t>(c)];
        o.back = [&t, a, b, out, m, n] {
            const auto& g = t.at(out).grad;
            auto& ga = t.at(a.id).grad;
            auto& gb = t.at(b.id).grad;
            for (int r = 0; r < m; ++r)
                for (int c = 0; c < n; ++c) {
                    ga[static_cast<std::size_t>(r) * n + c] += g[static_cast<std::size_t>(r) * n + c];
                    gb[static_cast<std::size_t>(c)] += g[static_cast<std::size_t>(r) * n + c];
                }
        };
    } else {
        for (std::size_t i = 0; i < o.val.size(); ++i) o.val[i] = av[i] + bv[i];
        o.back = [&t, a, b, out] {
            const auto& g = t.at(out).grad;
            auto& ga = t.at(a.id).grad;
            auto& gb = t.at(b.id).grad;
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga[i] += g[i];
                gb[i] += g[i];
            }
        };
    }
    return Tensor{&t, out};
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    detail::require_same_tape("sub", a, b);
    detail::require_same_shape("sub", a, b);
    Tape& t = *a.tape;
    int out = t.emit(a.shape());
    auto& o = t.at(out);
    const auto& av = t.at(a.id).val;
    const auto& bv = t.at(b.id).val;
    for (std::size_t i = 0; i < o.val.size(); ++i) o.val[i] = av[i] - bv[i];
    o.back = [&t, a, b, out] {
        const auto& g = t.at(out).grad;
        auto& ga = t.at(a.id).grad;
        auto& gb = t.at(b.id).grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i];
            gb[i] -= g[i];
        }
    };
    return Tensor{&t, out};
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    detail::require_same_tape("mul", a, b);
    detail::require_same_shape("mul", a, b);
    Tape& t = *a.tape;
    int out = t.emit(a.shape());
    auto& o = t.at(out);
    const auto& av = t.at(a.id).val;
    const auto& bv = t.at(b.id).val;
    for (std::size_t i = 0; i < o.val.size(); ++i) o.val[i] = av[i] * bv[i];
    o.back = [&t, a, b, out] {
        const auto& g = t.at(out).grad;
        const auto& av2 = t.at(a.id).val;
        const auto& bv2 = t.at(b.id).val;
        auto& ga = t.at(a.id).grad;
        auto& gb = t.at(b.id).grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i] * bv2[i];
            gb[i] += g[i] * av2[i];
        }
    };
    return Tensor{&t, out};
}

inline Tensor smul(const Tensor& a, double k) {
    Tape& t = *a.tape;
    int out = t.emit(a.shape());
    auto& o = t.at(out);
    const auto& av = t.at(a.id).val;
    for (std::size_t i = 0; i < o.val.size(); ++i) o.val[i] = av[i] * k;
    o.back = [&t, a, out, k] {
        const auto& g = t.at(out).grad;
        auto& ga = t.at(a.id).grad;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * k;
    };
    return Tensor{&t, out};
}

inline Tensor add_scalar(const Tensor& a, double c) {
    Tape& t = *a.tape;
    int out = t.emit(a.shape());
    auto& o = t.at(out);
    const auto& av = t.at(a.id).val;
    for (std::size_t i = 0; i < o.val.size(); ++i) o.val[i] = av[i] + c;
    o.back = [&t, a, out] {
        const auto& g = t.at(out).grad;
        auto& ga = t.at(a.id).grad;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    };
    return Tensor{&t, out};
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    detail::require_same_tape("matmul", a, b);
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
        throw ShapeError("matmul", "cannot multiply " + shape_str(a.shape()) + " by " + shape_str(b.shape()));
    Tape& t = *a.tape;
    const int m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    int out = t.emit({m, n});
    {
        auto& o = t.at(out);
        detail::CMap A(t.at(a.id).val.data(), m, k);
        detail::CMap B(t.at(b.id).val.data(), k, n);
        detail::MMap C(o.val.data(), m, n);
        C.noalias() = A * B;
    }
    t.at(out).back = [&t, a, b, out, m, k, n] {
        detail::CMap G(t.at(out).grad.data(), m, n);
        detail::CMap A(t.at(a.id).val.data(), m, k);
        detail::CMap B(t.at(b.id).val.data(), k, n);
        detail::MMap GA(t.at(a.id).grad.data(), m, k);
        detail::MMap GB(t.at(b.id).grad.data(), k, n);
        GA.noalias() += G * B.transpose();
        GB.noalias() += A.transpose() * G;
    };
    return Tensor{&t, out};
}

// ---------------------------------------------------------------- structure

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols", "no inputs");
    Tape& t = *parts[0].tape;
    const bool mat = parts[0].shape().size() == 2;
    int rows = mat ? parts[0].shape()[0] : 1;
    int total = 0;
    std::vector<int> widths;
    for (const auto& p : parts) {
        detail::require_same_tape("concat_cols", parts[0], p);
        if (mat) {
            if (p.shape().size() != 2 || p.shape()[0] != rows)
                throw ShapeError("concat_cols", "row mismatch " + shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
            widths.push_back(p.shape()[1]);
        } else {
            if (p.shape().size() != 1)
                throw ShapeError("concat_cols", "rank mismatch " + shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
            widths.push_back(p.shape()[0]);
        }
        total += widths.back();
    }
    int out = mat ? t.emit({rows, total}) : t.emit({total});
    auto& o = t.at(out);
    int off = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const auto& pv = t.at(parts[i].id).val;
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < widths[i]; ++c)
                o.val[static_cast<std::size_t>(r) * total + off + c] = pv[static_cast<std::size_t>(r) * widths[i] + c];
        off += widths[i];
    }
    std::vector<Tensor> ps = parts;
    o.back = [&t, ps, widths, out, rows, total] {
        const auto& g = t.at(out).grad;
        int off2 = 0;
        for (std::size_t i = 0; i < ps.size(); ++i) {
            auto& pg = t.at(ps[i].id).grad;
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < widths[i]; ++c)
                    pg[static_cast<std::size_t>(r) * widths[i] + c] += g[static_cast<std::size_t>(r) * total + off2 + c];
            off2 += widths[i];
        }
    };
    return Tensor{&t, out};
}

inline Tensor slice_cols(const Tensor& a, int start, int len) {
    Tape& t = *a.tape;
    const bool mat = a.shape().size() == 2;
    const int rows = mat ? a.shape()[0] : 1;
    const int cols = mat ? a.shape()[1] : a.shape()[0];
    if (start < 0 || len <= 0 || start + len > cols)
        throw ShapeError("slice_cols", "range [" + std::to_string(start) + "," + std::to_string(start + len) +
                                           ") out of " + shape_str(a.shape()));
    int out = mat ? t.emit({rows, len}) : t.emit({len});
    auto& o = t.at(out);
    const auto& av = t.at(a.id).val;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < len; ++c)
            o.val[static_cast<std::size_t>(r) * len + c] = av[static_cast<std::size_t>(r) * cols + start + c];
    o.back = [&t, a, out, rows, cols, start, len] {
        const auto& g = t.at(out).grad;
        auto& ga = t.at(a.id).grad;
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < len; ++c)
                ga[static_cast<std::size_t>(r) * cols + start + c] += g[static_cast<std::size_t>(r) * len + c];
    };
    return Tensor{&t, out};
}

// out[r,:] = table[ids[r],:]
inline Tensor embedding_rows(const Tensor& table, const std::vector<int>& ids) {
    Tape& t = *table.tape;
    if (table.shape().size() != 2) throw ShapeError("embedding_rows", "table must be 2-d, got " + shape_str(table.shape()));
    const int v = table.shape()[0], e = table.shape()[1];
    for (int id : ids)
        if (id < 0 || id >= v)
            throw ShapeError("embedding_rows", "row id " + std::to_string(id) + " outside table " + shape_str(table.shape()));
    const int m = static_cast<int>(ids.size());
    int out = t.emit({m, e});
    auto& o = t.at(out);
    const auto& tv = t.at(table.id).val;
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < e; ++c)
            o.val[static_cast<std::size_t>(r) * e + c] = tv[static_cast<std::size_t>(ids[static_cast<std::size_t>(r)]) * e + c];
    o.back = [&t, table, ids, out, m, e] {
        const auto& g = t.at(out).grad;
        auto& tg = t.at(table.id).grad;
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < e; ++c)
                tg[static_cast<std::size_t>(ids[static_cast<std::size_t>(r)]) * e + c] += g[static_cast<std::size_t>(r) * e + c];
    };
    return Tensor{&t, out};
}

// out[r,s] = a[r, idx[s]]
inline Tensor gather_cols(const Tensor& a, const std::vector<int>& idx) {
    Tape& t = *a.tape;
    if (a.shape().size() != 2) throw ShapeError("gather_cols", "need 2-d input, got " + shape_str(a.shape()));
    const int m = a.shape()[0], k = a.shape()[1];
    for (int i : idx)
        if (i < 0 || i >= k) throw ShapeError("gather_cols", "column " + std::to_string(i) + " outside " + shape_str(a.shape()));
    const int s = static_cast<int>(idx.size());
    int out = t.emit({m, s});
    auto& o = t.at(out);
    const auto& av = t.at(a.id).val;
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < s; ++c)
            o.val[static_cast<std::size_t>(r) * s + c] = av[static_cast<std::size_t>(r) * k + idx[static_cast<std::size_t>(c)]];
    o.back = [&t, a, idx, out, m, k, s] {
        const auto& g = t.at(out).grad;
        auto& ga = t.at(a.id).grad;
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < s; ++c)
                ga[static_cast<std::size_t>(r) * k + idx[static_cast<std::size_t>(c)]] += g[static_cast<std::size_t>(r) * s + c];
    };
    return Tensor{&t, out};
}

// out[s] = v[idx[s]]
inline Tensor index_select(const Tensor& v, const std::vector<int>& idx) {
    Tape& t = *v.tape;
    if (v.shape().size() != 1) throw ShapeError("index_select", "need 1-d input, got " + shape_str(v.shape()));
    const int k = v.shape()[0];
    for (int i : idx)
        if (i < 0 || i >= k) throw ShapeError("index_select", "index " + std::to_string(i) + " outside " + shape_str(v.shape()));
    int out = t.emit({static_cast<int>(idx.size())});
    auto& o = t.at(out);
    const auto& vv = t.at(v.id).val;
    for (std::size_t c = 0; c < idx.size(); ++c) o.val[c] = vv[static_cast<std::size_t>(idx[c])];
    o.back = [&t, v, idx, out] {
        const auto& g = t.at(out).grad;
        auto& gv = t.at(v.id).grad;
        for (std::size_t c = 0; c < idx.size(); ++c) gv[static_cast<std::size_t>(idx[c])] += g[c];
    };
    return Tensor{&t, out};
}

// out[r] = a[r, ids[r]]
inline Tensor pick_cols(const Tensor& a, const std::vector<int>& ids) {
    Tape& t = *a.tape;
    if (a.shape().size() != 2) throw ShapeError("pick_cols", "need 2-d input, got " + shape_str(a.shape()));
    const int m = a.shape()[0], n = a.shape()[1];
    if (static_cast<int>(ids.size()) != m)
        throw ShapeError("pick_cols", "got " + std::to_string(ids.size()) + " ids for " + shape_str(a.shape()));
    for (int i : ids)
        if (i < 0 || i >= n) throw ShapeError("pick_cols", "column " + std::to_string(i) + " outside " + shape_str(a.shape()));
    int out = t.emit({m});
    auto& o = t.at(out);
    const auto& av = t.at(a.id).val;
    for (int r = 0; r < m; ++r) o.val[static_cast<std::size_t>(r)] = av[static_cast<std::size_t>(r) * n + ids[static_cast<std::size_t>(r)]];
    o.back = [&t, a, ids, out, m, n] {
        const auto& g = t.at(out).grad;
        auto& ga = t.at(a.id).grad;
        for (int r = 0; r < m; ++r) ga[static_cast<std::size_t>(r) * n + ids[static_cast<std::size_t>(r)]] += g[static_cast<std::size_t>(r)];
    };
    return Tensor{&t, out};
}

// out[r,c] = a[r,c] * s[r]
inline Tensor scale_rows(const Tensor& a, const Tensor& s) {
    detail::require_same_tape("scale_rows", a, s);
    Tape& t = *a.tape;
    if (a.shape().size() != 2 || s.shape().size() != 1 || s.shape()[0] != a.shape()[0])
        throw ShapeError("scale_rows", shape_str(a.shape()) + " vs scales " + shape_str(s.shape()));
    const int m = a.shape()[0], n = a.shape()[1];
    int out = t.emit(a.shape());
    auto& o = t.at(out);
    const auto& av = t.at(a.id).val;
    const auto& sv = t.at(s.id).val;
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < n; ++c) o.val[static_cast<std::size_t>(r) * n + c] = av[static_cast<std::size_t>(r) * n + c] * sv[static_cast<std::size_t>(r)];
    o.back = [&t, a, s, out, m, n] {
        const auto& g = t.at(out).grad;
        const auto& av2 = t.at(a.id).val;
        const auto& sv2 = t.at(s.id).val;
        auto& ga = t.at(a.id).grad;
        auto& gs = t.at(s.id).grad;
        for (int r = 0; r < m; ++r) {
            double acc = 0.0;
            for (int c = 0; c < n; ++c) {
                ga[static_cast<std::size_t>(r) * n + c] += g[static_cast<std::size_t>(r) * n + c] * sv2[static_cast<std::size_t>(r)];
                acc += g[static_cast<std::size_t>(r) * n + c] * av2[static_cast<std::size_t>(r) * n + c];
            }
            gs[static_cast<std::size_t>(r)] += acc;
        }
    };
    return Tensor{&t, out};
}

// ---------------------------------------------------------------- pointwise

namespace detail {

template <typename F, typename DF>
Tensor unary_op(const char* /*name*/, const Tensor& a, F f, DF df) {
    Tape& t = *a.tape;
    int out = t.emit(a.shape());
    auto& o = t.at(out);
    const auto& av = t.at(a.id).val;
    for (std::size_t i = 0; i < o.val.size(); ++i) o.val[i] = f(av[i]);
    o.back = [&t, a, out, df] {
        const auto& g = t.at(out).grad;
        const auto& av2 = t.at(a.id).val;
        const auto& ov = t.at(out).val;
        auto& ga = t.at(a.id).grad;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * df(av2[i], ov[i]);
    };
    return Tensor{&t, out};
}

}  // namespace detail

inline Tensor sigmoid(const Tensor& a) {
    return detail::unary_op(
        "sigmoid", a,
        [](double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
        [](double, double y) { return y * (1.0 - y); });
}

inline Tensor tanh_t(const Tensor& a) {
    return detail::unary_op("tanh", a, [](double x) { return std::tanh(x); },
                            [](double, double y) { return 1.0 - y * y; });
}

inline Tensor exp_t(const Tensor& a) {
    return detail::unary_op("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

inline Tensor log_t(const Tensor& a) {
    return detail::unary_op("log", a, [](double x) { return std::log(x); },
                            [](double x, double) { return 1.0 / x; });
}

inline Tensor abs_t(const Tensor& a) {
    // Subgradient 0 at the kink.
    return detail::unary_op("abs", a, [](double x) { return std::fabs(x); },
                            [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

// ---------------------------------------------------------------- softmax

namespace detail {

// Treats rank-1 input as a single row; softmax over the last axis.
inline std::pair<int, int> row_view(const Tensor& a, const char* op) {
    if (a.shape().size() == 1) return {1, a.shape()[0]};
    if (a.shape().size() == 2) return {a.shape()[0], a.shape()[1]};
    throw ShapeError(op, "need rank 1 or 2, got " + shape_str(a.shape()));
}

}  // namespace detail

inline Tensor softmax_rows(const Tensor& a) {
    Tape& t = *a.tape;
    auto [m, n] = detail::row_view(a, "softmax");
    int out = t.emit(a.shape());
    auto& o = t.at(out);
    const auto& av = t.at(a.id).val;
    for (int r = 0; r < m; ++r) {
        const std::size_t base = static_cast<std::size_t>(r) * n;
        double mx = av[base];
        for (int c = 1; c < n; ++c) mx = std::max(mx, av[base + c]);
        double z = 0.0;
        for (int c = 0; c < n; ++c) {
            o.val[base + c] = std::exp(av[base + c] - mx);
            z += o.val[base + c];
        }
        for (int c = 0; c < n; ++c) o.val[base + c] /= z;
    }
    o.back = [&t, a, out, m = m, n = n] {
        const auto& g = t.at(out).grad;
        const auto& y = t.at(out).val;
        auto& ga = t.at(a.id).grad;
        for (int r = 0; r < m; ++r) {
            const std::size_t base = static_cast<std::size_t>(r) * n;
            double dot = 0.0;
            for (int c = 0; c < n; ++c) dot += g[base + c] * y[base + c];
            for (int c = 0; c < n; ++c) ga[base + c] += y[base + c] * (g[base + c] - dot);
        }
    };
    return Tensor{&t, out};
}

inline Tensor log_softmax_rows(const Tensor& a) {
    Tape& t = *a.tape;
    auto [m, n] = detail::row_view(a, "log_softmax");
    int out = t.emit(a.shape());
    auto& o = t.at(out);
    const auto& av = t.at(a.id).val;
    for (int r = 0; r < m; ++r) {
        const std::size_t base = static_cast<std::size_t>(r) * n;
        double mx = av[base];
        for (int c = 1; c < n; ++c) mx = std::max(mx, av[base + c]);
        double z = 0.0;
        for (int c = 0; c < n; ++c) z += std::exp(av[base + c] - mx);
        const double lz = mx + std::log(z);
        for (int c = 0; c < n; ++c) o.val[base + c] = av[base + c] - lz;
    }
    o.back = [&t, a, out, m = m, n = n] {
        const auto& g = t.at(out).grad;
        const auto& y = t.at(out).val;
        auto& ga = t.at(a.id).grad;
        for (int r = 0; r < m; ++r) {
            const std::size_t base = static_cast<std::size_t>(r) * n;
            double gs = 0.0;
            for (int c = 0; c < n; ++c) gs += g[base + c];
            for (int c = 0; c < n; ++c) ga[base + c] += g[base + c] - std::exp(y[base + c]) * gs;
        }
    };
    return Tensor{&t, out};
}

// ---------------------------------------------------------------- reductions

inline Tensor sum_all(const Tensor& a) {
    Tape& t = *a.tape;
    int out = t.emit({1});
    auto& o = t.at(out);
    const auto& av = t.at(a.id).val;
    o.val[0] = std::accumulate(av.begin(), av.end(), 0.0);
    o.back = [&t, a, out] {
        const double g = t.at(out).grad[0];
        auto& ga = t.at(a.id).grad;
        for (auto& x : ga) x += g;
    };
    return Tensor{&t, out};
}

inline Tensor mean_all(const Tensor& a) { return smul(sum_all(a), 1.0 / static_cast<double>(a.size())); }

// per-row totals: [m,n] -> [m]
inline Tensor row_sums(const Tensor& a) {
    Tape& t = *a.tape;
    if (a.shape().size() != 2) throw ShapeError("row_sums", "need 2-d input, got " + shape_str(a.shape()));
    const int m = a.shape()[0], n = a.shape()[1];
    int out = t.emit({m});
    auto& o = t.at(out);
    const auto& av = t.at(a.id).val;
    for (int r = 0; r < m; ++r) {
        double s = 0.0;
        for (int c = 0; c < n; ++c) s += av[static_cast<std::size_t>(r) * n + c];
        o.val[static_cast<std::size_t>(r)] = s;
    }
    o.back = [&t, a, out, m, n] {
        const auto& g = t.at(out).grad;
        auto& ga = t.at(a.id).grad;
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < n; ++c) ga[static_cast<std::size_t>(r) * n + c] += g[static_cast<std::size_t>(r)];
    };
    return Tensor{&t, out};
}

// per-column means: [m,n] -> [n]
inline Tensor col_means(const Tensor& a) {
    Tape& t = *a.tape;
    if (a.shape().size() != 2) throw ShapeError("col_means", "need 2-d input, got " + shape_str(a.shape()));
    const int m = a.shape()[0], n = a.shape()[1];
    int out = t.emit({n});
    auto& o = t.at(out);
    const auto& av = t.at(a.id).val;
    for (int c = 0; c < n; ++c) {
        double s = 0.0;
        for (int r = 0; r < m; ++r) s += av[static_cast<std::size_t>(r) * n + c];
        o.val[static_cast<std::size_t>(c)] = s / m;
    }
    o.back = [&t, a, out, m, n] {
        const auto& g = t.at(out).grad;
        auto& ga = t.at(a.id).grad;
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < n; ++c) ga[static_cast<std::size_t>(r) * n + c] += g[static_cast<std::size_t>(c)] / m;
    };
    return Tensor{&t, out};
}

// sum of x*log(x) with the 0*log0 := 0 convention (entropy building block).
// The derivative log(x)+1 is taken as 0 at x == 0; softmax outputs never
// land there, the convention only matters for hand-built one-hot inputs.
inline Tensor xlogx_sum(const Tensor& a) {
    Tape& t = *a.tape;
    int out = t.emit({1});
    auto& o = t.at(out);
    const auto& av = t.at(a.id).val;
    double s = 0.0;
    for (double x : av)
        if (x != 0.0) s += x * std::log(x);
    o.val[0] = s;
    o.back = [&t, a, out] {
        const double g = t.at(out).grad[0];
        const auto& av2 = t.at(a.id).val;
        auto& ga = t.at(a.id).grad;
        for (std::size_t i = 0; i < av2.size(); ++i)
            if (av2[i] != 0.0) ga[i] += g * (std::log(av2[i]) + 1.0);
    };
    return Tensor{&t, out};
}

}  // namespace dctc
