#include "mustang/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <unordered_set>

namespace mustang {

namespace {

std::uint64_t g_flops = 0;
bool g_flops_on = false;

inline void count_flops(std::uint64_t n) {
    if (g_flops_on) g_flops += n;
}

std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0) throw ShapeError("negative dimension in shape");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

using NodePtr = std::shared_ptr<detail::Node>;

NodePtr make_node(std::vector<int> shape, const char* op) {
    auto n = std::make_shared<detail::Node>();
    n->shape = std::move(shape);
    n->data.assign(shape_numel(n->shape), 0.0);
    n->op = op;
    return n;
}

Value make_result(NodePtr out, std::vector<NodePtr> inputs,
                  std::function<void(detail::Node&)> backward_fn) {
    bool needs = false;
    for (const auto& in : inputs)
        needs = needs || in->requires_grad || in->backward_fn;
    out->inputs = std::move(inputs);
    if (needs) out->requires_grad = true;
    out->backward_fn = std::move(backward_fn);
    return Value(std::move(out));
}

// C[m,n] += A[m,k] * B[k,n]
void mm_nn(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<std::size_t>(i) * k;
        double* ci = c + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double aip = ai[p];
            const double* bp = b + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

// C[m,k] += A[m,n] * B[k,n]^T
void mm_nt(const double* a, const double* b, double* c, int m, int n, int k) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<std::size_t>(i) * n;
        double* ci = c + static_cast<std::size_t>(i) * k;
        for (int j = 0; j < k; ++j) {
            const double* bj = b + static_cast<std::size_t>(j) * n;
            double acc = 0.0;
            for (int p = 0; p < n; ++p) acc += ai[p] * bj[p];
            ci[j] += acc;
        }
    }
}

// C[k,n] += A[m,k]^T * B[m,n]
void mm_tn(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<std::size_t>(i) * k;
        const double* bi = b + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < k; ++j) {
            const double aij = ai[j];
            if (aij == 0.0) continue;
            double* cj = c + static_cast<std::size_t>(j) * n;
            for (int p = 0; p < n; ++p) cj[p] += aij * bi[p];
        }
    }
}

void check_2d(const Value& v, const char* who) {
    if (v.shape().size() != 2)
        throw ShapeError(std::string(who) + ": expected 2-d value, got " +
                         shape_str(v.shape()));
}

}  // namespace

void SegmentIndex::validate(std::size_t expected_rows) const {
    if (segment_of.size() != expected_rows)
        throw ShapeError("segment index covers " +
                         std::to_string(segment_of.size()) + " rows, expected " +
                         std::to_string(expected_rows));
    for (int s : segment_of)
        if (s < 0 || s >= num_segments)
            throw ShapeError("segment id " + std::to_string(s) +
                             " out of range [0," + std::to_string(num_segments) + ")");
}

Value Value::zeros(std::vector<int> shape) {
    return Value(make_node(std::move(shape), "zeros"));
}

Value Value::full(std::vector<int> shape, double fill) {
    auto n = make_node(std::move(shape), "full");
    std::fill(n->data.begin(), n->data.end(), fill);
    return Value(std::move(n));
}

Value Value::from_data(std::vector<int> shape, std::vector<double> data) {
    auto n = make_node(std::move(shape), "leaf");
    if (n->data.size() != data.size())
        throw ShapeError("data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(n->shape));
    n->data = std::move(data);
    return Value(std::move(n));
}

Value Value::scalar(double v) { return from_data({1}, {v}); }

double Value::item() const {
    if (numel() != 1)
        throw ContractError("item(): value has " + std::to_string(numel()) +
                            " elements, expected 1");
    return node_->data[0];
}

void Value::backward() const {
    if (!node_) throw ContractError("backward on undefined value");
    if (numel() != 1)
        throw ContractError("backward requires a scalar loss, got shape " +
                            shape_str(shape()));

    // Iterative post-order DFS; child visit order is fixed by graph
    // construction, so the traversal is deterministic.
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->inputs.size()) {
            detail::Node* child = n->inputs[next++].get();
            if (seen.insert(child).second) stack.emplace_back(child, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    node_->ensure_grad();
    node_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* n = *it;
        if (n->backward_fn) n->backward_fn(*n);
    }
}

Value matmul(const Value& a, const Value& b) {
    check_2d(a, "matmul");
    check_2d(b, "matmul");
    const int m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k)
        throw ShapeError("matmul: inner dimensions disagree, " +
                         shape_str(a.shape()) + " * " + shape_str(b.shape()));
    auto out = make_node({m, n}, "matmul");
    mm_nn(a.data().data(), b.data().data(), out->data.data(), m, k, n);
    count_flops(2ull * m * k * n);
    auto an = a.node(), bn = b.node();
    return make_result(std::move(out), {an, bn}, [an, bn, m, k, n](detail::Node& o) {
        an->ensure_grad();
        bn->ensure_grad();
        mm_nt(o.grad.data(), bn->data.data(), an->grad.data(), m, n, k);
        mm_tn(an->data.data(), o.grad.data(), bn->grad.data(), m, k, n);
    });
}

Value add(const Value& a, const Value& b) {
    if (a.shape() != b.shape())
        throw ShapeError("add: shapes disagree, " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    auto out = make_node(a.shape(), "add");
    for (std::size_t i = 0; i < out->data.size(); ++i)
        out->data[i] = a.data()[i] + b.data()[i];
    count_flops(out->data.size());
    auto an = a.node(), bn = b.node();
    return make_result(std::move(out), {an, bn}, [an, bn](detail::Node& o) {
        an->ensure_grad();
        bn->ensure_grad();
        for (std::size_t i = 0; i < o.grad.size(); ++i) {
            an->grad[i] += o.grad[i];
            bn->grad[i] += o.grad[i];
        }
    });
}

Value sub(const Value& a, const Value& b) {
    if (a.shape() != b.shape())
        throw ShapeError("sub: shapes disagree, " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    auto out = make_node(a.shape(), "sub");
    for (std::size_t i = 0; i < out->data.size(); ++i)
        out->data[i] = a.data()[i] - b.data()[i];
    count_flops(out->data.size());
    auto an = a.node(), bn = b.node();
    return make_result(std::move(out), {an, bn}, [an, bn](detail::Node& o) {
        an->ensure_grad();
        bn->ensure_grad();
        for (std::size_t i = 0; i < o.grad.size(); ++i) {
            an->grad[i] += o.grad[i];
            bn->grad[i] -= o.grad[i];
        }
    });
}

Value mul(const Value& a, const Value& b) {
    if (a.shape() != b.shape())
        throw ShapeError("mul: shapes disagree, " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    auto out = make_node(a.shape(), "mul");
    for (std::size_t i = 0; i < out->data.size(); ++i)
        out->data[i] = a.data()[i] * b.data()[i];
    count_flops(out->data.size());
    auto an = a.node(), bn = b.node();
    return make_result(std::move(out), {an, bn}, [an, bn](detail::Node& o) {
        an->ensure_grad();
        bn->ensure_grad();
        for (std::size_t i = 0; i < o.grad.size(); ++i) {
            an->grad[i] += o.grad[i] * bn->data[i];
            bn->grad[i] += o.grad[i] * an->data[i];
        }
    });
}

Value add_row_bias(const Value& x, const Value& b) {
    check_2d(x, "add_row_bias");
    if (b.shape().size() != 1 || b.shape()[0] != x.cols())
        throw ShapeError("add_row_bias: bias " + shape_str(b.shape()) +
                         " does not match " + shape_str(x.shape()));
    const int n = x.rows(), d = x.cols();
    auto out = make_node({n, d}, "add_row_bias");
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j)
            out->data[i * d + j] = x.data()[i * d + j] + b.data()[j];
    count_flops(out->data.size());
    auto xn = x.node(), bn = b.node();
    return make_result(std::move(out), {xn, bn}, [xn, bn, n, d](detail::Node& o) {
        xn->ensure_grad();
        bn->ensure_grad();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) {
                xn->grad[i * d + j] += o.grad[i * d + j];
                bn->grad[j] += o.grad[i * d + j];
            }
    });
}

Value scale(const Value& x, double c) {
    auto out = make_node(x.shape(), "scale");
    for (std::size_t i = 0; i < out->data.size(); ++i)
        out->data[i] = x.data()[i] * c;
    count_flops(out->data.size());
    auto xn = x.node();
    return make_result(std::move(out), {xn}, [xn, c](detail::Node& o) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < o.grad.size(); ++i)
            xn->grad[i] += o.grad[i] * c;
    });
}

Value row_scale(const Value& x, const Value& s) {
    check_2d(x, "row_scale");
    const int n = x.rows(), d = x.cols();
    if (static_cast<int>(s.numel()) != n)
        throw ShapeError("row_scale: scale " + shape_str(s.shape()) +
                         " does not match rows of " + shape_str(x.shape()));
    auto out = make_node({n, d}, "row_scale");
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j)
            out->data[i * d + j] = x.data()[i * d + j] * s.data()[i];
    count_flops(out->data.size());
    auto xn = x.node(), sn = s.node();
    return make_result(std::move(out), {xn, sn}, [xn, sn, n, d](detail::Node& o) {
        xn->ensure_grad();
        sn->ensure_grad();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) {
                xn->grad[i * d + j] += o.grad[i * d + j] * sn->data[i];
                sn->grad[i] += o.grad[i * d + j] * xn->data[i * d + j];
            }
    });
}

Value concat(const std::vector<Value>& parts, int axis) {
    if (parts.empty()) throw ContractError("concat: no parts");
    const auto& first = parts.front().shape();
    if (first.size() == 1 && axis != 0)
        throw ShapeError("concat: 1-d values support axis 0 only");
    if (first.size() == 2 && axis != 0 && axis != 1)
        throw ShapeError("concat: axis must be 0 or 1 for 2-d values");
    if (first.size() > 2) throw ShapeError("concat: only 1-d and 2-d supported");

    std::vector<int> out_shape = first;
    for (std::size_t p = 1; p < parts.size(); ++p) {
        const auto& s = parts[p].shape();
        if (s.size() != first.size())
            throw ShapeError("concat: rank mismatch between parts");
        for (std::size_t ax = 0; ax < s.size(); ++ax)
            if (static_cast<int>(ax) != axis && s[ax] != first[ax])
                throw ShapeError("concat: non-concat dimension mismatch, " +
                                 shape_str(first) + " vs " + shape_str(s));
        out_shape[axis] += s[axis];
    }

    auto out = make_node(out_shape, "concat");
    std::vector<NodePtr> inputs;
    inputs.reserve(parts.size());
    for (const auto& p : parts) inputs.push_back(p.node());

    if (first.size() == 1 || axis == 0) {
        std::size_t off = 0;
        for (const auto& in : inputs) {
            std::copy(in->data.begin(), in->data.end(), out->data.begin() + off);
            off += in->data.size();
        }
        return make_result(std::move(out), std::move(inputs), [](detail::Node& o) {
            std::size_t off = 0;
            for (auto& in : o.inputs) {
                in->ensure_grad();
                for (std::size_t i = 0; i < in->data.size(); ++i)
                    in->grad[i] += o.grad[off + i];
                off += in->data.size();
            }
        });
    }

    // axis 1: interleave rows
    const int n = first[0], total = out_shape[1];
    int col_off = 0;
    for (const auto& in : inputs) {
        const int d = in->shape[1];
        for (int i = 0; i < n; ++i)
            std::copy(in->data.begin() + static_cast<std::size_t>(i) * d,
                      in->data.begin() + static_cast<std::size_t>(i + 1) * d,
                      out->data.begin() + static_cast<std::size_t>(i) * total + col_off);
        col_off += d;
    }
    return make_result(std::move(out), std::move(inputs), [n, total](detail::Node& o) {
        int col_off = 0;
        for (auto& in : o.inputs) {
            in->ensure_grad();
            const int d = in->shape[1];
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < d; ++j)
                    in->grad[i * d + j] +=
                        o.grad[static_cast<std::size_t>(i) * total + col_off + j];
            col_off += d;
        }
    });
}

Value activation(const Value& x, Activation kind, double slope) {
    auto out = make_node(x.shape(), "activation");
    const auto& xd = x.data();
    for (std::size_t i = 0; i < xd.size(); ++i) {
        const double v = xd[i];
        switch (kind) {
            case Activation::LeakyRelu: out->data[i] = v >= 0.0 ? v : slope * v; break;
            case Activation::Relu: out->data[i] = v >= 0.0 ? v : 0.0; break;
            case Activation::Tanh: out->data[i] = std::tanh(v); break;
            case Activation::Elu: out->data[i] = v >= 0.0 ? v : std::expm1(v); break;
            case Activation::Sigmoid: out->data[i] = 1.0 / (1.0 + std::exp(-v)); break;
        }
    }
    count_flops(out->data.size());
    auto xn = x.node();
    return make_result(std::move(out), {xn}, [xn, kind, slope](detail::Node& o) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < o.grad.size(); ++i) {
            const double v = xn->data[i];
            const double y = o.data[i];
            double d = 0.0;
            switch (kind) {
                case Activation::LeakyRelu: d = v >= 0.0 ? 1.0 : slope; break;
                case Activation::Relu: d = v >= 0.0 ? 1.0 : 0.0; break;
                case Activation::Tanh: d = 1.0 - y * y; break;
                case Activation::Elu: d = v >= 0.0 ? 1.0 : y + 1.0; break;
                case Activation::Sigmoid: d = y * (1.0 - y); break;
            }
            xn->grad[i] += o.grad[i] * d;
        }
    });
}

Value reduce_mean(const Value& x) {
    check_2d(x, "reduce_mean");
    const int n = x.rows(), d = x.cols();
    if (n == 0) throw ContractError("reduce_mean on an empty graph (0 rows)");
    auto out = make_node({d}, "reduce_mean");
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) out->data[j] += x.data()[i * d + j];
    for (int j = 0; j < d; ++j) out->data[j] /= n;
    count_flops(x.numel() + d);
    auto xn = x.node();
    return make_result(std::move(out), {xn}, [xn, n, d](detail::Node& o) {
        xn->ensure_grad();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) xn->grad[i * d + j] += o.grad[j] / n;
    });
}

Value reduce_max(const Value& x) {
    check_2d(x, "reduce_max");
    const int n = x.rows(), d = x.cols();
    if (n == 0) throw ContractError("reduce_max on an empty graph (0 rows)");
    auto out = make_node({d}, "reduce_max");
    auto argmax = std::make_shared<std::vector<int>>(d, 0);
    for (int j = 0; j < d; ++j) {
        double best = x.data()[j];
        int best_i = 0;
        for (int i = 1; i < n; ++i) {
            const double v = x.data()[i * d + j];
            if (v > best) {  // strict: ties keep the lowest row index
                best = v;
                best_i = i;
            }
        }
        out->data[j] = best;
        (*argmax)[j] = best_i;
    }
    auto xn = x.node();
    return make_result(std::move(out), {xn}, [xn, argmax, d](detail::Node& o) {
        xn->ensure_grad();
        for (int j = 0; j < d; ++j)
            xn->grad[(*argmax)[j] * d + j] += o.grad[j];
    });
}

Value reduce_sum_all(const Value& x) {
    auto out = make_node({1}, "reduce_sum_all");
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    out->data[0] = acc;
    count_flops(x.numel());
    auto xn = x.node();
    return make_result(std::move(out), {xn}, [xn](detail::Node& o) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += o.grad[0];
    });
}

Value gather_rows(const Value& x, const std::vector<int>& rows) {
    if (x.shape().empty()) throw ShapeError("gather_rows: scalar input");
    const int n = x.shape()[0];
    const std::size_t width = n == 0 ? 0 : x.numel() / n;
    for (int r : rows)
        if (r < 0 || r >= n)
            throw ShapeError("gather_rows: index " + std::to_string(r) +
                             " out of range [0," + std::to_string(n) + ")");
    std::vector<int> out_shape = x.shape();
    out_shape[0] = static_cast<int>(rows.size());
    auto out = make_node(out_shape, "gather_rows");
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy(x.data().begin() + rows[i] * width,
                  x.data().begin() + (rows[i] + 1) * width,
                  out->data.begin() + i * width);
    auto xn = x.node();
    auto idx = std::make_shared<std::vector<int>>(rows);
    return make_result(std::move(out), {xn}, [xn, idx, width](detail::Node& o) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < idx->size(); ++i)
            for (std::size_t j = 0; j < width; ++j)
                xn->grad[(*idx)[i] * width + j] += o.grad[i * width + j];
    });
}

Value reshape(const Value& x, std::vector<int> shape) {
    auto out = make_node(std::move(shape), "reshape");
    if (out->data.size() != x.numel())
        throw ShapeError("reshape: cannot view " + shape_str(x.shape()) +
                         " as " + shape_str(out->shape));
    out->data = x.data();
    auto xn = x.node();
    return make_result(std::move(out), {xn}, [xn](detail::Node& o) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < o.grad.size(); ++i) xn->grad[i] += o.grad[i];
    });
}

Value segment_softmax(const Value& scores, const SegmentIndex& seg) {
    if (scores.shape().size() != 1)
        throw ShapeError("segment_softmax: expected 1-d scores, got " +
                         shape_str(scores.shape()));
    seg.validate(scores.numel());
    const int e = static_cast<int>(scores.numel());
    const int s = seg.num_segments;

    auto out = make_node({e}, "segment_softmax");
    std::vector<double> seg_max(s, -std::numeric_limits<double>::infinity());
    for (int i = 0; i < e; ++i)
        seg_max[seg.segment_of[i]] = std::max(seg_max[seg.segment_of[i]], scores.data()[i]);
    std::vector<double> seg_sum(s, 0.0);
    for (int i = 0; i < e; ++i) {
        out->data[i] = std::exp(scores.data()[i] - seg_max[seg.segment_of[i]]);
        seg_sum[seg.segment_of[i]] += out->data[i];
    }
    for (int i = 0; i < e; ++i) out->data[i] /= seg_sum[seg.segment_of[i]];
    count_flops(4ull * e);

    auto sn = scores.node();
    auto segments = std::make_shared<std::vector<int>>(seg.segment_of);
    return make_result(std::move(out), {sn}, [sn, segments, s](detail::Node& o) {
        sn->ensure_grad();
        // d s_i = y_i * (g_i - sum_{j in seg} g_j y_j)
        std::vector<double> dot(s, 0.0);
        for (std::size_t i = 0; i < o.grad.size(); ++i)
            dot[(*segments)[i]] += o.grad[i] * o.data[i];
        for (std::size_t i = 0; i < o.grad.size(); ++i)
            sn->grad[i] += o.data[i] * (o.grad[i] - dot[(*segments)[i]]);
    });
}

Value segment_sum(const Value& values, const SegmentIndex& seg) {
    if (values.shape().empty() || values.shape().size() > 2)
        throw ShapeError("segment_sum: expected 1-d or 2-d values");
    const int e = values.shape()[0];
    const int d = values.shape().size() == 2 ? values.shape()[1] : 1;
    seg.validate(static_cast<std::size_t>(e));

    std::vector<int> out_shape = values.shape();
    out_shape[0] = seg.num_segments;
    auto out = make_node(out_shape, "segment_sum");
    for (int i = 0; i < e; ++i) {
        const int s = seg.segment_of[i];
        for (int j = 0; j < d; ++j)
            out->data[static_cast<std::size_t>(s) * d + j] +=
                values.data()[static_cast<std::size_t>(i) * d + j];
    }
    count_flops(values.numel());

    auto vn = values.node();
    auto segments = std::make_shared<std::vector<int>>(seg.segment_of);
    return make_result(std::move(out), {vn}, [vn, segments, d](detail::Node& o) {
        vn->ensure_grad();
        for (std::size_t i = 0; i < segments->size(); ++i)
            for (int j = 0; j < d; ++j)
                vn->grad[i * d + j] += o.grad[static_cast<std::size_t>((*segments)[i]) * d + j];
    });
}

Value l2_norm(const Value& x) {
    auto out = make_node({1}, "l2_norm");
    double acc = 0.0;
    for (double v : x.data()) acc += v * v;
    out->data[0] = std::sqrt(acc);
    count_flops(2 * x.numel() + 1);
    auto xn = x.node();
    return make_result(std::move(out), {xn}, [xn](detail::Node& o) {
        xn->ensure_grad();
        const double norm = o.data[0];
        if (norm == 0.0) return;
        for (std::size_t i = 0; i < xn->grad.size(); ++i)
            xn->grad[i] += o.grad[0] * xn->data[i] / norm;
    });
}

Value div_by_scalar(const Value& a, const Value& s) {
    if (s.numel() != 1)
        throw ShapeError("div_by_scalar: divisor must be scalar");
    auto out = make_node(a.shape(), "div_by_scalar");
    const double sv = s.data()[0];
    for (std::size_t i = 0; i < out->data.size(); ++i)
        out->data[i] = a.data()[i] / sv;
    count_flops(out->data.size());
    auto an = a.node(), sn = s.node();
    return make_result(std::move(out), {an, sn}, [an, sn](detail::Node& o) {
        an->ensure_grad();
        sn->ensure_grad();
        const double sv = sn->data[0];
        for (std::size_t i = 0; i < o.grad.size(); ++i) {
            an->grad[i] += o.grad[i] / sv;
            sn->grad[0] -= o.grad[i] * o.data[i] / sv;
        }
    });
}

Value custom_op(std::vector<int> shape, std::vector<double> data,
                std::vector<Value> inputs,
                std::function<void(detail::Node&)> backward_fn, const char* name,
                std::uint64_t flops) {
    auto out = make_node(std::move(shape), name);
    if (out->data.size() != data.size())
        throw ShapeError("custom_op: data length does not match shape");
    out->data = std::move(data);
    count_flops(flops);
    std::vector<NodePtr> nodes;
    nodes.reserve(inputs.size());
    for (const Value& v : inputs) nodes.push_back(v.node());
    return make_result(std::move(out), std::move(nodes), std::move(backward_fn));
}

void flop_counter_reset() { g_flops = 0; }
void flop_counter_enable(bool on) { g_flops_on = on; }
std::uint64_t flop_counter_total() { return g_flops; }

}  // namespace mustang
