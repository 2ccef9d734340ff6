#include "msqg/autodiff.hpp"

#include <cmath>
#include <cstddef>

namespace msqg::nn {

namespace {

// c[i,j] (+)= sum_t opA(i,t) * opB(t,j).
// a_t reads a as transposed storage [k,m]; b_t reads b as [n,k].
// Accumulation runs in double per output element.
void gemm(const float* a, const float* b, float* c, int m, int k, int n,
          bool a_t, bool b_t, bool add_to_c) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int t = 0; t < k; ++t) {
                const float av = a_t ? a[static_cast<size_t>(t) * m + i]
                                     : a[static_cast<size_t>(i) * k + t];
                const float bv = b_t ? b[static_cast<size_t>(j) * k + t]
                                     : b[static_cast<size_t>(t) * n + j];
                acc += static_cast<double>(av) * static_cast<double>(bv);
            }
            float& dst = c[static_cast<size_t>(i) * n + j];
            dst = add_to_c ? dst + static_cast<float>(acc) : static_cast<float>(acc);
        }
    }
}

float stable_sigmoid(float x) {
    if (x >= 0.0f) {
        return 1.0f / (1.0f + std::exp(-x));
    }
    const float e = std::exp(x);
    return e / (1.0f + e);
}

}  // namespace

const Tensor& Graph::val(const Node& n) const {
    if (n.bound) return *n.bound;
    if (n.cbound) return *n.cbound;
    return n.out;
}

const Graph::Node& Graph::checked(int id) const {
    if (id < 0 || id >= static_cast<int>(nodes_.size())) {
        throw ConfigError("graph: invalid node id");
    }
    return nodes_[static_cast<size_t>(id)];
}

int Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

float* Graph::adjoint(Node& n) {
    if (n.grad.size() != static_cast<size_t>(val(n).size())) {
        n.grad.assign(static_cast<size_t>(val(n).size()), 0.0f);
    }
    return n.grad.data();
}

void Graph::accumulate(Node& n, std::span<const float> g) {
    float* dst = adjoint(n);
    for (size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

int Graph::param(Tensor& t) {
    t.requires_grad = true;
    Node n;
    n.kind = OpKind::Leaf;
    n.bound = &t;
    n.needs_grad = true;
    return push(std::move(n));
}

int Graph::input(const Tensor& t) {
    Node n;
    n.kind = OpKind::Leaf;
    n.cbound = &t;
    return push(std::move(n));
}

int Graph::value_leaf(Tensor t) {
    Node n;
    n.kind = OpKind::Leaf;
    n.out = std::move(t);
    return push(std::move(n));
}

const Tensor& Graph::value(int id) const {
    return val(checked(id));
}

std::span<const float> Graph::grad_of(int id) const {
    const Node& n = checked(id);
    if (n.bound) return {n.bound->grad.data(), n.bound->grad.size()};
    return {n.grad.data(), n.grad.size()};
}

int Graph::matmul(int a, int b, bool transpose_b) {
    const Tensor& ta = val(checked(a));
    const Tensor& tb = val(checked(b));
    const int m = ta.rows();
    const int k = ta.cols();
    const int kb = transpose_b ? tb.cols() : tb.rows();
    const int n = transpose_b ? tb.rows() : tb.cols();
    if (k != kb) throw ConfigError("matmul: inner dimensions disagree");
    Node node;
    node.kind = OpKind::MatMul;
    node.in = {a, b};
    node.transpose_b = transpose_b;
    node.needs_grad = checked(a).needs_grad || checked(b).needs_grad;
    node.out = Tensor({m, n});
    gemm(ta.data.data(), tb.data.data(), node.out.data.data(), m, k, n,
         false, transpose_b, false);
    return push(std::move(node));
}

int Graph::add(int a, int b) {
    const Tensor& ta = val(checked(a));
    const Tensor& tb = val(checked(b));
    const int m = ta.rows();
    const int n = ta.cols();
    const bool same = tb.rows() == m && tb.cols() == n;
    const bool bcast = !same && tb.rows() == 1 && tb.cols() == n;
    if (!same && !bcast) throw ConfigError("add: shapes incompatible");
    Node node;
    node.kind = OpKind::Add;
    node.in = {a, b};
    node.transpose_b = bcast;  // reused as the broadcast marker
    node.needs_grad = checked(a).needs_grad || checked(b).needs_grad;
    node.out = Tensor({m, n});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            node.out.at(i, j) = ta.at(i, j) + tb.at(bcast ? 0 : i, j);
        }
    }
    return push(std::move(node));
}

int Graph::mul(int a, int b) {
    const Tensor& ta = val(checked(a));
    const Tensor& tb = val(checked(b));
    if (ta.rows() != tb.rows() || ta.cols() != tb.cols()) {
        throw ConfigError("mul: shapes must match");
    }
    Node node;
    node.kind = OpKind::Mul;
    node.in = {a, b};
    node.needs_grad = checked(a).needs_grad || checked(b).needs_grad;
    node.out = Tensor({ta.rows(), ta.cols()});
    for (size_t i = 0; i < ta.data.size(); ++i) {
        node.out.data[i] = ta.data[i] * tb.data[i];
    }
    return push(std::move(node));
}

int Graph::concat(const std::vector<int>& parts, int axis) {
    if (parts.empty()) throw ConfigError("concat: no inputs");
    if (axis != 0 && axis != 1) throw ConfigError("concat: axis must be 0 or 1");
    int rows = val(checked(parts[0])).rows();
    int cols = val(checked(parts[0])).cols();
    int total = axis == 0 ? rows : cols;
    bool any_grad = checked(parts[0]).needs_grad;
    for (size_t p = 1; p < parts.size(); ++p) {
        const Tensor& t = val(checked(parts[p]));
        if (axis == 0) {
            if (t.cols() != cols) throw ConfigError("concat: column counts disagree");
            total += t.rows();
        } else {
            if (t.rows() != rows) throw ConfigError("concat: row counts disagree");
            total += t.cols();
        }
        any_grad = any_grad || checked(parts[p]).needs_grad;
    }
    Node node;
    node.kind = OpKind::Concat;
    node.in = parts;
    node.axis = axis;
    node.needs_grad = any_grad;
    node.out = axis == 0 ? Tensor({total, cols}) : Tensor({rows, total});
    int off = 0;
    for (int p : parts) {
        const Tensor& t = val(checked(p));
        if (axis == 0) {
            for (int i = 0; i < t.rows(); ++i) {
                for (int j = 0; j < cols; ++j) node.out.at(off + i, j) = t.at(i, j);
            }
            off += t.rows();
        } else {
            for (int i = 0; i < rows; ++i) {
                for (int j = 0; j < t.cols(); ++j) node.out.at(i, off + j) = t.at(i, j);
            }
            off += t.cols();
        }
    }
    return push(std::move(node));
}

int Graph::slice(int a, int axis, int offset, int len) {
    const Tensor& ta = val(checked(a));
    if (axis != 0 && axis != 1) throw ConfigError("slice: axis must be 0 or 1");
    const int dim = axis == 0 ? ta.rows() : ta.cols();
    if (len <= 0 || offset < 0 || offset + len > dim) {
        throw ConfigError("slice: range out of bounds");
    }
    Node node;
    node.kind = OpKind::Slice;
    node.in = {a};
    node.axis = axis;
    node.offset = offset;
    node.len = len;
    node.needs_grad = checked(a).needs_grad;
    if (axis == 0) {
        node.out = Tensor({len, ta.cols()});
        for (int i = 0; i < len; ++i) {
            for (int j = 0; j < ta.cols(); ++j) node.out.at(i, j) = ta.at(offset + i, j);
        }
    } else {
        node.out = Tensor({ta.rows(), len});
        for (int i = 0; i < ta.rows(); ++i) {
            for (int j = 0; j < len; ++j) node.out.at(i, j) = ta.at(i, offset + j);
        }
    }
    return push(std::move(node));
}

int Graph::mean(int a) {
    const Tensor& ta = val(checked(a));
    if (ta.size() == 0) throw NumericError("mean: empty tensor");
    double acc = 0.0;
    for (float v : ta.data) acc += v;
    Node node;
    node.kind = OpKind::Mean;
    node.in = {a};
    node.needs_grad = checked(a).needs_grad;
    node.out = Tensor({1});
    node.out.data[0] = static_cast<float>(acc / static_cast<double>(ta.size()));
    return push(std::move(node));
}

int Graph::tanh_of(int a) {
    const Tensor& ta = val(checked(a));
    Node node;
    node.kind = OpKind::Tanh;
    node.in = {a};
    node.needs_grad = checked(a).needs_grad;
    node.out = Tensor(ta.shape);
    for (size_t i = 0; i < ta.data.size(); ++i) node.out.data[i] = std::tanh(ta.data[i]);
    return push(std::move(node));
}

int Graph::sigmoid_of(int a) {
    const Tensor& ta = val(checked(a));
    Node node;
    node.kind = OpKind::Sigmoid;
    node.in = {a};
    node.needs_grad = checked(a).needs_grad;
    node.out = Tensor(ta.shape);
    for (size_t i = 0; i < ta.data.size(); ++i) node.out.data[i] = stable_sigmoid(ta.data[i]);
    return push(std::move(node));
}

int Graph::relu_of(int a) {
    const Tensor& ta = val(checked(a));
    Node node;
    node.kind = OpKind::Relu;
    node.in = {a};
    node.needs_grad = checked(a).needs_grad;
    node.out = Tensor(ta.shape);
    for (size_t i = 0; i < ta.data.size(); ++i) {
        node.out.data[i] = ta.data[i] > 0.0f ? ta.data[i] : 0.0f;
    }
    return push(std::move(node));
}

int Graph::softmax_rows(int a) {
    const Tensor& ta = val(checked(a));
    const int m = ta.rows();
    const int n = ta.cols();
    Node node;
    node.kind = OpKind::Softmax;
    node.in = {a};
    node.needs_grad = checked(a).needs_grad;
    node.out = Tensor({m, n});
    for (int i = 0; i < m; ++i) {
        std::span<const float> row(ta.data.data() + static_cast<size_t>(i) * n,
                                   static_cast<size_t>(n));
        std::vector<float> sm = softmax(row);
        for (int j = 0; j < n; ++j) node.out.at(i, j) = sm[static_cast<size_t>(j)];
    }
    return push(std::move(node));
}

int Graph::embedding(int table, const std::vector<int>& ids) {
    const Tensor& tt = val(checked(table));
    if (tt.ndim() != 2) throw ConfigError("embedding: table must be 2-D");
    if (ids.empty()) throw ConfigError("embedding: no ids");
    const int v = tt.rows();
    const int d = tt.cols();
    for (int id : ids) {
        if (id < 0 || id >= v) throw ConfigError("embedding: id out of range");
    }
    Node node;
    node.kind = OpKind::Embedding;
    node.in = {table};
    node.ids = ids;
    node.needs_grad = checked(table).needs_grad;
    node.out = Tensor({static_cast<int>(ids.size()), d});
    for (size_t r = 0; r < ids.size(); ++r) {
        for (int j = 0; j < d; ++j) {
            node.out.at(static_cast<int>(r), j) = tt.at(ids[r], j);
        }
    }
    return push(std::move(node));
}

int Graph::cross_entropy(int logits, const std::vector<int>& targets, int ignore_id) {
    const Tensor& tl = val(checked(logits));
    const int m = tl.rows();
    const int v = tl.cols();
    if (static_cast<int>(targets.size()) != m) {
        throw ConfigError("cross_entropy: one target per logits row required");
    }
    int counted = 0;
    double total = 0.0;
    for (int i = 0; i < m; ++i) {
        const int t = targets[static_cast<size_t>(i)];
        if (t == ignore_id) continue;
        if (t < 0 || t >= v) throw ConfigError("cross_entropy: target id out of range");
        double mx = tl.at(i, 0);
        for (int j = 1; j < v; ++j) mx = std::max(mx, static_cast<double>(tl.at(i, j)));
        double sum = 0.0;
        for (int j = 0; j < v; ++j) sum += std::exp(static_cast<double>(tl.at(i, j)) - mx);
        const double lse = mx + std::log(sum);
        total += lse - static_cast<double>(tl.at(i, t));
        ++counted;
    }
    if (counted == 0) throw NumericError("cross_entropy: every target is ignored");
    Node node;
    node.kind = OpKind::CrossEntropy;
    node.in = {logits};
    node.ids = targets;
    node.ignore_id = ignore_id;
    node.n_counted = counted;
    node.needs_grad = checked(logits).needs_grad;
    node.out = Tensor({1});
    node.out.data[0] = static_cast<float>(total / counted);
    if (!std::isfinite(node.out.data[0])) throw NumericError("cross_entropy: non-finite loss");
    return push(std::move(node));
}

void Graph::backward(int root) {
    {
        const Node& r = checked(root);
        if (val(r).size() != 1) throw ConfigError("backward: root must be a scalar");
        if (!r.needs_grad) return;
    }
    nodes_[static_cast<size_t>(root)].grad.assign(1, 1.0f);
    for (int id = root; id >= 0; --id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (n.grad.empty()) continue;
        const std::vector<float>& g = n.grad;
        switch (n.kind) {
            case OpKind::Leaf: {
                if (n.bound) {
                    n.bound->ensure_grad();
                    for (size_t i = 0; i < g.size(); ++i) n.bound->grad[i] += g[i];
                }
                break;
            }
            case OpKind::MatMul: {
                Node& na = nodes_[static_cast<size_t>(n.in[0])];
                Node& nb = nodes_[static_cast<size_t>(n.in[1])];
                const Tensor& ta = val(na);
                const Tensor& tb = val(nb);
                const int m = ta.rows();
                const int k = ta.cols();
                const int nn = n.out.cols();
                if (na.needs_grad) {
                    // dA = dC * B^T, or dC * B when b was transposed.
                    gemm(g.data(), tb.data.data(), adjoint(na), m, nn, k,
                         false, !n.transpose_b, true);
                }
                if (nb.needs_grad) {
                    if (n.transpose_b) {
                        // dB = dC^T * A, B stored [n,k].
                        gemm(g.data(), ta.data.data(), adjoint(nb), nn, m, k,
                             true, false, true);
                    } else {
                        // dB = A^T * dC.
                        gemm(ta.data.data(), g.data(), adjoint(nb), k, m, nn,
                             true, false, true);
                    }
                }
                break;
            }
            case OpKind::Add: {
                Node& na = nodes_[static_cast<size_t>(n.in[0])];
                Node& nb = nodes_[static_cast<size_t>(n.in[1])];
                if (na.needs_grad) accumulate(na, g);
                if (nb.needs_grad) {
                    if (!n.transpose_b) {
                        accumulate(nb, g);
                    } else {
                        const int m = n.out.rows();
                        const int cols = n.out.cols();
                        float* db = adjoint(nb);
                        for (int j = 0; j < cols; ++j) {
                            double acc = 0.0;
                            for (int i = 0; i < m; ++i) {
                                acc += g[static_cast<size_t>(i) * cols + j];
                            }
                            db[j] += static_cast<float>(acc);
                        }
                    }
                }
                break;
            }
            case OpKind::Mul: {
                Node& na = nodes_[static_cast<size_t>(n.in[0])];
                Node& nb = nodes_[static_cast<size_t>(n.in[1])];
                const Tensor& ta = val(na);
                const Tensor& tb = val(nb);
                if (na.needs_grad) {
                    float* da = adjoint(na);
                    for (size_t i = 0; i < g.size(); ++i) da[i] += g[i] * tb.data[i];
                }
                if (nb.needs_grad) {
                    float* db = adjoint(nb);
                    for (size_t i = 0; i < g.size(); ++i) db[i] += g[i] * ta.data[i];
                }
                break;
            }
            case OpKind::Concat: {
                const int cols = n.out.cols();
                const int rows = n.out.rows();
                int off = 0;
                for (int pid : n.in) {
                    Node& np = nodes_[static_cast<size_t>(pid)];
                    const Tensor& tp = val(np);
                    if (n.axis == 0) {
                        if (np.needs_grad) {
                            float* dp = adjoint(np);
                            for (int i = 0; i < tp.rows(); ++i) {
                                for (int j = 0; j < cols; ++j) {
                                    dp[static_cast<size_t>(i) * cols + j] +=
                                        g[static_cast<size_t>(off + i) * cols + j];
                                }
                            }
                        }
                        off += tp.rows();
                    } else {
                        if (np.needs_grad) {
                            float* dp = adjoint(np);
                            const int pc = tp.cols();
                            for (int i = 0; i < rows; ++i) {
                                for (int j = 0; j < pc; ++j) {
                                    dp[static_cast<size_t>(i) * pc + j] +=
                                        g[static_cast<size_t>(i) * cols + off + j];
                                }
                            }
                        }
                        off += tp.cols();
                    }
                }
                break;
            }
            case OpKind::Slice: {
                Node& na = nodes_[static_cast<size_t>(n.in[0])];
                if (!na.needs_grad) break;
                const Tensor& ta = val(na);
                float* da = adjoint(na);
                const int ac = ta.cols();
                if (n.axis == 0) {
                    for (int i = 0; i < n.len; ++i) {
                        for (int j = 0; j < ac; ++j) {
                            da[static_cast<size_t>(n.offset + i) * ac + j] +=
                                g[static_cast<size_t>(i) * ac + j];
                        }
                    }
                } else {
                    for (int i = 0; i < ta.rows(); ++i) {
                        for (int j = 0; j < n.len; ++j) {
                            da[static_cast<size_t>(i) * ac + n.offset + j] +=
                                g[static_cast<size_t>(i) * n.len + j];
                        }
                    }
                }
                break;
            }
            case OpKind::Mean: {
                Node& na = nodes_[static_cast<size_t>(n.in[0])];
                if (!na.needs_grad) break;
                const Tensor& ta = val(na);
                float* da = adjoint(na);
                const float scale =
                    static_cast<float>(static_cast<double>(g[0]) / static_cast<double>(ta.size()));
                for (int64_t i = 0; i < ta.size(); ++i) da[i] += scale;
                break;
            }
            case OpKind::Tanh: {
                Node& na = nodes_[static_cast<size_t>(n.in[0])];
                if (!na.needs_grad) break;
                float* da = adjoint(na);
                for (size_t i = 0; i < g.size(); ++i) {
                    const float y = n.out.data[i];
                    da[i] += g[i] * (1.0f - y * y);
                }
                break;
            }
            case OpKind::Sigmoid: {
                Node& na = nodes_[static_cast<size_t>(n.in[0])];
                if (!na.needs_grad) break;
                float* da = adjoint(na);
                for (size_t i = 0; i < g.size(); ++i) {
                    const float y = n.out.data[i];
                    da[i] += g[i] * y * (1.0f - y);
                }
                break;
            }
            case OpKind::Relu: {
                Node& na = nodes_[static_cast<size_t>(n.in[0])];
                if (!na.needs_grad) break;
                const Tensor& ta = val(na);
                float* da = adjoint(na);
                for (size_t i = 0; i < g.size(); ++i) {
                    if (ta.data[i] > 0.0f) da[i] += g[i];
                }
                break;
            }
            case OpKind::Softmax: {
                Node& na = nodes_[static_cast<size_t>(n.in[0])];
                if (!na.needs_grad) break;
                float* da = adjoint(na);
                const int m = n.out.rows();
                const int c = n.out.cols();
                for (int i = 0; i < m; ++i) {
                    double dot = 0.0;
                    for (int j = 0; j < c; ++j) {
                        dot += static_cast<double>(g[static_cast<size_t>(i) * c + j]) *
                               static_cast<double>(n.out.at(i, j));
                    }
                    for (int j = 0; j < c; ++j) {
                        const size_t idx = static_cast<size_t>(i) * c + j;
                        da[idx] += static_cast<float>(
                            static_cast<double>(n.out.at(i, j)) *
                            (static_cast<double>(g[idx]) - dot));
                    }
                }
                break;
            }
            case OpKind::Embedding: {
                Node& nt = nodes_[static_cast<size_t>(n.in[0])];
                if (!nt.needs_grad) break;
                const Tensor& tt = val(nt);
                float* dt = adjoint(nt);
                const int d = tt.cols();
                for (size_t r = 0; r < n.ids.size(); ++r) {
                    const size_t dst = static_cast<size_t>(n.ids[r]) * d;
                    const size_t src = r * static_cast<size_t>(d);
                    for (int j = 0; j < d; ++j) dt[dst + j] += g[src + j];
                }
                break;
            }
            case OpKind::CrossEntropy: {
                Node& nl = nodes_[static_cast<size_t>(n.in[0])];
                if (!nl.needs_grad) break;
                const Tensor& tl = val(nl);
                float* dl = adjoint(nl);
                const int m = tl.rows();
                const int v = tl.cols();
                const double g0 = g[0];
                for (int i = 0; i < m; ++i) {
                    const int t = n.ids[static_cast<size_t>(i)];
                    if (t == n.ignore_id) continue;
                    std::span<const float> row(tl.data.data() + static_cast<size_t>(i) * v,
                                               static_cast<size_t>(v));
                    std::vector<float> p = softmax(row);
                    for (int j = 0; j < v; ++j) {
                        const double delta = j == t ? 1.0 : 0.0;
                        dl[static_cast<size_t>(i) * v + j] += static_cast<float>(
                            g0 * (static_cast<double>(p[static_cast<size_t>(j)]) - delta) /
                            n.n_counted);
                    }
                }
                break;
            }
        }
    }
}

}  // namespace msqg::nn
