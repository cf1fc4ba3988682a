#include "splan/diffcore.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace splan::ad {

// ---------------------------------------------------------------------------
// ParamStore

int ParamStore::add(const std::string& name, int rows, int cols) {
    if (index_.count(name)) throw std::invalid_argument("param already registered: " + name);
    if (rows < 1 || cols < 1) throw std::invalid_argument("param with empty shape: " + name);
    int idx = static_cast<int>(entries_.size());
    entries_.push_back({name, Eigen::MatrixXd::Zero(rows, cols)});
    index_[name] = idx;
    return idx;
}

int ParamStore::find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
}

int ParamStore::require(const std::string& name) const {
    int idx = find(name);
    if (idx < 0) throw std::invalid_argument("missing parameter: " + name);
    return idx;
}

size_t ParamStore::scalar_count() const {
    size_t n = 0;
    for (const auto& e : entries_) n += static_cast<size_t>(e.value.size());
    return n;
}

void ParamStore::glorot_init(Rng& rng) {
    for (auto& e : entries_) {
        // biases stay zero; weights and attention vectors get fan-based U(-a, a)
        if (e.name.size() >= 2 && e.name.compare(e.name.size() - 2, 2, ".b") == 0) continue;
        double fan_in = static_cast<double>(e.value.cols());
        double fan_out = static_cast<double>(e.value.rows());
        if (e.value.cols() == 1) {
            // column vector (attention c): fan across its length
            fan_in = static_cast<double>(e.value.rows());
            fan_out = 1.0;
        }
        double a = std::sqrt(6.0 / (fan_in + fan_out));
        for (Eigen::Index r = 0; r < e.value.rows(); ++r)
            for (Eigen::Index c = 0; c < e.value.cols(); ++c) e.value(r, c) = rng.uniform(-a, a);
    }
}

namespace {

template <class T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("param store: truncated stream");
    return v;
}

} // namespace

void ParamStore::save(std::ostream& out) const {
    write_pod<uint32_t>(out, static_cast<uint32_t>(entries_.size()));
    for (const auto& e : entries_) {
        write_pod<uint32_t>(out, static_cast<uint32_t>(e.name.size()));
        out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        write_pod<uint64_t>(out, static_cast<uint64_t>(e.value.rows()));
        write_pod<uint64_t>(out, static_cast<uint64_t>(e.value.cols()));
        out.write(reinterpret_cast<const char*>(e.value.data()),
                  static_cast<std::streamsize>(sizeof(double) * e.value.size()));
    }
    if (!out) throw std::runtime_error("param store: write failed");
}

ParamStore ParamStore::load(std::istream& in) {
    ParamStore ps;
    auto count = read_pod<uint32_t>(in);
    for (uint32_t i = 0; i < count; ++i) {
        auto name_len = read_pod<uint32_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        auto rows = read_pod<uint64_t>(in);
        auto cols = read_pod<uint64_t>(in);
        int idx = ps.add(name, static_cast<int>(rows), static_cast<int>(cols));
        auto& m = ps.value(idx);
        in.read(reinterpret_cast<char*>(m.data()),
                static_cast<std::streamsize>(sizeof(double) * m.size()));
        if (!in) throw std::runtime_error("param store: truncated stream");
    }
    return ps;
}

void GradStore::init_like(const ParamStore& params) {
    grads.clear();
    grads.reserve(params.size());
    for (int i = 0; i < params.size(); ++i)
        grads.push_back(Eigen::MatrixXd::Zero(params.value(i).rows(), params.value(i).cols()));
}

void GradStore::zero() {
    for (auto& g : grads) g.setZero();
}

// ---------------------------------------------------------------------------
// Tape

const char* op_name(Op op) {
    switch (op) {
        case Op::Input: return "input";
        case Op::ParamMatvec: return "param_matvec";
        case Op::ParamAffine: return "param_affine";
        case Op::ParamDot: return "param_dot";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::AddMany: return "add_many";
        case Op::Concat: return "concat";
        case Op::Segment: return "segment";
        case Op::LeakyRelu: return "leaky_relu";
        case Op::Sigmoid: return "sigmoid";
        case Op::Tanh: return "tanh";
        case Op::Sum: return "sum";
        case Op::Scale: return "scale";
        case Op::MulScalar: return "mul_scalar";
        case Op::DivScalar: return "div_scalar";
        case Op::Softmax: return "softmax";
        case Op::WeightedSum: return "weighted_sum";
        case Op::Square: return "square";
        case Op::SqDiffSum: return "sq_diff_sum";
    }
    return "?";
}

int Tape::attach(const ParamStore& params, GradStore* grads) {
    if (grads && grads->grads.size() != static_cast<size_t>(params.size()))
        throw std::invalid_argument("tape: grad store shape mismatch");
    // idempotent so per-sample loops can attach unconditionally; node records
    // hold the store id in 8 bits, hence the hard cap
    for (size_t i = 0; i < stores_.size(); ++i)
        if (stores_[i] == &params && store_grads_[i] == grads) return static_cast<int>(i);
    if (stores_.size() >= 127) throw std::runtime_error("tape: too many attached stores");
    stores_.push_back(&params);
    store_grads_.push_back(grads);
    return static_cast<int>(stores_.size()) - 1;
}

int Tape::new_node(Op op, int dim) {
    Node n;
    n.op = op;
    n.dim = dim;
    n.off = static_cast<int>(valbuf_.size());
    valbuf_.resize(valbuf_.size() + static_cast<size_t>(dim));
    nodes_.push_back(n);
    return static_cast<int>(nodes_.size()) - 1;
}

Tape::CVecMap Tape::val(int node) const {
    const Node& n = nodes_[node];
    return CVecMap(valbuf_.data() + n.off, n.dim);
}

Tape::VecMap Tape::val(int node) {
    Node& n = nodes_[node];
    return VecMap(valbuf_.data() + n.off, n.dim);
}

Tape::VecMap Tape::grd(int node) {
    Node& n = nodes_[node];
    return VecMap(gradbuf_.data() + n.off, n.dim);
}

const Eigen::MatrixXd& Tape::pvalue(int8_t store, int idx) const {
    return stores_[static_cast<size_t>(store)]->value(idx);
}

Eigen::MatrixXd* Tape::pgrad(int8_t store, int idx) {
    GradStore* gs = store_grads_[static_cast<size_t>(store)];
    return gs ? &gs->grads[static_cast<size_t>(idx)] : nullptr;
}

Var Tape::input(const Eigen::VectorXd& v) { return input(v.data(), static_cast<int>(v.size())); }

Var Tape::input(const double* data, int dim) {
    int id = new_node(Op::Input, dim);
    std::memcpy(valbuf_.data() + nodes_[id].off, data, sizeof(double) * static_cast<size_t>(dim));
    return {id, dim};
}

Var Tape::input_scalar(double v) { return input(&v, 1); }

Var Tape::param_matvec(ParamRef w, Var x) {
    const auto& W = pvalue(static_cast<int8_t>(w.store), w.index);
    if (W.cols() != x.dim) throw std::invalid_argument("param_matvec: dimension mismatch");
    int id = new_node(Op::ParamMatvec, static_cast<int>(W.rows()));
    Node& n = nodes_[id];
    n.a = x.node;
    n.pstore = static_cast<int8_t>(w.store);
    n.pidx = w.index;
    val(id) = W * val(x.node);
    return {id, n.dim};
}

Var Tape::param_affine(ParamRef w, ParamRef b, Var x) {
    const auto& W = pvalue(static_cast<int8_t>(w.store), w.index);
    const auto& B = pvalue(static_cast<int8_t>(b.store), b.index);
    if (W.cols() != x.dim || B.rows() != W.rows() || B.cols() != 1)
        throw std::invalid_argument("param_affine: dimension mismatch");
    int id = new_node(Op::ParamAffine, static_cast<int>(W.rows()));
    Node& n = nodes_[id];
    n.a = x.node;
    n.pstore = static_cast<int8_t>(w.store);
    n.pidx = w.index;
    n.pstore2 = static_cast<int8_t>(b.store);
    n.pidx2 = b.index;
    val(id) = W * val(x.node) + B.col(0);
    return {id, n.dim};
}

Var Tape::param_dot(ParamRef c, Var x) {
    const auto& C = pvalue(static_cast<int8_t>(c.store), c.index);
    if (C.rows() != x.dim || C.cols() != 1)
        throw std::invalid_argument("param_dot: dimension mismatch");
    int id = new_node(Op::ParamDot, 1);
    Node& n = nodes_[id];
    n.a = x.node;
    n.pstore = static_cast<int8_t>(c.store);
    n.pidx = c.index;
    val(id)[0] = C.col(0).dot(val(x.node));
    return {id, 1};
}

Var Tape::add(Var a, Var b) {
    if (a.dim != b.dim) throw std::invalid_argument("add: dimension mismatch");
    int id = new_node(Op::Add, a.dim);
    nodes_[id].a = a.node;
    nodes_[id].b = b.node;
    val(id) = val(a.node) + val(b.node);
    return {id, a.dim};
}

Var Tape::sub(Var a, Var b) {
    if (a.dim != b.dim) throw std::invalid_argument("sub: dimension mismatch");
    int id = new_node(Op::Sub, a.dim);
    nodes_[id].a = a.node;
    nodes_[id].b = b.node;
    val(id) = val(a.node) - val(b.node);
    return {id, a.dim};
}

Var Tape::add_many(std::span<const Var> vs) {
    if (vs.empty()) throw std::invalid_argument("add_many: no operands");
    for (const auto& v : vs)
        if (v.dim != vs[0].dim) throw std::invalid_argument("add_many: dimension mismatch");
    int id = new_node(Op::AddMany, vs[0].dim);
    Node& n = nodes_[id];
    n.args_off = static_cast<int>(args_.size());
    n.args_len = static_cast<int>(vs.size());
    for (const auto& v : vs) args_.push_back(v.node);
    auto out = val(id);
    out.setZero();
    for (const auto& v : vs) out += val(v.node);
    return {id, n.dim};
}

Var Tape::concat(std::span<const Var> vs) {
    if (vs.empty()) throw std::invalid_argument("concat: no operands");
    int dim = 0;
    for (const auto& v : vs) dim += v.dim;
    int id = new_node(Op::Concat, dim);
    Node& n = nodes_[id];
    n.args_off = static_cast<int>(args_.size());
    n.args_len = static_cast<int>(vs.size());
    for (const auto& v : vs) args_.push_back(v.node);
    auto out = val(id);
    int off = 0;
    for (const auto& v : vs) {
        out.segment(off, v.dim) = val(v.node);
        off += v.dim;
    }
    return {id, dim};
}

Var Tape::segment(Var a, int offset, int len) {
    if (offset < 0 || len < 1 || offset + len > a.dim)
        throw std::invalid_argument("segment: range out of bounds");
    int id = new_node(Op::Segment, len);
    Node& n = nodes_[id];
    n.a = a.node;
    n.b = offset; // parent offset, not a node id
    val(id) = val(a.node).segment(offset, len);
    return {id, len};
}

Var Tape::leaky_relu(Var a, double slope) {
    int id = new_node(Op::LeakyRelu, a.dim);
    nodes_[id].a = a.node;
    nodes_[id].k = slope;
    auto x = val(a.node);
    auto y = val(id);
    for (int i = 0; i < a.dim; ++i) y[i] = x[i] > 0.0 ? x[i] : slope * x[i];
    return {id, a.dim};
}

Var Tape::sigmoid(Var a) {
    int id = new_node(Op::Sigmoid, a.dim);
    nodes_[id].a = a.node;
    auto x = val(a.node);
    auto y = val(id);
    for (int i = 0; i < a.dim; ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
    return {id, a.dim};
}

Var Tape::tanh(Var a) {
    int id = new_node(Op::Tanh, a.dim);
    nodes_[id].a = a.node;
    auto x = val(a.node);
    auto y = val(id);
    for (int i = 0; i < a.dim; ++i) y[i] = std::tanh(x[i]);
    return {id, a.dim};
}

Var Tape::sum(Var a) {
    int id = new_node(Op::Sum, 1);
    nodes_[id].a = a.node;
    val(id)[0] = val(a.node).sum();
    return {id, 1};
}

Var Tape::scale(Var a, double k) {
    int id = new_node(Op::Scale, a.dim);
    nodes_[id].a = a.node;
    nodes_[id].k = k;
    val(id) = k * val(a.node);
    return {id, a.dim};
}

Var Tape::mul_scalar(Var a, Var s) {
    if (s.dim != 1) throw std::invalid_argument("mul_scalar: scalar operand must have dim 1");
    int id = new_node(Op::MulScalar, a.dim);
    nodes_[id].a = a.node;
    nodes_[id].b = s.node;
    val(id) = val(s.node)[0] * val(a.node);
    return {id, a.dim};
}

Var Tape::div_scalar(Var a, Var b) {
    if (a.dim != 1 || b.dim != 1) throw std::invalid_argument("div_scalar: both operands scalar");
    int id = new_node(Op::DivScalar, 1);
    nodes_[id].a = a.node;
    nodes_[id].b = b.node;
    val(id)[0] = val(a.node)[0] / val(b.node)[0];
    return {id, 1};
}

Var Tape::softmax(std::span<const Var> scores) {
    if (scores.empty()) throw std::invalid_argument("softmax: no scores");
    for (const auto& s : scores)
        if (s.dim != 1) throw std::invalid_argument("softmax: scores must be scalars");
    int n_scores = static_cast<int>(scores.size());
    int id = new_node(Op::Softmax, n_scores);
    Node& n = nodes_[id];
    n.args_off = static_cast<int>(args_.size());
    n.args_len = n_scores;
    for (const auto& s : scores) args_.push_back(s.node);
    auto y = val(id);
    double mx = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_scores; ++i) mx = std::max(mx, val(scores[i].node)[0]);
    double total = 0.0;
    for (int i = 0; i < n_scores; ++i) {
        y[i] = std::exp(val(scores[i].node)[0] - mx);
        total += y[i];
    }
    y /= total;
    return {id, n_scores};
}

Var Tape::weighted_sum(Var weights, std::span<const Var> messages) {
    if (static_cast<int>(messages.size()) != weights.dim)
        throw std::invalid_argument("weighted_sum: weight/message count mismatch");
    for (const auto& m : messages)
        if (m.dim != messages[0].dim)
            throw std::invalid_argument("weighted_sum: message dimension mismatch");
    int id = new_node(Op::WeightedSum, messages[0].dim);
    Node& n = nodes_[id];
    n.a = weights.node;
    n.args_off = static_cast<int>(args_.size());
    n.args_len = static_cast<int>(messages.size());
    for (const auto& m : messages) args_.push_back(m.node);
    auto out = val(id);
    out.setZero();
    auto w = val(weights.node);
    for (int i = 0; i < n.args_len; ++i) out += w[i] * val(args_[n.args_off + i]);
    return {id, n.dim};
}

Var Tape::square(Var a) {
    int id = new_node(Op::Square, a.dim);
    nodes_[id].a = a.node;
    val(id) = val(a.node).array().square();
    return {id, a.dim};
}

Var Tape::sq_diff_sum(Var a, Var b) {
    if (a.dim != b.dim) throw std::invalid_argument("sq_diff_sum: dimension mismatch");
    int id = new_node(Op::SqDiffSum, 1);
    nodes_[id].a = a.node;
    nodes_[id].b = b.node;
    val(id)[0] = (val(a.node) - val(b.node)).squaredNorm();
    return {id, 1};
}

double Tape::value_scalar(Var v) const {
    if (v.dim != 1) throw std::invalid_argument("value_scalar: not a scalar");
    return val(v.node)[0];
}

Eigen::VectorXd Tape::value(Var v) const { return val(v.node); }

Eigen::VectorXd Tape::grad(Var v) const {
    const Node& n = nodes_[v.node];
    return Eigen::Map<const Eigen::VectorXd>(gradbuf_.data() + n.off, n.dim);
}

void Tape::check_finite_grad(const Node& n, int idx) const {
    const double* g = gradbuf_.data() + n.off;
    for (int i = 0; i < n.dim; ++i) {
        if (!std::isfinite(g[i]))
            throw std::runtime_error(std::string("backward: non-finite gradient at ") +
                                     op_name(n.op) + " (node " + std::to_string(idx) + ")");
    }
}

void Tape::backward(Var root) {
    if (root.dim != 1) throw std::invalid_argument("backward: root must be scalar");
    if (!std::isfinite(val(root.node)[0]))
        throw std::runtime_error("backward: non-finite loss value");
    gradbuf_.assign(valbuf_.size(), 0.0);
    grd(root.node)[0] = 1.0;

    for (int i = root.node; i >= 0; --i) {
        Node& n = nodes_[i];
        // skip nodes with no accumulated gradient signal
        bool touched = false;
        {
            const double* g = gradbuf_.data() + n.off;
            for (int d = 0; d < n.dim; ++d)
                if (g[d] != 0.0) {
                    touched = true;
                    break;
                }
        }
        if (!touched) continue;
        check_finite_grad(n, i);
        auto g = grd(i);
        switch (n.op) {
            case Op::Input:
                break;
            case Op::ParamMatvec: {
                const auto& W = pvalue(n.pstore, n.pidx);
                grd(n.a) += W.transpose() * g;
                if (auto* gw = pgrad(n.pstore, n.pidx)) gw->noalias() += g * val(n.a).transpose();
                break;
            }
            case Op::ParamAffine: {
                const auto& W = pvalue(n.pstore, n.pidx);
                grd(n.a) += W.transpose() * g;
                if (auto* gw = pgrad(n.pstore, n.pidx)) gw->noalias() += g * val(n.a).transpose();
                if (auto* gb = pgrad(n.pstore2, n.pidx2)) gb->col(0) += g;
                break;
            }
            case Op::ParamDot: {
                const auto& C = pvalue(n.pstore, n.pidx);
                grd(n.a) += g[0] * C.col(0);
                if (auto* gc = pgrad(n.pstore, n.pidx)) gc->col(0) += g[0] * val(n.a);
                break;
            }
            case Op::Add:
                grd(n.a) += g;
                grd(n.b) += g;
                break;
            case Op::Sub:
                grd(n.a) += g;
                grd(n.b) -= g;
                break;
            case Op::AddMany:
                for (int j = 0; j < n.args_len; ++j) grd(args_[n.args_off + j]) += g;
                break;
            case Op::Concat: {
                int off = 0;
                for (int j = 0; j < n.args_len; ++j) {
                    int p = args_[n.args_off + j];
                    grd(p) += g.segment(off, nodes_[p].dim);
                    off += nodes_[p].dim;
                }
                break;
            }
            case Op::Segment:
                grd(n.a).segment(n.b, n.dim) += g;
                break;
            case Op::LeakyRelu: {
                auto x = val(n.a);
                auto ga = grd(n.a);
                for (int d = 0; d < n.dim; ++d) ga[d] += g[d] * (x[d] > 0.0 ? 1.0 : n.k);
                break;
            }
            case Op::Sigmoid: {
                auto y = val(i);
                grd(n.a).array() += g.array() * y.array() * (1.0 - y.array());
                break;
            }
            case Op::Tanh: {
                auto y = val(i);
                grd(n.a).array() += g.array() * (1.0 - y.array().square());
                break;
            }
            case Op::Sum:
                grd(n.a).array() += g[0];
                break;
            case Op::Scale:
                grd(n.a) += n.k * g;
                break;
            case Op::MulScalar: {
                double s = val(n.b)[0];
                grd(n.a) += s * g;
                grd(n.b)[0] += g.dot(val(n.a));
                break;
            }
            case Op::DivScalar: {
                double bv = val(n.b)[0];
                double av = val(n.a)[0];
                grd(n.a)[0] += g[0] / bv;
                grd(n.b)[0] -= g[0] * av / (bv * bv);
                break;
            }
            case Op::Softmax: {
                auto y = val(i);
                double dot = g.dot(y);
                for (int j = 0; j < n.args_len; ++j)
                    grd(args_[n.args_off + j])[0] += y[j] * (g[j] - dot);
                break;
            }
            case Op::WeightedSum: {
                auto w = val(n.a);
                auto gw = grd(n.a);
                for (int j = 0; j < n.args_len; ++j) {
                    int p = args_[n.args_off + j];
                    gw[j] += g.dot(val(p));
                    grd(p) += w[j] * g;
                }
                break;
            }
            case Op::Square:
                grd(n.a).array() += 2.0 * g.array() * val(n.a).array();
                break;
            case Op::SqDiffSum: {
                Eigen::VectorXd d = val(n.a) - val(n.b);
                grd(n.a) += 2.0 * g[0] * d;
                grd(n.b) -= 2.0 * g[0] * d;
                break;
            }
        }
    }
}

void Tape::clear() {
    nodes_.clear();
    args_.clear();
    valbuf_.resize(0);
    gradbuf_.resize(0);
    // parameter store attachments persist; re-attach only on structural change
}

std::vector<Eigen::VectorXd> Tape::values_of(Op op) const {
    std::vector<Eigen::VectorXd> out;
    for (size_t i = 0; i < nodes_.size(); ++i)
        if (nodes_[i].op == op) out.emplace_back(val(static_cast<int>(i)));
    return out;
}

// ---------------------------------------------------------------------------
// Optimizer and friends

Adam::Adam(const ParamStore& params, AdamConfig cfg) : cfg_(cfg) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (int i = 0; i < params.size(); ++i) {
        m_.push_back(Eigen::MatrixXd::Zero(params.value(i).rows(), params.value(i).cols()));
        v_.push_back(Eigen::MatrixXd::Zero(params.value(i).rows(), params.value(i).cols()));
    }
}

void Adam::step(ParamStore& params, const GradStore& grads) {
    if (grads.grads.size() != m_.size()) throw std::invalid_argument("adam: shape mismatch");
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t i = 0; i < m_.size(); ++i) {
        const auto& g = grads.grads[i];
        if (g.rows() != m_[i].rows() || g.cols() != m_[i].cols())
            throw std::invalid_argument("adam: gradient shape mismatch at entry " +
                                        std::to_string(i));
        m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
        v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.array().square().matrix();
        auto mhat = m_[i].array() / bc1;
        auto vhat = v_[i].array() / bc2;
        params.value(static_cast<int>(i)).array() -= cfg_.lr * mhat / (vhat.sqrt() + cfg_.eps);
    }
}

void soft_update(ParamStore& target, const ParamStore& source, double tau) {
    if (tau < 0.0 || tau > 1.0) throw std::invalid_argument("soft_update: tau out of [0,1]");
    if (target.size() != source.size()) throw std::invalid_argument("soft_update: store mismatch");
    for (int i = 0; i < target.size(); ++i)
        target.value(i) = tau * source.value(i) + (1.0 - tau) * target.value(i);
}

double finite_diff_check(const LossFn& loss, ParamStore& params, double h,
                         int max_coords_per_entry, uint64_t probe_seed, double denom_floor) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_diff_check: h must be positive");
    GradStore analytic;
    analytic.init_like(params);
    double base = loss(params, &analytic);
    if (!std::isfinite(base)) throw std::runtime_error("finite_diff_check: non-finite loss");

    Rng probe(probe_seed);
    double max_rel = 0.0;
    for (int e = 0; e < params.size(); ++e) {
        auto& m = params.value(e);
        const Eigen::Index n = m.size();
        std::vector<Eigen::Index> coords(static_cast<size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
        if (max_coords_per_entry >= 0 && n > max_coords_per_entry) {
            probe.shuffle(coords);
            coords.resize(static_cast<size_t>(max_coords_per_entry));
        }
        for (Eigen::Index flat : coords) {
            double* p = m.data() + flat;
            const double saved = *p;
            *p = saved + h;
            double lp = loss(params, nullptr);
            *p = saved - h;
            double lm = loss(params, nullptr);
            *p = saved;
            if (!std::isfinite(lp) || !std::isfinite(lm))
                throw std::runtime_error("finite_diff_check: non-finite perturbed loss");
            double cd = (lp - lm) / (2.0 * h);
            double an = analytic.grads[static_cast<size_t>(e)](flat);
            double rel = std::abs(an - cd) / std::max({std::abs(an), std::abs(cd), denom_floor});
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

} // namespace splan::ad
