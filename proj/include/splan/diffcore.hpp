#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "splan/rng.hpp"

namespace splan::ad {

// Named dense parameters with a stable iteration order. Vectors are stored as
// n x 1 matrices. Gradients live in a parallel GradStore so several training
// phases can share one set of weights.
class ParamStore {
public:
    struct Entry {
        std::string name;
        Eigen::MatrixXd value;
    };

    int add(const std::string& name, int rows, int cols);
    int find(const std::string& name) const; // -1 when missing
    int require(const std::string& name) const;

    Eigen::MatrixXd& value(int idx) { return entries_[idx].value; }
    const Eigen::MatrixXd& value(int idx) const { return entries_[idx].value; }
    const std::string& name(int idx) const { return entries_[idx].name; }
    int size() const { return static_cast<int>(entries_.size()); }
    size_t scalar_count() const;

    // Glorot-uniform fill over every entry whose name ends in one of the
    // weight suffixes; biases stay zero.
    void glorot_init(Rng& rng);

    // Raw little-endian payload (shapes + doubles); bit-exact round trip.
    void save(std::ostream& out) const;
    static ParamStore load(std::istream& in);

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, int> index_;
};

struct GradStore {
    std::vector<Eigen::MatrixXd> grads;

    void init_like(const ParamStore& params);
    void zero();
};

// Handle to a tape value.
struct Var {
    int node = -1;
    int dim = 0;
};

// Parameter reference: which attached store, which entry.
struct ParamRef {
    int store = 0;
    int index = -1;
};

enum class Op : uint8_t {
    Input,
    ParamMatvec,  // y = W x
    ParamAffine,  // y = W x + b
    ParamDot,     // y = c'x (scalar)
    Add,
    Sub,
    AddMany,
    Concat,
    Segment,
    LeakyRelu,
    Sigmoid,
    Tanh,
    Sum,
    Scale,        // y = k a
    MulScalar,    // y = s[0] a
    DivScalar,    // y = a / b, both scalar
    Softmax,      // scores (scalars) -> weight vector
    WeightedSum,  // y = sum_i w[i] m_i
    Square,       // elementwise
    SqDiffSum,    // scalar = sum((a-b)^2)
};

const char* op_name(Op op);

// Reverse-mode tape over a bump arena. One tape per sample; clear() rewinds
// without releasing storage so the training loop runs allocation-free in
// steady state. Dynamic graphs: every SKU snapshot builds its own node list.
class Tape {
public:
    // Attach parameter stores the traced program may reference. A null grads
    // pointer freezes that store: values are read in forward, but backward
    // skips its accumulation (gradients still flow through to inputs).
    int attach(const ParamStore& params, GradStore* grads);

    Var input(const Eigen::VectorXd& v);
    Var input(const double* data, int dim);
    Var input_scalar(double v);

    Var param_matvec(ParamRef w, Var x);
    Var param_affine(ParamRef w, ParamRef b, Var x);
    Var param_dot(ParamRef c, Var x);

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var add_many(std::span<const Var> vs);
    Var concat(std::span<const Var> vs);
    Var segment(Var a, int offset, int len);
    Var leaky_relu(Var a, double slope);
    Var sigmoid(Var a);
    Var tanh(Var a);
    Var sum(Var a);
    Var scale(Var a, double k);
    Var mul_scalar(Var a, Var s);
    Var div_scalar(Var a, Var b);
    Var softmax(std::span<const Var> scores);
    Var weighted_sum(Var weights, std::span<const Var> messages);
    Var square(Var a);
    Var sq_diff_sum(Var a, Var b);

    double value_scalar(Var v) const;
    Eigen::VectorXd value(Var v) const;

    // Seeds d(root)/d(root) = 1 and accumulates parameter gradients into the
    // attached GradStores. May be called once per built graph.
    void backward(Var root);

    // Gradient of the last backward() w.r.t. any tape value (tests/debugging).
    Eigen::VectorXd grad(Var v) const;

    void clear();
    size_t node_count() const { return nodes_.size(); }

    // Values of every node the given op produced, in creation order
    // (diagnostics: the Softmax nodes are exactly the attention
    // distributions of any GAT layers on the tape).
    std::vector<Eigen::VectorXd> values_of(Op op) const;

private:
    struct Node {
        Op op;
        int off = 0;
        int dim = 0;
        int a = -1;
        int b = -1;
        int args_off = 0;
        int args_len = 0;
        int8_t pstore = -1;
        int8_t pstore2 = -1;
        int pidx = -1;
        int pidx2 = -1;
        double k = 0.0;
    };

    using VecMap = Eigen::Map<Eigen::VectorXd>;
    using CVecMap = Eigen::Map<const Eigen::VectorXd>;

    int new_node(Op op, int dim);
    CVecMap val(int node) const;
    VecMap val(int node);
    VecMap grd(int node);
    const Eigen::MatrixXd& pvalue(int8_t store, int idx) const;
    Eigen::MatrixXd* pgrad(int8_t store, int idx);
    void check_finite_grad(const Node& n, int idx) const;

    std::vector<const ParamStore*> stores_;
    std::vector<GradStore*> store_grads_;
    std::vector<Node> nodes_;
    std::vector<int> args_;
    std::vector<double> valbuf_;
    std::vector<double> gradbuf_;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    Adam(const ParamStore& params, AdamConfig cfg);
    void step(ParamStore& params, const GradStore& grads);
    long step_count() const { return t_; }

private:
    AdamConfig cfg_;
    std::vector<Eigen::MatrixXd> m_, v_;
    long t_ = 0;
};

// target <- tau * source + (1 - tau) * target
void soft_update(ParamStore& target, const ParamStore& source, double tau);

// Loss callable: returns the loss at `params`; when `grads` is non-null it
// must also accumulate analytic gradients there.
using LossFn = std::function<double(const ParamStore& params, GradStore* grads)>;

// Max over parameter coordinates of
// |analytic - central_difference| / max(|analytic|, |central|, denom_floor).
// max_coords_per_entry < 0 checks every coordinate; otherwise a seeded random
// subset per parameter entry. The default floor keeps the metric purely
// relative; central differences carry roundoff noise of about |loss|*eps/h
// in the numerator, so on deep compositions coordinates whose true gradient
// sits below that noise cannot be certified relatively - callers should
// raise the floor to (noise scale) / (target tolerance) there.
double finite_diff_check(const LossFn& loss, ParamStore& params, double h,
                         int max_coords_per_entry = -1, uint64_t probe_seed = 12345,
                         double denom_floor = 1e-12);

} // namespace splan::ad
