#pragma once

// Independent reference computations shared by the unit and acceptance
// tests: scalar-loop cell, central finite differences, unigram baseline.

#include "statemem/jacobian.hpp"
#include "statemem/lstm.hpp"
#include "statemem/random.hpp"

#include <cmath>
#include <map>
#include <vector>

namespace statemem::testing {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct ScalarState {
    std::vector<double> c, h;
};

// Cell equations written out entry by entry.
inline ScalarState scalar_cell(const LstmTensors& p, const VectorXd& e, const VectorXd& c, const VectorXd& h)
{
    const Index H = p.hidden_dim();
    const Index E = p.emb_dim();
    ScalarState out{std::vector<double>(H), std::vector<double>(H)};
    for (Index j = 0; j < H; ++j) {
        double pre[4];
        for (int g = 0; g < 4; ++g) {
            const Index row = g * H + j;
            double s = p.b(row);
            for (Index k = 0; k < E; ++k) s += p.w(row, k) * e(k);
            for (Index k = 0; k < H; ++k) s += p.u(row, k) * h(k);
            pre[g] = s;
        }
        const double i = sigmoid(pre[0]);
        const double f = sigmoid(pre[1]);
        const double g = std::tanh(pre[2]);
        const double o = sigmoid(pre[3]);
        out.c[j] = f * c(j) + i * g;
        out.h[j] = o * std::tanh(out.c[j]);
    }
    return out;
}

// Agreement of analytic against numeric values: an entry passes if the
// absolute difference is under `abs_floor` or the relative one under the
// caller's tolerance.
struct FdStats {
    double max_rel = 0.0;
    double max_abs = 0.0;
    std::size_t entries = 0;
    double abs_floor = 1e-8;

    void add(double analytic, double numeric)
    {
        ++entries;
        const double diff = std::abs(analytic - numeric);
        max_abs = std::max(max_abs, diff);
        if (diff <= abs_floor) return;
        const double scale = std::max(std::abs(analytic), std::abs(numeric));
        max_rel = std::max(max_rel, diff / scale);
    }
};

inline MatrixXd embedded_inputs(const LstmTensors& p, const std::vector<WordId>& tokens, std::size_t upto)
{
    MatrixXd e(p.emb_dim(), static_cast<Index>(upto + 1));
    for (std::size_t s = 0; s <= upto; ++s) e.col(static_cast<Index>(s)) = p.embedding.row(static_cast<Index>(tokens[s])).transpose();
    return e;
}

// d(state_t)/d(e_{t-tau}) by central differences of the full forward pass from
// the zero state.
inline MatrixXd fd_delayed_jacobian(const LstmTensors& p, const std::vector<WordId>& tokens, std::size_t t,
                                    std::size_t tau, StateSelector state, double step = 1e-5)
{
    const Index H = p.hidden_dim();
    const Index E = p.emb_dim();
    const MatrixXd base = embedded_inputs(p, tokens, t);
    const Index col = static_cast<Index>(t - tau);
    MatrixXd out(H, E);
    for (Index k = 0; k < E; ++k) {
        MatrixXd plus = base, minus = base;
        plus(k, col) += step;
        minus(k, col) -= step;
        const auto tp = trace_forward_embedded(p, plus, LstmState::zero(H));
        const auto tm = trace_forward_embedded(p, minus, LstmState::zero(H));
        const VectorXd& sp = state == StateSelector::cell ? tp.back().c : tp.back().h;
        const VectorXd& sm = state == StateSelector::cell ? tm.back().c : tm.back().h;
        out.col(k) = (sp - sm) / (2.0 * step);
    }
    return out;
}

// Numeric gradient of the mean window loss w.r.t. every parameter entry.
inline LstmTensors fd_window_gradients(const LstmTensors& p, const SequenceBatch& batch, const BatchState& initial,
                                       const DropoutMasks& masks, double step = 1e-5)
{
    LstmTensors work = p;
    LstmTensors grad = zero_tensors(p.vocab_size(), p.emb_dim(), p.hidden_dim());
    auto perturb = [&](MatrixXd& target, MatrixXd& out) {
        for (Index r = 0; r < target.rows(); ++r)
            for (Index c = 0; c < target.cols(); ++c) {
                const double keep = target(r, c);
                target(r, c) = keep + step;
                const double lp = window_loss(work, batch, initial, masks).loss;
                target(r, c) = keep - step;
                const double lm = window_loss(work, batch, initial, masks).loss;
                target(r, c) = keep;
                out(r, c) = (lp - lm) / (2.0 * step);
            }
    };
    auto perturb_vec = [&](VectorXd& target, VectorXd& out) {
        for (Index r = 0; r < target.size(); ++r) {
            const double keep = target(r);
            target(r) = keep + step;
            const double lp = window_loss(work, batch, initial, masks).loss;
            target(r) = keep - step;
            const double lm = window_loss(work, batch, initial, masks).loss;
            target(r) = keep;
            out(r) = (lp - lm) / (2.0 * step);
        }
    };
    perturb(work.embedding, grad.embedding);
    perturb(work.w, grad.w);
    perturb(work.u, grad.u);
    perturb_vec(work.b, grad.b);
    perturb(work.softmax_w, grad.softmax_w);
    perturb_vec(work.softmax_b, grad.softmax_b);
    return grad;
}

inline SequenceBatch random_batch(std::size_t steps, std::size_t batch, std::size_t vocab, Rng& rng)
{
    SequenceBatch sb;
    sb.inputs.assign(steps, std::vector<WordId>(batch));
    sb.targets.assign(steps, std::vector<WordId>(batch));
    for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t b = 0; b < batch; ++b) {
            sb.inputs[t][b] = rng.index(vocab);
            sb.targets[t][b] = rng.index(vocab);
        }
    return sb;
}

inline std::vector<WordId> random_tokens(std::size_t n, std::size_t vocab, Rng& rng)
{
    std::vector<WordId> t(n);
    for (auto& x : t) x = rng.index(vocab);
    return t;
}

// Perplexity of the maximum-likelihood unigram model over the plan's targets.
inline double unigram_perplexity(const BatchPlan& plan)
{
    std::map<WordId, double> counts;
    double n = 0.0;
    for (std::size_t b = 0; b < plan.batch_size(); ++b)
        for (std::size_t w = 0; w < plan.num_windows(); ++w)
            for (std::size_t i = 0; i < plan.seq_len(); ++i)
                if (plan.has_target(w, i)) {
                    counts[plan.target(b, w, i)] += 1.0;
                    n += 1.0;
                }
    double nll = 0.0;
    for (const auto& [id, c] : counts) nll -= c * std::log(c / n);
    return std::exp(nll / n);
}

// `length` tokens cycling through ids first, first+1, ..., first+period-1.
inline std::vector<WordId> cyclic_stream(std::size_t length, std::size_t period, WordId first)
{
    std::vector<WordId> s(length);
    for (std::size_t i = 0; i < length; ++i) s[i] = first + i % period;
    return s;
}

inline MatrixXd random_gaussian(Index r, Index c, Rng& rng)
{
    MatrixXd m(r, c);
    for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < c; ++j) m(i, j) = rng.normal();
    return m;
}

inline VectorXd random_unit(Index n, Rng& rng)
{
    VectorXd v(n);
    for (Index i = 0; i < n; ++i) v(i) = rng.normal();
    return v / v.norm();
}

}  // namespace statemem::testing
