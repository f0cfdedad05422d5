#pragma once

#include "statemem/corpus.hpp"
#include "statemem/linalg.hpp"

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace statemem {

// Gate order inside the stacked 4H-row weight blocks.
enum class Gate : int { input = 0, forget = 1, cell = 2, output = 3 };

// Every trainable tensor of the single-layer LSTM LM. The four gate weight
// matrices W_i, W_f, W_g, W_o (and U_*, b_*) are stacked row-wise in `w`,
// `u` and `b`.
struct LstmTensors {
    MatrixXd embedding;  // V x E
    MatrixXd w;          // 4H x E
    MatrixXd u;          // 4H x H
    VectorXd b;          // 4H
    MatrixXd softmax_w;  // V x H
    VectorXd softmax_b;  // V

    Index vocab_size() const { return embedding.rows(); }
    Index emb_dim() const { return embedding.cols(); }
    Index hidden_dim() const { return u.cols(); }

    auto w_gate(Gate g) { return w.middleRows(static_cast<int>(g) * hidden_dim(), hidden_dim()); }
    auto w_gate(Gate g) const { return w.middleRows(static_cast<int>(g) * hidden_dim(), hidden_dim()); }
    auto u_gate(Gate g) { return u.middleRows(static_cast<int>(g) * hidden_dim(), hidden_dim()); }
    auto u_gate(Gate g) const { return u.middleRows(static_cast<int>(g) * hidden_dim(), hidden_dim()); }
    auto b_gate(Gate g) { return b.segment(static_cast<int>(g) * hidden_dim(), hidden_dim()); }
    auto b_gate(Gate g) const { return b.segment(static_cast<int>(g) * hidden_dim(), hidden_dim()); }

    template <typename F>
    void visit(F&& f)
    {
        f("embedding", embedding);
        f("w", w);
        f("u", u);
        f("b", b);
        f("softmax_w", softmax_w);
        f("softmax_b", softmax_b);
    }
    template <typename F>
    void visit(F&& f) const
    {
        f("embedding", embedding);
        f("w", w);
        f("u", u);
        f("b", b);
        f("softmax_w", softmax_w);
        f("softmax_b", softmax_b);
    }

    bool all_finite() const;
    void set_zero();
};

struct LstmParams : LstmTensors {
    bool embeddings_frozen = false;
};

using LstmGradients = LstmTensors;

// Zeroed tensors with the given dimensions.
LstmTensors zero_tensors(Index vocab, Index emb, Index hidden);

// Weights uniform in [-scale, scale], forget-gate bias 1, other biases 0.
LstmParams init_params(Index vocab, Index emb, Index hidden, std::uint64_t seed, double scale = 0.05);

struct LstmState {
    VectorXd c;
    VectorXd h;

    static LstmState zero(Index hidden) { return {VectorXd::Zero(hidden), VectorXd::Zero(hidden)}; }
};

// Everything one cell evaluation computes, kept for differentiation.
struct StepCache {
    VectorXd e;       // input embedding
    VectorXd c_prev;
    VectorXd h_prev;
    VectorXd i, f, g, o;  // gate activations
    VectorXd c;
    VectorXd tanh_c;
    VectorXd h;
};

StepCache cell_forward(const LstmTensors& params, const VectorXd& e, const LstmState& s);

struct StepOutput {
    LstmState state;
    VectorXd logits;
};

StepOutput lstm_step(const LstmTensors& params, WordId x, const LstmState& s);

// Per-step caches for a token stream, starting from `initial`.
std::vector<StepCache> trace_forward(const LstmTensors& params, const std::vector<WordId>& tokens,
                                     const LstmState& initial);
// Same, but with explicit input embeddings (columns), for perturbation studies.
std::vector<StepCache> trace_forward_embedded(const LstmTensors& params, const MatrixXd& embeddings,
                                              const LstmState& initial);

// ---------------------------------------------------------------------------
// Training

inline constexpr WordId kNoTarget = std::numeric_limits<WordId>::max();

// One BPTT window: inputs[t][b] and targets[t][b] (kNoTarget = no loss term).
struct SequenceBatch {
    std::vector<std::vector<WordId>> inputs;
    std::vector<std::vector<WordId>> targets;

    std::size_t steps() const { return inputs.size(); }
    std::size_t batch() const { return inputs.empty() ? 0 : inputs.front().size(); }
};

SequenceBatch window_batch(const BatchPlan& plan, std::size_t window);

// Batched state, one column per batch element.
struct BatchState {
    MatrixXd c;
    MatrixXd h;

    static BatchState zero(Index hidden, Index batch)
    {
        return {MatrixXd::Zero(hidden, batch), MatrixXd::Zero(hidden, batch)};
    }
};

struct WindowResult {
    double loss = 0.0;        // mean negative log-likelihood over target positions
    std::size_t targets = 0;  // number of target positions
    BatchState final_state;
};

// Dropout masks on h before the softmax layer, one H x B matrix per step,
// already scaled by 1/keep. Empty means no dropout.
using DropoutMasks = std::vector<MatrixXd>;

WindowResult window_loss(const LstmTensors& params, const SequenceBatch& batch, const BatchState& initial,
                         const DropoutMasks& masks = {});

// Loss plus exact BPTT gradients of the mean loss over the window. The
// incoming state is treated as a constant. The embedding gradient is left
// zero when `skip_embedding` is set.
WindowResult window_gradients(const LstmTensors& params, const SequenceBatch& batch, const BatchState& initial,
                              const DropoutMasks& masks, LstmGradients& grads, bool skip_embedding = false);

double global_norm(const LstmTensors& grads);
// Rescales so the global norm is at most `threshold`; returns the pre-clip norm.
double clip_global_norm(LstmTensors& grads, double threshold);

struct TrainConfig {
    std::size_t batch = 20;
    std::size_t seq_len = 50;
    double lr = 1.0;
    int constant_lr_epochs = 6;
    double lr_decay = 0.8;
    int max_epochs = 20;
    double clip = 5.0;
    double keep_prob = 0.5;
    std::uint64_t seed = 1;
    bool freeze_embeddings = false;

    void validate() const;
};

// lr0 for epochs 1..constant, then lr0 * decay^(epoch - constant). 1-based epoch.
double learning_rate(const TrainConfig& config, int epoch);

struct EpochStats {
    int epoch = 0;
    double lr = 0.0;
    double train_perplexity = 0.0;
    std::optional<double> valid_perplexity;
};

struct TrainResult {
    LstmParams params;
    std::vector<EpochStats> epochs;
};

class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// SGD with truncated BPTT; state values carried across a stream's windows.
TrainResult train_lm(LstmParams params, const BatchPlan& train, const TrainConfig& config,
                     const BatchPlan* valid = nullptr);

// exp of mean next-word NLL, no dropout, state carried across windows.
double perplexity(const LstmTensors& params, const BatchPlan& plan);

// ---------------------------------------------------------------------------
// Checkpoints: one Matrix text file per tensor plus meta.txt and vocab.txt.

struct Checkpoint {
    LstmParams params;
    Vocabulary vocab;
    std::map<std::string, std::string> meta;
};

void save_checkpoint(const std::string& dir, const LstmParams& params, const Vocabulary& vocab,
                     const std::map<std::string, std::string>& extra_meta = {});
Checkpoint load_checkpoint(const std::string& dir);

}  // namespace statemem
