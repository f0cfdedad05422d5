#include "statemem/lstm.hpp"

#include "statemem/io.hpp"
#include "statemem/log.hpp"
#include "statemem/random.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace statemem {

namespace {

template <typename Derived>
auto sigmoid(const Eigen::MatrixBase<Derived>& x)
{
    return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}

constexpr const char* kGateSuffix[4] = {"i", "f", "g", "o"};

// In-place column-wise softmax.
void softmax_columns(MatrixXd& logits)
{
    for (Index col = 0; col < logits.cols(); ++col) {
        auto z = logits.col(col);
        const double mx = z.maxCoeff();
        z.array() = (z.array() - mx).exp();
        z /= z.sum();
    }
}

struct WindowCache {
    std::vector<MatrixXd> e, c_prev, h_prev, i, f, g, o, c, tanh_c, dropped, probs;
};

WindowResult forward_window(const LstmTensors& p, const SequenceBatch& batch, const BatchState& initial,
                            const DropoutMasks& masks, WindowCache* cache)
{
    const Index H = p.hidden_dim();
    const Index E = p.emb_dim();
    const Index B = static_cast<Index>(batch.batch());
    const std::size_t T = batch.steps();
    if (initial.c.rows() != H || initial.c.cols() != B || initial.h.rows() != H || initial.h.cols() != B)
        throw std::invalid_argument("window: initial state shape does not match model/batch");
    if (!masks.empty() && masks.size() != T) throw std::invalid_argument("window: one dropout mask per step required");

    if (cache) {
        for (auto* v : {&cache->e, &cache->c_prev, &cache->h_prev, &cache->i, &cache->f, &cache->g, &cache->o,
                        &cache->c, &cache->tanh_c, &cache->dropped, &cache->probs})
            v->assign(T, MatrixXd());
    }

    MatrixXd c = initial.c;
    MatrixXd h = initial.h;
    MatrixXd e(E, B);
    double nll = 0.0;
    std::size_t count = 0;

    for (std::size_t t = 0; t < T; ++t) {
        for (Index b = 0; b < B; ++b) {
            const WordId x = batch.inputs[t][static_cast<std::size_t>(b)];
            if (static_cast<Index>(x) >= p.vocab_size()) throw std::out_of_range("window: input index out of range");
            e.col(b) = p.embedding.row(static_cast<Index>(x)).transpose();
        }
        MatrixXd z = p.w * e + p.u * h;
        z.colwise() += p.b;
        const MatrixXd ig = sigmoid(z.middleRows(0, H));
        const MatrixXd fg = sigmoid(z.middleRows(H, H));
        const MatrixXd gg = z.middleRows(2 * H, H).array().tanh().matrix();
        const MatrixXd og = sigmoid(z.middleRows(3 * H, H));
        MatrixXd c_new = fg.cwiseProduct(c) + ig.cwiseProduct(gg);
        const MatrixXd tc = c_new.array().tanh().matrix();
        MatrixXd h_new = og.cwiseProduct(tc);
        MatrixXd dropped = masks.empty() ? h_new : MatrixXd(h_new.cwiseProduct(masks[t]));

        MatrixXd logits = p.softmax_w * dropped;
        logits.colwise() += p.softmax_b;
        softmax_columns(logits);
        for (Index b = 0; b < B; ++b) {
            const WordId y = batch.targets[t][static_cast<std::size_t>(b)];
            if (y == kNoTarget) continue;
            if (static_cast<Index>(y) >= p.vocab_size()) throw std::out_of_range("window: target index out of range");
            nll -= std::log(logits(static_cast<Index>(y), b));
            ++count;
        }

        if (cache) {
            cache->e[t] = e;
            cache->c_prev[t] = c;
            cache->h_prev[t] = h;
            cache->i[t] = ig;
            cache->f[t] = fg;
            cache->g[t] = gg;
            cache->o[t] = og;
            cache->c[t] = c_new;
            cache->tanh_c[t] = tc;
            cache->dropped[t] = std::move(dropped);
            cache->probs[t] = std::move(logits);
        }
        c = std::move(c_new);
        h = std::move(h_new);
    }

    WindowResult r;
    r.targets = count;
    r.loss = count ? nll / static_cast<double>(count) : 0.0;
    r.final_state = {std::move(c), std::move(h)};
    return r;
}

}  // namespace

bool LstmTensors::all_finite() const
{
    bool ok = true;
    visit([&](const char*, const auto& t) { ok = ok && t.allFinite(); });
    return ok;
}

void LstmTensors::set_zero()
{
    visit([](const char*, auto& t) { t.setZero(); });
}

LstmTensors zero_tensors(Index vocab, Index emb, Index hidden)
{
    LstmTensors t;
    t.embedding = MatrixXd::Zero(vocab, emb);
    t.w = MatrixXd::Zero(4 * hidden, emb);
    t.u = MatrixXd::Zero(4 * hidden, hidden);
    t.b = VectorXd::Zero(4 * hidden);
    t.softmax_w = MatrixXd::Zero(vocab, hidden);
    t.softmax_b = VectorXd::Zero(vocab);
    return t;
}

LstmParams init_params(Index vocab, Index emb, Index hidden, std::uint64_t seed, double scale)
{
    if (vocab < 1 || emb < 1 || hidden < 1) throw std::invalid_argument("init_params: dimensions must be positive");
    LstmParams p;
    static_cast<LstmTensors&>(p) = zero_tensors(vocab, emb, hidden);
    Rng rng(seed);
    auto fill = [&](auto& m) {
        for (Index c = 0; c < m.cols(); ++c)
            for (Index r = 0; r < m.rows(); ++r) m(r, c) = rng.uniform(-scale, scale);
    };
    fill(p.embedding);
    fill(p.w);
    fill(p.u);
    fill(p.softmax_w);
    p.b_gate(Gate::forget).setOnes();
    return p;
}

StepCache cell_forward(const LstmTensors& p, const VectorXd& e, const LstmState& s)
{
    const Index H = p.hidden_dim();
    if (e.size() != p.emb_dim() || s.c.size() != H || s.h.size() != H)
        throw std::invalid_argument("cell_forward: dimension mismatch");
    const VectorXd z = p.w * e + p.u * s.h + p.b;
    StepCache k;
    k.e = e;
    k.c_prev = s.c;
    k.h_prev = s.h;
    k.i = sigmoid(z.segment(0, H));
    k.f = sigmoid(z.segment(H, H));
    k.g = z.segment(2 * H, H).array().tanh().matrix();
    k.o = sigmoid(z.segment(3 * H, H));
    k.c = k.f.cwiseProduct(s.c) + k.i.cwiseProduct(k.g);
    k.tanh_c = k.c.array().tanh().matrix();
    k.h = k.o.cwiseProduct(k.tanh_c);
    return k;
}

StepOutput lstm_step(const LstmTensors& p, WordId x, const LstmState& s)
{
    if (static_cast<Index>(x) >= p.vocab_size()) throw std::out_of_range("lstm_step: word index out of range");
    StepCache k = cell_forward(p, p.embedding.row(static_cast<Index>(x)).transpose(), s);
    StepOutput out;
    out.logits = p.softmax_w * k.h + p.softmax_b;
    out.state = {std::move(k.c), std::move(k.h)};
    return out;
}

std::vector<StepCache> trace_forward(const LstmTensors& p, const std::vector<WordId>& tokens, const LstmState& initial)
{
    std::vector<StepCache> out;
    out.reserve(tokens.size());
    LstmState s = initial;
    for (WordId x : tokens) {
        if (static_cast<Index>(x) >= p.vocab_size()) throw std::out_of_range("trace_forward: word index out of range");
        out.push_back(cell_forward(p, p.embedding.row(static_cast<Index>(x)).transpose(), s));
        s = {out.back().c, out.back().h};
    }
    return out;
}

std::vector<StepCache> trace_forward_embedded(const LstmTensors& p, const MatrixXd& embeddings,
                                              const LstmState& initial)
{
    std::vector<StepCache> out;
    out.reserve(static_cast<std::size_t>(embeddings.cols()));
    LstmState s = initial;
    for (Index t = 0; t < embeddings.cols(); ++t) {
        out.push_back(cell_forward(p, embeddings.col(t), s));
        s = {out.back().c, out.back().h};
    }
    return out;
}

// ---------------------------------------------------------------------------

SequenceBatch window_batch(const BatchPlan& plan, std::size_t window)
{
    if (window >= plan.num_windows()) throw std::out_of_range("window_batch: window index out of range");
    const std::size_t L = plan.seq_len();
    const std::size_t B = plan.batch_size();
    SequenceBatch sb;
    sb.inputs.assign(L, std::vector<WordId>(B));
    sb.targets.assign(L, std::vector<WordId>(B, kNoTarget));
    for (std::size_t t = 0; t < L; ++t) {
        for (std::size_t b = 0; b < B; ++b) {
            sb.inputs[t][b] = plan.token(b, window, t);
            if (plan.has_target(window, t)) sb.targets[t][b] = plan.target(b, window, t);
        }
    }
    return sb;
}

WindowResult window_loss(const LstmTensors& params, const SequenceBatch& batch, const BatchState& initial,
                         const DropoutMasks& masks)
{
    return forward_window(params, batch, initial, masks, nullptr);
}

WindowResult window_gradients(const LstmTensors& p, const SequenceBatch& batch, const BatchState& initial,
                              const DropoutMasks& masks, LstmGradients& grads, bool skip_embedding)
{
    WindowCache k;
    WindowResult r = forward_window(p, batch, initial, masks, &k);

    const Index H = p.hidden_dim();
    const Index B = static_cast<Index>(batch.batch());
    grads = zero_tensors(p.vocab_size(), p.emb_dim(), H);
    if (r.targets == 0) return r;
    const double inv_n = 1.0 / static_cast<double>(r.targets);

    MatrixXd dh_next = MatrixXd::Zero(H, B);
    MatrixXd dc_next = MatrixXd::Zero(H, B);
    MatrixXd dz(4 * H, B);

    for (std::size_t t = batch.steps(); t-- > 0;) {
        MatrixXd dlogits = k.probs[t];
        for (Index b = 0; b < B; ++b) {
            const WordId y = batch.targets[t][static_cast<std::size_t>(b)];
            if (y == kNoTarget) dlogits.col(b).setZero();
            else dlogits(static_cast<Index>(y), b) -= 1.0;
        }
        dlogits *= inv_n;
        grads.softmax_w.noalias() += dlogits * k.dropped[t].transpose();
        grads.softmax_b += dlogits.rowwise().sum();

        MatrixXd dh = p.softmax_w.transpose() * dlogits;
        if (!masks.empty()) dh = dh.cwiseProduct(masks[t]);
        dh += dh_next;

        const auto& ig = k.i[t];
        const auto& fg = k.f[t];
        const auto& gg = k.g[t];
        const auto& og = k.o[t];
        const auto& tc = k.tanh_c[t];

        const MatrixXd dc = dh.cwiseProduct(og).cwiseProduct((1.0 - tc.array().square()).matrix()) + dc_next;
        dz.middleRows(0, H) = dc.cwiseProduct(gg).array() * ig.array() * (1.0 - ig.array());
        dz.middleRows(H, H) = dc.cwiseProduct(k.c_prev[t]).array() * fg.array() * (1.0 - fg.array());
        dz.middleRows(2 * H, H) = dc.cwiseProduct(ig).array() * (1.0 - gg.array().square());
        dz.middleRows(3 * H, H) = dh.cwiseProduct(tc).array() * og.array() * (1.0 - og.array());

        grads.w.noalias() += dz * k.e[t].transpose();
        grads.u.noalias() += dz * k.h_prev[t].transpose();
        grads.b += dz.rowwise().sum();
        if (!skip_embedding) {
            const MatrixXd de = p.w.transpose() * dz;
            for (Index b = 0; b < B; ++b)
                grads.embedding.row(static_cast<Index>(batch.inputs[t][static_cast<std::size_t>(b)])) +=
                    de.col(b).transpose();
        }
        dh_next = p.u.transpose() * dz;
        dc_next = dc.cwiseProduct(fg);
    }
    return r;
}

double global_norm(const LstmTensors& grads)
{
    double sq = 0.0;
    grads.visit([&](const char*, const auto& t) { sq += t.squaredNorm(); });
    return std::sqrt(sq);
}

double clip_global_norm(LstmTensors& grads, double threshold)
{
    const double norm = global_norm(grads);
    if (norm > threshold) {
        const double scale = threshold / norm;
        grads.visit([&](const char*, auto& t) { t *= scale; });
    }
    return norm;
}

void TrainConfig::validate() const
{
    if (batch == 0 || seq_len == 0) throw std::invalid_argument("train: batch and seq_len must be positive");
    if (!(keep_prob > 0.0 && keep_prob <= 1.0)) throw std::invalid_argument("train: keep_prob must be in (0, 1]");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw std::invalid_argument("train: lr_decay must be in (0, 1]");
    if (!(clip > 0.0)) throw std::invalid_argument("train: clip threshold must be positive");
    if (!(lr > 0.0)) throw std::invalid_argument("train: learning rate must be positive");
    if (max_epochs < 1) throw std::invalid_argument("train: max_epochs must be >= 1");
    if (constant_lr_epochs < 0) throw std::invalid_argument("train: constant_lr_epochs must be >= 0");
}

double learning_rate(const TrainConfig& config, int epoch)
{
    if (epoch <= config.constant_lr_epochs) return config.lr;
    return config.lr * std::pow(config.lr_decay, epoch - config.constant_lr_epochs);
}

TrainResult train_lm(LstmParams params, const BatchPlan& train, const TrainConfig& config, const BatchPlan* valid)
{
    config.validate();
    params.embeddings_frozen = config.freeze_embeddings;
    if (!params.all_finite()) throw std::invalid_argument("train_lm: initial parameters are not finite");

    const Index H = params.hidden_dim();
    const Index B = static_cast<Index>(train.batch_size());
    Rng dropout_rng(substream_seed(config.seed, "dropout"));
    const double inv_keep = 1.0 / config.keep_prob;

    TrainResult result;
    LstmGradients grads;
    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const double lr = learning_rate(config, epoch);
        BatchState state = BatchState::zero(H, B);
        double nll_sum = 0.0;
        std::size_t count = 0;

        for (std::size_t w = 0; w < train.num_windows(); ++w) {
            const SequenceBatch sb = window_batch(train, w);
            DropoutMasks masks;
            if (config.keep_prob < 1.0) {
                masks.assign(sb.steps(), MatrixXd(H, B));
                for (auto& m : masks)
                    for (Index c = 0; c < B; ++c)
                        for (Index r = 0; r < H; ++r) m(r, c) = dropout_rng.uniform() < config.keep_prob ? inv_keep : 0.0;
            }
            WindowResult r = window_gradients(params, sb, state, masks, grads, params.embeddings_frozen);
            if (!std::isfinite(r.loss))
                throw DivergenceError("train_lm: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                      std::to_string(w));
            clip_global_norm(grads, config.clip);

            params.w -= lr * grads.w;
            params.u -= lr * grads.u;
            params.b -= lr * grads.b;
            params.softmax_w -= lr * grads.softmax_w;
            params.softmax_b -= lr * grads.softmax_b;
            if (!params.embeddings_frozen) params.embedding -= lr * grads.embedding;
            if (!params.all_finite())
                throw DivergenceError("train_lm: non-finite parameters at epoch " + std::to_string(epoch) +
                                      ", batch " + std::to_string(w));

            nll_sum += r.loss * static_cast<double>(r.targets);
            count += r.targets;
            state = std::move(r.final_state);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.lr = lr;
        stats.train_perplexity = std::exp(nll_sum / static_cast<double>(std::max<std::size_t>(count, 1)));
        if (valid) stats.valid_perplexity = perplexity(params, *valid);
        std::string msg = "epoch " + std::to_string(epoch) + " lr " + format_double(lr) + " train ppl " +
                          format_double(stats.train_perplexity);
        if (stats.valid_perplexity) msg += " valid ppl " + format_double(*stats.valid_perplexity);
        log_info(msg);
        result.epochs.push_back(stats);
    }
    result.params = std::move(params);
    return result;
}

double perplexity(const LstmTensors& params, const BatchPlan& plan)
{
    BatchState state = BatchState::zero(params.hidden_dim(), static_cast<Index>(plan.batch_size()));
    double nll_sum = 0.0;
    std::size_t count = 0;
    for (std::size_t w = 0; w < plan.num_windows(); ++w) {
        WindowResult r = forward_window(params, window_batch(plan, w), state, {}, nullptr);
        nll_sum += r.loss * static_cast<double>(r.targets);
        count += r.targets;
        state = std::move(r.final_state);
    }
    if (count == 0) throw std::invalid_argument("perplexity: plan has no targets");
    return std::exp(nll_sum / static_cast<double>(count));
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

namespace fs = std::filesystem;

std::string tensor_path(const std::string& dir, const std::string& name) { return (fs::path(dir) / (name + ".txt")).string(); }

}  // namespace

void save_checkpoint(const std::string& dir, const LstmParams& p, const Vocabulary& vocab,
                     const std::map<std::string, std::string>& extra_meta)
{
    if (static_cast<Index>(vocab.size()) != p.vocab_size())
        throw std::invalid_argument("save_checkpoint: vocabulary size does not match model");
    fs::create_directories(dir);
    save_matrix(tensor_path(dir, "embedding"), p.embedding);
    for (int g = 0; g < 4; ++g) {
        const auto gate = static_cast<Gate>(g);
        save_matrix(tensor_path(dir, std::string("w_") + kGateSuffix[g]), p.w_gate(gate));
        save_matrix(tensor_path(dir, std::string("u_") + kGateSuffix[g]), p.u_gate(gate));
        save_matrix(tensor_path(dir, std::string("b_") + kGateSuffix[g]), p.b_gate(gate));
    }
    save_matrix(tensor_path(dir, "softmax_w"), p.softmax_w);
    save_matrix(tensor_path(dir, "softmax_b"), p.softmax_b);
    save_vocab((fs::path(dir) / "vocab.txt").string(), vocab);

    std::map<std::string, std::string> meta = extra_meta;
    meta["format"] = "statemem-checkpoint-1";
    meta["vocab_size"] = std::to_string(p.vocab_size());
    meta["emb_dim"] = std::to_string(p.emb_dim());
    meta["hidden_dim"] = std::to_string(p.hidden_dim());
    meta["embeddings_frozen"] = p.embeddings_frozen ? "true" : "false";
    meta["vocab_hash"] = std::to_string(vocab.hash());
    std::ostringstream os;
    for (const auto& [k, v] : meta) os << k << '=' << v << '\n';
    write_file_atomic((fs::path(dir) / "meta.txt").string(), os.str());
}

Checkpoint load_checkpoint(const std::string& dir)
{
    Checkpoint ck;
    {
        std::istringstream is(read_file((fs::path(dir) / "meta.txt").string()));
        std::string line;
        while (std::getline(is, line)) {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            ck.meta[line.substr(0, eq)] = line.substr(eq + 1);
        }
    }
    if (ck.meta["format"] != "statemem-checkpoint-1") throw std::runtime_error(dir + ": not a checkpoint directory");
    ck.vocab = load_vocab((fs::path(dir) / "vocab.txt").string());
    if (std::to_string(ck.vocab.hash()) != ck.meta["vocab_hash"])
        throw std::runtime_error(dir + ": vocabulary hash does not match checkpoint metadata");

    const Index V = std::stol(ck.meta.at("vocab_size"));
    const Index E = std::stol(ck.meta.at("emb_dim"));
    const Index H = std::stol(ck.meta.at("hidden_dim"));
    LstmParams& p = ck.params;
    static_cast<LstmTensors&>(p) = zero_tensors(V, E, H);
    p.embeddings_frozen = ck.meta["embeddings_frozen"] == "true";

    auto load_into = [&](const std::string& name, auto&& target) {
        const MatrixXd m = load_matrix(tensor_path(dir, name));
        if (m.rows() != target.rows() || m.cols() != target.cols())
            throw std::runtime_error(dir + ": tensor " + name + " has wrong shape");
        target = m;
    };
    load_into("embedding", p.embedding);
    for (int g = 0; g < 4; ++g) {
        const auto gate = static_cast<Gate>(g);
        load_into(std::string("w_") + kGateSuffix[g], p.w_gate(gate));
        load_into(std::string("u_") + kGateSuffix[g], p.u_gate(gate));
        load_into(std::string("b_") + kGateSuffix[g], p.b_gate(gate));
    }
    load_into("softmax_w", p.softmax_w);
    load_into("softmax_b", p.softmax_b);
    if (static_cast<Index>(ck.vocab.size()) != V) throw std::runtime_error(dir + ": vocabulary size mismatch");
    return ck;
}

}  // namespace statemem
