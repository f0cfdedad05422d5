#include "statemem/embeddings.hpp"

#include "statemem/io.hpp"
#include "statemem/log.hpp"
#include "statemem/random.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace statemem {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// log(sigmoid(x)) without overflow for large |x|.
double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

// Sampler over P(w) proportional to count(w)^0.75.
class UnigramSampler {
public:
    explicit UnigramSampler(const std::vector<double>& counts)
    {
        cumulative_.resize(counts.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            acc += std::pow(counts[i], 0.75);
            cumulative_[i] = acc;
        }
        total_ = acc;
    }

    WordId draw(Rng& rng) const
    {
        const double u = rng.uniform() * total_;
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
        if (it == cumulative_.end()) --it;
        return static_cast<WordId>(it - cumulative_.begin());
    }

private:
    std::vector<double> cumulative_;
    double total_ = 0.0;
};

}  // namespace

CbowResult train_cbow(const std::vector<WordId>& tokens, std::size_t vocab_size, const CbowConfig& config)
{
    if (config.dim <= 0) throw std::invalid_argument("train_cbow: dim must be positive");
    if (config.window <= 0) throw std::invalid_argument("train_cbow: window must be positive");
    if (config.negatives < 0) throw std::invalid_argument("train_cbow: negatives must be >= 0");
    if (config.epochs <= 0) throw std::invalid_argument("train_cbow: epochs must be positive");
    if (config.lr < 0) throw std::invalid_argument("train_cbow: learning rate must be >= 0");
    if (tokens.size() <= static_cast<std::size_t>(2 * config.window))
        throw std::invalid_argument("train_cbow: stream must be longer than 2*window tokens");

    std::vector<double> counts(vocab_size, 0.0);
    for (WordId w : tokens) {
        if (w >= vocab_size) throw std::out_of_range("train_cbow: token index exceeds vocabulary size");
        counts[w] += 1.0;
    }
    const auto distinct = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0; });
    if (config.negatives > 0 && distinct < 2)
        throw std::invalid_argument("train_cbow: negative sampling needs at least two distinct words");

    const Index V = static_cast<Index>(vocab_size);
    const Index E = config.dim;
    Rng rng(config.seed);

    MatrixXd in(V, E);
    const double scale = 0.5 / static_cast<double>(E);
    for (Index r = 0; r < V; ++r)
        for (Index c = 0; c < E; ++c) in(r, c) = rng.uniform(-scale, scale);
    MatrixXd out = MatrixXd::Zero(V, E);

    const UnigramSampler sampler(counts);
    const double total_words = static_cast<double>(tokens.size()) * config.epochs;
    double processed = 0.0;

    CbowResult result;
    VectorXd hidden(E);
    VectorXd hidden_grad(E);
    std::vector<WordId> context;
    std::vector<WordId> kept;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        // optional frequent-word subsampling, word2vec formula
        const std::vector<WordId>* stream = &tokens;
        if (config.subsample > 0.0) {
            kept.clear();
            const double n = static_cast<double>(tokens.size());
            for (WordId w : tokens) {
                const double f = counts[w] / n;
                const double keep = (std::sqrt(f / config.subsample) + 1.0) * config.subsample / f;
                if (keep >= 1.0 || rng.uniform() < keep) kept.push_back(w);
            }
            stream = &kept;
        }

        double loss_sum = 0.0;
        std::size_t examples = 0;
        const auto& s = *stream;
        for (std::size_t pos = 0; pos < s.size(); ++pos, processed += 1.0) {
            const double lr = config.lr * std::max(1e-4, 1.0 - processed / total_words);
            const auto shrink = static_cast<std::size_t>(rng.index(static_cast<std::uint64_t>(config.window)));
            const std::size_t reach = static_cast<std::size_t>(config.window) - shrink;

            context.clear();
            const std::size_t lo = pos >= reach ? pos - reach : 0;
            const std::size_t hi = std::min(s.size() - 1, pos + reach);
            for (std::size_t j = lo; j <= hi; ++j) {
                if (j != pos) context.push_back(s[j]);
            }
            if (context.empty()) continue;

            hidden.setZero();
            for (WordId c : context) hidden += in.row(static_cast<Index>(c)).transpose();
            hidden /= static_cast<double>(context.size());
            hidden_grad.setZero();

            const WordId target = s[pos];
            double example_loss = 0.0;
            for (int k = 0; k <= config.negatives; ++k) {
                WordId word = target;
                double label = 1.0;
                if (k > 0) {
                    do {
                        word = sampler.draw(rng);
                    } while (word == target);
                    label = 0.0;
                }
                auto row = out.row(static_cast<Index>(word));
                const double score = row.dot(hidden);
                example_loss -= label > 0 ? log_sigmoid(score) : log_sigmoid(-score);
                const double g = (label - sigmoid(score)) * lr;
                hidden_grad += g * row.transpose();
                row += g * hidden.transpose();
            }
            for (WordId c : context) in.row(static_cast<Index>(c)) += hidden_grad.transpose();

            loss_sum += example_loss;
            ++examples;
        }
        const double mean = examples ? loss_sum / static_cast<double>(examples) : 0.0;
        result.epoch_loss.push_back(mean);
        log_info("cbow epoch " + std::to_string(epoch + 1) + " loss " + format_double(mean));
    }

    result.embeddings.input = std::move(in);
    result.embeddings.output = std::move(out);
    return result;
}

EmbeddingMatrix load_embeddings(const std::string& path, const Vocabulary& vocab)
{
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open embeddings " + path);
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error(path + ": missing header");
    const auto header = split_whitespace(line);
    if (header.size() != 2) throw std::runtime_error(path + ": header must be 'V E'");
    long rows = -1;
    long dim = 0;
    try {
        rows = std::stol(header[0]);
        dim = std::stol(header[1]);
    } catch (const std::exception&) {
        throw std::runtime_error(path + ": header must be 'V E'");
    }
    if (rows < 0 || dim <= 0) throw std::runtime_error(path + ": invalid header");

    std::unordered_map<std::string, VectorXd> vectors;
    long seen = 0;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        const auto f = split_whitespace(line);
        if (f.empty()) continue;
        if (static_cast<long>(f.size()) != dim + 1)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(dim) +
                                     " values, got " + std::to_string(f.size() - 1));
        VectorXd v(dim);
        for (long c = 0; c < dim; ++c) v(c) = parse_double(f[static_cast<std::size_t>(c + 1)]);
        vectors.emplace(f[0], std::move(v));
        ++seen;
    }
    if (seen != rows)
        throw std::runtime_error(path + ": header declares " + std::to_string(rows) + " vectors, file has " +
                                 std::to_string(seen));

    EmbeddingMatrix emb;
    emb.input.resize(static_cast<Index>(vocab.size()), dim);
    std::vector<std::string> missing;
    std::vector<WordId> unfilled_specials;
    VectorXd word_sum = VectorXd::Zero(dim);
    std::size_t words = 0;
    for (WordId id = 0; id < vocab.size(); ++id) {
        auto it = vectors.find(vocab.decode(id));
        // word2vec writes its sentence boundary as "</s>".
        if (it == vectors.end() && id == vocab.eos()) it = vectors.find("</s>");
        if (it == vectors.end()) {
            if (id == vocab.unk() || id == vocab.eos()) unfilled_specials.push_back(id);
            else missing.push_back(vocab.decode(id));
            continue;
        }
        emb.input.row(static_cast<Index>(id)) = it->second.transpose();
        if (id != vocab.unk() && id != vocab.eos()) {
            word_sum += it->second;
            ++words;
        }
    }
    if (!missing.empty()) {
        std::string msg = path + ": no embedding for " + std::to_string(missing.size()) + " vocabulary word(s):";
        for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
        if (missing.size() > 20) msg += " ...";
        throw std::runtime_error(msg);
    }
    // Specials are not words; absent ones get the mean word vector.
    const VectorXd fill = words ? VectorXd(word_sum / static_cast<double>(words)) : VectorXd::Zero(dim);
    for (WordId id : unfilled_specials) emb.input.row(static_cast<Index>(id)) = fill.transpose();
    return emb;
}

void save_embeddings(const std::string& path, const EmbeddingMatrix& emb, const Vocabulary& vocab)
{
    if (emb.vocab_size() != static_cast<Index>(vocab.size()))
        throw std::invalid_argument("save_embeddings: matrix rows do not match vocabulary size");
    std::ostringstream os;
    os << emb.vocab_size() << ' ' << emb.dim() << '\n';
    for (Index r = 0; r < emb.vocab_size(); ++r) {
        os << vocab.decode(static_cast<WordId>(r));
        for (Index c = 0; c < emb.dim(); ++c) os << ' ' << format_double(emb.input(r, c));
        os << '\n';
    }
    write_file_atomic(path, os.str());
}

PropertyVector difference_vector(const MatrixXd& table, const std::set<WordId>& members_a,
                                 const std::set<WordId>& members_b, std::string name_a, std::string name_b)
{
    const VectorXd diff = class_mean(table, members_a) - class_mean(table, members_b);
    const double norm = diff.norm();
    if (!(norm > 0.0))
        throw std::invalid_argument("difference_vector: classes '" + name_a + "' and '" + name_b +
                                    "' have identical means");
    return {diff / norm, std::move(name_a), std::move(name_b)};
}

PropertyVector difference_vector(const EmbeddingMatrix& emb, const std::set<WordId>& members_a,
                                 const std::set<WordId>& members_b, std::string name_a, std::string name_b)
{
    return difference_vector(emb.input, members_a, members_b, std::move(name_a), std::move(name_b));
}

}  // namespace statemem
