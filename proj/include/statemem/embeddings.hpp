#pragma once

#include "statemem/corpus.hpp"
#include "statemem/linalg.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace statemem {

struct EmbeddingMatrix {
    MatrixXd input;                 // V x E, the table used for analysis
    std::optional<MatrixXd> output; // V x E, present after CBOW training

    Index vocab_size() const { return input.rows(); }
    Index dim() const { return input.cols(); }
};

struct CbowConfig {
    int dim = 64;
    int window = 5;
    int negatives = 5;
    int epochs = 5;
    double lr = 0.025;  // linearly decayed to lr * 1e-4 over training
    std::uint64_t seed = 1;
    double subsample = 0.0;  // word2vec "sample"; 0 disables
};

struct CbowResult {
    EmbeddingMatrix embeddings;
    std::vector<double> epoch_loss;  // mean negative-sampling loss per example
};

// CBOW with negative sampling over an index stream. Single-threaded and
// deterministic for a given seed.
CbowResult train_cbow(const std::vector<WordId>& tokens, std::size_t vocab_size, const CbowConfig& config);

// word2vec text format: "V E" header, then "word v1 ... vE" lines. Every
// vocabulary word must be present; <eos> may appear as "</s>", and missing
// specials get the mean word vector.
EmbeddingMatrix load_embeddings(const std::string& path, const Vocabulary& vocab);
void save_embeddings(const std::string& path, const EmbeddingMatrix& emb, const Vocabulary& vocab);

template <typename Derived>
Vec<typename Derived::Scalar> class_mean(const Eigen::MatrixBase<Derived>& table, const std::set<WordId>& members)
{
    using Scalar = typename Derived::Scalar;
    if (members.empty()) throw std::invalid_argument("class_mean: empty member set");
    Vec<Scalar> sum = Vec<Scalar>::Zero(table.cols());
    for (WordId id : members) {
        if (static_cast<Index>(id) >= table.rows()) throw std::out_of_range("class_mean: word index out of range");
        sum += table.row(static_cast<Index>(id)).transpose();
    }
    return sum / static_cast<Scalar>(members.size());
}

inline VectorXd class_mean(const EmbeddingMatrix& emb, const std::set<WordId>& members)
{
    return class_mean(emb.input, members);
}

// Unit-norm property direction between two word classes.
struct PropertyVector {
    VectorXd d;
    std::string class_a;
    std::string class_b;

    std::string name() const { return class_a + ":" + class_b; }
};

PropertyVector difference_vector(const EmbeddingMatrix& emb, const std::set<WordId>& members_a,
                                 const std::set<WordId>& members_b, std::string name_a = "a",
                                 std::string name_b = "b");
PropertyVector difference_vector(const MatrixXd& table, const std::set<WordId>& members_a,
                                 const std::set<WordId>& members_b, std::string name_a = "a",
                                 std::string name_b = "b");

}  // namespace statemem
