#include "statemem/embeddings.hpp"
#include "statemem/io.hpp"
#include "statemem/random.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <numbers>

using namespace statemem;

namespace {

std::string temp_path(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / "statemem_tests";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

double cosine(const VectorXd& a, const VectorXd& b) { return a.dot(b) / (a.norm() * b.norm()); }

Vocabulary words_vocab(std::initializer_list<const char*> words)
{
    Vocabulary v;
    for (const char* w : words) v.add(w, 1);
    return v;
}

}  // namespace

TEST_SUITE("embeddings")
{
    TEST_CASE("initial CBOW loss is (k+1) ln 2 with zero output vectors")
    {
        Rng rng(1);
        const auto tokens = testing::random_tokens(500, 30, rng);
        CbowConfig cfg;
        cfg.dim = 8;
        cfg.epochs = 1;
        cfg.lr = 0.0;
        cfg.negatives = 5;
        const auto r = train_cbow(tokens, 30, cfg);
        REQUIRE(r.epoch_loss.size() == 1);
        CHECK(std::abs(r.epoch_loss[0] - 6.0 * std::numbers::ln2) < 1e-12);
        REQUIRE(r.embeddings.output);
        CHECK(r.embeddings.output->isZero(0.0));
        CHECK(r.embeddings.input.cwiseAbs().maxCoeff() <= 0.5 / 8);
    }

    TEST_CASE("CBOW learns co-occurrence on a repeated phrase")
    {
        Sentences s(200, {"the", "cat", "sat"});
        const auto vocab = build_vocab(s, 1, 0);
        const auto ids = encode_sentences(s, vocab);
        CbowConfig cfg;
        cfg.dim = 16;
        cfg.window = 2;
        cfg.epochs = 5;
        cfg.seed = 3;
        const auto r = train_cbow(ids, vocab.size(), cfg);
        const MatrixXd& x = r.embeddings.input;
        std::vector<double> pair_cos;
        for (WordId a = 1; a < vocab.size(); ++a)
            for (WordId b = a + 1; b < vocab.size(); ++b)
                pair_cos.push_back(cosine(x.row(a).transpose(), x.row(b).transpose()));
        std::sort(pair_cos.begin(), pair_cos.end());
        const double median = pair_cos.size() % 2 ? pair_cos[pair_cos.size() / 2]
                                                  : 0.5 * (pair_cos[pair_cos.size() / 2 - 1] + pair_cos[pair_cos.size() / 2]);
        const double cat_sat = cosine(x.row(vocab.encode("cat")).transpose(), x.row(vocab.encode("sat")).transpose());
        CHECK(cat_sat > median);
        CHECK(r.epoch_loss.back() < r.epoch_loss.front());
    }

    TEST_CASE("CBOW is deterministic per seed")
    {
        Rng rng(2);
        const auto tokens = testing::random_tokens(400, 20, rng);
        CbowConfig cfg;
        cfg.dim = 6;
        cfg.epochs = 2;
        cfg.subsample = 1e-2;
        const auto a = train_cbow(tokens, 20, cfg);
        const auto b = train_cbow(tokens, 20, cfg);
        CHECK(a.embeddings.input == b.embeddings.input);
        CHECK(a.epoch_loss == b.epoch_loss);
        cfg.seed = 99;
        const auto c = train_cbow(tokens, 20, cfg);
        CHECK(c.embeddings.input != a.embeddings.input);
    }

    TEST_CASE("CBOW argument errors")
    {
        const std::vector<WordId> tokens{2, 3, 2, 3, 2, 3, 2, 3, 2, 3, 2, 3, 2};
        CbowConfig cfg;
        cfg.dim = 0;
        CHECK_THROWS(train_cbow(tokens, 4, cfg));
        cfg.dim = 4;
        cfg.window = 0;
        CHECK_THROWS(train_cbow(tokens, 4, cfg));
        cfg.window = 7;
        CHECK_THROWS(train_cbow(tokens, 4, cfg));  // 13 tokens, not > 14
        cfg.window = 6;
        CHECK_NOTHROW(train_cbow(tokens, 4, cfg));
    }

    TEST_CASE("load_embeddings in vocabulary order")
    {
        const auto vocab = words_vocab({"x", "y"});
        const auto path = temp_path("emb_small.txt");
        write_file_atomic(path, "4 3\ny 4 5 6\n<unk> 0 0 0\nx 1 2 3\n</s> 7 8 9\n");
        const auto emb = load_embeddings(path, vocab);
        REQUIRE(emb.input.rows() == 4);
        REQUIRE(emb.input.cols() == 3);
        CHECK(emb.input.row(vocab.encode("x")) == Eigen::RowVector3d(1, 2, 3));
        CHECK(emb.input.row(vocab.encode("y")) == Eigen::RowVector3d(4, 5, 6));
        CHECK(emb.input.row(vocab.eos()) == Eigen::RowVector3d(7, 8, 9));
        CHECK(emb.input.row(vocab.unk()).isZero(0.0));

        write_file_atomic(path, "2 3\nx 1 2 3\ny 4 5 6\n");
        const auto fill = load_embeddings(path, vocab);
        CHECK(fill.input.row(vocab.unk()) == Eigen::RowVector3d(2.5, 3.5, 4.5));
    }

    TEST_CASE("load_embeddings errors")
    {
        const auto vocab = words_vocab({"x", "y", "zebra"});
        const auto path = temp_path("emb_bad.txt");
        write_file_atomic(path, "2 3\nx 1 2 3\ny 4 5 6\n");
        try {
            load_embeddings(path, vocab);
            FAIL("expected an error");
        } catch (const std::exception& e) {
            CHECK(std::string(e.what()).find("zebra") != std::string::npos);
        }
        write_file_atomic(path, "3 3\nx 1 2 3\ny 4 5\nzebra 1 1 1\n");
        CHECK_THROWS(load_embeddings(path, vocab));
        write_file_atomic(path, "4 3\nx 1 2 3\ny 4 5 6\nzebra 1 1 1\n");
        CHECK_THROWS(load_embeddings(path, vocab));
        write_file_atomic(path, "three 3\n");
        CHECK_THROWS(load_embeddings(path, vocab));
        CHECK_THROWS(load_embeddings(temp_path("does_not_exist.txt"), vocab));
    }

    TEST_CASE("embedding file round trip")
    {
        const auto vocab = words_vocab({"a", "b", "c", "d"});
        Rng rng(5);
        EmbeddingMatrix emb;
        emb.input = testing::random_gaussian(static_cast<Index>(vocab.size()), 7, rng);
        const auto path = temp_path("emb_roundtrip.txt");
        save_embeddings(path, emb, vocab);
        const auto back = load_embeddings(path, vocab);
        CHECK((back.input - emb.input).cwiseAbs().maxCoeff() <= 1e-15);
    }

    TEST_CASE("class_mean")
    {
        MatrixXd t(3, 2);
        t << 1, 0, 0, 1, 5, 5;
        CHECK(class_mean(t, {2}) == Eigen::Vector2d(5, 5));
        CHECK(class_mean(t, {0, 1}) == Eigen::Vector2d(0.5, 0.5));
        CHECK_THROWS(class_mean(t, {}));
        CHECK_THROWS(class_mean(t, {7}));

        Rng rng(6);
        const MatrixXd big = testing::random_gaussian(200, 9, rng);
        std::set<WordId> members;
        while (members.size() < 50) members.insert(rng.index(200));
        VectorXd acc = VectorXd::Zero(9);
        for (WordId m : members)
            for (Index c = 0; c < 9; ++c) acc(c) += big(static_cast<Index>(m), c);
        acc /= 50.0;
        CHECK((class_mean(big, members) - acc).cwiseAbs().maxCoeff() < 1e-12);

        const Eigen::MatrixXf tf = big.cast<float>();
        CHECK((class_mean(tf, members).cast<double>() - acc).cwiseAbs().maxCoeff() < 1e-5);
    }

    TEST_CASE("difference_vector")
    {
        MatrixXd t(2, 2);
        t << 1, 0, 0, 1;
        const auto d = difference_vector(t, {0}, {1}, "a", "b");
        CHECK(std::abs(d.d(0) - 1.0 / std::sqrt(2.0)) < 1e-15);
        CHECK(std::abs(d.d(1) + 1.0 / std::sqrt(2.0)) < 1e-15);
        CHECK(d.name() == "a:b");

        Rng rng(7);
        const MatrixXd big = testing::random_gaussian(40, 5, rng);
        const auto p = difference_vector(big, {1, 4, 9}, {2, 3}, "x", "y");
        const auto q = difference_vector(big, {2, 3}, {1, 4, 9}, "y", "x");
        CHECK(std::abs(p.d.norm() - 1.0) < 1e-12);
        CHECK((p.d + q.d).cwiseAbs().maxCoeff() == 0.0);
        CHECK_THROWS(difference_vector(big, {1, 2}, {2, 1}));
        CHECK_THROWS(difference_vector(big, {}, {1}));
    }
}
