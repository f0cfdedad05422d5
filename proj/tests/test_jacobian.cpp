#include "statemem/jacobian.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <filesystem>

using namespace statemem;

namespace {

double max_rel(const MatrixXd& a, const MatrixXd& b, double floor = 1e-8)
{
    testing::FdStats st;
    st.abs_floor = floor;
    for (Index i = 0; i < a.size(); ++i) st.add(a.data()[i], b.data()[i]);
    return st.max_rel;
}

LstmTensors zero_model(Index v, Index e, Index h) { return zero_tensors(v, e, h); }

}  // namespace

TEST_SUITE("jacobian")
{
    TEST_CASE("state selector parsing")
    {
        CHECK(parse_state_selector("c") == StateSelector::cell);
        CHECK(parse_state_selector("h") == StateSelector::hidden);
        CHECK(to_string(StateSelector::hidden) == "h");
        CHECK_THROWS(parse_state_selector("x"));
    }

    TEST_CASE("zero-weight cell Jacobians")
    {
        const auto p = zero_model(4, 3, 5);
        Rng rng(1);
        const LstmState s{testing::random_gaussian(5, 1, rng), testing::random_gaussian(5, 1, rng)};
        const auto step = cell_forward(p, VectorXd::Ones(3), s);
        const auto j = cell_jacobians(p, step);
        CHECK((j.a.topLeftCorner(5, 5) - 0.5 * MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() == 0.0);
        CHECK(j.a.topRightCorner(5, 5).isZero(0.0));
        CHECK(j.a.bottomRightCorner(5, 5).isZero(0.0));
        // h <- c_prev only through c: o * tanh'(c) * f.
        const VectorXd direct = 0.5 * (1.0 - step.tanh_c.array().square()) * 0.5;
        CHECK((j.a.bottomLeftCorner(5, 5) - MatrixXd(direct.asDiagonal())).cwiseAbs().maxCoeff() < 1e-16);
        CHECK(j.b.isZero(0.0));
    }

    TEST_CASE("cell Jacobians match finite differences of one step")
    {
        const auto p = init_params(9, 4, 6, 3, 0.6);
        Rng rng(2);
        const VectorXd e = testing::random_gaussian(4, 1, rng);
        const LstmState s{testing::random_gaussian(6, 1, rng), testing::random_gaussian(6, 1, rng).array().tanh().matrix()};
        const auto j = cell_jacobians(p, cell_forward(p, e, s));
        auto stacked = [&](const VectorXd& ee, const LstmState& ss) {
            const auto k = cell_forward(p, ee, ss);
            VectorXd out(12);
            out << k.c, k.h;
            return out;
        };
        const double h = 1e-5;
        MatrixXd fa(12, 12), fb(12, 4);
        for (Index k = 0; k < 12; ++k) {
            LstmState plus = s, minus = s;
            (k < 6 ? plus.c(k) : plus.h(k - 6)) += h;
            (k < 6 ? minus.c(k) : minus.h(k - 6)) -= h;
            fa.col(k) = (stacked(e, plus) - stacked(e, minus)) / (2 * h);
        }
        for (Index k = 0; k < 4; ++k) {
            VectorXd plus = e, minus = e;
            plus(k) += h;
            minus(k) -= h;
            fb.col(k) = (stacked(plus, s) - stacked(minus, s)) / (2 * h);
        }
        CHECK(max_rel(j.a, fa) < 1e-6);
        CHECK(max_rel(j.b, fb) < 1e-6);
    }

    TEST_CASE("missing cache entries are an error")
    {
        const auto p = init_params(5, 3, 4, 1);
        auto step = cell_forward(p, VectorXd::Ones(3), LstmState::zero(4));
        step.f.resize(0);
        CHECK_THROWS(cell_jacobians(p, step));
    }

    TEST_CASE("delayed_jacobian matches full-forward finite differences")
    {
        const auto p = init_params(10, 4, 6, 5, 0.5);
        Rng rng(3);
        const auto tokens = testing::random_tokens(12, 10, rng);
        for (auto state : {StateSelector::cell, StateSelector::hidden})
            for (std::size_t tau : {0u, 1u, 3u}) {
                const auto g = delayed_jacobian(p, tokens, 9, tau, state);
                CHECK(g.data.rows() == 6);
                CHECK(g.data.cols() == 4);
                CHECK(g.tau == tau);
                CHECK(g.anchors == 1);
                CHECK(max_rel(g.data, testing::fd_delayed_jacobian(p, tokens, 9, tau, state)) < 1e-6);
            }
    }

    TEST_CASE("tau = 0 equals the cell rows of B")
    {
        const auto p = init_params(10, 4, 6, 5, 0.5);
        Rng rng(4);
        const auto tokens = testing::random_tokens(8, 10, rng);
        const auto trace = trace_forward(p, tokens, LstmState::zero(6));
        const auto g = delayed_jacobian(p, trace, 5, 0);
        const auto j = cell_jacobians(p, trace[5]);
        CHECK(g.data == j.b.topRows(6));
        CHECK(delayed_jacobian(p, trace, 5, 0, StateSelector::hidden).data == j.b.bottomRows(6));
    }

    TEST_CASE("too little history is an error")
    {
        const auto p = init_params(10, 4, 6, 5);
        const std::vector<WordId> tokens{1, 2, 3, 4};
        CHECK_THROWS(delayed_jacobian(p, tokens, 2, 3));
        CHECK_THROWS(delayed_jacobian(p, tokens, 4, 0));
        const auto trace = trace_forward(p, tokens, LstmState::zero(6));
        CHECK_THROWS(backward_sweep(p, trace, 2, 3));
    }

    TEST_CASE("chain composition through stored pieces")
    {
        const auto p = init_params(10, 4, 6, 7, 0.5);
        Rng rng(5);
        const auto tokens = testing::random_tokens(15, 10, rng);
        const auto trace = trace_forward(p, tokens, LstmState::zero(6));
        for (std::size_t tau = 1; tau <= 4; ++tau) {
            const MatrixXd full = propagated_jacobian(p, trace, 10, tau);
            const MatrixXd composed = cell_jacobians(p, trace[10]).a * propagated_jacobian(p, trace, 9, tau - 1);
            CHECK((full - composed).cwiseAbs().maxCoeff() < 1e-14);
        }
    }

    TEST_CASE("backward_sweep equals delayed_jacobian")
    {
        const auto p = init_params(15, 5, 7, 9, 0.4);
        Rng rng(6);
        const auto tokens = testing::random_tokens(30, 15, rng);
        const auto trace = trace_forward(p, tokens, LstmState::zero(7));
        for (auto state : {StateSelector::cell, StateSelector::hidden}) {
            const auto sweep = backward_sweep(p, trace, 25, 10, state);
            REQUIRE(sweep.size() == 11);
            for (std::size_t tau = 0; tau <= 10; ++tau) {
                const auto direct = delayed_jacobian(p, trace, 25, tau, state);
                CHECK(sweep[tau].tau == tau);
                CHECK((sweep[tau].data - direct.data).cwiseAbs().maxCoeff() < 1e-12);
            }
        }
        const auto single = backward_sweep(p, trace, 4, 0);
        REQUIRE(single.size() == 1);
        CHECK((single[0].data - cell_jacobians(p, trace[4]).b.topRows(7)).cwiseAbs().maxCoeff() < 1e-15);
    }

    TEST_CASE("zero-weight model gives zero matrices")
    {
        const auto p = zero_model(6, 3, 4);
        const std::vector<WordId> tokens{1, 2, 3, 4, 5, 0, 1};
        const auto trace = trace_forward(p, tokens, LstmState::zero(4));
        for (const auto& g : backward_sweep(p, trace, 6, 6)) CHECK(g.data.isZero(0.0));
        CHECK(delayed_jacobian(p, trace, 6, 4).data.isZero(0.0));
    }

    TEST_CASE("averaging over anchors")
    {
        const auto p = init_params(12, 4, 5, 11, 0.5);
        Rng rng(7);
        const std::vector<std::vector<WordId>> raw{testing::random_tokens(40, 12, rng), testing::random_tokens(35, 12, rng)};
        const auto streams = trace_streams(p, raw);

        const std::vector<AnchorRef> one{{1, 20}};
        const auto g1 = average_gradients(p, streams, 3, one);
        CHECK(g1.data == delayed_jacobian(p, streams[1].trace, 20, 3).data);
        CHECK(g1.anchors == 1);

        const std::vector<AnchorRef> three{{0, 10}, {1, 30}, {0, 33}};
        const auto g3 = average_gradients(p, streams, 2, three);
        MatrixXd acc = MatrixXd::Zero(5, 4);
        for (const auto& a : three) acc += delayed_jacobian(p, streams[a.stream].trace, a.t, 2).data;
        acc /= 3.0;
        CHECK(g3.anchors == 3);
        CHECK((g3.data - acc).cwiseAbs().maxCoeff() < 1e-12);

        std::vector<AnchorRef> all;
        for (std::size_t s = 0; s < 2; ++s)
            for (std::size_t t = 4; t < raw[s].size(); ++t) all.push_back({s, t});
        const std::vector<AnchorRef> first(all.begin(), all.begin() + 17), rest(all.begin() + 17, all.end());
        const auto ga = average_gradients(p, streams, 4, all);
        const auto gf = average_gradients(p, streams, 4, first);
        const auto gr = average_gradients(p, streams, 4, rest);
        const MatrixXd weighted = (17.0 * gf.data + static_cast<double>(rest.size()) * gr.data) / static_cast<double>(all.size());
        CHECK((ga.data - weighted).cwiseAbs().maxCoeff() < 1e-12);

        CHECK_THROWS(average_gradients(p, streams, 2, std::vector<AnchorRef>{}));
        CHECK_THROWS(average_gradients(p, streams, 2, std::vector<AnchorRef>{{0, 1}}));
    }

    TEST_CASE("identical contexts average to either one")
    {
        const auto p = init_params(12, 4, 5, 13, 0.5);
        Rng rng(8);
        const auto tokens = testing::random_tokens(20, 12, rng);
        const auto streams = trace_streams(p, {tokens, tokens});
        const auto avg = average_gradients(p, streams, 3, std::vector<AnchorRef>{{0, 15}, {1, 15}});
        CHECK(avg.data == delayed_jacobian(p, streams[0].trace, 15, 3).data);
    }

    TEST_CASE("results do not depend on the job count")
    {
        const auto p = init_params(12, 4, 5, 17, 0.5);
        Rng rng(9);
        const auto streams = trace_streams(p, {testing::random_tokens(150, 12, rng), testing::random_tokens(90, 12, rng)});
        const AnchorPolicy policy{1, 0};
        for (int jobs : {2, 3, 8}) {
            CHECK(average_gradients(p, streams, 3, policy, nullptr, StateSelector::cell, jobs).data ==
                  average_gradients(p, streams, 3, policy, nullptr, StateSelector::cell, 1).data);
            const auto a = average_gradient_curve(p, streams, 6, policy, nullptr, StateSelector::cell, jobs);
            const auto b = average_gradient_curve(p, streams, 6, policy, nullptr, StateSelector::cell, 1);
            for (std::size_t tau = 0; tau <= 6; ++tau) CHECK(a[tau].data == b[tau].data);
        }
    }

    TEST_CASE("anchor selection and class filter")
    {
        const auto p = init_params(6, 3, 4, 19);
        const std::vector<WordId> tokens{2, 3, 4, 2, 5, 2, 3, 4, 5, 2};
        const auto streams = trace_streams(p, {tokens});
        CHECK(select_anchors(streams, 2, AnchorPolicy{1, 0}).size() == 8);
        CHECK(select_anchors(streams, 2, AnchorPolicy{1, 5}).size() == 5);
        CHECK(select_anchors(streams, 0, AnchorPolicy{3, 0}).size() == 4);  // t = 0, 3, 6, 9
        const WordClass twos{"twos", {2}};
        const auto anchors = select_anchors(streams, 1, AnchorPolicy{1, 0}, &twos);
        for (const auto& a : anchors) CHECK(tokens[a.t - 1] == 2);
        CHECK(anchors.size() == 3);  // positions 0, 3, 5 (9 has no successor)

        const WordClass none{"nothing", {1}};
        try {
            average_gradients(p, streams, 4, AnchorPolicy{}, &none);
            FAIL("expected an error");
        } catch (const std::exception& e) {
            const std::string msg = e.what();
            CHECK(msg.find("nothing") != std::string::npos);
            CHECK(msg.find('4') != std::string::npos);
        }
        const auto g = average_gradients(p, streams, 1, AnchorPolicy{}, &twos);
        CHECK(g.class_name == "twos");
        CHECK(g.anchors == 3);
    }

    TEST_CASE("curve matches per-delay averages with tau_max history")
    {
        const auto p = init_params(12, 4, 5, 23, 0.5);
        Rng rng(10);
        const auto streams = trace_streams(p, {testing::random_tokens(80, 12, rng)});
        const WordClass cls{"some", {1, 2, 3, 4, 5}};
        const auto curve = average_gradient_curve(p, streams, 5, AnchorPolicy{2, 0}, &cls, StateSelector::hidden);
        REQUIRE(curve.size() == 6);
        for (std::size_t tau = 0; tau <= 5; ++tau) {
            const auto ref = average_gradients(p, streams, tau, AnchorPolicy{2, 5}, &cls, StateSelector::hidden);
            CHECK(curve[tau].anchors == ref.anchors);
            CHECK(curve[tau].state == StateSelector::hidden);
            CHECK((curve[tau].data - ref.data).cwiseAbs().maxCoeff() < 1e-12);
        }
    }

    TEST_CASE("gradient matrix dump round trip")
    {
        Rng rng(11);
        GradientMatrix g{testing::random_gaussian(3, 4, rng), 7, 42, "pronouns", StateSelector::hidden};
        const auto dir = std::filesystem::temp_directory_path() / "statemem_tests";
        std::filesystem::create_directories(dir);
        const auto path = (dir / "g.txt").string();
        save_gradient_matrix(path, g);
        const auto back = load_gradient_matrix(path);
        CHECK(back.data == g.data);
        CHECK(back.tau == 7);
        CHECK(back.anchors == 42);
        CHECK(back.class_name == "pronouns");
        CHECK(back.state == StateSelector::hidden);
    }
}
