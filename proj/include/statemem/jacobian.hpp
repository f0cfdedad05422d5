#pragma once

#include "statemem/lstm.hpp"

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace statemem {

enum class StateSelector { cell, hidden };

std::string to_string(StateSelector s);
StateSelector parse_state_selector(std::string_view text);

// Jacobians of one cell step, rows and columns ordered (c, h).
struct CellJacobians {
    MatrixXd a;  // 2H x 2H, d(c_t, h_t) / d(c_{t-1}, h_{t-1})
    MatrixXd b;  // 2H x E,  d(c_t, h_t) / d e_t
};

CellJacobians cell_jacobians(const LstmTensors& params, const StepCache& step);

// d(state_t) / d(e_{t-tau}), H x E; averaged over `anchors` anchor steps.
struct GradientMatrix {
    MatrixXd data;
    std::size_t tau = 0;
    std::size_t anchors = 1;
    std::string class_name = "all";
    StateSelector state = StateSelector::cell;
};

// Full 2H x E product A_t ... A_{t-tau+1} B_{t-tau}, built front to back from
// explicit cell Jacobians.
MatrixXd propagated_jacobian(const LstmTensors& params, const std::vector<StepCache>& trace, std::size_t t,
                             std::size_t tau);

GradientMatrix delayed_jacobian(const LstmTensors& params, const std::vector<StepCache>& trace, std::size_t t,
                                std::size_t tau, StateSelector state = StateSelector::cell);
// Convenience: traces `tokens` from the zero state first.
GradientMatrix delayed_jacobian(const LstmTensors& params, const std::vector<WordId>& tokens, std::size_t t,
                                std::size_t tau, StateSelector state = StateSelector::cell);

// All delays 0..tau_max for one anchor by reverse accumulation: the state
// selector is pulled back through each step as a vector-Jacobian product, so
// the 2H x 2H step Jacobians are never formed.
std::vector<GradientMatrix> backward_sweep(const LstmTensors& params, const std::vector<StepCache>& trace,
                                           std::size_t t, std::size_t tau_max,
                                           StateSelector state = StateSelector::cell);

// A token stream together with its forward trace (state carried from zero).
struct AnalysisStream {
    std::vector<WordId> tokens;
    std::vector<StepCache> trace;
};

std::vector<AnalysisStream> trace_streams(const LstmTensors& params, const std::vector<std::vector<WordId>>& streams);

struct AnchorRef {
    std::size_t stream = 0;
    std::size_t t = 0;
};

struct AnchorPolicy {
    std::size_t stride = 1;
    // Anchors need at least this much history (in addition to tau).
    std::size_t min_history = 0;
};

struct WordClass {
    std::string name;
    std::set<WordId> members;
};

// Anchors t (t >= max(tau, min_history), every stride-th step) whose word at
// t - tau is in the class, if one is given.
std::vector<AnchorRef> select_anchors(const std::vector<AnalysisStream>& streams, std::size_t tau,
                                      const AnchorPolicy& policy, const WordClass* filter = nullptr);

// Entrywise mean of the delayed Jacobians over an explicit anchor list.
// Summation order is fixed, so results do not depend on `jobs`.
GradientMatrix average_gradients(const LstmTensors& params, const std::vector<AnalysisStream>& streams,
                                 std::size_t tau, const std::vector<AnchorRef>& anchors,
                                 StateSelector state = StateSelector::cell, int jobs = 1);

GradientMatrix average_gradients(const LstmTensors& params, const std::vector<AnalysisStream>& streams,
                                 std::size_t tau, const AnchorPolicy& policy, const WordClass* filter = nullptr,
                                 StateSelector state = StateSelector::cell, int jobs = 1);

// Averages for every delay 0..tau_max in one backward sweep per anchor.
// Anchors need tau_max history; each delay keeps its own class-filtered set.
std::vector<GradientMatrix> average_gradient_curve(const LstmTensors& params,
                                                   const std::vector<AnalysisStream>& streams, std::size_t tau_max,
                                                   const AnchorPolicy& policy, const WordClass* filter = nullptr,
                                                   StateSelector state = StateSelector::cell, int jobs = 1);

// Matrix text file plus "<path>.meta" with "tau= anchors= class= state=".
void save_gradient_matrix(const std::string& path, const GradientMatrix& g);
GradientMatrix load_gradient_matrix(const std::string& path);

}  // namespace statemem
