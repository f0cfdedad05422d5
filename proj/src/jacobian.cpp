#include "statemem/jacobian.hpp"

#include "statemem/io.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

namespace statemem {

std::string to_string(StateSelector s) { return s == StateSelector::cell ? "c" : "h"; }

StateSelector parse_state_selector(std::string_view text)
{
    if (text == "c" || text == "cell") return StateSelector::cell;
    if (text == "h" || text == "hidden") return StateSelector::hidden;
    throw std::invalid_argument("state selector must be 'c' or 'h', got '" + std::string(text) + "'");
}

namespace {

void check_cache(const LstmTensors& p, const StepCache& k)
{
    const Index H = p.hidden_dim();
    const bool ok = k.e.size() == p.emb_dim() && k.c_prev.size() == H && k.h_prev.size() == H && k.i.size() == H &&
                    k.f.size() == H && k.g.size() == H && k.o.size() == H && k.c.size() == H &&
                    k.tanh_c.size() == H && k.h.size() == H;
    if (!ok) throw std::invalid_argument("cell_jacobians: forward cache is missing entries or has wrong sizes");
}

// Derivatives of c_t with respect to each gate pre-activation, and the
// factor d h_t / d c_t.
struct GateSlopes {
    VectorXd dc_di, dc_df, dc_dg, dh_do, dh_dc;
};

GateSlopes gate_slopes(const StepCache& k)
{
    GateSlopes s;
    s.dc_di = k.g.array() * k.i.array() * (1.0 - k.i.array());
    s.dc_df = k.c_prev.array() * k.f.array() * (1.0 - k.f.array());
    s.dc_dg = k.i.array() * (1.0 - k.g.array().square());
    s.dh_do = k.tanh_c.array() * k.o.array() * (1.0 - k.o.array());
    s.dh_dc = k.o.array() * (1.0 - k.tanh_c.array().square());
    return s;
}

void check_anchor(const std::vector<StepCache>& trace, std::size_t t, std::size_t tau)
{
    if (t >= trace.size())
        throw std::out_of_range("anchor " + std::to_string(t) + " is beyond the " + std::to_string(trace.size()) +
                                "-step trace");
    if (tau > t)
        throw std::out_of_range("delay " + std::to_string(tau) + " exceeds the history available at anchor " +
                                std::to_string(t));
}

}  // namespace

CellJacobians cell_jacobians(const LstmTensors& p, const StepCache& k)
{
    check_cache(p, k);
    const Index H = p.hidden_dim();
    const GateSlopes s = gate_slopes(k);

    const MatrixXd dc_dh = s.dc_di.asDiagonal() * p.u_gate(Gate::input) + s.dc_df.asDiagonal() * p.u_gate(Gate::forget) +
                           s.dc_dg.asDiagonal() * p.u_gate(Gate::cell);
    const MatrixXd dc_de = s.dc_di.asDiagonal() * p.w_gate(Gate::input) + s.dc_df.asDiagonal() * p.w_gate(Gate::forget) +
                           s.dc_dg.asDiagonal() * p.w_gate(Gate::cell);

    CellJacobians j;
    j.a.resize(2 * H, 2 * H);
    j.a.topLeftCorner(H, H) = k.f.asDiagonal();
    j.a.topRightCorner(H, H) = dc_dh;
    j.a.bottomLeftCorner(H, H) = s.dh_dc.cwiseProduct(k.f).asDiagonal();
    j.a.bottomRightCorner(H, H) = s.dh_do.asDiagonal() * p.u_gate(Gate::output) + s.dh_dc.asDiagonal() * dc_dh;

    j.b.resize(2 * H, p.emb_dim());
    j.b.topRows(H) = dc_de;
    j.b.bottomRows(H) = s.dh_do.asDiagonal() * p.w_gate(Gate::output) + s.dh_dc.asDiagonal() * dc_de;
    return j;
}

MatrixXd propagated_jacobian(const LstmTensors& p, const std::vector<StepCache>& trace, std::size_t t, std::size_t tau)
{
    check_anchor(trace, t, tau);
    MatrixXd j = cell_jacobians(p, trace[t - tau]).b;
    for (std::size_t s = t - tau + 1; s <= t; ++s) j = cell_jacobians(p, trace[s]).a * j;
    return j;
}

GradientMatrix delayed_jacobian(const LstmTensors& p, const std::vector<StepCache>& trace, std::size_t t,
                                std::size_t tau, StateSelector state)
{
    const MatrixXd full = propagated_jacobian(p, trace, t, tau);
    const Index H = p.hidden_dim();
    GradientMatrix g;
    g.data = state == StateSelector::cell ? full.topRows(H) : full.bottomRows(H);
    g.tau = tau;
    g.state = state;
    return g;
}

GradientMatrix delayed_jacobian(const LstmTensors& p, const std::vector<WordId>& tokens, std::size_t t,
                                std::size_t tau, StateSelector state)
{
    return delayed_jacobian(p, trace_forward(p, tokens, LstmState::zero(p.hidden_dim())), t, tau, state);
}

std::vector<GradientMatrix> backward_sweep(const LstmTensors& p, const std::vector<StepCache>& trace, std::size_t t,
                                           std::size_t tau_max, StateSelector state)
{
    check_anchor(trace, t, tau_max);
    const Index H = p.hidden_dim();

    // adjoint rows: one per analysed state component
    MatrixXd lam_c = MatrixXd::Zero(H, H);
    MatrixXd lam_h = MatrixXd::Zero(H, H);
    (state == StateSelector::cell ? lam_c : lam_h).setIdentity();
    MatrixXd dz(H, 4 * H);

    std::vector<GradientMatrix> out;
    out.reserve(tau_max + 1);
    for (std::size_t tau = 0; tau <= tau_max; ++tau) {
        const StepCache& k = trace[t - tau];
        check_cache(p, k);
        const GateSlopes s = gate_slopes(k);

        const MatrixXd lam_c_total = lam_c + lam_h * s.dh_dc.asDiagonal();
        dz.middleCols(0, H) = lam_c_total * s.dc_di.asDiagonal();
        dz.middleCols(H, H) = lam_c_total * s.dc_df.asDiagonal();
        dz.middleCols(2 * H, H) = lam_c_total * s.dc_dg.asDiagonal();
        dz.middleCols(3 * H, H) = lam_h * s.dh_do.asDiagonal();

        GradientMatrix g;
        g.data = dz * p.w;
        g.tau = tau;
        g.state = state;
        out.push_back(std::move(g));

        if (tau < tau_max) {
            lam_h = dz * p.u;
            lam_c = lam_c_total * k.f.asDiagonal();
        }
    }
    return out;
}

std::vector<AnalysisStream> trace_streams(const LstmTensors& p, const std::vector<std::vector<WordId>>& streams)
{
    std::vector<AnalysisStream> out;
    out.reserve(streams.size());
    for (const auto& s : streams) out.push_back({s, trace_forward(p, s, LstmState::zero(p.hidden_dim()))});
    return out;
}

std::vector<AnchorRef> select_anchors(const std::vector<AnalysisStream>& streams, std::size_t tau,
                                      const AnchorPolicy& policy, const WordClass* filter)
{
    if (policy.stride == 0) throw std::invalid_argument("anchor stride must be positive");
    std::vector<AnchorRef> out;
    const std::size_t first = std::max(tau, policy.min_history);
    for (std::size_t si = 0; si < streams.size(); ++si) {
        const auto& tokens = streams[si].tokens;
        for (std::size_t t = first; t < tokens.size(); t += policy.stride) {
            if (filter && !filter->members.count(tokens[t - tau])) continue;
            out.push_back({si, t});
        }
    }
    return out;
}

namespace {

// Contributions are summed in chunks of fixed size; chunk sums are then added
// in chunk order. The result is bitwise independent of the thread count.
constexpr std::size_t kChunk = 32;

template <typename Contribution>
std::vector<MatrixXd> ordered_chunk_sum(std::size_t n_items, std::size_t n_outputs, Index rows, Index cols, int jobs,
                                        Contribution contribution)
{
    std::vector<MatrixXd> total(n_outputs, MatrixXd::Zero(rows, cols));
    const std::size_t n_chunks = (n_items + kChunk - 1) / kChunk;
    const std::size_t wave = static_cast<std::size_t>(std::max(1, jobs));

    std::vector<std::vector<MatrixXd>> partial(wave);
    std::vector<std::exception_ptr> errors(wave);
    for (std::size_t base = 0; base < n_chunks; base += wave) {
        const std::size_t in_wave = std::min(wave, n_chunks - base);
        auto work = [&](std::size_t slot) {
            try {
                auto& acc = partial[slot];
                acc.assign(n_outputs, MatrixXd::Zero(rows, cols));
                const std::size_t lo = (base + slot) * kChunk;
                const std::size_t hi = std::min(n_items, lo + kChunk);
                for (std::size_t i = lo; i < hi; ++i) contribution(i, acc);
            } catch (...) {
                errors[slot] = std::current_exception();
            }
        };
        if (in_wave == 1) {
            work(0);
        } else {
            std::vector<std::thread> threads;
            for (std::size_t slot = 0; slot < in_wave; ++slot) threads.emplace_back(work, slot);
            for (auto& th : threads) th.join();
        }
        for (std::size_t slot = 0; slot < in_wave; ++slot)
            if (errors[slot]) std::rethrow_exception(errors[slot]);
        for (std::size_t slot = 0; slot < in_wave; ++slot)
            for (std::size_t o = 0; o < n_outputs; ++o) total[o] += partial[slot][o];
    }
    return total;
}

}  // namespace

GradientMatrix average_gradients(const LstmTensors& p, const std::vector<AnalysisStream>& streams, std::size_t tau,
                                 const std::vector<AnchorRef>& anchors, StateSelector state, int jobs)
{
    if (anchors.empty()) throw std::invalid_argument("average_gradients: no anchors for delay " + std::to_string(tau));
    auto sums = ordered_chunk_sum(anchors.size(), 1, p.hidden_dim(), p.emb_dim(), jobs,
                                  [&](std::size_t i, std::vector<MatrixXd>& acc) {
                                      const auto& a = anchors[i];
                                      if (a.stream >= streams.size())
                                          throw std::out_of_range("average_gradients: anchor stream out of range");
                                      acc[0] += delayed_jacobian(p, streams[a.stream].trace, a.t, tau, state).data;
                                  });
    GradientMatrix g;
    g.data = sums[0] / static_cast<double>(anchors.size());
    g.tau = tau;
    g.anchors = anchors.size();
    g.state = state;
    return g;
}

GradientMatrix average_gradients(const LstmTensors& p, const std::vector<AnalysisStream>& streams, std::size_t tau,
                                 const AnchorPolicy& policy, const WordClass* filter, StateSelector state, int jobs)
{
    const auto anchors = select_anchors(streams, tau, policy, filter);
    const std::string cls = filter ? filter->name : "all";
    if (anchors.empty())
        throw std::invalid_argument("average_gradients: no anchors for delay " + std::to_string(tau) + ", class " + cls);
    GradientMatrix g = average_gradients(p, streams, tau, anchors, state, jobs);
    g.class_name = cls;
    return g;
}

std::vector<GradientMatrix> average_gradient_curve(const LstmTensors& p, const std::vector<AnalysisStream>& streams,
                                                   std::size_t tau_max, const AnchorPolicy& policy,
                                                   const WordClass* filter, StateSelector state, int jobs)
{
    AnchorPolicy sweep_policy = policy;
    sweep_policy.min_history = std::max(policy.min_history, tau_max);
    // unfiltered anchors; the class test is applied per delay below
    const auto anchors = select_anchors(streams, 0, sweep_policy, nullptr);
    const std::size_t n_tau = tau_max + 1;
    std::vector<std::size_t> counts(n_tau, 0);
    for (const auto& a : anchors) {
        for (std::size_t tau = 0; tau < n_tau; ++tau)
            if (!filter || filter->members.count(streams[a.stream].tokens[a.t - tau])) ++counts[tau];
    }
    const std::string cls = filter ? filter->name : "all";
    for (std::size_t tau = 0; tau < n_tau; ++tau) {
        if (counts[tau] == 0)
            throw std::invalid_argument("average_gradient_curve: no anchors for delay " + std::to_string(tau) +
                                        ", class " + cls);
    }

    auto sums = ordered_chunk_sum(anchors.size(), n_tau, p.hidden_dim(), p.emb_dim(), jobs,
                                  [&](std::size_t i, std::vector<MatrixXd>& acc) {
                                      const auto& a = anchors[i];
                                      const auto& tokens = streams[a.stream].tokens;
                                      const auto sweep = backward_sweep(p, streams[a.stream].trace, a.t, tau_max, state);
                                      for (std::size_t tau = 0; tau < n_tau; ++tau) {
                                          if (!filter || filter->members.count(tokens[a.t - tau]))
                                              acc[tau] += sweep[tau].data;
                                      }
                                  });

    std::vector<GradientMatrix> out(n_tau);
    for (std::size_t tau = 0; tau < n_tau; ++tau) {
        out[tau].data = sums[tau] / static_cast<double>(counts[tau]);
        out[tau].tau = tau;
        out[tau].anchors = counts[tau];
        out[tau].class_name = cls;
        out[tau].state = state;
    }
    return out;
}

void save_gradient_matrix(const std::string& path, const GradientMatrix& g)
{
    save_matrix(path, g.data);
    std::ostringstream os;
    os << "tau=" << g.tau << " anchors=" << g.anchors << " class=" << g.class_name << " state=" << to_string(g.state)
       << '\n';
    write_file_atomic(path + ".meta", os.str());
}

GradientMatrix load_gradient_matrix(const std::string& path)
{
    GradientMatrix g;
    g.data = load_matrix(path);
    for (const auto& field : split_whitespace(read_file(path + ".meta"))) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) throw std::runtime_error(path + ".meta: malformed field '" + field + "'");
        const std::string key = field.substr(0, eq);
        const std::string val = field.substr(eq + 1);
        if (key == "tau") g.tau = std::stoull(val);
        else if (key == "anchors") g.anchors = std::stoull(val);
        else if (key == "class") g.class_name = val;
        else if (key == "state") g.state = parse_state_selector(val);
    }
    return g;
}

}  // namespace statemem
