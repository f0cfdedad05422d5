#include "statemem/separability.hpp"

#include "statemem/io.hpp"
#include "statemem/random.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <thread>

namespace statemem {

void LabeledEmbeddings::validate() const
{
    if (static_cast<Index>(y.size()) != x.rows())
        throw std::invalid_argument("labeled data: " + std::to_string(y.size()) + " labels for " +
                                    std::to_string(x.rows()) + " rows");
    for (int label : y) {
        if (label < 0 || label >= num_classes()) throw std::invalid_argument("labeled data: label out of range");
    }
}

LabeledEmbeddings labeled_from_classes(const MatrixXd& table, const std::vector<WordClass>& classes)
{
    LabeledEmbeddings out;
    std::size_t n = 0;
    for (const auto& c : classes) n += c.members.size();
    out.x.resize(static_cast<Index>(n), table.cols());
    Index row = 0;
    std::map<WordId, std::string> owner;
    for (std::size_t label = 0; label < classes.size(); ++label) {
        out.labels.push_back(classes[label].name);
        for (WordId id : classes[label].members) {
            if (static_cast<Index>(id) >= table.rows()) throw std::out_of_range("labeled data: word index out of range");
            if (auto [it, fresh] = owner.emplace(id, classes[label].name); !fresh)
                throw std::invalid_argument("labeled data: word " + std::to_string(id) + " is in both '" + it->second +
                                            "' and '" + classes[label].name + "'");
            out.x.row(row++) = table.row(static_cast<Index>(id));
            out.y.push_back(static_cast<int>(label));
        }
    }
    return out;
}

std::pair<LabeledEmbeddings, LabeledEmbeddings> split_train_valid(const LabeledEmbeddings& data, double valid_fraction,
                                                                  std::uint64_t seed)
{
    data.validate();
    if (!(valid_fraction > 0.0 && valid_fraction < 1.0))
        throw std::invalid_argument("split: validation fraction must be in (0, 1)");
    Rng rng(seed);
    std::vector<Index> train_rows, valid_rows;
    for (int c = 0; c < data.num_classes(); ++c) {
        std::vector<Index> rows;
        for (std::size_t i = 0; i < data.size(); ++i)
            if (data.y[i] == c) rows.push_back(static_cast<Index>(i));
        for (std::size_t i = rows.size(); i > 1; --i) std::swap(rows[i - 1], rows[rng.index(i)]);
        std::size_t n_valid = static_cast<std::size_t>(std::round(valid_fraction * static_cast<double>(rows.size())));
        if (rows.size() >= 2) n_valid = std::clamp<std::size_t>(n_valid, 1, rows.size() - 1);
        else n_valid = 0;
        valid_rows.insert(valid_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_valid));
        train_rows.insert(train_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_valid), rows.end());
    }
    auto take = [&](const std::vector<Index>& rows) {
        LabeledEmbeddings out;
        out.labels = data.labels;
        out.x.resize(static_cast<Index>(rows.size()), data.x.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            out.x.row(static_cast<Index>(i)) = data.x.row(rows[i]);
            out.y.push_back(data.y[static_cast<std::size_t>(rows[i])]);
        }
        return out;
    };
    return {take(train_rows), take(valid_rows)};
}

Standardizer Standardizer::fit(const MatrixXd& x)
{
    if (x.rows() == 0) throw std::invalid_argument("standardize: no samples");
    Standardizer s;
    s.mean = x.colwise().mean().transpose();
    s.scale.resize(x.cols());
    for (Index c = 0; c < x.cols(); ++c) {
        const double sd = std::sqrt((x.col(c).array() - s.mean(c)).square().mean());
        s.scale(c) = sd > 0.0 ? sd : 1.0;
    }
    return s;
}

MatrixXd Standardizer::apply(const MatrixXd& x) const
{
    if (x.cols() != mean.size()) throw std::invalid_argument("standardize: feature dimension mismatch");
    return ((x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array()).matrix();
}

std::string HyperPoint::describe() const
{
    std::ostringstream os;
    os << "penalty=" << (penalty == Penalty::l1 ? "l1" : "l2") << " strength=" << strength
       << " seed=" << seed << " class_weight=" << (weighting == ClassWeighting::uniform ? "uniform" : "inverse")
       << " loss=" << (loss == LossKind::multinomial ? "multinomial" : "ovr");
    return os.str();
}

std::vector<HyperPoint> HyperGrid::points() const
{
    validate();
    std::vector<HyperPoint> out;
    for (auto p : penalties)
        for (double s : strengths)
            for (auto seed : seeds)
                for (auto w : weightings)
                    for (auto l : losses) out.push_back({p, s, seed, w, l});
    return out;
}

void HyperGrid::validate() const
{
    if (penalties.empty() || strengths.empty() || seeds.empty() || weightings.empty() || losses.empty())
        throw std::invalid_argument("grid: every axis needs at least one value");
    for (double s : strengths)
        if (!(s >= 0.0) || !std::isfinite(s)) throw std::invalid_argument("grid: strengths must be finite and >= 0");
}

HyperGrid parse_grid(const std::string& text)
{
    HyperGrid grid;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("grid line " + std::to_string(lineno) + ": expected key=values");
        const std::string key = trim(t.substr(0, eq));
        std::vector<std::string> values;
        for (const auto& v : split(t.substr(eq + 1), ',')) values.push_back(trim(v));
        auto bad = [&](const std::string& v) {
            return std::invalid_argument("grid line " + std::to_string(lineno) + ": bad value '" + v + "' for " + key);
        };
        if (key == "penalty") {
            grid.penalties.clear();
            for (const auto& v : values) {
                if (v == "l1" || v == "L1") grid.penalties.push_back(Penalty::l1);
                else if (v == "l2" || v == "L2") grid.penalties.push_back(Penalty::l2);
                else throw bad(v);
            }
        } else if (key == "strength") {
            grid.strengths.clear();
            for (const auto& v : values) grid.strengths.push_back(parse_double(v));
        } else if (key == "seed") {
            grid.seeds.clear();
            for (const auto& v : values) grid.seeds.push_back(std::stoull(v));
        } else if (key == "class_weight") {
            grid.weightings.clear();
            for (const auto& v : values) {
                if (v == "uniform" || v == "none") grid.weightings.push_back(ClassWeighting::uniform);
                else if (v == "inverse" || v == "balanced") grid.weightings.push_back(ClassWeighting::inverse_frequency);
                else throw bad(v);
            }
        } else if (key == "loss") {
            grid.losses.clear();
            for (const auto& v : values) {
                if (v == "ovr" || v == "one-vs-rest") grid.losses.push_back(LossKind::one_vs_rest);
                else if (v == "multinomial") grid.losses.push_back(LossKind::multinomial);
                else throw bad(v);
            }
        } else {
            throw std::invalid_argument("grid line " + std::to_string(lineno) + ": unknown axis '" + key + "'");
        }
    }
    grid.validate();
    return grid;
}

std::vector<int> LinearClassifier::predict(const MatrixXd& x) const
{
    if (x.cols() != weights.cols()) throw std::invalid_argument("predict: feature dimension mismatch");
    const MatrixXd scores = (x * weights.transpose()).rowwise() + bias.transpose();
    std::vector<int> out(static_cast<std::size_t>(x.rows()));
    for (Index i = 0; i < x.rows(); ++i) {
        Index best = 0;
        for (Index c = 1; c < scores.cols(); ++c)
            if (scores(i, c) > scores(i, best)) best = c;
        out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
}

namespace {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

// Smooth part of the objective for a block of outputs: loss and gradient with
// respect to (W, b).
struct Smooth {
    double value;
    MatrixXd grad_w;
    VectorXd grad_b;
};

// Multinomial cross-entropy; `labels` in [0, k).
Smooth multinomial_loss(const MatrixXd& x, const std::vector<int>& labels, const VectorXd& sample_w, double weight_sum,
                        const MatrixXd& w, const VectorXd& b)
{
    MatrixXd s = (x * w.transpose()).rowwise() + b.transpose();
    double value = 0.0;
    for (Index i = 0; i < s.rows(); ++i) {
        const double mx = s.row(i).maxCoeff();
        const double lse = mx + std::log((s.row(i).array() - mx).exp().sum());
        const int y = labels[static_cast<std::size_t>(i)];
        value += sample_w(i) * (lse - s(i, y));
        s.row(i) = (s.row(i).array() - lse).exp();
        s(i, y) -= 1.0;
        s.row(i) *= sample_w(i) / weight_sum;
    }
    return {value / weight_sum, s.transpose() * x, s.colwise().sum().transpose()};
}

// Binary logistic loss for a single output row; `positive[i]` marks the class.
Smooth binary_loss(const MatrixXd& x, const std::vector<bool>& positive, const VectorXd& sample_w, double weight_sum,
                   const MatrixXd& w, const VectorXd& b)
{
    VectorXd z = x * w.row(0).transpose();
    z.array() += b(0);
    double value = 0.0;
    VectorXd dz(z.size());
    for (Index i = 0; i < z.size(); ++i) {
        const bool pos = positive[static_cast<std::size_t>(i)];
        value += sample_w(i) * softplus(pos ? -z(i) : z(i));
        dz(i) = sample_w(i) * (sigmoid(z(i)) - (pos ? 1.0 : 0.0)) / weight_sum;
    }
    Smooth out{value / weight_sum, (dz.transpose() * x), VectorXd::Constant(1, dz.sum())};
    return out;
}

MatrixXd penalty_prox(const MatrixXd& w, double step, const HyperPoint& h)
{
    if (h.penalty == Penalty::l2) return w / (1.0 + step * h.strength);
    const double thr = step * h.strength;
    return w.unaryExpr([thr](double v) { return v > thr ? v - thr : (v < -thr ? v + thr : 0.0); });
}

struct SolveResult {
    MatrixXd w;
    VectorXd b;
    int iterations = 0;
    bool converged = false;
};

// Proximal gradient descent with backtracking on the smooth part.
template <typename Loss>
SolveResult minimize(Loss loss, MatrixXd w, VectorXd b, const HyperPoint& h, const SolverOptions& opts)
{
    double step = 1.0;
    SolveResult r;
    Smooth cur = loss(w, b);
    if (!std::isfinite(cur.value)) throw std::runtime_error("train_logreg: non-finite loss at initialization");
    for (int it = 1; it <= opts.max_iterations; ++it) {
        MatrixXd w_next;
        VectorXd b_next;
        Smooth next;
        for (int bt = 0;; ++bt) {
            w_next = penalty_prox(w - step * cur.grad_w, step, h);
            b_next = b - step * cur.grad_b;
            next = loss(w_next, b_next);
            const double dw = (w_next - w).squaredNorm() + (b_next - b).squaredNorm();
            const double lin = (cur.grad_w.cwiseProduct(w_next - w)).sum() + cur.grad_b.dot(b_next - b);
            if (std::isfinite(next.value) && next.value <= cur.value + lin + dw / (2.0 * step) + 1e-15) break;
            step *= 0.5;
            if (bt > 200) throw std::runtime_error("train_logreg: line search failed");
        }
        // gradient mapping norm
        const double gm = std::sqrt((w - w_next).squaredNorm() + (b - b_next).squaredNorm()) / step;
        w = std::move(w_next);
        b = std::move(b_next);
        cur = std::move(next);
        r.iterations = it;
        if (!std::isfinite(cur.value)) throw std::runtime_error("train_logreg: non-finite loss");
        if (gm < opts.tolerance) {
            r.converged = true;
            break;
        }
        step *= 2.0;
    }
    r.w = std::move(w);
    r.b = std::move(b);
    return r;
}

}  // namespace

LinearClassifier train_logreg(const LabeledEmbeddings& data, const HyperPoint& hyper, const SolverOptions& opts)
{
    data.validate();
    const int k = data.num_classes();
    std::vector<std::size_t> per_class(static_cast<std::size_t>(std::max(k, 0)), 0);
    for (int y : data.y) ++per_class[static_cast<std::size_t>(y)];
    const auto present = std::count_if(per_class.begin(), per_class.end(), [](std::size_t n) { return n > 0; });
    if (present < 2) throw std::invalid_argument("train_logreg: data must contain at least two classes");
    if (!data.x.allFinite()) throw std::invalid_argument("train_logreg: non-finite features");
    if (!(hyper.strength >= 0.0)) throw std::invalid_argument("train_logreg: strength must be >= 0");

    const Index n = data.x.rows();
    const Index e = data.x.cols();
    VectorXd sample_w = VectorXd::Ones(n);
    if (hyper.weighting == ClassWeighting::inverse_frequency) {
        for (Index i = 0; i < n; ++i) {
            const auto nc = per_class[static_cast<std::size_t>(data.y[static_cast<std::size_t>(i)])];
            sample_w(i) = static_cast<double>(n) / (static_cast<double>(present) * static_cast<double>(nc));
        }
    }
    const double weight_sum = sample_w.sum();

    Rng rng(hyper.seed);
    auto init_w = [&](Index rows) {
        MatrixXd w(rows, e);
        for (Index c = 0; c < e; ++c)
            for (Index r = 0; r < rows; ++r) w(r, c) = 0.01 * rng.normal();
        return w;
    };

    LinearClassifier clf;
    clf.hyper = hyper;
    clf.weights.resize(k, e);
    clf.bias.resize(k);
    if (hyper.loss == LossKind::multinomial) {
        auto loss = [&](const MatrixXd& w, const VectorXd& b) {
            return multinomial_loss(data.x, data.y, sample_w, weight_sum, w, b);
        };
        auto r = minimize(loss, init_w(k), VectorXd::Zero(k), hyper, opts);
        clf.weights = std::move(r.w);
        clf.bias = std::move(r.b);
        clf.iterations = r.iterations;
        clf.converged = r.converged;
    } else {
        clf.converged = true;
        for (int c = 0; c < k; ++c) {
            std::vector<bool> positive(static_cast<std::size_t>(n));
            for (Index i = 0; i < n; ++i) positive[static_cast<std::size_t>(i)] = data.y[static_cast<std::size_t>(i)] == c;
            auto loss = [&](const MatrixXd& w, const VectorXd& b) {
                return binary_loss(data.x, positive, sample_w, weight_sum, w, b);
            };
            auto r = minimize(loss, init_w(1), VectorXd::Zero(1), hyper, opts);
            clf.weights.row(c) = r.w.row(0);
            clf.bias(c) = r.b(0);
            clf.iterations = std::max(clf.iterations, r.iterations);
            clf.converged = clf.converged && r.converged;
        }
    }
    if (!clf.weights.allFinite() || !clf.bias.allFinite()) throw std::runtime_error("train_logreg: non-finite weights");
    return clf;
}

double accuracy(const LinearClassifier& clf, const LabeledEmbeddings& data)
{
    data.validate();
    if (data.size() == 0) return 0.0;
    const auto pred = clf.predict(data.x);
    std::size_t right = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) right += pred[i] == data.y[i];
    return static_cast<double>(right) / static_cast<double>(data.size());
}

GridResult grid_search(const LabeledEmbeddings& train, const LabeledEmbeddings& valid, const HyperGrid& grid,
                       const SolverOptions& opts, int jobs)
{
    if (valid.size() == 0) throw std::invalid_argument("grid_search: empty validation set");
    const auto points = grid.points();
    GridResult result;
    result.rows.resize(points.size());
    std::vector<LinearClassifier> models(points.size());

    auto run = [&](std::size_t i) {
        GridRow& row = result.rows[i];
        row.hyper = points[i];
        try {
            models[i] = train_logreg(train, points[i], opts);
            row.train_accuracy = accuracy(models[i], train);
            row.valid_accuracy = accuracy(models[i], valid);
            row.ok = true;
        } catch (const std::exception& ex) {
            row.error = ex.what();
        }
    };
    const std::size_t workers = static_cast<std::size_t>(std::max(1, jobs));
    if (workers == 1) {
        for (std::size_t i = 0; i < points.size(); ++i) run(i);
    } else {
        std::vector<std::thread> threads;
        for (std::size_t wkr = 0; wkr < workers; ++wkr)
            threads.emplace_back([&, wkr] {
                for (std::size_t i = wkr; i < points.size(); i += workers) run(i);
            });
        for (auto& th : threads) th.join();
    }

    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!result.rows[i].ok) continue;
        if (!best || result.rows[i].valid_accuracy > result.rows[*best].valid_accuracy) best = i;
    }
    if (!best) {
        std::string msg = "grid_search: every grid point failed";
        if (!result.rows.empty()) msg += " (first error: " + result.rows.front().error + ")";
        throw std::runtime_error(msg);
    }
    result.best = models[*best];
    result.best_valid_accuracy = result.rows[*best].valid_accuracy;
    return result;
}

std::string grid_results_csv(const GridResult& result)
{
    std::ostringstream os;
    os << "penalty,strength,seed,class_weight,loss,train_accuracy,valid_accuracy,status\n";
    for (const auto& r : result.rows) {
        const auto& h = r.hyper;
        os << (h.penalty == Penalty::l1 ? "l1" : "l2") << ',' << format_double(h.strength) << ',' << h.seed << ','
           << (h.weighting == ClassWeighting::uniform ? "uniform" : "inverse") << ','
           << (h.loss == LossKind::multinomial ? "multinomial" : "ovr") << ',' << format_double(r.train_accuracy) << ','
           << format_double(r.valid_accuracy) << ',' << (r.ok ? "ok" : "failed") << '\n';
    }
    return os.str();
}

}  // namespace statemem
