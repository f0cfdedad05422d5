#pragma once

#include "statemem/jacobian.hpp"
#include "statemem/linalg.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace statemem {

struct LabeledEmbeddings {
    MatrixXd x;                       // N x E, one row per word type
    std::vector<int> y;               // N labels in [0, classes)
    std::vector<std::string> labels;  // class names

    std::size_t size() const { return y.size(); }
    int num_classes() const { return static_cast<int>(labels.size()); }
    void validate() const;
};

// One row per member word of each class; label = position in `classes`.
LabeledEmbeddings labeled_from_classes(const MatrixXd& table, const std::vector<WordClass>& classes);

// Stratified, seeded split; `valid_fraction` of each class goes to validation.
std::pair<LabeledEmbeddings, LabeledEmbeddings> split_train_valid(const LabeledEmbeddings& data, double valid_fraction,
                                                                  std::uint64_t seed);

// Per-feature z-scoring fitted on one set and applied to others. Constant
// features are centred but not scaled.
struct Standardizer {
    VectorXd mean;
    VectorXd scale;

    static Standardizer fit(const MatrixXd& x);
    MatrixXd apply(const MatrixXd& x) const;
};

enum class Penalty { l1, l2 };
enum class ClassWeighting { uniform, inverse_frequency };
enum class LossKind { one_vs_rest, multinomial };

struct HyperPoint {
    Penalty penalty = Penalty::l2;
    double strength = 1e-4;
    std::uint64_t seed = 0;
    ClassWeighting weighting = ClassWeighting::uniform;
    LossKind loss = LossKind::multinomial;

    std::string describe() const;
};

struct HyperGrid {
    std::vector<Penalty> penalties{Penalty::l2, Penalty::l1};
    std::vector<double> strengths{1e-4, 1e-3, 1e-2, 1e-1};
    std::vector<std::uint64_t> seeds{0};
    std::vector<ClassWeighting> weightings{ClassWeighting::uniform, ClassWeighting::inverse_frequency};
    std::vector<LossKind> losses{LossKind::one_vs_rest, LossKind::multinomial};

    // Cartesian product, penalty outermost, loss innermost.
    std::vector<HyperPoint> points() const;
    void validate() const;
};

// "key=v1,v2" lines; keys: penalty, strength, seed, class_weight, loss.
// Axes not mentioned keep their defaults.
HyperGrid parse_grid(const std::string& text);

struct LinearClassifier {
    MatrixXd weights;  // classes x E
    VectorXd bias;     // classes
    HyperPoint hyper;
    int iterations = 0;
    bool converged = false;

    // Argmax class per row; ties go to the lowest index.
    std::vector<int> predict(const MatrixXd& x) const;
};

struct SolverOptions {
    int max_iterations = 5000;
    double tolerance = 1e-6;
};

// Weighted mean cross-entropy + strength * (0.5 ||W||^2 or ||W||_1), bias
// unpenalized, minimized by proximal gradient with backtracking.
LinearClassifier train_logreg(const LabeledEmbeddings& data, const HyperPoint& hyper, const SolverOptions& opts = {});

double accuracy(const LinearClassifier& clf, const LabeledEmbeddings& data);

struct GridRow {
    HyperPoint hyper;
    bool ok = false;
    double train_accuracy = 0.0;
    double valid_accuracy = 0.0;
    std::string error;
};

struct GridResult {
    LinearClassifier best;
    double best_valid_accuracy = 0.0;
    std::vector<GridRow> rows;
};

// Best validation accuracy wins; ties keep the earliest grid point. Failed
// points are recorded and skipped.
GridResult grid_search(const LabeledEmbeddings& train, const LabeledEmbeddings& valid, const HyperGrid& grid,
                       const SolverOptions& opts = {}, int jobs = 1);

std::string grid_results_csv(const GridResult& result);

}  // namespace statemem
