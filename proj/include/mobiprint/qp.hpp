#pragma once

#include <Eigen/Dense>
#include <string>

#include "mobiprint/errors.hpp"

namespace mobiprint::qp {

/// minimize 1/2 x'Hx + g'x  subject to  l <= Ax <= u
/// Equalities are encoded as rows with l = u. One-sided rows use +/-inf.
struct QpProblem {
    Eigen::MatrixXd H;
    Eigen::VectorXd g;
    Eigen::MatrixXd A;
    Eigen::VectorXd l, u;

    int n() const { return static_cast<int>(H.rows()); }
    int m() const { return static_cast<int>(A.rows()); }

    /// Dimension agreement, H symmetric within 1e-9, l <= u. The PSD
    /// eigenvalue check is O(n^3) and only runs when requested.
    void validate(bool check_psd = false) const;
};

enum class SolveStatus { Solved, MaxIterations, PrimalInfeasible };

const char* to_string(SolveStatus status);

struct QpSolution {
    Eigen::VectorXd x;
    Eigen::VectorXd y;  // constraint duals, length m
    SolveStatus status = SolveStatus::MaxIterations;
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double objective = 0.0;
};

struct QpSettings {
    double eps_primal = 1e-6;
    double eps_dual = 1e-6;
    int max_iter = 4000;
    double rho = 0.1;
    double sigma = 1e-6;
    double alpha = 1.6;  // over-relaxation
    bool adaptive_rho = true;
    int adapt_interval = 25;
    double eps_infeasible = 1e-4;
    double equality_rho_scale = 1e3;
    int scaling_iters = 10;  // Ruiz equilibration passes (0 disables)
    bool polish = true;      // active-set refinement, kept only when it verifies
    int polish_start = 50;   // first iteration to attempt a polish, then doubling
};

/// Operator-splitting solver. Holds workspace and, when warm starting is
/// on (default), carries primal/dual iterates into the next solve of a
/// same-shaped problem. One instance per concurrent caller.
class QpSolver {
public:
    explicit QpSolver(QpSettings settings = {});

    QpSolution solve(const QpProblem& problem);

    void set_warm_start(bool enabled) { warm_start_ = enabled; }
    bool warm_start() const { return warm_start_; }
    void reset();

    const QpSettings& settings() const { return settings_; }

private:
    QpSettings settings_;
    bool warm_start_ = true;
    bool have_state_ = false;
    Eigen::VectorXd x_, y_, z_;
};

/// One-shot cold solve with the stated tolerances.
QpSolution solve_qp(const QpProblem& problem, double eps_primal = 1e-6,
                    double eps_dual = 1e-6, int max_iter = 4000);

/// Structured text for failure triage.
std::string dump_problem(const QpProblem& problem);

}  // namespace mobiprint::qp
