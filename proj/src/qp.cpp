#include "mobiprint/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace mobiprint::qp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const Eigen::VectorXd& v) {
    return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

/// Certificate of primal infeasibility from a convergent dual direction:
/// A'dy ~ 0 with the support functional u'(dy)+ + l'(dy)- strictly negative.
bool certifies_infeasible(const QpProblem& p, const Eigen::VectorXd& delta_y, double eps) {
    const double dy_norm = inf_norm(delta_y);
    if (dy_norm <= 1e-14) return false;
    if (inf_norm(p.A.transpose() * delta_y) > eps * dy_norm) return false;
    double support = 0.0;
    for (int i = 0; i < p.m(); ++i) {
        const double dp = std::max(delta_y(i), 0.0);
        const double dm = std::min(delta_y(i), 0.0);
        if (dp > 0.0) {
            if (!std::isfinite(p.u(i))) {
                if (dp > eps * dy_norm) return false;
            } else {
                support += p.u(i) * dp;
            }
        }
        if (dm < 0.0) {
            if (!std::isfinite(p.l(i))) {
                if (dm < -eps * dy_norm) return false;
            } else {
                support += p.l(i) * dm;
            }
        }
    }
    return support <= -eps * dy_norm;
}

/// Ruiz equilibration of the [H A'; A 0] aggregate plus a cost normalization.
/// Rewrites (Hs, gs, As) in place; D, E, c map back to the original problem by
/// x = D x_bar, y = (1/c) E y_bar, z = E^-1 z_bar.
void ruiz_equilibrate(Eigen::MatrixXd& Hs, Eigen::VectorXd& gs, Eigen::MatrixXd& As,
                      Eigen::VectorXd& D, Eigen::VectorXd& E, double& c, int passes) {
    const int n = static_cast<int>(Hs.rows());
    const int m = static_cast<int>(As.rows());
    D.setOnes(n);
    E.setOnes(m);
    c = 1.0;
    Eigen::VectorXd d(n), e(m);
    for (int pass = 0; pass < passes; ++pass) {
        for (int j = 0; j < n; ++j) {
            double nj = Hs.col(j).cwiseAbs().maxCoeff();
            if (m > 0) nj = std::max(nj, As.col(j).cwiseAbs().maxCoeff());
            d(j) = nj > 1e-12 ? 1.0 / std::sqrt(nj) : 1.0;
        }
        for (int i = 0; i < m; ++i) {
            const double ni = As.row(i).cwiseAbs().maxCoeff();
            e(i) = ni > 1e-12 ? 1.0 / std::sqrt(ni) : 1.0;
        }
        Hs = d.asDiagonal() * Hs * d.asDiagonal();
        gs = gs.cwiseProduct(d);
        if (m > 0) As = e.asDiagonal() * As * d.asDiagonal();
        D = D.cwiseProduct(d);
        E = E.cwiseProduct(e);

        double mean_col = 0.0;
        for (int j = 0; j < n; ++j) mean_col += Hs.col(j).cwiseAbs().maxCoeff();
        if (n > 0) mean_col /= n;
        const double denom = std::max(mean_col, inf_norm(gs));
        const double gamma = denom > 1e-12 ? 1.0 / denom : 1.0;
        Hs *= gamma;
        gs *= gamma;
        c *= gamma;
    }
}

struct Polished {
    Eigen::VectorXd x, y;
    double r_prim = 0.0, r_dual = 0.0;
    bool ok = false;
};

/// Equality-solve on the active set guessed from dual signs, verified against
/// the original problem. The iterates give exact zeros on inactive duals, so
/// the sign of y is a reliable activity detector for this splitting.
Polished try_polish(const QpProblem& p, const Eigen::VectorXd& y_hint, double eps_primal,
                    double eps_dual) {
    Polished out;
    const int n = p.n();
    const int m = p.m();
    std::vector<int> rows;
    std::vector<double> bound;
    std::vector<int> side;  // -1 lower, +1 upper, 0 equality
    for (int i = 0; i < m; ++i) {
        const bool eq =
            std::isfinite(p.l(i)) && std::isfinite(p.u(i)) && p.u(i) - p.l(i) <= 1e-12;
        if (eq) {
            rows.push_back(i);
            bound.push_back(p.l(i));
            side.push_back(0);
        } else if (y_hint(i) < 0.0 && std::isfinite(p.l(i))) {
            rows.push_back(i);
            bound.push_back(p.l(i));
            side.push_back(-1);
        } else if (y_hint(i) > 0.0 && std::isfinite(p.u(i))) {
            rows.push_back(i);
            bound.push_back(p.u(i));
            side.push_back(+1);
        }
    }
    const int k = static_cast<int>(rows.size());

    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + k, n + k);
    kkt.topLeftCorner(n, n) = p.H;
    for (int r = 0; r < k; ++r) {
        kkt.block(n + r, 0, 1, n) = p.A.row(rows[r]);
        kkt.block(0, n + r, n, 1) = p.A.row(rows[r]).transpose();
    }
    Eigen::MatrixXd kkt_reg = kkt;
    kkt_reg.topLeftCorner(n, n).diagonal().array() += 1e-9;
    kkt_reg.bottomRightCorner(k, k).diagonal().array() -= 1e-9;

    Eigen::VectorXd rhs(n + k);
    rhs.head(n) = -p.g;
    for (int r = 0; r < k; ++r) rhs(n + r) = bound[r];

    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(kkt_reg);
    Eigen::VectorXd sol = lu.solve(rhs);
    for (int refine = 0; refine < 3; ++refine) {
        const Eigen::VectorXd resid = rhs - kkt * sol;
        if (inf_norm(resid) < 1e-14) break;
        sol += lu.solve(resid);
    }
    if (!sol.allFinite()) return out;

    out.x = sol.head(n);
    out.y = Eigen::VectorXd::Zero(m);
    for (int r = 0; r < k; ++r) {
        const double nu = sol(n + r);
        if (side[r] < 0 && nu > eps_dual) return out;  // wrong-side multiplier
        if (side[r] > 0 && nu < -eps_dual) return out;
        out.y(rows[r]) = nu;
    }

    double violation = 0.0;
    if (m > 0) {
        const Eigen::VectorXd ax = p.A * out.x;
        for (int i = 0; i < m; ++i) {
            if (std::isfinite(p.l(i))) violation = std::max(violation, p.l(i) - ax(i));
            if (std::isfinite(p.u(i))) violation = std::max(violation, ax(i) - p.u(i));
        }
    }
    Eigen::VectorXd stationarity = p.H * out.x + p.g;
    if (m > 0) stationarity.noalias() += p.A.transpose() * out.y;
    out.r_prim = violation;
    out.r_dual = inf_norm(stationarity);
    out.ok = out.r_prim <= eps_primal && out.r_dual <= eps_dual;
    return out;
}

}  // namespace

void QpProblem::validate(bool check_psd) const {
    const int nn = n();
    if (H.rows() != H.cols()) throw ValidationError("qp: H must be square");
    if (g.size() != nn) throw ValidationError("qp: g length must match H");
    if (A.rows() != l.size() || A.rows() != u.size())
        throw ValidationError("qp: bound vectors must match constraint rows");
    if (A.rows() > 0 && A.cols() != nn)
        throw ValidationError("qp: A column count must match decision dimension");
    if (!H.allFinite() || !g.allFinite() || (A.size() > 0 && !A.allFinite()))
        throw ValidationError("qp: non-finite problem data");
    if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-9)
        throw ValidationError("qp: H is not symmetric");
    for (int i = 0; i < m(); ++i) {
        if (std::isnan(l(i)) || std::isnan(u(i)) || l(i) > u(i))
            throw ValidationError("qp: constraint bounds must satisfy l <= u");
    }
    if (check_psd && nn > 0) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H, Eigen::EigenvaluesOnly);
        if (eig.eigenvalues().minCoeff() < -1e-8)
            throw ValidationError("qp: H is not positive semidefinite");
    }
}

const char* to_string(SolveStatus status) {
    switch (status) {
        case SolveStatus::Solved: return "solved";
        case SolveStatus::MaxIterations: return "max_iterations";
        case SolveStatus::PrimalInfeasible: return "primal_infeasible";
    }
    return "unknown";
}

QpSolver::QpSolver(QpSettings settings) : settings_(settings) {}

void QpSolver::reset() {
    have_state_ = false;
    x_.resize(0);
    y_.resize(0);
    z_.resize(0);
}

QpSolution QpSolver::solve(const QpProblem& p) {
#ifndef NDEBUG
    p.validate(true);
#else
    p.validate(false);
#endif
    const int n = p.n();
    const int m = p.m();

    // Equilibrate once per solve; iterates live in the scaled space and all
    // termination tests are taken on the mapped-back residuals.
    Eigen::MatrixXd hs = p.H;
    Eigen::VectorXd gs = p.g;
    Eigen::MatrixXd as = p.A;
    Eigen::VectorXd dscale, escale;
    double cscale = 1.0;
    ruiz_equilibrate(hs, gs, as, dscale, escale, cscale, settings_.scaling_iters);
    const Eigen::VectorXd ls = m > 0 ? Eigen::VectorXd(escale.cwiseProduct(p.l)) : p.l;
    const Eigen::VectorXd us = m > 0 ? Eigen::VectorXd(escale.cwiseProduct(p.u)) : p.u;

    const Eigen::VectorXd dinv = dscale.cwiseInverse();
    const Eigen::VectorXd einv = m > 0 ? Eigen::VectorXd(escale.cwiseInverse()) : escale;
    auto unscale_x = [&](const Eigen::VectorXd& xb) { return dscale.cwiseProduct(xb); };
    auto unscale_y = [&](const Eigen::VectorXd& yb) {
        return Eigen::VectorXd((1.0 / cscale) * escale.cwiseProduct(yb));
    };

    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(m);
    if (warm_start_ && have_state_ && x_.size() == n && y_.size() == m) {
        x = dinv.cwiseProduct(x_);
        y = cscale * einv.cwiseProduct(y_);
        z = escale.cwiseProduct(z_);
    } else if (m > 0) {
        z = (as * x).cwiseMax(ls).cwiseMin(us);
    }

    double rho_base = settings_.rho;
    auto rho_vec = [&](void) {
        Eigen::VectorXd rho(m);
        for (int i = 0; i < m; ++i) {
            const bool equality =
                std::isfinite(ls(i)) && std::isfinite(us(i)) && us(i) - ls(i) <= 1e-12;
            rho(i) = equality ? rho_base * settings_.equality_rho_scale : rho_base;
        }
        return rho;
    };
    Eigen::VectorXd rho = rho_vec();

    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);
    auto factor = [&](void) -> Eigen::LDLT<Eigen::MatrixXd> {
        Eigen::MatrixXd kkt = hs + settings_.sigma * identity;
        if (m > 0) kkt.noalias() += as.transpose() * rho.asDiagonal() * as;
        return kkt.ldlt();
    };
    Eigen::LDLT<Eigen::MatrixXd> ldlt = factor();
    if (ldlt.info() != Eigen::Success)
        throw ValidationError("qp: failed to factor the KKT matrix");

    QpSolution best;
    best.x = unscale_x(x);
    best.y = unscale_y(y);
    best.status = SolveStatus::MaxIterations;
    double best_score = kInf;

    QpSolution out;
    out.status = SolveStatus::MaxIterations;
    bool done = false;
    bool polished = false;

    auto accept_polish = [&](const Polished& pol, int iter) {
        out.status = SolveStatus::Solved;
        out.x = pol.x;
        out.y = pol.y;
        out.iterations = iter;
        out.primal_residual = pol.r_prim;
        out.dual_residual = pol.r_dual;
        polished = true;
        done = true;
    };

    const double alpha = settings_.alpha;
    int next_polish = std::max(settings_.polish_start, 1);
    int certified_streak = 0;
    Eigen::VectorXd ax_cache = m > 0 ? Eigen::VectorXd(as * x) : Eigen::VectorXd(0);
    int iter = 0;
    for (iter = 1; iter <= settings_.max_iter && !done; ++iter) {
        Eigen::VectorXd rhs = settings_.sigma * x - gs;
        if (m > 0) rhs.noalias() += as.transpose() * (rho.cwiseProduct(z) - y);
        const Eigen::VectorXd x_tilde = ldlt.solve(rhs);

        const Eigen::VectorXd x_next = alpha * x_tilde + (1.0 - alpha) * x;
        Eigen::VectorXd delta_y = Eigen::VectorXd::Zero(m);
        if (m > 0) {
            const Eigen::VectorXd z_tilde = as * x_tilde;
            const Eigen::VectorXd z_hat = alpha * z_tilde + (1.0 - alpha) * z;
            const Eigen::VectorXd z_next =
                (z_hat + y.cwiseQuotient(rho)).cwiseMax(ls).cwiseMin(us);
            const Eigen::VectorXd y_next = y + rho.cwiseProduct(z_hat - z_next);
            delta_y = y_next - y;
            z = z_next;
            y = y_next;
            ax_cache = alpha * z_tilde + (1.0 - alpha) * ax_cache;
        }
        x = x_next;

        // Residuals mapped back to the original problem.
        const double r_prim =
            m > 0 ? inf_norm(einv.cwiseProduct(ax_cache - z)) : 0.0;
        Eigen::VectorXd dual_vec = hs * x + gs;
        if (m > 0) dual_vec.noalias() += as.transpose() * y;
        const double r_dual = inf_norm(dinv.cwiseProduct(dual_vec)) / cscale;

        const double score = std::max(r_prim, r_dual);
        if (score < best_score) {
            best_score = score;
            best.x = unscale_x(x);
            best.y = unscale_y(y);
            best.iterations = iter;
            best.primal_residual = r_prim;
            best.dual_residual = r_dual;
        }

        if (r_prim <= settings_.eps_primal && r_dual <= settings_.eps_dual) {
            out.status = SolveStatus::Solved;
            out.x = unscale_x(x);
            out.y = unscale_y(y);
            out.iterations = iter;
            out.primal_residual = r_prim;
            out.dual_residual = r_dual;
            done = true;
            break;
        }

        if (m > 0) {
            const Eigen::VectorXd delta_y_orig = unscale_y(delta_y);
            if (certifies_infeasible(p, delta_y_orig, settings_.eps_infeasible)) {
                // Demand back-to-back certificates so a transient stall in a
                // feasible problem cannot masquerade as infeasibility.
                if (++certified_streak >= 2) {
                    out.status = SolveStatus::PrimalInfeasible;
                    out.x = unscale_x(x);
                    out.y = unscale_y(y);
                    out.iterations = iter;
                    out.primal_residual = r_prim;
                    out.dual_residual = r_dual;
                    done = true;
                    break;
                }
            } else {
                certified_streak = 0;
            }
        }

        if (settings_.polish && iter >= next_polish) {
            next_polish *= 2;
            const Polished pol =
                try_polish(p, unscale_y(y), settings_.eps_primal, settings_.eps_dual);
            if (pol.ok) {
                accept_polish(pol, iter);
                break;
            }
        }

        if (settings_.adaptive_rho && m > 0 && iter % settings_.adapt_interval == 0) {
            const double denom_p = std::max({inf_norm(ax_cache), inf_norm(z), 1e-10});
            Eigen::VectorXd aty = as.transpose() * y;
            const double denom_d =
                std::max({inf_norm(hs * x), inf_norm(aty), inf_norm(gs), 1e-10});
            const double scaled_prim = m > 0 ? inf_norm(ax_cache - z) : 0.0;
            const double scaled_dual = inf_norm(dual_vec);
            const double ratio =
                (scaled_prim / denom_p) / std::max(scaled_dual / denom_d, 1e-16);
            const double rho_new = std::clamp(rho_base * std::sqrt(ratio), 1e-6, 1e6);
            if (rho_new / rho_base > 5.0 || rho_new / rho_base < 0.2) {
                rho_base = rho_new;
                rho = rho_vec();
                ldlt = factor();
            }
        }
    }

    if (out.status == SolveStatus::PrimalInfeasible) {
        if (const char* path = std::getenv("MOBIPRINT_QP_DUMP")) {
            static bool dumped = false;
            if (!dumped) {
                dumped = true;
                std::ofstream f(path);
                f << dump_problem(p);
            }
        }
    }

    if (!done) {
        // Iteration budget exhausted: a verified polish of the best iterate
        // still counts as solved; otherwise report the best effort honestly.
        if (settings_.polish) {
            const Polished pol =
                try_polish(p, best.y, settings_.eps_primal, settings_.eps_dual);
            if (pol.ok) accept_polish(pol, settings_.max_iter);
        }
        if (!polished) out = best;
    }
    out.objective = 0.5 * out.x.dot(p.H * out.x) + p.g.dot(out.x);

    if (polished) {
        x_ = out.x;
        y_ = out.y;
        z_ = m > 0 ? Eigen::VectorXd((p.A * out.x).cwiseMax(p.l).cwiseMin(p.u))
                   : Eigen::VectorXd(0);
    } else {
        x_ = unscale_x(x);
        y_ = unscale_y(y);
        z_ = m > 0 ? Eigen::VectorXd(einv.cwiseProduct(z)) : Eigen::VectorXd(0);
    }
    have_state_ = true;
    return out;
}

QpSolution solve_qp(const QpProblem& problem, double eps_primal, double eps_dual, int max_iter) {
    QpSettings settings;
    settings.eps_primal = eps_primal;
    settings.eps_dual = eps_dual;
    settings.max_iter = max_iter;
    QpSolver solver(settings);
    solver.set_warm_start(false);
    return solver.solve(problem);
}

std::string dump_problem(const QpProblem& p) {
    std::ostringstream out;
    out.precision(17);
    out << "qp n=" << p.n() << " m=" << p.m() << "\n";
    const Eigen::IOFormat fmt(Eigen::FullPrecision, 0, " ", "\n", "  ");
    out << "H:\n" << p.H.format(fmt) << "\ng: " << p.g.transpose().format(fmt) << "\n";
    if (p.m() > 0) {
        out << "A:\n" << p.A.format(fmt) << "\nl: " << p.l.transpose().format(fmt)
            << "\nu: " << p.u.transpose().format(fmt) << "\n";
    }
    return out.str();
}

}  // namespace mobiprint::qp
