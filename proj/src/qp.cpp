#include "mtvcbf/qp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mtvcbf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFeasTol = 1e-10;
constexpr double kRelaxPenalty = 1e6;

// Dense SPD inverse via Cholesky. Returns false if the matrix is not SPD.
bool spd_inverse(int n, const std::vector<double>& a, std::vector<double>& inv) {
    std::vector<double> chol(a);
    for (int j = 0; j < n; ++j) {
        double d = chol[static_cast<size_t>(j) * n + j];
        for (int k = 0; k < j; ++k) {
            const double l = chol[static_cast<size_t>(j) * n + k];
            d -= l * l;
        }
        if (!(d > 0.0)) return false;
        d = std::sqrt(d);
        chol[static_cast<size_t>(j) * n + j] = d;
        for (int i = j + 1; i < n; ++i) {
            double v = chol[static_cast<size_t>(i) * n + j];
            for (int k = 0; k < j; ++k)
                v -= chol[static_cast<size_t>(i) * n + k] * chol[static_cast<size_t>(j) * n + k];
            chol[static_cast<size_t>(i) * n + j] = v / d;
        }
    }
    // Solve L L^T X = I column by column.
    inv.assign(static_cast<size_t>(n) * n, 0.0);
    std::vector<double> col(static_cast<size_t>(n));
    for (int rhs = 0; rhs < n; ++rhs) {
        for (int i = 0; i < n; ++i) {
            double v = (i == rhs) ? 1.0 : 0.0;
            for (int k = 0; k < i; ++k) v -= chol[static_cast<size_t>(i) * n + k] * col[k];
            col[static_cast<size_t>(i)] = v / chol[static_cast<size_t>(i) * n + i];
        }
        for (int i = n - 1; i >= 0; --i) {
            double v = col[static_cast<size_t>(i)];
            for (int k = i + 1; k < n; ++k)
                v -= chol[static_cast<size_t>(k) * n + i] * inv[static_cast<size_t>(k) * n + rhs];
            inv[static_cast<size_t>(i) * n + rhs] = v / chol[static_cast<size_t>(i) * n + i];
        }
    }
    return true;
}

// Gaussian elimination with partial pivoting for the small active-set system.
bool dense_solve(int n, std::vector<double> a, std::vector<double> rhs, std::vector<double>& x) {
    double scale = 1e-30;
    for (double v : a) scale = std::max(scale, std::abs(v));
    for (int col = 0; col < n; ++col) {
        int best = col;
        double best_abs = std::abs(a[static_cast<size_t>(col) * n + col]);
        for (int r = col + 1; r < n; ++r) {
            const double v = std::abs(a[static_cast<size_t>(r) * n + col]);
            if (v > best_abs) {
                best = r;
                best_abs = v;
            }
        }
        if (best_abs < 1e-14 * scale) return false;
        if (best != col) {
            for (int c = 0; c < n; ++c)
                std::swap(a[static_cast<size_t>(best) * n + c], a[static_cast<size_t>(col) * n + c]);
            std::swap(rhs[static_cast<size_t>(best)], rhs[static_cast<size_t>(col)]);
        }
        const double d = a[static_cast<size_t>(col) * n + col];
        for (int r = col + 1; r < n; ++r) {
            const double f = a[static_cast<size_t>(r) * n + col] / d;
            if (f == 0.0) continue;
            a[static_cast<size_t>(r) * n + col] = 0.0;
            for (int c = col + 1; c < n; ++c)
                a[static_cast<size_t>(r) * n + c] -= f * a[static_cast<size_t>(col) * n + c];
            rhs[static_cast<size_t>(r)] -= f * rhs[static_cast<size_t>(col)];
        }
    }
    x.assign(static_cast<size_t>(n), 0.0);
    for (int r = n - 1; r >= 0; --r) {
        double v = rhs[static_cast<size_t>(r)];
        for (int c = r + 1; c < n; ++c) v -= a[static_cast<size_t>(r) * n + c] * x[static_cast<size_t>(c)];
        x[static_cast<size_t>(r)] = v / a[static_cast<size_t>(r) * n + r];
    }
    return true;
}

struct ReducedRow {
    std::vector<double> a;
    double b = 0.0;
    int orig = -1;  // index into the combined constraint list
    bool relaxable = false;
};

struct ReducedProblem {
    int n = 0;
    std::vector<double> metric;      // Q restricted to free vars
    std::vector<double> metric_inv;  // B
    std::vector<double> center;
    std::vector<ReducedRow> rows;
};

enum class CoreStatus { solved, infeasible, failed };

struct CoreResult {
    CoreStatus status = CoreStatus::failed;
    std::vector<double> x;
    std::vector<int> active;      // indices into rows
    std::vector<double> lambda;   // multipliers for the true gradient 2Q(x-c)
    std::string message;
};

// Goldfarb-Idnani walk. Metric relation at the optimum: Q(x - c) = sum mu_i a_i
// over the active rows, mu >= 0; lambda = 2 mu.
CoreResult solve_core(const ReducedProblem& rp) {
    CoreResult res;
    const int n = rp.n;
    const int m = static_cast<int>(rp.rows.size());
    std::vector<double> x(rp.center);
    std::vector<int> active;
    std::vector<double> mu;

    const auto row_value = [&](int r) {
        double s = rp.rows[static_cast<size_t>(r)].b;
        for (int c = 0; c < n; ++c) s += rp.rows[static_cast<size_t>(r)].a[static_cast<size_t>(c)] * x[static_cast<size_t>(c)];
        return s;
    };
    const auto apply_binv = [&](const std::vector<double>& v, std::vector<double>& out) {
        out.assign(static_cast<size_t>(n), 0.0);
        for (int r = 0; r < n; ++r) {
            double acc = 0.0;
            for (int c = 0; c < n; ++c) acc += rp.metric_inv[static_cast<size_t>(r) * n + c] * v[static_cast<size_t>(c)];
            out[static_cast<size_t>(r)] = acc;
        }
    };

    const int max_outer = 8 + 6 * (m + n);
    std::vector<double> ap(static_cast<size_t>(n)), bap, z, r_step;
    for (int outer = 0; outer < max_outer; ++outer) {
        // Most violated inactive constraint.
        int p = -1;
        double worst = -kFeasTol;
        for (int r = 0; r < m; ++r) {
            if (std::find(active.begin(), active.end(), r) != active.end()) continue;
            const double s = row_value(r);
            if (s < worst) {
                worst = s;
                p = r;
            }
        }
        if (p < 0) {
            res.status = CoreStatus::solved;
            res.x = x;
            res.active = active;
            res.lambda.resize(mu.size());
            for (size_t k = 0; k < mu.size(); ++k) res.lambda[k] = 2.0 * mu[k];
            return res;
        }

        for (int c = 0; c < n; ++c) ap[static_cast<size_t>(c)] = rp.rows[static_cast<size_t>(p)].a[static_cast<size_t>(c)];
        double s_p = worst;
        double mu_p = 0.0;

        const int max_inner = 4 * (n + 2);
        bool resolved = false;
        for (int inner = 0; inner < max_inner; ++inner) {
            const int q = static_cast<int>(active.size());
            apply_binv(ap, bap);  // B a_p
            double ap_b_ap = 0.0;
            for (int c = 0; c < n; ++c) ap_b_ap += ap[static_cast<size_t>(c)] * bap[static_cast<size_t>(c)];

            // r = (N^T B N)^{-1} N^T B a_p ; z = B a_p - B N r
            r_step.assign(static_cast<size_t>(std::max(q, 1)), 0.0);
            z = bap;
            if (q > 0) {
                std::vector<double> ntbn(static_cast<size_t>(q) * q, 0.0);
                std::vector<double> ntb_ap(static_cast<size_t>(q), 0.0);
                std::vector<std::vector<double>> bn(static_cast<size_t>(q));
                for (int k = 0; k < q; ++k)
                    apply_binv(rp.rows[static_cast<size_t>(active[static_cast<size_t>(k)])].a, bn[static_cast<size_t>(k)]);
                for (int k = 0; k < q; ++k) {
                    const auto& a_k = rp.rows[static_cast<size_t>(active[static_cast<size_t>(k)])].a;
                    for (int j = 0; j < q; ++j) {
                        double acc = 0.0;
                        for (int c = 0; c < n; ++c) acc += a_k[static_cast<size_t>(c)] * bn[static_cast<size_t>(j)][static_cast<size_t>(c)];
                        ntbn[static_cast<size_t>(k) * q + j] = acc;
                    }
                    double acc = 0.0;
                    for (int c = 0; c < n; ++c) acc += a_k[static_cast<size_t>(c)] * bap[static_cast<size_t>(c)];
                    ntb_ap[static_cast<size_t>(k)] = acc;
                }
                if (!dense_solve(q, ntbn, ntb_ap, r_step)) {
                    res.status = CoreStatus::failed;
                    res.message = "singular active-set system";
                    return res;
                }
                for (int k = 0; k < q; ++k)
                    for (int c = 0; c < n; ++c)
                        z[static_cast<size_t>(c)] -= r_step[static_cast<size_t>(k)] * bn[static_cast<size_t>(k)][static_cast<size_t>(c)];
            }

            double z_dot_ap = 0.0;
            for (int c = 0; c < n; ++c) z_dot_ap += z[static_cast<size_t>(c)] * ap[static_cast<size_t>(c)];
            // With a full active set the projected direction is zero by
            // construction; the relative test guards the roundoff remainder.
            const bool z_zero = q >= n || !(z_dot_ap > 1e-11 * std::max(1e-300, ap_b_ap));

            // Dual blocking step.
            double t1 = kInf;
            int blocker = -1;
            for (int k = 0; k < static_cast<int>(active.size()); ++k) {
                if (r_step[static_cast<size_t>(k)] > 1e-12) {
                    const double tk = mu[static_cast<size_t>(k)] / r_step[static_cast<size_t>(k)];
                    if (tk < t1) {
                        t1 = tk;
                        blocker = k;
                    }
                }
            }
            const double t2 = z_zero ? kInf : -s_p / z_dot_ap;
            const double t = std::min(t1, t2);

            if (t == kInf) {
                res.status = CoreStatus::infeasible;
                res.message = "constraint set infeasible";
                return res;
            }

            // Dual update is shared by both step kinds.
            for (int k = 0; k < static_cast<int>(active.size()); ++k)
                mu[static_cast<size_t>(k)] -= t * r_step[static_cast<size_t>(k)];
            mu_p += t;

            if (t2 == kInf) {
                // Dual-only step: drop the blocker, x unchanged.
                active.erase(active.begin() + blocker);
                mu.erase(mu.begin() + blocker);
                continue;
            }

            for (int c = 0; c < n; ++c) x[static_cast<size_t>(c)] += t * z[static_cast<size_t>(c)];
            s_p = row_value(p);

            if (t == t2) {
                active.push_back(p);
                mu.push_back(mu_p);
                resolved = true;
                break;
            }
            active.erase(active.begin() + blocker);
            mu.erase(mu.begin() + blocker);
        }
        if (!resolved) {
            res.status = CoreStatus::failed;
            res.message = "active-set iteration limit";
            return res;
        }
    }
    res.status = CoreStatus::failed;
    res.message = "outer iteration limit";
    return res;
}

}  // namespace

void QpProblem::validate() const {
    if (n <= 0) throw std::invalid_argument("QpProblem: n must be positive");
    const size_t nn = static_cast<size_t>(n);
    if (Q.size() != nn * nn || u_nom.size() != nn || u_min.size() != nn || u_max.size() != nn)
        throw std::invalid_argument("QpProblem: size mismatch");
    if (!free_mask.empty() && free_mask.size() != nn)
        throw std::invalid_argument("QpProblem: free_mask size mismatch");
    for (int i = 0; i < n; ++i) {
        if (!(u_min[static_cast<size_t>(i)] < u_max[static_cast<size_t>(i)]))
            throw std::invalid_argument("QpProblem: u_min must be < u_max");
        for (int j = 0; j < n; ++j) {
            const double d = Q[static_cast<size_t>(i) * n + j] - Q[static_cast<size_t>(j) * n + i];
            if (std::abs(d) > 1e-9) throw std::invalid_argument("QpProblem: Q must be symmetric");
        }
    }
    for (const LinearConstraint& c : ineqs)
        if (c.a.size() != nn) throw std::invalid_argument("QpProblem: constraint size mismatch");
}

QpProblem make_identity_qp(int n) {
    QpProblem p;
    p.n = n;
    p.Q.assign(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) p.Q[static_cast<size_t>(i) * n + i] = 1.0;
    p.u_nom.assign(static_cast<size_t>(n), 0.0);
    p.u_min.assign(static_cast<size_t>(n), -kInf);
    p.u_max.assign(static_cast<size_t>(n), kInf);
    return p;
}

const char* to_string(QpStatus status) {
    switch (status) {
        case QpStatus::optimal: return "optimal";
        case QpStatus::relaxed: return "relaxed";
        case QpStatus::error: return "error";
    }
    return "?";
}

double qp_relax_penalty_default() { return kRelaxPenalty; }

namespace {

struct Assembly {
    std::vector<int> free_idx;
    ReducedProblem rp;
    // Combined-list bookkeeping for active_set reporting: user rows keep their
    // index; box rows get m_user + 2*free_pos (+1 for upper).
    int n_user = 0;
    bool constant_row_infeasible = false;
    int constant_row_index = -1;
};

Assembly assemble(const QpProblem& p, bool with_slack, double penalty) {
    Assembly as;
    const size_t nn = static_cast<size_t>(p.n);
    for (int i = 0; i < p.n; ++i)
        if (p.free_mask.empty() || p.free_mask[static_cast<size_t>(i)]) as.free_idx.push_back(i);
    const int nf = static_cast<int>(as.free_idx.size());
    const int nr = nf + (with_slack ? 1 : 0);
    as.n_user = static_cast<int>(p.ineqs.size());

    as.rp.n = nr;
    as.rp.metric.assign(static_cast<size_t>(nr) * nr, 0.0);
    for (int r = 0; r < nf; ++r)
        for (int c = 0; c < nf; ++c)
            as.rp.metric[static_cast<size_t>(r) * nr + c] =
                p.Q[static_cast<size_t>(as.free_idx[static_cast<size_t>(r)]) * p.n +
                    as.free_idx[static_cast<size_t>(c)]];
    if (with_slack) as.rp.metric[static_cast<size_t>(nf) * nr + nf] = penalty;

    as.rp.center.assign(static_cast<size_t>(nr), 0.0);
    for (int r = 0; r < nf; ++r)
        as.rp.center[static_cast<size_t>(r)] = p.u_nom[static_cast<size_t>(as.free_idx[static_cast<size_t>(r)])];

    // User inequalities: fixed components fold into the offset.
    for (int r = 0; r < as.n_user; ++r) {
        const LinearConstraint& src = p.ineqs[static_cast<size_t>(r)];
        ReducedRow row;
        row.a.assign(static_cast<size_t>(nr), 0.0);
        row.b = src.b;
        row.orig = r;
        row.relaxable = src.relaxable;
        for (size_t i = 0; i < nn; ++i) {
            const bool is_free = p.free_mask.empty() || p.free_mask[i];
            if (!is_free) row.b += src.a[i] * p.u_nom[i];
        }
        for (int c = 0; c < nf; ++c)
            row.a[static_cast<size_t>(c)] = src.a[static_cast<size_t>(as.free_idx[static_cast<size_t>(c)])];
        if (with_slack && src.relaxable) row.a[static_cast<size_t>(nf)] = 1.0;

        double max_abs = 0.0;
        for (double v : row.a) max_abs = std::max(max_abs, std::abs(v));
        if (max_abs < 1e-14) {
            if (row.b < -kFeasTol) {
                as.constant_row_infeasible = true;
                as.constant_row_index = r;
            }
            continue;  // constant row, nothing the solver can do
        }
        as.rp.rows.push_back(std::move(row));
    }

    // Box rows per free variable.
    for (int c = 0; c < nf; ++c) {
        const int i = as.free_idx[static_cast<size_t>(c)];
        if (p.u_min[static_cast<size_t>(i)] > -kInf) {
            ReducedRow lo;
            lo.a.assign(static_cast<size_t>(nr), 0.0);
            lo.a[static_cast<size_t>(c)] = 1.0;
            lo.b = -p.u_min[static_cast<size_t>(i)];
            lo.orig = as.n_user + 2 * c;
            as.rp.rows.push_back(std::move(lo));
        }
        if (p.u_max[static_cast<size_t>(i)] < kInf) {
            ReducedRow hi;
            hi.a.assign(static_cast<size_t>(nr), 0.0);
            hi.a[static_cast<size_t>(c)] = -1.0;
            hi.b = p.u_max[static_cast<size_t>(i)];
            hi.orig = as.n_user + 2 * c + 1;
            as.rp.rows.push_back(std::move(hi));
        }
    }

    if (with_slack) {
        ReducedRow nonneg;
        nonneg.a.assign(static_cast<size_t>(nr), 0.0);
        nonneg.a[static_cast<size_t>(nf)] = 1.0;
        nonneg.b = 0.0;
        nonneg.orig = -1;
        as.rp.rows.push_back(std::move(nonneg));
    }
    return as;
}

// Residuals of the (possibly slack-augmented) KKT system at the candidate
// solution: stationarity, primal/dual feasibility, complementary slackness.
double kkt_residual_full(const QpProblem& p, const std::vector<double>& u, double slack,
                         double penalty, bool with_slack, const Assembly& as,
                         const CoreResult& core) {
    const int n = p.n;
    const size_t nf = as.free_idx.size();
    std::vector<double> stat(nf + (with_slack ? 1 : 0), 0.0);
    for (size_t r = 0; r < nf; ++r) {
        const int i = as.free_idx[r];
        double acc = 0.0;
        for (int c = 0; c < n; ++c)
            acc += 2.0 * p.Q[static_cast<size_t>(i) * n + c] *
                   (u[static_cast<size_t>(c)] - p.u_nom[static_cast<size_t>(c)]);
        stat[r] = acc;
    }
    if (with_slack) stat[nf] = 2.0 * penalty * slack;

    // Stationarity, dual feasibility and complementarity scale with the
    // multipliers (the relaxation penalty inflates them), so they are
    // normalized by the dual magnitude; primal feasibility stays raw.
    double lam_scale = 1.0;
    for (double lam : core.lambda) lam_scale = std::max(lam_scale, std::abs(lam));
    double res = 0.0;
    for (size_t k = 0; k < core.active.size(); ++k) {
        const ReducedRow& row = as.rp.rows[static_cast<size_t>(core.active[k])];
        const double lam = core.lambda[k];
        res = std::max(res, -lam / lam_scale);  // dual feasibility
        double s = row.b;
        for (size_t c = 0; c < nf; ++c) s += row.a[c] * u[static_cast<size_t>(as.free_idx[c])];
        if (with_slack) s += row.a[nf] * slack;
        res = std::max(res, std::abs(lam * s) / lam_scale);  // complementary slackness
        for (size_t c = 0; c < stat.size(); ++c) stat[c] -= lam * row.a[c];
    }
    for (double v : stat) res = std::max(res, std::abs(v) / lam_scale);

    // Primal feasibility over the full constraint set.
    for (const LinearConstraint& cons : p.ineqs) {
        double s = cons.b;
        for (int i = 0; i < n; ++i) s += cons.a[static_cast<size_t>(i)] * u[static_cast<size_t>(i)];
        if (with_slack && cons.relaxable) s += slack;
        res = std::max(res, -s);
    }
    for (size_t c = 0; c < nf; ++c) {
        const size_t i = static_cast<size_t>(as.free_idx[c]);
        res = std::max(res, p.u_min[i] - u[i]);
        res = std::max(res, u[i] - p.u_max[i]);
    }
    if (with_slack) res = std::max(res, -slack);
    return res;
}

double objective_of(const QpProblem& p, const std::vector<double>& u) {
    double acc = 0.0;
    for (int r = 0; r < p.n; ++r)
        for (int c = 0; c < p.n; ++c)
            acc += (u[static_cast<size_t>(r)] - p.u_nom[static_cast<size_t>(r)]) *
                   p.Q[static_cast<size_t>(r) * p.n + c] *
                   (u[static_cast<size_t>(c)] - p.u_nom[static_cast<size_t>(c)]);
    return acc;
}

}  // namespace

QpSolution solve_qp(const QpProblem& problem) {
    problem.validate();
    QpSolution sol;
    sol.u = problem.u_nom;

    Assembly plain = assemble(problem, false, 0.0);
    if (!spd_inverse(plain.rp.n, plain.rp.metric, plain.rp.metric_inv)) {
        sol.status = QpStatus::error;
        sol.message = "Q restricted to free variables is not positive definite";
        return sol;
    }

    bool need_relax = plain.constant_row_infeasible;
    CoreResult core;
    if (!need_relax) {
        core = solve_core(plain.rp);
        if (core.status == CoreStatus::failed) {
            sol.status = QpStatus::error;
            sol.message = core.message;
            return sol;
        }
        need_relax = core.status == CoreStatus::infeasible;
    }

    if (!need_relax) {
        for (size_t c = 0; c < plain.free_idx.size(); ++c)
            sol.u[static_cast<size_t>(plain.free_idx[c])] = core.x[c];
        sol.status = QpStatus::optimal;
        for (int r : core.active) sol.active_set.push_back(plain.rp.rows[static_cast<size_t>(r)].orig);
        sol.objective = objective_of(problem, sol.u);
        sol.kkt_residual = kkt_residual_full(problem, sol.u, 0.0, 0.0, false, plain, core);
        if (!(sol.kkt_residual <= 1e-8)) {
            sol.status = QpStatus::error;
            sol.message = "KKT verification failed";
        }
        return sol;
    }

    // Shared-slack relaxation of the relaxable rows.
    const bool any_relaxable =
        std::any_of(problem.ineqs.begin(), problem.ineqs.end(),
                    [](const LinearConstraint& c) { return c.relaxable; });
    if (!any_relaxable) {
        sol.status = QpStatus::error;
        sol.message = "infeasible and no relaxable constraint";
        return sol;
    }

    Assembly relax = assemble(problem, true, kRelaxPenalty);
    if (!spd_inverse(relax.rp.n, relax.rp.metric, relax.rp.metric_inv)) {
        sol.status = QpStatus::error;
        sol.message = "augmented metric not positive definite";
        return sol;
    }
    CoreResult rc = solve_core(relax.rp);
    if (rc.status != CoreStatus::solved) {
        sol.status = QpStatus::error;
        sol.message = rc.message.empty() ? "relaxed solve failed" : rc.message;
        return sol;
    }
    const size_t nf = relax.free_idx.size();
    for (size_t c = 0; c < nf; ++c)
        sol.u[static_cast<size_t>(relax.free_idx[c])] = rc.x[c];
    sol.slack_used = rc.x[nf];
    sol.status = QpStatus::relaxed;
    for (int r : rc.active) {
        const int orig = relax.rp.rows[static_cast<size_t>(r)].orig;
        if (orig >= 0) sol.active_set.push_back(orig);
    }
    sol.objective = objective_of(problem, sol.u);
    sol.kkt_residual = kkt_residual_full(problem, sol.u, sol.slack_used, kRelaxPenalty, true, relax, rc);
    sol.message = "infeasible without slack";
    return sol;
}

// ============================================================
// Filters
// ============================================================

FilterScope filter_scope_from_string(const std::string& name) {
    if (name == "joint") return FilterScope::joint;
    if (name == "ego_only") return FilterScope::ego_only;
    throw std::invalid_argument("unknown filter scope: " + name);
}

const char* to_string(FilterScope scope) {
    return scope == FilterScope::joint ? "joint" : "ego_only";
}

PairFilterResult filter_pair(const VehicleState& ego, const VehicleState& other, const Vec4& u_nom,
                             const CbfConfig& cbf, const MlpParams* net,
                             const VehicleParams& params, FilterScope scope) {
    PairFilterResult out;
    const auto t0 = std::chrono::steady_clock::now();
    out.constraint = constraint_coefficients(ego, other, cbf, net, params);
    const auto t1 = std::chrono::steady_clock::now();

    QpProblem p = make_identity_qp(4);
    p.u_nom = {u_nom[0], u_nom[1], u_nom[2], u_nom[3]};
    p.u_min = {params.accel_min, params.steer_rate_min, params.accel_min, params.steer_rate_min};
    p.u_max = {params.accel_max, params.steer_rate_max, params.accel_max, params.steer_rate_max};
    LinearConstraint c;
    c.a = {out.constraint.a[0], out.constraint.a[1], out.constraint.a[2], out.constraint.a[3]};
    c.b = out.constraint.b;
    c.relaxable = true;
    p.ineqs.push_back(std::move(c));
    if (scope == FilterScope::ego_only) p.free_mask = {1, 1, 0, 0};

    const auto t2 = std::chrono::steady_clock::now();
    out.qp = solve_qp(p);
    const auto t3 = std::chrono::steady_clock::now();
    out.build_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    out.solve_ms = std::chrono::duration<double, std::milli>(t3 - t2).count();
    return out;
}

FleetFilterResult filter_fleet(std::span<const VehicleState> states,
                               std::span<const ControlInput> u_nom, const CbfConfig& cbf,
                               const MlpParams* net, const VehicleParams& params) {
    const int k = static_cast<int>(states.size());
    if (k < 2) throw std::invalid_argument("filter_fleet: need at least two robots");
    if (u_nom.size() != states.size())
        throw std::invalid_argument("filter_fleet: nominal input count mismatch");

    FleetFilterResult out;
    const int n = 2 * k;
    QpProblem p = make_identity_qp(n);
    for (int r = 0; r < k; ++r) {
        p.u_nom[static_cast<size_t>(2 * r)] = u_nom[static_cast<size_t>(r)].accel;
        p.u_nom[static_cast<size_t>(2 * r + 1)] = u_nom[static_cast<size_t>(r)].steer_rate;
        p.u_min[static_cast<size_t>(2 * r)] = params.accel_min;
        p.u_max[static_cast<size_t>(2 * r)] = params.accel_max;
        p.u_min[static_cast<size_t>(2 * r + 1)] = params.steer_rate_min;
        p.u_max[static_cast<size_t>(2 * r + 1)] = params.steer_rate_max;
    }

    for (int i = 0; i < k; ++i) {
        for (int j = i + 1; j < k; ++j) {
            const CbfConstraint cons =
                constraint_coefficients(states[static_cast<size_t>(i)],
                                        states[static_cast<size_t>(j)], cbf, net, params);
            LinearConstraint row;
            row.a.assign(static_cast<size_t>(n), 0.0);
            row.a[static_cast<size_t>(2 * i)] = cons.a[0];
            row.a[static_cast<size_t>(2 * i + 1)] = cons.a[1];
            row.a[static_cast<size_t>(2 * j)] = cons.a[2];
            row.a[static_cast<size_t>(2 * j + 1)] = cons.a[3];
            row.b = cons.b;
            row.relaxable = true;
            p.ineqs.push_back(std::move(row));
            out.constraints.push_back(cons);
        }
    }

    out.qp = solve_qp(p);
    out.inputs.resize(static_cast<size_t>(k));
    for (int r = 0; r < k; ++r) {
        out.inputs[static_cast<size_t>(r)].accel = out.qp.u[static_cast<size_t>(2 * r)];
        out.inputs[static_cast<size_t>(r)].steer_rate = out.qp.u[static_cast<size_t>(2 * r + 1)];
    }
    return out;
}

}  // namespace mtvcbf
