#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qnet {

enum class LpSense { Maximize, Minimize };
enum class LpRelation { LE, EQ, GE };
enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

// Narrow modeling interface: non-negative variables, linear constraints, one
// linear objective. Any LP backend can sit behind LpSolver.
class LpModel {
  public:
    int add_variable(std::string name = "") {
        if (name.empty()) name = "x" + std::to_string(var_names_.size());
        var_names_.push_back(std::move(name));
        obj_.push_back(0.0);
        return static_cast<int>(var_names_.size()) - 1;
    }

    void add_constraint(std::vector<std::pair<int, double>> terms, LpRelation rel, double rhs) {
        for (auto& [v, c] : terms)
            if (v < 0 || v >= variable_count())
                throw std::invalid_argument("LpModel: constraint references unknown variable");
        rows_.push_back({std::move(terms), rel, rhs});
    }

    void set_objective(const std::vector<std::pair<int, double>>& terms, LpSense sense) {
        std::fill(obj_.begin(), obj_.end(), 0.0);
        for (auto& [v, c] : terms) obj_.at(v) += c;
        sense_ = sense;
    }

    int variable_count() const { return static_cast<int>(var_names_.size()); }
    int constraint_count() const { return static_cast<int>(rows_.size()); }
    LpSense sense() const { return sense_; }
    const std::vector<double>& objective() const { return obj_; }

    struct Row {
        std::vector<std::pair<int, double>> terms;
        LpRelation rel;
        double rhs;
    };
    const std::vector<Row>& rows() const { return rows_; }
    const std::string& var_name(int v) const { return var_names_.at(v); }

    // CPLEX LP text format, for external verification.
    void write_lp(std::ostream& os) const {
        os << (sense_ == LpSense::Maximize ? "Maximize" : "Minimize") << "\n obj:";
        write_terms(os, obj_);
        os << "\nSubject To\n";
        for (size_t r = 0; r < rows_.size(); ++r) {
            os << " c" << r << ":";
            std::vector<double> dense(var_names_.size(), 0.0);
            for (auto& [v, c] : rows_[r].terms) dense[v] += c;
            write_terms(os, dense);
            switch (rows_[r].rel) {
                case LpRelation::LE: os << " <= "; break;
                case LpRelation::EQ: os << " = "; break;
                case LpRelation::GE: os << " >= "; break;
            }
            os << format_num(rows_[r].rhs) << "\n";
        }
        os << "Bounds\n";
        for (const std::string& n : var_names_) os << " 0 <= " << n << "\n";
        os << "End\n";
    }

  private:
    static std::string format_num(double x) {
        std::ostringstream ss;
        ss << std::setprecision(17) << x;
        return ss.str();
    }
    void write_terms(std::ostream& os, const std::vector<double>& dense) const {
        bool any = false;
        for (size_t v = 0; v < dense.size(); ++v) {
            if (dense[v] == 0.0) continue;
            const double c = dense[v];
            os << (c < 0 ? " - " : (any ? " + " : " ")) << format_num(std::fabs(c)) << " "
               << var_names_[v];
            any = true;
        }
        if (!any) os << " 0 " << (var_names_.empty() ? "x?" : var_names_[0]);
    }

    std::vector<std::string> var_names_;
    std::vector<double> obj_;
    std::vector<Row> rows_;
    LpSense sense_ = LpSense::Maximize;
};

struct LpSolution {
    LpStatus status = LpStatus::Infeasible;
    double objective = 0.0;
    std::vector<double> values;
};

class LpSolver {
  public:
    virtual ~LpSolver() = default;
    virtual LpSolution solve(const LpModel& model) const = 0;
};

// Revised two-phase simplex. The constraint matrix is kept immutable in
// sparse column form; a dense basis inverse is maintained by product-form
// updates and rebuilt from the original columns at a fixed cadence, and the
// basic solution is recomputed from the original right-hand side every
// iteration, so roundoff cannot accumulate into the feasibility state.
// Dantzig pricing with a sticky Bland fallback against degenerate cycling.
class SimplexSolver : public LpSolver {
  public:
    explicit SimplexSolver(double tol = 1e-9, long max_iter = 50000, int refactor_every = 32)
        : tol_(tol), max_iter_(max_iter), refactor_every_(refactor_every) {}

    LpSolution solve(const LpModel& model) const override {
        // a tighter refactorization cadence rescues the rare drift-prone basis
        for (int refactor : {refactor_every_, 8}) {
            LpSolution sol = solve_once(model, refactor);
            if (sol.status != LpStatus::IterationLimit) return sol;
        }
        return {LpStatus::IterationLimit, 0.0, {}};
    }

  private:
    LpSolution solve_once(const LpModel& model, int refactor_every) const {
        Problem pr = standardize(model);
        Work w(pr);

        // phase 1: minimize the artificial total from the identity basis
        std::vector<double> phase1_cost(pr.ncols, 0.0);
        for (int j = pr.art0; j < pr.ncols; ++j) phase1_cost[j] = 1.0;
        LpStatus st = optimize(pr, w, phase1_cost, /*allow_artificials=*/true, refactor_every);
        if (st == LpStatus::Unbounded || st == LpStatus::IterationLimit)
            return {LpStatus::IterationLimit, 0.0, {}};
        if (phase_objective(pr, w, phase1_cost) > 1e-7 * (1.0 + norm(pr.b)))
            return {LpStatus::Infeasible, 0.0, {}};
        drive_out_artificials(pr, w);

        // phase 2: the real objective over structural and slack columns
        std::vector<double> phase2_cost(pr.ncols, 0.0);
        const double osgn = model.sense() == LpSense::Maximize ? -1.0 : 1.0;
        for (int j = 0; j < model.variable_count(); ++j)
            phase2_cost[j] = osgn * model.objective()[j];
        st = optimize(pr, w, phase2_cost, /*allow_artificials=*/false, refactor_every);
        if (st != LpStatus::Optimal) return {st, 0.0, {}};

        LpSolution sol;
        sol.status = LpStatus::Optimal;
        sol.values.assign(model.variable_count(), 0.0);
        std::vector<double> xb = basic_solution(pr, w);
        for (int i = 0; i < pr.m; ++i)
            if (w.basis[i] < model.variable_count())
                sol.values[w.basis[i]] = std::max(0.0, xb[i]);
        sol.objective = 0.0;
        for (int j = 0; j < model.variable_count(); ++j)
            sol.objective += model.objective()[j] * sol.values[j];
        return sol;
    }

    struct Problem {
        int m = 0, ncols = 0, art0 = 0;
        // sparse columns of the standardized matrix (slacks included)
        std::vector<std::vector<std::pair<int, double>>> cols;
        std::vector<double> b;  // >= 0
    };
    struct Work {
        explicit Work(const Problem& pr)
            : basis(pr.m), binv(static_cast<size_t>(pr.m) * pr.m, 0.0) {
            for (int i = 0; i < pr.m; ++i) {
                basis[i] = pr.art0 + i;
                binv[static_cast<size_t>(i) * pr.m + i] = 1.0;  // B = I
            }
        }
        std::vector<int> basis;
        std::vector<double> binv;  // row-major m x m
    };

    static double norm(const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s = std::max(s, std::fabs(x));
        return s;
    }

    static Problem standardize(const LpModel& model) {
        Problem pr;
        pr.m = model.constraint_count();
        const int nv = model.variable_count();
        int nslack = 0;
        for (const auto& r : model.rows())
            if (r.rel != LpRelation::EQ) ++nslack;
        pr.art0 = nv + nslack;
        pr.ncols = pr.art0 + pr.m;
        pr.cols.resize(pr.ncols);
        pr.b.resize(pr.m);
        int slack = nv;
        for (int i = 0; i < pr.m; ++i) {
            const auto& row = model.rows()[i];
            const double sgn = row.rhs < 0.0 ? -1.0 : 1.0;
            for (auto& [v, c] : row.terms)
                if (c != 0.0) pr.cols[v].push_back({i, sgn * c});
            pr.b[i] = sgn * row.rhs;
            if (row.rel != LpRelation::EQ)
                pr.cols[slack++].push_back({i, sgn * (row.rel == LpRelation::LE ? 1.0 : -1.0)});
            pr.cols[pr.art0 + i].push_back({i, 1.0});
        }
        return pr;
    }

    // x_B = B^-1 b, always from the original right-hand side
    std::vector<double> basic_solution(const Problem& pr, const Work& w) const {
        std::vector<double> x(pr.m, 0.0);
        for (int i = 0; i < pr.m; ++i) {
            const double* row = &w.binv[static_cast<size_t>(i) * pr.m];
            double s = 0.0;
            for (int k = 0; k < pr.m; ++k) s += row[k] * pr.b[k];
            x[i] = s;
        }
        return x;
    }

    std::vector<double> ftran(const Problem& pr, const Work& w, int col) const {
        std::vector<double> v(pr.m, 0.0);
        for (auto& [r, c] : pr.cols[col])
            for (int i = 0; i < pr.m; ++i) v[i] += w.binv[static_cast<size_t>(i) * pr.m + r] * c;
        return v;
    }

    double phase_objective(const Problem& pr, const Work& w,
                           const std::vector<double>& cost) const {
        std::vector<double> xb = basic_solution(pr, w);
        double obj = 0.0;
        for (int i = 0; i < pr.m; ++i) obj += cost[w.basis[i]] * xb[i];
        return obj;
    }

    // rebuild the dense inverse from the original basis columns; returns
    // false when the basis matrix is numerically singular
    bool refactorize(const Problem& pr, Work& w) const {
        const int m = pr.m;
        std::vector<double> mat(static_cast<size_t>(m) * 2 * m, 0.0);
        auto at = [&](int i, int j) -> double& { return mat[static_cast<size_t>(i) * 2 * m + j]; };
        for (int k = 0; k < m; ++k)
            for (auto& [r, c] : pr.cols[w.basis[k]]) at(r, k) = c;
        for (int i = 0; i < m; ++i) at(i, m + i) = 1.0;
        for (int k = 0; k < m; ++k) {
            int piv = k;
            for (int i = k + 1; i < m; ++i)
                if (std::fabs(at(i, k)) > std::fabs(at(piv, k))) piv = i;
            if (std::fabs(at(piv, k)) < 1e-11) return false;
            if (piv != k)
                for (int j = 0; j < 2 * m; ++j) std::swap(at(k, j), at(piv, j));
            const double d = at(k, k);
            for (int j = 0; j < 2 * m; ++j) at(k, j) /= d;
            for (int i = 0; i < m; ++i) {
                if (i == k) continue;
                const double f = at(i, k);
                if (f == 0.0) continue;
                for (int j = 0; j < 2 * m; ++j) at(i, j) -= f * at(k, j);
            }
        }
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) w.binv[static_cast<size_t>(i) * pr.m + j] = at(i, m + j);
        return true;
    }

    // product-form update of B^-1 after `col` replaces basis position r
    static void update_inverse(Work& w, int m, int r, const std::vector<double>& dir) {
        const double piv = dir[r];
        double* rowr = &w.binv[static_cast<size_t>(r) * m];
        for (int j = 0; j < m; ++j) rowr[j] /= piv;
        for (int i = 0; i < m; ++i) {
            if (i == r) continue;
            const double f = dir[i];
            if (f == 0.0) continue;
            double* rowi = &w.binv[static_cast<size_t>(i) * m];
            for (int j = 0; j < m; ++j) rowi[j] -= f * rowr[j];
        }
    }

    // swap basic artificials for structural columns where possible
    void drive_out_artificials(const Problem& pr, Work& w) const {
        for (int i = 0; i < pr.m; ++i) {
            if (w.basis[i] < pr.art0) continue;
            int enter = -1;
            double best = 1e-7;
            std::vector<double> best_dir;
            for (int j = 0; j < pr.art0; ++j) {
                if (std::find(w.basis.begin(), w.basis.end(), j) != w.basis.end()) continue;
                std::vector<double> dir = ftran(pr, w, j);
                if (std::fabs(dir[i]) > best) {
                    best = std::fabs(dir[i]);
                    enter = j;
                    best_dir = std::move(dir);
                }
            }
            if (enter >= 0) {
                update_inverse(w, pr.m, i, best_dir);
                w.basis[i] = enter;
            }
        }
    }

    LpStatus optimize(const Problem& pr, Work& w, const std::vector<double>& cost,
                      bool allow_artificials, int refactor_every) const {
        const int limit = allow_artificials ? pr.ncols : pr.art0;
        long stall = 0;
        bool bland = false;
        double last_obj = std::numeric_limits<double>::infinity();
        std::vector<double> y(pr.m), dir;
        for (long it = 0; it < max_iter_; ++it) {
            if (it % refactor_every == 0 && it > 0)
                if (!refactorize(pr, w)) return LpStatus::IterationLimit;
            // y = c_B B^-1
            std::fill(y.begin(), y.end(), 0.0);
            for (int i = 0; i < pr.m; ++i) {
                const double cb = cost[w.basis[i]];
                if (cb == 0.0) continue;
                const double* row = &w.binv[static_cast<size_t>(i) * pr.m];
                for (int k = 0; k < pr.m; ++k) y[k] += cb * row[k];
            }
            // pricing from the immutable columns
            int enter = -1;
            double best = -std::max(tol_, 1e-9 * norm(y));
            for (int j = 0; j < limit; ++j) {
                double d = cost[j];
                for (auto& [r, c] : pr.cols[j]) d -= y[r] * c;
                if (d < (bland ? -tol_ : best)) {
                    enter = j;
                    if (bland) break;
                    best = d;
                }
            }
            if (enter < 0) return LpStatus::Optimal;

            dir = ftran(pr, w, enter);
            std::vector<double> xb = basic_solution(pr, w);
            int leave = -1;
            double best_ratio = std::numeric_limits<double>::infinity();
            for (int i = 0; i < pr.m; ++i) {
                if (dir[i] > tol_) {
                    const double ratio = std::max(xb[i], 0.0) / dir[i];
                    const bool tie = leave >= 0 && ratio < best_ratio + 1e-10;
                    if (ratio < best_ratio - 1e-10 ||
                        (tie && (bland ? w.basis[i] < w.basis[leave] : dir[i] > dir[leave]))) {
                        best_ratio = std::min(best_ratio, ratio);
                        leave = i;
                    }
                }
            }
            if (leave < 0) return LpStatus::Unbounded;
            update_inverse(w, pr.m, leave, dir);
            w.basis[leave] = enter;

            const double obj = phase_objective(pr, w, cost);
            if (obj < last_obj - 1e-12 * (1.0 + std::fabs(last_obj))) {
                stall = 0;
                last_obj = obj;
            } else if (++stall > 2L * pr.m + 64) {
                bland = true;
            }
        }
        return LpStatus::IterationLimit;
    }

    double tol_;
    long max_iter_;
    int refactor_every_;
};

}  // namespace qnet
