#include "bhnoma/power_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bhnoma/barrier.hpp"

namespace bhnoma {

namespace {

constexpr double kLn2 = 0.6931471805599453;

/// Scheduled (terminal, slot) pairs of a fixed assignment plus the per-slot
/// interference models. Variable order of every power problem below.
struct PairTable {
    struct Pair {
        int k, t, local;  // local = row in the slot model
    };
    std::vector<SlotModel> slots;  // per t
    std::vector<Pair> list;
    Grid<int> var_of;                            // K x T -> pair index or -1
    std::vector<std::vector<int>> of_terminal;   // per terminal
    std::vector<std::vector<int>> beamslot_grp;  // pair ids per active (b,t) group
    std::vector<std::pair<int, int>> beamslot_id;

    static PairTable build(const Scenario& sc, const Assignment& asg, const EvalConfig& eval) {
        PairTable pt;
        const int K = sc.num_terminals();
        const int T = sc.T;
        pt.var_of.assign(K, T, -1);
        pt.of_terminal.assign(K, {});
        pt.slots.reserve(T);
        for (int t = 0; t < T; ++t) {
            pt.slots.push_back(build_slot_model(sc, asg, t, eval));
            const SlotModel& m = pt.slots.back();
            for (int i = 0; i < m.size(); ++i) {
                const int k = m.terminals[i];
                const int id = static_cast<int>(pt.list.size());
                pt.list.push_back({k, t, i});
                pt.var_of(k, t) = id;
                pt.of_terminal[k].push_back(id);
            }
        }
        // Per-beam-slot groups for the power simplices.
        std::vector<std::vector<int>> tmp(static_cast<size_t>(sc.num_beams()) * T);
        for (int id = 0; id < static_cast<int>(pt.list.size()); ++id) {
            const auto& pr = pt.list[id];
            const int b = sc.terminals[pr.k].home_beam;
            tmp[static_cast<size_t>(b) * T + pr.t].push_back(id);
        }
        for (int b = 0; b < sc.num_beams(); ++b)
            for (int t = 0; t < T; ++t) {
                auto& g = tmp[static_cast<size_t>(b) * T + t];
                if (!g.empty()) {
                    pt.beamslot_grp.push_back(std::move(g));
                    pt.beamslot_id.emplace_back(b, t);
                }
            }
        return pt;
    }
};

/// Value and sparse gradient support of one transformed rate term.
struct PairEval {
    double u = 0.0;       // log argument
    double f = 0.0;       // kappa * ln(u), Mbps
    double du_own = 0.0;  // d u / d own power
};

struct PairCoefs {
    double theta = 0.0;
    double own_gain = 0.0;
    double kappa = 0.0;  // bandwidth_Hz / 1e6 / ln2
};

/// Full-horizon convex power subproblem in barrier form.
class PowerModel : public BarrierModel {
public:
    PowerModel(const Scenario& sc, const PairTable& pt, const TransformState& theta,
               const SolverConfig& cfg, PowerObjective obj)
        : sc_(sc), pt_(pt), cfg_(cfg), obj_(obj) {
        const int K = sc.num_terminals();
        np_ = static_cast<int>(pt.list.size());
        coefs_.resize(np_);
        for (int j = 0; j < np_; ++j) {
            const auto& pr = pt.list[j];
            const SlotModel& m = pt.slots[pr.t];
            coefs_[j].theta = theta.theta(pr.k, pr.t);
            coefs_[j].own_gain = m.own_gain[pr.local];
            coefs_[j].kappa = m.bandwidth_Hz[pr.local] / 1e6 / kLn2;
        }
        demand_mbps_.resize(K);
        rmin_mbps_.resize(K);
        for (int k = 0; k < K; ++k) {
            demand_mbps_[k] = to_mbps(sc.terminals[k].demand_bps);
            rmin_mbps_[k] = to_mbps(sc.terminals[k].min_rate_bps);
        }
        // Floor slacks for every terminal that transmits somewhere.
        for (int k = 0; k < K; ++k)
            if (!pt.of_terminal[k].empty()) floor_terms_.push_back(k);
        for (int k = 0; k < K; ++k)
            if (demand_mbps_[k] > 0.0) demand_terms_.push_back(k);

        int n = np_;
        if (obj_ == PowerObjective::SumSquaredShortfall) {
            delta_var_.assign(K, -1);
            for (int k : demand_terms_) delta_var_[k] = n++;
        } else if (obj_ == PowerObjective::MinUnmet) {
            delta_var_.assign(K, -1);
            for (int k : demand_terms_) delta_var_[k] = n++;
        } else {
            s_var_ = n++;
        }
        w_var_.assign(K, -1);
        for (int k : floor_terms_) w_var_[k] = n++;
        dim_ = n;

        double scale = 0.0;
        for (int k : demand_terms_) scale += demand_mbps_[k] * demand_mbps_[k];
        obj_scale_ = std::max(scale, 1e-9);
        if (obj_ == PowerObjective::MaxMinOctr) obj_scale_ = 1.0;
        if (obj_ == PowerObjective::MinUnmet) {
            obj_scale_ = 0.0;
            for (int k : demand_terms_) obj_scale_ += demand_mbps_[k];
            obj_scale_ = std::max(obj_scale_, 1e-9);
        }
        penalty_ = cfg.rmin_penalty * std::max(1.0, std::sqrt(obj_scale_));
    }

    int dim() const override { return dim_; }

    int constraint_count() const override {
        int m = np_;                                       // p >= 0
        m += static_cast<int>(pt_.beamslot_grp.size());    // simplices
        m += static_cast<int>(floor_terms_.size()) * 2;    // floors + w >= 0
        if (obj_ == PowerObjective::MaxMinOctr)
            m += static_cast<int>(demand_terms_.size()) + 2;  // octr rows + s bounds
        else
            m += static_cast<int>(demand_terms_.size()) *
                 (obj_ == PowerObjective::MinUnmet ? 2 : 1);
        return m;
    }

    double objective(const Eigen::VectorXd& x) const override {
        double v = 0.0;
        if (obj_ == PowerObjective::SumSquaredShortfall) {
            for (int k : demand_terms_) v += x[delta_var_[k]] * x[delta_var_[k]];
        } else if (obj_ == PowerObjective::MinUnmet) {
            for (int k : demand_terms_) v += x[delta_var_[k]];
        } else {
            v = -x[s_var_];
        }
        for (int k : floor_terms_) v += penalty_ * x[w_var_[k]];
        return v;
    }

    double obj_scale() const { return obj_scale_; }
    void set_penalty(double p) { penalty_ = p; }
    double penalty() const { return penalty_; }

    bool eval(const Eigen::VectorXd& x, double mu, double& value, Eigen::VectorXd* grad,
              Eigen::MatrixXd* hess) const override {
        const double eps_log = cfg_.eps_log;
        // Pair terms.
        std::vector<PairEval> pe(np_);
        for (int j = 0; j < np_; ++j) {
            const double p = x[j];
            if (!(p > 0.0)) return false;
            const auto& pr = pt_.list[j];
            const SlotModel& m = pt_.slots[pr.t];
            const PairCoefs& c = coefs_[j];
            double interf = 0.0;
            for (int l = 0; l < m.size(); ++l) {
                if (l == pr.local) continue;
                interf += m.cross(pr.local, l) * x[pt_.var_of(m.terminals[l], pr.t)];
            }
            const double sq = std::sqrt(c.own_gain * p);
            const double u =
                1.0 + 2.0 * c.theta * sq - c.theta * c.theta * (interf + m.noise_W);
            if (!(u > eps_log)) return false;
            pe[j].u = u;
            pe[j].f = c.kappa * std::log(u);
            pe[j].du_own = sq > 0.0 ? c.theta * c.own_gain / sq : 0.0;
        }

        value = objective(x);
        if (grad) {
            grad->setZero();
            if (obj_ == PowerObjective::SumSquaredShortfall) {
                for (int k : demand_terms_) (*grad)[delta_var_[k]] += 2.0 * x[delta_var_[k]];
            } else if (obj_ == PowerObjective::MinUnmet) {
                for (int k : demand_terms_) (*grad)[delta_var_[k]] += 1.0;
            } else {
                (*grad)[s_var_] -= 1.0;
            }
            for (int k : floor_terms_) (*grad)[w_var_[k]] += penalty_;
        }
        if (hess) {
            hess->setZero();
            if (obj_ == PowerObjective::SumSquaredShortfall)
                for (int k : demand_terms_) (*hess)(delta_var_[k], delta_var_[k]) += 2.0;
        }

        // p >= 0 and per-beam-slot simplices.
        for (int j = 0; j < np_; ++j)
            if (!log_barrier_linear(x, mu, value, grad, hess, {{j, 1.0}}, 0.0)) return false;
        for (size_t g = 0; g < pt_.beamslot_grp.size(); ++g) {
            support_.clear();
            for (int j : pt_.beamslot_grp[g]) support_.push_back({j, -1.0});
            if (!log_barrier_linear(x, mu, value, grad, hess, support_, sc_.P_beam_W))
                return false;
        }

        // Rate floors (with slack) and demand rows.
        for (int k : floor_terms_) {
            if (!rate_row(x, mu, value, grad, hess, pe, k, w_var_[k], -rmin_mbps_[k], 1.0))
                return false;
            if (!log_barrier_linear(x, mu, value, grad, hess, {{w_var_[k], 1.0}}, 0.0))
                return false;
        }
        if (obj_ == PowerObjective::MaxMinOctr) {
            for (int k : demand_terms_)
                if (!rate_row(x, mu, value, grad, hess, pe, k, s_var_, 0.0, -demand_mbps_[k]))
                    return false;
            if (!log_barrier_linear(x, mu, value, grad, hess, {{s_var_, 1.0}}, 0.0))
                return false;
            if (!log_barrier_linear(x, mu, value, grad, hess, {{s_var_, -1.0}}, kOctrCap))
                return false;
        } else {
            for (int k : demand_terms_) {
                if (!rate_row(x, mu, value, grad, hess, pe, k, delta_var_[k],
                              -demand_mbps_[k], 1.0))
                    return false;
                if (obj_ == PowerObjective::MinUnmet)
                    if (!log_barrier_linear(x, mu, value, grad, hess,
                                            {{delta_var_[k], 1.0}}, 0.0))
                        return false;
            }
        }
        return true;
    }

    /// Transformed rate sum of one terminal at the given point, Mbps.
    double rate_sum(const Eigen::VectorXd& x, int k) const {
        double s = 0.0;
        for (int j : pt_.of_terminal[k]) {
            const auto& pr = pt_.list[j];
            const SlotModel& m = pt_.slots[pr.t];
            const PairCoefs& c = coefs_[j];
            double interf = 0.0;
            for (int l = 0; l < m.size(); ++l) {
                if (l == pr.local) continue;
                interf += m.cross(pr.local, l) * x[pt_.var_of(m.terminals[l], pr.t)];
            }
            const double u = 1.0 + 2.0 * c.theta * std::sqrt(c.own_gain * x[j]) -
                             c.theta * c.theta * (interf + m.noise_W);
            s += c.kappa * std::log(std::max(u, cfg_.eps_log));
        }
        return s;
    }

    const std::vector<int>& floor_terms() const { return floor_terms_; }
    const std::vector<int>& demand_terms() const { return demand_terms_; }
    int w_var(int k) const { return w_var_[k]; }
    int delta_var(int k) const { return delta_var_[k]; }
    int s_var() const { return s_var_; }
    static constexpr double kOctrCap = 16.0;

private:
    /// Adds -mu ln(c) for a sparse linear constraint c = offset + sum coef*x >= 0.
    static bool log_barrier_linear(const Eigen::VectorXd& x, double mu, double& value,
                                   Eigen::VectorXd* grad, Eigen::MatrixXd* hess,
                                   const std::vector<std::pair<int, double>>& terms,
                                   double offset) {
        double c = offset;
        for (const auto& [idx, coef] : terms) c += coef * x[idx];
        if (!(c > 0.0)) return false;
        value -= mu * std::log(c);
        if (grad)
            for (const auto& [idx, coef] : terms) (*grad)[idx] -= mu * coef / c;
        if (hess) {
            const double w = mu / (c * c);
            for (const auto& [i, ci] : terms)
                for (const auto& [j, cj] : terms) (*hess)(i, j) += w * ci * cj;
        }
        return true;
    }

    /// Adds -mu ln(c) for c = sum_t f_kt + aux_coef * x[aux] + offset >= 0.
    bool rate_row(const Eigen::VectorXd& x, double mu, double& value, Eigen::VectorXd* grad,
                  Eigen::MatrixXd* hess, const std::vector<PairEval>& pe, int k, int aux,
                  double offset, double aux_coef) const {
        double c = offset + (aux >= 0 ? aux_coef * x[aux] : 0.0);
        for (int j : pt_.of_terminal[k]) c += pe[j].f;
        if (!(c > 0.0)) return false;
        value -= mu * std::log(c);
        if (!grad && !hess) return true;

        // Sparse gradient of the row over pair variables plus the auxiliary.
        row_support_.clear();
        for (int j : pt_.of_terminal[k]) {
            const auto& pr = pt_.list[j];
            const SlotModel& m = pt_.slots[pr.t];
            const PairCoefs& cf = coefs_[j];
            const double gf = cf.kappa / pe[j].u;  // d f / d u
            row_support_.push_back({j, gf * pe[j].du_own});
            const double th2 = cf.theta * cf.theta;
            for (int l = 0; l < m.size(); ++l) {
                if (l == pr.local) continue;
                const double cr = m.cross(pr.local, l);
                if (cr != 0.0)
                    row_support_.push_back(
                        {pt_.var_of(m.terminals[l], pr.t), -gf * th2 * cr});
            }
        }
        if (aux >= 0) row_support_.push_back({aux, aux_coef});

        if (grad)
            for (const auto& [idx, g] : row_support_) (*grad)[idx] -= mu * g / c;
        if (hess) {
            const double w = mu / (c * c);
            for (const auto& [i, gi] : row_support_)
                for (const auto& [j, gj] : row_support_) (*hess)(i, j) += w * gi * gj;
            // Curvature of the concave rate terms: -mu/c * sum_j hess(f_j).
            const double wc = mu / c;
            for (int j : pt_.of_terminal[k]) {
                const auto& pr = pt_.list[j];
                const SlotModel& m = pt_.slots[pr.t];
                const PairCoefs& cf = coefs_[j];
                const double kap_u = cf.kappa / pe[j].u;
                const double kap_u2 = cf.kappa / (pe[j].u * pe[j].u);
                // own-power second derivative of u
                const double sq = std::sqrt(cf.own_gain * x[j]);
                if (sq > 0.0 && cf.theta > 0.0) {
                    const double d2u =
                        -cf.theta * cf.own_gain * cf.own_gain / (2.0 * sq * sq * sq);
                    (*hess)(j, j) -= wc * kap_u * d2u;
                }
                // rank-one term (grad u)(grad u)^T / u^2
                pair_support_.clear();
                pair_support_.push_back({j, pe[j].du_own});
                const double th2 = cf.theta * cf.theta;
                for (int l = 0; l < m.size(); ++l) {
                    if (l == pr.local) continue;
                    const double cr = m.cross(pr.local, l);
                    if (cr != 0.0)
                        pair_support_.push_back(
                            {pt_.var_of(m.terminals[l], pr.t), -th2 * cr});
                }
                for (const auto& [a, ua] : pair_support_)
                    for (const auto& [b2, ub] : pair_support_)
                        (*hess)(a, b2) += wc * kap_u2 * ua * ub;
            }
        }
        return true;
    }

    const Scenario& sc_;
    const PairTable& pt_;
    const SolverConfig& cfg_;
    PowerObjective obj_;
    int np_ = 0;
    int dim_ = 0;
    int s_var_ = -1;
    std::vector<PairCoefs> coefs_;
    std::vector<double> demand_mbps_, rmin_mbps_;
    std::vector<int> floor_terms_, demand_terms_;
    std::vector<int> delta_var_, w_var_;
    double obj_scale_ = 1.0;
    double penalty_ = 1e6;
    mutable std::vector<std::pair<int, double>> support_, row_support_, pair_support_;
};

/// Equal split of the beam budget over the beam-slot group, pulled strictly
/// inside the simplex.
void default_power(const Scenario& sc, const PairTable& pt, Eigen::VectorXd& x) {
    for (size_t g = 0; g < pt.beamslot_grp.size(); ++g) {
        const auto& grp = pt.beamslot_grp[g];
        const double share = (1.0 - 1e-3) * sc.P_beam_W / static_cast<double>(grp.size());
        for (int j : grp) x[j] = share;
    }
}

void pull_inside_simplices(const Scenario& sc, const PairTable& pt, Eigen::VectorXd& x) {
    const double floor = 1e-12 * sc.P_beam_W;
    for (int j = 0; j < static_cast<int>(pt.list.size()); ++j)
        x[j] = std::max(x[j], floor);
    for (const auto& grp : pt.beamslot_grp) {
        double sum = 0.0;
        for (int j : grp) sum += x[j];
        const double cap = (1.0 - 1e-4) * sc.P_beam_W;
        if (sum > cap)
            for (int j : grp) x[j] *= cap / sum;
    }
}

}  // namespace

TransformState update_theta(const PowerPlan& power, const Scenario& scenario,
                            const Assignment& assignment, const EvalConfig& eval) {
    TransformState st;
    const int K = scenario.num_terminals();
    st.theta.assign(K, scenario.T, 0.0);
    st.delta.assign(K, 0.0);
    for (int t = 0; t < scenario.T; ++t) {
        const SlotModel m = build_slot_model(scenario, assignment, t, eval);
        for (int i = 0; i < m.size(); ++i) {
            const int k = m.terminals[i];
            const double p = power.p(k, t);
            if (p <= 0.0) continue;  // theta stays zero
            double denom = m.noise_W;
            for (int l = 0; l < m.size(); ++l)
                if (l != i) denom += m.cross(i, l) * power.p(m.terminals[l], t);
            st.theta(k, t) = std::sqrt(m.own_gain[i] * p) / denom;
        }
    }
    return st;
}

double transformed_rate(const TransformState& theta, const PowerPlan& power,
                        const Scenario& scenario, const Assignment& assignment, int k, int t,
                        const SolverConfig& cfg, bool* clamped) {
    const SlotModel m = build_slot_model(scenario, assignment, t, cfg.eval);
    const int i = m.find(k);
    if (i < 0) throw std::invalid_argument("transformed_rate: terminal not scheduled");
    const double th = theta.theta(k, t);
    double interf = 0.0;
    for (int l = 0; l < m.size(); ++l)
        if (l != i) interf += m.cross(i, l) * power.p(m.terminals[l], t);
    double u = 1.0 + 2.0 * th * std::sqrt(m.own_gain[i] * power.p(k, t)) -
               th * th * (interf + m.noise_W);
    if (clamped) *clamped = u < cfg.eps_log;
    u = std::max(u, cfg.eps_log);
    return m.bandwidth_Hz[i] * std::log2(u);
}

namespace {

ConvexSolveResult solve_convex_impl(const PairTable& pt, const TransformState& theta,
                                    const Scenario& scenario, const SolverConfig& cfg,
                                    PowerObjective objective, const PowerPlan* warm) {
    ConvexSolveResult out;
    out.power = PowerPlan(scenario.num_terminals(), scenario.T);
    out.delta_mbps.assign(scenario.num_terminals(), 0.0);

    // A terminal with a positive floor but no scheduled slot can never comply.
    for (int k = 0; k < scenario.num_terminals(); ++k)
        if (pt.of_terminal[k].empty() && scenario.terminals[k].min_rate_bps > 0.0) {
            out.status = SolveStatus::Infeasible;
            out.most_violated_terminal = k;
            return out;
        }
    // Max-min with an unschedulable demand terminal pins the common ratio at
    // zero; the feasible set has no interior, so return a plain split.
    if (objective == PowerObjective::MaxMinOctr) {
        for (int k = 0; k < scenario.num_terminals(); ++k) {
            if (pt.of_terminal[k].empty() && scenario.terminals[k].demand_bps > 0.0) {
                Eigen::VectorXd xd = Eigen::VectorXd::Zero(
                    std::max<int>(static_cast<int>(pt.list.size()), 1));
                default_power(scenario, pt, xd);
                for (int j = 0; j < static_cast<int>(pt.list.size()); ++j)
                    out.power.p(pt.list[j].k, pt.list[j].t) = xd[j];
                return out;
            }
        }
    }

    PowerModel model(scenario, pt, theta, cfg, objective);
    const int n = model.dim();
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(n);
    if (warm) {
        for (int j = 0; j < static_cast<int>(pt.list.size()); ++j)
            x0[j] = warm->p(pt.list[j].k, pt.list[j].t);
        pull_inside_simplices(scenario, pt, x0);
    } else {
        default_power(scenario, pt, x0);
    }
    // Auxiliaries strictly inside their rows.
    for (int k : model.floor_terms()) {
        const double f = model.rate_sum(x0, k);
        const double rmin = to_mbps(scenario.terminals[k].min_rate_bps);
        x0[model.w_var(k)] = std::max(0.0, rmin - f) + 1e-3 * std::max(rmin, 1e-3);
    }
    if (objective == PowerObjective::MaxMinOctr) {
        double s0 = PowerModel::kOctrCap;
        for (int k : model.demand_terms()) {
            const double f = model.rate_sum(x0, k);
            s0 = std::min(s0, f / to_mbps(scenario.terminals[k].demand_bps));
        }
        x0[model.s_var()] = std::clamp(0.5 * s0, 1e-9, 0.5 * PowerModel::kOctrCap);
    } else {
        for (int k : model.demand_terms()) {
            const double f = model.rate_sum(x0, k);
            const double d = to_mbps(scenario.terminals[k].demand_bps);
            x0[model.delta_var(k)] = std::max(0.0, d - f) + 1e-3 * std::max(d, 1e-3);
        }
    }

    BarrierOptions bopt;
    bopt.obj_scale = model.obj_scale();
    bopt.gap_tol = cfg.inner_tol;
    bopt.max_newton_steps = cfg.max_newton_steps;
    BarrierStats stats;
    Eigen::VectorXd x = minimize_barrier(model, x0, bopt, &stats);

    // Escalate the floor penalty if slack survived; persistent slack means
    // the floors are unattainable under this assignment.
    for (int round = 0; round < 3; ++round) {
        double worst = 0.0;
        int worst_k = -1;
        for (int k : model.floor_terms()) {
            const double rmin = to_mbps(scenario.terminals[k].min_rate_bps);
            const double rel = x[model.w_var(k)] / std::max(rmin, 1e-6);
            if (rel > worst) {
                worst = rel;
                worst_k = k;
            }
        }
        if (worst <= 1e3 * cfg.feas_tol || worst_k < 0) break;
        if (round == 2) {
            out.status = SolveStatus::Infeasible;
            out.most_violated_terminal = worst_k;
            return out;
        }
        model.set_penalty(model.penalty() * 100.0);
        x = minimize_barrier(model, x, bopt, &stats);
    }

    for (int j = 0; j < static_cast<int>(pt.list.size()); ++j)
        out.power.p(pt.list[j].k, pt.list[j].t) = x[j];
    if (objective != PowerObjective::MaxMinOctr)
        for (int k : model.demand_terms()) out.delta_mbps[k] = x[model.delta_var(k)];
    out.kkt_gap = stats.gap_bound;
    out.newton_steps = stats.newton_steps;
    return out;
}

double true_metric(const Scenario& sc, const std::vector<double>& caps_bps,
                   PowerObjective obj) {
    switch (obj) {
        case PowerObjective::SumSquaredShortfall: {
            double v = 0.0;
            for (int k = 0; k < sc.num_terminals(); ++k) {
                const double gap = std::max(
                    to_mbps(sc.terminals[k].demand_bps) - to_mbps(caps_bps[k]), 0.0);
                v += gap * gap;
            }
            return v;
        }
        case PowerObjective::MinUnmet:
            return score(sc, caps_bps, Metric::Unmet);
        case PowerObjective::MaxMinOctr:
            return -score(sc, caps_bps, Metric::WorstOctr);
    }
    return 0.0;
}

}  // namespace

ConvexSolveResult solve_convex_subproblem(const TransformState& theta,
                                          const Scenario& scenario,
                                          const Assignment& assignment,
                                          const SolverConfig& cfg, PowerObjective objective,
                                          const PowerPlan* warm_start) {
    const PairTable pt = PairTable::build(scenario, assignment, cfg.eval);
    return solve_convex_impl(pt, theta, scenario, cfg, objective, warm_start);
}

EqualizeResult equalize_overserved(const Scenario& scenario, const Assignment& assignment,
                                   const PowerPlan& power, const std::vector<int>& overserved,
                                   const SolverConfig& cfg) {
    EqualizeResult out;
    out.power = power;
    if (overserved.empty()) return out;

    const PairTable pt = PairTable::build(scenario, assignment, cfg.eval);
    std::vector<int> vars;  // pair ids owned by over-served terminals
    std::vector<char> is_over(scenario.num_terminals(), 0);
    for (int k : overserved) {
        is_over[k] = 1;
        for (int j : pt.of_terminal[k]) vars.push_back(j);
    }
    const int nv = static_cast<int>(vars.size());
    const int ne = static_cast<int>(overserved.size());
    if (nv == 0) return out;

    auto residual = [&](const PowerPlan& pp, Eigen::VectorXd& F) {
        const RateResult rr = compute_rates(scenario, assignment, pp, cfg.eval);
        for (int e = 0; e < ne; ++e) {
            const int k = overserved[e];
            const double d = to_mbps(scenario.terminals[k].demand_bps);
            F[e] = (to_mbps(rr.capacities_bps[k]) - d) / std::max(d, 1e-6);
        }
    };

    auto jacobian = [&](const PowerPlan& pp, Eigen::MatrixXd& J) {
        J.setZero();
        for (int t = 0; t < scenario.T; ++t) {
            const SlotModel& m = pt.slots[t];
            if (m.size() == 0) continue;
            std::vector<double> p(m.size());
            for (int i = 0; i < m.size(); ++i) p[i] = pp.p(m.terminals[i], t);
            for (int e = 0; e < ne; ++e) {
                const int k = overserved[e];
                const int i = m.find(k);
                if (i < 0) continue;
                double den = m.noise_W;
                for (int l = 0; l < m.size(); ++l)
                    if (l != i) den += m.cross(i, l) * p[l];
                const double gamma = m.own_gain[i] * p[i] / den;
                const double kap = m.bandwidth_Hz[i] / 1e6 / kLn2;
                const double dscale = std::max(to_mbps(scenario.terminals[k].demand_bps), 1e-6);
                for (int v = 0; v < nv; ++v) {
                    const auto& pr = pt.list[vars[v]];
                    if (pr.t != t) continue;
                    double dR;
                    if (pr.k == k)
                        dR = kap * m.own_gain[i] / (den * (1.0 + gamma));
                    else
                        dR = -kap * gamma * m.cross(i, pr.local) / (den * (1.0 + gamma));
                    J(e, v) += dR / dscale;
                }
            }
        }
    };

    auto project = [&](PowerPlan& pp) {
        for (int v = 0; v < nv; ++v) {
            const auto& pr = pt.list[vars[v]];
            double& val = pp.p(pr.k, pr.t);
            val = std::clamp(val, 0.0, scenario.P_beam_W);
        }
        for (size_t g = 0; g < pt.beamslot_grp.size(); ++g) {
            double frozen = 0.0, movable = 0.0;
            for (int j : pt.beamslot_grp[g]) {
                const auto& pr = pt.list[j];
                (is_over[pr.k] ? movable : frozen) += pp.p(pr.k, pr.t);
            }
            const double excess = frozen + movable - scenario.P_beam_W;
            if (excess > 0.0 && movable > 0.0) {
                const double f = std::max(0.0, (scenario.P_beam_W - frozen)) / movable;
                for (int j : pt.beamslot_grp[g]) {
                    const auto& pr = pt.list[j];
                    if (is_over[pr.k]) pp.p(pr.k, pr.t) *= f;
                }
            }
        }
    };

    Eigen::VectorXd F(ne), Ft(ne);
    Eigen::MatrixXd J(ne, nv);
    residual(out.power, F);
    double lambda = 1e-3;
    int it = 0;
    for (; it < cfg.lm_max_iters; ++it) {
        if (F.cwiseAbs().maxCoeff() <= cfg.lm_tol) break;
        jacobian(out.power, J);
        const Eigen::MatrixXd JtJ = J * J.transpose();  // ne x ne (fewer eqs than vars)
        bool stepped = false;
        for (int attempt = 0; attempt < 12; ++attempt) {
            Eigen::MatrixXd A = JtJ;
            A.diagonal().array() += lambda * (JtJ.diagonal().array().abs() + 1e-12);
            const Eigen::VectorXd y = A.ldlt().solve(-F);
            const Eigen::VectorXd dx = J.transpose() * y;  // minimum-norm-style step
            PowerPlan trial = out.power;
            for (int v = 0; v < nv; ++v) {
                const auto& pr = pt.list[vars[v]];
                trial.p(pr.k, pr.t) += dx[v];
            }
            project(trial);
            residual(trial, Ft);
            if (Ft.norm() < F.norm()) {
                out.power = trial;
                F = Ft;
                lambda = std::max(lambda * 0.3, 1e-12);
                stepped = true;
                break;
            }
            lambda *= 4.0;
        }
        if (!stepped) break;
    }
    out.iterations = it;
    out.residual = F.cwiseAbs().maxCoeff();
    if (out.residual > cfg.lm_tol) out.status = SolveStatus::Warning;
    return out;
}

Alg1Result run_alg1(const Scenario& scenario, const Assignment& assignment,
                    const PowerPlan& init_power, const SolverConfig& cfg,
                    PowerObjective objective) {
    Alg1Result out;
    const int K = scenario.num_terminals();
    const PairTable pt = PairTable::build(scenario, assignment, cfg.eval);

    PowerPlan p = init_power.p.empty() ? PowerPlan(K, scenario.T) : init_power;
    if (init_power.p.empty()) {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(std::max<size_t>(pt.list.size(), 1));
        default_power(scenario, pt, x);
        for (int j = 0; j < static_cast<int>(pt.list.size()); ++j)
            p.p(pt.list[j].k, pt.list[j].t) = x[j];
    } else {
        // Pairs the warm start does not know (fresh swaps) get a small share
        // so their theta is nonzero from the first inner solve.
        for (const auto& grp : pt.beamslot_grp) {
            double used = 0.0;
            int zeros = 0;
            for (int j : grp) {
                const double v = p.p(pt.list[j].k, pt.list[j].t);
                used += v;
                if (v <= 0.0) ++zeros;
            }
            if (zeros == 0) continue;
            const double share =
                0.5 * std::max(scenario.P_beam_W - used, 0.1 * scenario.P_beam_W) / zeros;
            for (int j : grp) {
                double& v = p.p(pt.list[j].k, pt.list[j].t);
                if (v <= 0.0) v = share;
            }
        }
        Eigen::VectorXd x(std::max<int>(static_cast<int>(pt.list.size()), 1));
        for (int j = 0; j < static_cast<int>(pt.list.size()); ++j)
            x[j] = p.p(pt.list[j].k, pt.list[j].t);
        pull_inside_simplices(scenario, pt, x);
        for (int j = 0; j < static_cast<int>(pt.list.size()); ++j)
            p.p(pt.list[j].k, pt.list[j].t) = x[j];
    }

    RateResult rr = compute_rates(scenario, assignment, p, cfg.eval);
    double obj = true_metric(scenario, rr.capacities_bps, objective);
    out.trace.push_back({0, obj, 0.0, 0});

    for (int it = 1; it <= cfg.max_outer_iters; ++it) {
        const TransformState theta = update_theta(p, scenario, assignment, cfg.eval);
        ConvexSolveResult inner =
            solve_convex_impl(pt, theta, scenario, cfg, objective, &p);
        if (inner.status == SolveStatus::Infeasible) {
            out.status = SolveStatus::Infeasible;
            out.most_violated_terminal = inner.most_violated_terminal;
            out.power = p;
            return out;
        }
        p = inner.power;
        rr = compute_rates(scenario, assignment, p, cfg.eval);
        const double next = true_metric(scenario, rr.capacities_bps, objective);
        out.trace.push_back({it, next, inner.kkt_gap, 0});
        const double denom = std::max(std::abs(obj), 1e-9);
        const bool settled = std::abs(next - obj) <= cfg.convergence_tol * denom;
        obj = next;
        if (settled) break;
    }

    if (objective == PowerObjective::SumSquaredShortfall) {
        // Capacity must not exceed demand at the optimum; equalize offenders.
        for (int round = 0; round < 5; ++round) {
            std::vector<int> over;
            for (int k = 0; k < K; ++k)
                if (to_mbps(rr.capacities_bps[k]) >
                    to_mbps(scenario.terminals[k].demand_bps) * (1.0 + cfg.feas_tol))
                    over.push_back(k);
            if (over.empty()) break;
            EqualizeResult eq = equalize_overserved(scenario, assignment, p, over, cfg);
            p = eq.power;
            rr = compute_rates(scenario, assignment, p, cfg.eval);
            if (eq.status == SolveStatus::Warning && round == 4)
                out.status = SolveStatus::Warning;
        }
        obj = true_metric(scenario, rr.capacities_bps, objective);
        out.trace.push_back({static_cast<int>(out.trace.size()), obj, 0.0, 0});
    }

    out.power = p;
    out.objective = obj;
    out.delta_mbps.assign(K, 0.0);
    for (int k = 0; k < K; ++k)
        out.delta_mbps[k] = std::max(
            to_mbps(scenario.terminals[k].demand_bps) - to_mbps(rr.capacities_bps[k]), 0.0);
    return out;
}

namespace {

/// Stable softplus (1/rho) ln(1 + exp(rho x)) with derivatives.
struct Softplus {
    double value, d1, d2;
};

Softplus softplus(double x, double rho) {
    Softplus s;
    const double z = rho * x;
    if (z > 30.0) {
        s.value = x;
        s.d1 = 1.0;
        s.d2 = 0.0;
    } else if (z < -30.0) {
        s.value = std::exp(z) / rho;
        s.d1 = std::exp(z);
        s.d2 = rho * std::exp(z);
    } else {
        const double e = std::exp(z);
        s.value = std::log1p(e) / rho;
        const double sig = e / (1.0 + e);
        s.d1 = sig;
        s.d2 = rho * sig * (1.0 - sig);
    }
    return s;
}

/// Relaxed per-timeslot subproblem: powers, fractional illumination and
/// scheduling, shortfall slacks against residual demand, smoothed floors.
class StageModel : public BarrierModel {
public:
    static constexpr double kRho = 1e3;  // softplus sharpness per Mbps

    StageModel(const Scenario& sc, const SlotModel& m,
               const std::vector<int>& candidates, const std::vector<double>& theta,
               const std::vector<double>& residual_mbps,
               const std::vector<double>& past_mbps, const std::vector<double>& phi,
               const SolverConfig& cfg, const std::vector<uint8_t>* fixed_alpha,
               bool fixed_beta)
        : sc_(sc), m_(m), cand_(candidates), theta_(theta), resid_(residual_mbps),
          past_(past_mbps), phi_(phi), cfg_(cfg), fixed_alpha_(fixed_alpha),
          fixed_beta_(fixed_beta) {
        const int n = static_cast<int>(cand_.size());
        int idx = n;  // powers first
        if (!fixed_beta_) {
            beta_var_.resize(n);
            for (int i = 0; i < n; ++i) beta_var_[i] = idx++;
        }
        if (!fixed_alpha_) {
            alpha_var_.resize(sc.num_beams());
            for (int b = 0; b < sc.num_beams(); ++b) alpha_var_[b] = idx++;
        }
        delta_var_.assign(n, -1);
        for (int i = 0; i < n; ++i)
            if (resid_[cand_[i]] > 0.0) delta_var_[i] = idx++;
        dim_ = idx;

        beam_members_.assign(sc.num_beams(), {});
        for (int i = 0; i < n; ++i)
            beam_members_[sc.terminals[cand_[i]].home_beam].push_back(i);

        obj_scale_ = 1e-9;
        for (int i = 0; i < n; ++i)
            obj_scale_ += resid_[cand_[i]] * resid_[cand_[i]];
        power_reg_ = 1e-6 * obj_scale_ / sc.P_beam_W;
    }

    int dim() const override { return dim_; }

    int constraint_count() const override {
        int c = static_cast<int>(cand_.size());      // p >= 0
        c += static_cast<int>(cand_.size());         // p <= P*beta (or <= P)
        for (int b = 0; b < sc_.num_beams(); ++b)
            if (!beam_members_[b].empty()) c += fixed_beta_ ? 1 : 2;  // simplex (+ K0 row)
        if (!fixed_beta_) c += static_cast<int>(cand_.size());        // beta <= 1
        if (!fixed_alpha_)
            c += sc_.num_beams() + 1 + static_cast<int>(sc_.conflict_set.size());
        for (int i = 0; i < static_cast<int>(cand_.size()); ++i)
            if (delta_var_[i] >= 0) ++c;
        return c;
    }

    double objective(const Eigen::VectorXd& x) const override {
        double v = 0.0;
        for (int i = 0; i < static_cast<int>(cand_.size()); ++i) {
            if (delta_var_[i] >= 0) v += x[delta_var_[i]] * x[delta_var_[i]];
            const double f = rate_mbps(x, i);
            const double arg = to_mbps(sc_.terminals[cand_[i]].min_rate_bps) -
                               past_[cand_[i]] - f;
            v += phi_[cand_[i]] * softplus(arg, kRho).value;
            v += power_reg_ * x[i];
        }
        return v;
    }

    bool eval(const Eigen::VectorXd& x, double mu, double& value, Eigen::VectorXd* grad,
              Eigen::MatrixXd* hess) const override {
        const int n = static_cast<int>(cand_.size());
        value = 0.0;
        if (grad) grad->setZero();
        if (hess) hess->setZero();

        // Rate terms and the smooth parts of the objective.
        std::vector<double> u(n), f(n), du_own(n);
        for (int i = 0; i < n; ++i) {
            if (!(x[i] > 0.0)) return false;
            double interf = 0.0;
            for (int l = 0; l < n; ++l)
                if (l != i) interf += m_.cross(loc_[i], loc_[l]) * x[l];
            const double a = m_.own_gain[loc_[i]];
            const double sq = std::sqrt(a * x[i]);
            u[i] = 1.0 + 2.0 * theta_[i] * sq -
                   theta_[i] * theta_[i] * (interf + m_.noise_W);
            if (!(u[i] > cfg_.eps_log)) return false;
            const double kap = m_.bandwidth_Hz[loc_[i]] / 1e6 / kLn2;
            f[i] = kap * std::log(u[i]);
            du_own[i] = sq > 0.0 ? theta_[i] * a / sq : 0.0;
        }

        for (int i = 0; i < n; ++i) {
            if (delta_var_[i] >= 0) {
                const double d = x[delta_var_[i]];
                value += d * d;
                if (grad) (*grad)[delta_var_[i]] += 2.0 * d;
                if (hess) (*hess)(delta_var_[i], delta_var_[i]) += 2.0;
            }
            value += power_reg_ * x[i];
            if (grad) (*grad)[i] += power_reg_;

            // Smoothed floor penalty phi * softplus(rmin - past - f_i).
            const double rmin = to_mbps(sc_.terminals[cand_[i]].min_rate_bps);
            const double arg = rmin - past_[cand_[i]] - f[i];
            const Softplus sp = softplus(arg, kRho);
            const double w = phi_[cand_[i]];
            value += w * sp.value;
            if (grad || hess) {
                gather_rate_grad(u, du_own, i);
                if (grad)
                    for (const auto& [idx, g] : rate_support_) (*grad)[idx] -= w * sp.d1 * g;
                if (hess) {
                    for (const auto& [ia, ga] : rate_support_)
                        for (const auto& [ib, gb] : rate_support_)
                            (*hess)(ia, ib) += w * sp.d2 * ga * gb;
                    add_rate_curvature(x, u, du_own, i, w * sp.d1, hess);  // -d1 * hess(f)
                }
            }
        }

        // Barrier pieces.
        auto lin = [&](std::initializer_list<std::pair<int, double>> terms, double offset) {
            double c = offset;
            for (const auto& [idx, coef] : terms) c += coef * x[idx];
            if (!(c > 0.0)) return false;
            value -= mu * std::log(c);
            if (grad)
                for (const auto& [idx, coef] : terms) (*grad)[idx] -= mu * coef / c;
            if (hess) {
                const double w = mu / (c * c);
                for (const auto& [a, ca] : terms)
                    for (const auto& [b, cb] : terms) (*hess)(a, b) += w * ca * cb;
            }
            return true;
        };
        auto lin_vec = [&](const std::vector<std::pair<int, double>>& terms, double offset) {
            double c = offset;
            for (const auto& [idx, coef] : terms) c += coef * x[idx];
            if (!(c > 0.0)) return false;
            value -= mu * std::log(c);
            if (grad)
                for (const auto& [idx, coef] : terms) (*grad)[idx] -= mu * coef / c;
            if (hess) {
                const double w = mu / (c * c);
                for (const auto& [a, ca] : terms)
                    for (const auto& [b, cb] : terms) (*hess)(a, b) += w * ca * cb;
            }
            return true;
        };

        for (int i = 0; i < n; ++i) {
            if (!lin({{i, 1.0}}, 0.0)) return false;  // p >= 0
            if (fixed_beta_) {
                if (!lin({{i, -1.0}}, sc_.P_beam_W)) return false;  // p <= P
            } else {
                if (!lin({{i, -1.0}, {beta_var_[i], sc_.P_beam_W}}, 0.0)) return false;
                if (!lin({{beta_var_[i], -1.0}}, 1.0)) return false;  // beta <= 1
            }
        }
        for (int b = 0; b < sc_.num_beams(); ++b) {
            if (beam_members_[b].empty()) continue;
            const double ab = fixed_alpha_ ? static_cast<double>((*fixed_alpha_)[b]) : 0.0;
            std::vector<std::pair<int, double>> simplex, cap;
            for (int i : beam_members_[b]) simplex.push_back({i, -1.0});
            if (!fixed_alpha_) simplex.push_back({alpha_var_[b], sc_.P_beam_W});
            if (!lin_vec(simplex, fixed_alpha_ ? sc_.P_beam_W * ab : 0.0)) return false;
            if (!fixed_beta_) {
                for (int i : beam_members_[b]) cap.push_back({beta_var_[i], -1.0});
                if (!fixed_alpha_)
                    cap.push_back({alpha_var_[b], static_cast<double>(sc_.K0)});
                if (!lin_vec(cap, fixed_alpha_ ? sc_.K0 * ab : 0.0)) return false;
            }
        }
        if (!fixed_alpha_) {
            std::vector<std::pair<int, double>> b0row;
            for (int b = 0; b < sc_.num_beams(); ++b) {
                if (!lin({{alpha_var_[b], -1.0}}, 1.0)) return false;  // alpha <= 1
                b0row.push_back({alpha_var_[b], -1.0});
            }
            if (!lin_vec(b0row, static_cast<double>(sc_.B0))) return false;
            for (const auto& pr : sc_.conflict_set)
                if (!lin({{alpha_var_[pr.first], -1.0}, {alpha_var_[pr.second], -1.0}}, 1.0))
                    return false;
        }
        for (int i = 0; i < n; ++i) {
            if (delta_var_[i] < 0) continue;
            // f_i + delta_i - resid_i >= 0 (concave row)
            const double c = f[i] + x[delta_var_[i]] - resid_[cand_[i]];
            if (!(c > 0.0)) return false;
            value -= mu * std::log(c);
            if (grad || hess) {
                gather_rate_grad(u, du_own, i);
                rate_support_.push_back({delta_var_[i], 1.0});
                if (grad)
                    for (const auto& [idx, g] : rate_support_) (*grad)[idx] -= mu * g / c;
                if (hess) {
                    const double w = mu / (c * c);
                    for (const auto& [ia, ga] : rate_support_)
                        for (const auto& [ib, gb] : rate_support_)
                            (*hess)(ia, ib) += w * ga * gb;
                    add_rate_curvature(x, u, du_own, i, mu / c, hess);
                }
            }
        }
        return true;
    }

    void set_locals(std::vector<int> locals) { loc_ = std::move(locals); }
    int beta_var(int i) const { return fixed_beta_ ? -1 : beta_var_[i]; }
    int alpha_var(int b) const { return fixed_alpha_ ? -1 : alpha_var_[b]; }
    int delta_var(int i) const { return delta_var_[i]; }
    double obj_scale() const { return obj_scale_; }

    double rate_mbps(const Eigen::VectorXd& x, int i) const {
        const int n = static_cast<int>(cand_.size());
        double interf = 0.0;
        for (int l = 0; l < n; ++l)
            if (l != i) interf += m_.cross(loc_[i], loc_[l]) * x[l];
        const double a = m_.own_gain[loc_[i]];
        const double u = 1.0 + 2.0 * theta_[i] * std::sqrt(a * x[i]) -
                         theta_[i] * theta_[i] * (interf + m_.noise_W);
        return m_.bandwidth_Hz[loc_[i]] / 1e6 * std::log2(std::max(u, cfg_.eps_log));
    }

private:
    void gather_rate_grad(const std::vector<double>& u,
                          const std::vector<double>& du_own, int i) const {
        rate_support_.clear();
        const double kap = m_.bandwidth_Hz[loc_[i]] / 1e6 / kLn2;
        const double gf = kap / u[i];
        rate_support_.push_back({i, gf * du_own[i]});
        const double th2 = theta_[i] * theta_[i];
        for (int l = 0; l < static_cast<int>(cand_.size()); ++l) {
            if (l == i) continue;
            const double cr = m_.cross(loc_[i], loc_[l]);
            if (cr != 0.0) rate_support_.push_back({l, -gf * th2 * cr});
        }
    }

    /// Adds weight * (-hess f_i), a PSD matrix, into H.
    void add_rate_curvature(const Eigen::VectorXd& x, const std::vector<double>& u,
                            const std::vector<double>& du_own, int i, double weight,
                            Eigen::MatrixXd* hess) const {
        const double kap = m_.bandwidth_Hz[loc_[i]] / 1e6 / kLn2;
        const double a = m_.own_gain[loc_[i]];
        const double sq = std::sqrt(a * x[i]);
        if (sq > 0.0 && theta_[i] > 0.0) {
            const double d2u = -theta_[i] * a * a / (2.0 * sq * sq * sq);
            (*hess)(i, i) -= weight * (kap / u[i]) * d2u;
        }
        pair_support_.clear();
        pair_support_.push_back({i, du_own[i]});
        const double th2 = theta_[i] * theta_[i];
        for (int l = 0; l < static_cast<int>(cand_.size()); ++l) {
            if (l == i) continue;
            const double cr = m_.cross(loc_[i], loc_[l]);
            if (cr != 0.0) pair_support_.push_back({l, -th2 * cr});
        }
        const double w2 = weight * kap / (u[i] * u[i]);
        for (const auto& [ia, ga] : pair_support_)
            for (const auto& [ib, gb] : pair_support_) (*hess)(ia, ib) += w2 * ga * gb;
    }

    const Scenario& sc_;
    const SlotModel& m_;
    std::vector<int> cand_;
    std::vector<int> loc_;
    std::vector<double> theta_;
    const std::vector<double>& resid_;
    const std::vector<double>& past_;
    const std::vector<double>& phi_;
    const SolverConfig& cfg_;
    const std::vector<uint8_t>* fixed_alpha_;
    bool fixed_beta_;
    int dim_ = 0;
    std::vector<int> beta_var_, alpha_var_, delta_var_;
    std::vector<std::vector<int>> beam_members_;
    double obj_scale_ = 1.0;
    double power_reg_ = 0.0;
    mutable std::vector<std::pair<int, double>> rate_support_, pair_support_;
};

}  // namespace

StageResult solve_relaxed_stage(const Scenario& scenario,
                                const std::vector<double>& residual_mbps,
                                const std::vector<double>& past_rate_mbps,
                                const std::vector<double>& penalty_factors,
                                const SolverConfig& cfg,
                                const std::vector<uint8_t>* fixed_alpha) {
    const int K = scenario.num_terminals();
    const int B = scenario.num_beams();
    StageResult out;
    out.alpha_bar.assign(B, 0.0);
    out.beta_bar.assign(K, 0.0);
    out.power_W.assign(K, 0.0);

    // Candidates: every terminal of every (active) beam, modeled as if
    // co-scheduled; the relaxation couples activity through the budgets.
    std::vector<int> cand;
    for (int k = 0; k < K; ++k) {
        const int b = scenario.terminals[k].home_beam;
        if (fixed_alpha && !(*fixed_alpha)[b]) continue;
        cand.push_back(k);
    }
    if (cand.empty()) {
        out.status = SolveStatus::Infeasible;
        return out;
    }

    // Pseudo single-slot assignment with all candidates transmitting.
    Assignment pseudo(B, K, 1);
    for (int b = 0; b < B; ++b) pseudo.alpha(b, 0) = 1;
    for (int k : cand) pseudo.beta(k, 0) = 1;
    const SlotModel m = build_slot_model(scenario, pseudo, 0, cfg.eval);

    const int n = static_cast<int>(cand.size());
    std::vector<int> locals(n);
    for (int i = 0; i < n; ++i) locals[i] = m.find(cand[i]);

    // Interior starting point for the fractional variables and powers.
    const double a0 =
        fixed_alpha ? 1.0 : std::min(0.45, 0.9 * scenario.B0 / std::max(B, 1));
    std::vector<double> alpha_bar(B, a0), beta_bar(K, 0.0), p(n, 0.0);
    for (int i = 0; i < n; ++i) {
        const int b = scenario.terminals[cand[i]].home_beam;
        const int members = static_cast<int>(scenario.beam_terminals[b].size());
        beta_bar[cand[i]] =
            std::min(0.45 * a0 * scenario.K0 / std::max(members, 1), 0.9);
        p[i] = 0.4 * scenario.P_beam_W *
               std::min(a0 / std::max(members, 1), beta_bar[cand[i]]);
    }

    std::vector<double> theta(n, 0.0);
    Eigen::VectorXd x;
    const int stage_iters = std::min(cfg.max_outer_iters, 8);
    double prev_obj = std::numeric_limits<double>::infinity();
    for (int it = 0; it < stage_iters; ++it) {
        // Theta from the current powers keeps the start strictly feasible:
        // at the matched theta the surrogate equals the true positive rate.
        for (int i = 0; i < n; ++i) {
            double den = m.noise_W;
            for (int l = 0; l < n; ++l)
                if (l != i) den += m.cross(locals[i], locals[l]) * p[l];
            theta[i] = std::sqrt(m.own_gain[locals[i]] * p[i]) / den;
        }

        StageModel model(scenario, m, cand, theta, residual_mbps, past_rate_mbps,
                         penalty_factors, cfg, fixed_alpha, false);
        model.set_locals(locals);

        Eigen::VectorXd x0 = Eigen::VectorXd::Zero(model.dim());
        for (int i = 0; i < n; ++i) {
            x0[i] = p[i];
            x0[model.beta_var(i)] = beta_bar[cand[i]];
        }
        if (!fixed_alpha)
            for (int b = 0; b < B; ++b) x0[model.alpha_var(b)] = alpha_bar[b];
        for (int i = 0; i < n; ++i) {
            if (model.delta_var(i) < 0) continue;
            const double f = model.rate_mbps(x0, i);
            x0[model.delta_var(i)] = std::max(0.0, residual_mbps[cand[i]] - f) +
                                     1e-3 * std::max(residual_mbps[cand[i]], 1e-3);
        }

        BarrierOptions bopt;
        bopt.obj_scale = model.obj_scale();
        bopt.gap_tol = std::max(cfg.inner_tol, 1e-8);
        bopt.max_newton_steps = cfg.max_newton_steps;
        BarrierStats stats;
        x = minimize_barrier(model, x0, bopt, &stats);

        for (int i = 0; i < n; ++i) {
            p[i] = std::max(x[i], 1e-12 * scenario.P_beam_W);
            beta_bar[cand[i]] = x[model.beta_var(i)];
        }
        if (!fixed_alpha)
            for (int b = 0; b < B; ++b) alpha_bar[b] = x[model.alpha_var(b)];

        const double obj = model.objective(x);
        if (std::abs(prev_obj - obj) <=
            cfg.convergence_tol * std::max(std::abs(prev_obj), 1e-9))
            break;
        prev_obj = obj;
    }

    for (int i = 0; i < n; ++i) {
        out.power_W[cand[i]] = p[i];
        out.beta_bar[cand[i]] = beta_bar[cand[i]];
    }
    for (int b = 0; b < B; ++b)
        out.alpha_bar[b] =
            fixed_alpha ? static_cast<double>((*fixed_alpha)[b]) : alpha_bar[b];
    return out;
}

StagePowerResult solve_stage_power(const Scenario& scenario, const std::vector<int>& chosen,
                                   const std::vector<double>& residual_mbps,
                                   const std::vector<double>& past_rate_mbps,
                                   const std::vector<double>& penalty_factors,
                                   const SolverConfig& cfg) {
    const int K = scenario.num_terminals();
    const int B = scenario.num_beams();
    StagePowerResult out;
    out.power_W.assign(K, 0.0);
    out.rate_mbps.assign(K, 0.0);
    if (chosen.empty()) return out;

    Assignment pseudo(B, K, 1);
    std::vector<uint8_t> active(B, 0);
    for (int k : chosen) {
        pseudo.beta(k, 0) = 1;
        active[scenario.terminals[k].home_beam] = 1;
    }
    for (int b = 0; b < B; ++b) pseudo.alpha(b, 0) = active[b];
    const SlotModel m = build_slot_model(scenario, pseudo, 0, cfg.eval);

    const int n = static_cast<int>(chosen.size());
    std::vector<int> locals(n);
    for (int i = 0; i < n; ++i) locals[i] = m.find(chosen[i]);

    std::vector<int> members_of_beam(B, 0);
    for (int k : chosen) ++members_of_beam[scenario.terminals[k].home_beam];
    std::vector<double> p(n);
    for (int i = 0; i < n; ++i) {
        const int b = scenario.terminals[chosen[i]].home_beam;
        p[i] = 0.9 * scenario.P_beam_W / members_of_beam[b];
    }

    std::vector<double> theta(n, 0.0);
    Eigen::VectorXd x;
    const int iters = std::min(cfg.max_outer_iters, 8);
    double prev_obj = std::numeric_limits<double>::infinity();
    for (int it = 0; it < iters; ++it) {
        for (int i = 0; i < n; ++i) {
            double den = m.noise_W;
            for (int l = 0; l < n; ++l)
                if (l != i) den += m.cross(locals[i], locals[l]) * p[l];
            theta[i] = std::sqrt(m.own_gain[locals[i]] * p[i]) / den;
        }
        StageModel model(scenario, m, chosen, theta, residual_mbps, past_rate_mbps,
                         penalty_factors, cfg, &active, true);
        model.set_locals(locals);
        Eigen::VectorXd x0 = Eigen::VectorXd::Zero(model.dim());
        for (int i = 0; i < n; ++i) x0[i] = p[i];
        for (int i = 0; i < n; ++i) {
            if (model.delta_var(i) < 0) continue;
            const double f = model.rate_mbps(x0, i);
            x0[model.delta_var(i)] = std::max(0.0, residual_mbps[chosen[i]] - f) +
                                     1e-3 * std::max(residual_mbps[chosen[i]], 1e-3);
        }
        BarrierOptions bopt;
        bopt.obj_scale = model.obj_scale();
        bopt.gap_tol = std::max(cfg.inner_tol, 1e-8);
        bopt.max_newton_steps = cfg.max_newton_steps;
        BarrierStats stats;
        x = minimize_barrier(model, x0, bopt, &stats);
        for (int i = 0; i < n; ++i) p[i] = std::max(x[i], 1e-12 * scenario.P_beam_W);
        const double obj = model.objective(x);
        if (std::abs(prev_obj - obj) <=
            cfg.convergence_tol * std::max(std::abs(prev_obj), 1e-9))
            break;
        prev_obj = obj;
    }

    // Rate beyond the residual serves nothing at this stage; trim overshoot
    // by bisection on the own power (monotone), a few sweeps to settle the
    // interference coupling. Zero residual pins the power to zero exactly.
    std::vector<double> pw(m.size(), 0.0);
    for (int i = 0; i < n; ++i) pw[locals[i]] = p[i];
    for (int sweep = 0; sweep < 8; ++sweep) {
        bool trimmed = false;
        for (int i = 0; i < n; ++i) {
            const double target = residual_mbps[chosen[i]];
            if (target <= 0.0) {
                if (pw[locals[i]] != 0.0) {
                    pw[locals[i]] = 0.0;
                    trimmed = true;
                }
                continue;
            }
            double rate = to_mbps(slot_rate_bps(m, pw, locals[i]));
            if (rate <= target * (1.0 + 1e-9)) continue;
            double lo = 0.0, hi = pw[locals[i]];
            for (int bs = 0; bs < 80; ++bs) {
                pw[locals[i]] = 0.5 * (lo + hi);
                rate = to_mbps(slot_rate_bps(m, pw, locals[i]));
                (rate > target ? hi : lo) = pw[locals[i]];
            }
            trimmed = true;
        }
        if (!trimmed) break;
    }
    for (int i = 0; i < n; ++i) {
        out.power_W[chosen[i]] = pw[locals[i]];
        out.rate_mbps[chosen[i]] = to_mbps(slot_rate_bps(m, pw, locals[i]));
    }
    return out;
}

}  // namespace bhnoma
