#pragma once

#include <Eigen/Dense>

namespace bhnoma {

/// Convex program in barrier form. Implementations assemble
///   phi(x) = f(x) - mu * sum_i ln c_i(x)
/// in one pass; eval() returns false when x is outside the domain
/// (some c_i <= 0 or a guarded log argument below its floor).
class BarrierModel {
public:
    virtual ~BarrierModel() = default;
    virtual int dim() const = 0;
    virtual int constraint_count() const = 0;
    virtual bool eval(const Eigen::VectorXd& x, double mu, double& value,
                      Eigen::VectorXd* grad, Eigen::MatrixXd* hess) const = 0;
    virtual double objective(const Eigen::VectorXd& x) const = 0;
};

struct BarrierOptions {
    double obj_scale = 1.0;      // rough magnitude of the objective, for tolerances
    double gap_tol = 1e-8;       // stop when mu * m <= gap_tol * obj_scale
    double mu0_factor = 0.05;    // mu0 = mu0_factor * obj_scale
    double mu_shrink = 0.1;
    int max_newton_steps = 400;  // total across the mu path
};

struct BarrierStats {
    bool converged = false;
    int newton_steps = 0;
    double final_mu = 0.0;
    double gap_bound = 0.0;   // m * final_mu, bounds f(x) - f* from above
    double grad_norm = 0.0;
};

/// Damped-Newton path following. `x0` must be strictly feasible.
Eigen::VectorXd minimize_barrier(const BarrierModel& model, Eigen::VectorXd x0,
                                 const BarrierOptions& opt, BarrierStats* stats = nullptr);

}  // namespace bhnoma
