#include "bhnoma/barrier.hpp"

#include <cmath>
#include <stdexcept>

namespace bhnoma {

Eigen::VectorXd minimize_barrier(const BarrierModel& model, Eigen::VectorXd x,
                                 const BarrierOptions& opt, BarrierStats* stats) {
    const int n = model.dim();
    const int m = model.constraint_count();
    const double scale = std::max(opt.obj_scale, 1e-12);

    double value = 0.0;
    Eigen::VectorXd grad(n);
    Eigen::MatrixXd hess(n, n);
    if (!model.eval(x, 1.0, value, nullptr, nullptr))
        throw std::runtime_error("minimize_barrier: start point not strictly feasible");

    BarrierStats st;
    double mu = opt.mu0_factor * scale;
    const double mu_min = opt.gap_tol * scale / std::max(m, 1);
    int steps = 0;

    while (true) {
        // Center at the current mu with damped Newton.
        for (;;) {
            if (steps >= opt.max_newton_steps) break;
            if (!model.eval(x, mu, value, &grad, &hess)) {
                throw std::runtime_error("minimize_barrier: iterate left the domain");
            }
            ++steps;

            Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
            Eigen::VectorXd dir;
            if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
                dir = ldlt.solve(-grad);
            } else {
                // Convexity can degrade to semidefiniteness; regularize.
                double ridge = 1e-10 * (hess.diagonal().cwiseAbs().maxCoeff() + 1.0);
                Eigen::MatrixXd h2 = hess;
                for (int tries = 0; tries < 12; ++tries) {
                    h2 = hess;
                    h2.diagonal().array() += ridge;
                    ldlt.compute(h2);
                    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) break;
                    ridge *= 100.0;
                }
                dir = ldlt.solve(-grad);
            }

            const double decrement2 = -grad.dot(dir);  // lambda^2
            if (!(decrement2 > 0.0)) break;
            if (decrement2 * 0.5 < 0.05 * mu) break;  // centered enough for this mu

            // Backtracking line search staying inside the domain.
            double step = 1.0;
            double trial_value = 0.0;
            bool accepted = false;
            for (int ls = 0; ls < 60; ++ls) {
                Eigen::VectorXd xt = x + step * dir;
                if (model.eval(xt, mu, trial_value, nullptr, nullptr) &&
                    trial_value <= value - 1e-4 * step * decrement2) {
                    x = std::move(xt);
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) break;
        }

        if (mu <= mu_min || steps >= opt.max_newton_steps) break;
        mu = std::max(mu * opt.mu_shrink, mu_min);
    }

    st.newton_steps = steps;
    st.final_mu = mu;
    st.gap_bound = mu * m;
    st.converged = mu <= mu_min * (1.0 + 1e-12);
    model.eval(x, mu, value, &grad, nullptr);
    st.grad_norm = grad.norm();
    if (stats) *stats = st;
    return x;
}

}  // namespace bhnoma
