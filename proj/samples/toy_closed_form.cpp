// Two-state toy model: closed-form value against the penalised Newton solve.
#include "ocm/ocm.hpp"

#include <cstdio>

int main() {
    ocm::set_warning_handler(nullptr);
    const double p = 0.9;
    const double gamma = 0.9;
    for (double c : {0.0, 0.1, 0.5, 1.0}) {
        const auto cf = ocm::toy_closed_form(p, gamma, c);
        ocm::QviSystem sys(ocm::build_two_state_toy(p, {gamma, c, 300}));
        const auto sol = ocm::solve_qvi(sys);
        const double v = sol.values[static_cast<Eigen::Index>(sys.index(1, 0, 0))];
        std::printf("c_obs=%.2f  interval=%d  closed form %.8f  solver %.8f\n", c, cf.t_star, cf.v1, v);
    }
}
