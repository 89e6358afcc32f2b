// Unknown drift with a Beta prior: solve the lattice, then roll the policy out
// against a fixed true drift.
#include "ocm/ocm.hpp"

#include <cstdio>
#include <memory>

int main() {
    ocm::BayesOcmModel model;
    model.prior = {2.0, 5.0};
    model.observation_cost = 0.25;
    model.horizon = 50;
    auto sol = std::make_shared<const ocm::BayesLatticeSolution>(ocm::solve_bayes_finite(model));
    std::printf("value at time 0: %.4f (initial drift %s)\n", sol->initial_value(),
                sol->initial_action() == 0 ? "+1" : "-1");

    ocm::BayesRolloutPolicy policy(sol);
    const auto trs = ocm::simulate_many(model, policy, 0.3, 2024, 1000);
    const auto st = ocm::mc_stats(trs);
    std::printf("observations %.3f +- %.3f\n", st.avg_observations, st.se_observations);
    std::printf("profit       %.3f +- %.3f\n", st.avg_profit, st.se_profit);
    std::printf("HDI width    %.4f +- %.4f\n", st.avg_hdi_width, st.se_hdi_width);
}
