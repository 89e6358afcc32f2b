// Random walk on a smaller grid than the CLI default: solve, extract the
// policy and print how long it waits after each observation.
#include "ocm/ocm.hpp"

#include <cstdio>

int main() {
    ocm::set_warning_handler(nullptr);
    ocm::RandomWalkOptions opts;
    opts.gamma = 0.95;
    opts.horizon = 120;
    opts.observation_cost = 0.25;
    const auto model = ocm::build_random_walk(0.75, 10, ocm::RewardKind::inverse, opts);
    ocm::QviSystem sys(model);
    const auto sol = ocm::solve_qvi(sys);

    std::printf("Newton iterations per penalty level:");
    for (int it : sol.report.newton_iterations)
        std::printf(" %d", it);
    std::printf("\n");

    const auto policy = ocm::extract_policy(sys, sol.values);
    for (int x = 0; x < model.num_states(); ++x)
        std::printf("x=%3s  drift %s  wait %d\n", model.state_labels()[static_cast<std::size_t>(x)].c_str(),
                    model.action_labels()[static_cast<std::size_t>(policy.fresh_action(x))].c_str(),
                    policy.waiting_time(x));
}
