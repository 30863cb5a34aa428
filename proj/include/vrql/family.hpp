#pragma once

#include <cstdint>

#include "vrql/mdp.hpp"

namespace vrql {

// Built-in two-state, two-action family with noiseless rewards:
//   p = (4 gamma - 1)/(3 gamma), tau = 1 - (1-gamma)^lambda,
//   P_{u1} = [[p, 1-p], [0, 1]], P_{u2} = I, r = [[1, 0], [tau, 0]].
// Valid for gamma in (1/4, 1) and lambda >= 0. At lambda = 0 the second state's
// actions tie, making the optimal policy set two-fold.
TabularMDP two_state_family_mdp(double gamma, double lambda);

// Closed form of the optimal Q-function of the family:
//   [[ (3+tau)/(4(1-gamma)), gamma (3+tau)/(4(1-gamma)) ],
//    [ tau/(1-gamma),        gamma tau/(1-gamma)        ]].
QFunction two_state_family_qstar(double gamma, double lambda);

// Budget used by the scaling runs: N(gamma) = ceil((32*16/9)/(1-gamma)^3).
std::int64_t scaling_budget(double gamma);

}  // namespace vrql
