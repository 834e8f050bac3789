#ifndef BETASC_BETASC_HPP
#define BETASC_BETASC_HPP

// Self-consistent beta-map laboratory: Parry densities, the self-consistency
// map psi, and exact transfer-operator runs on step densities.

#include "errors.hpp"
#include "step_density.hpp"
#include "beta_dynamics.hpp"
#include "psi_analysis.hpp"
#include "transfer.hpp"
#include "experiments.hpp"
#include "io.hpp"

#endif // BETASC_BETASC_HPP
