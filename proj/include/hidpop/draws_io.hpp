#pragma once

#include <filesystem>
#include <istream>
#include <ostream>

#include "hidpop/gibbs_sampler.hpp"

namespace hidpop {

// Columnar little-endian binary: header, observed y, then each block stored
// draw-major (one draw's values contiguous), chain indices and per-chain
// MH counters.
void write_draws(std::ostream& out, const PosteriorDraws& draws);
void write_draws(const std::filesystem::path& path, const PosteriorDraws& draws);
PosteriorDraws read_draws(std::istream& in);
PosteriorDraws read_draws(const std::filesystem::path& path);

// One row per draw: draw,chain,beta_*,sigma2_*,eta_plus_i,v_i,u_plus_i_t
void write_draws_csv(std::ostream& out, const PosteriorDraws& draws);

}  // namespace hidpop
