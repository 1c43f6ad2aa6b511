#pragma once

#include <string>
#include <vector>

#include "cp/rng.hpp"

namespace cp {

/// Row-major collection of equal-dimension points.
using SampleSet = std::vector<std::vector<double>>;

namespace data {

enum class Family { Ring, Spiral, Grid, Moon, BlobMixture };

Family family_from_string(const std::string& s);
std::string family_to_string(Family f);

/// Planar concept distribution standing in for a personalization dataset.
struct ConceptSpec {
  Family family = Family::Ring;
  // Family-specific knobs. Unused entries are ignored per family:
  //   ring:  radius, noise
  //   spiral: arms (integer), radius (outer), noise
  //   grid:  arms (cells per side), radius (half-extent), noise
  //   moon:  radius, noise (two interleaved half-moons)
  //   blob-mixture: centers (flattened x,y pairs), noise
  double radius = 1.0;
  int arms = 2;
  double noise = 0.05;
  std::vector<double> centers = {0.0, 0.0};
  std::uint64_t seed = 0;
};

/// n i.i.d. draws; deterministic in (spec.seed, n).
SampleSet generate(const ConceptSpec& spec, int n);

}  // namespace data
}  // namespace cp
