#include "cp/data.hpp"

#include <cmath>
#include <stdexcept>

namespace cp::data {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

Family family_from_string(const std::string& s) {
  if (s == "ring") return Family::Ring;
  if (s == "spiral") return Family::Spiral;
  if (s == "grid") return Family::Grid;
  if (s == "moon") return Family::Moon;
  if (s == "blob-mixture") return Family::BlobMixture;
  throw std::invalid_argument("unknown concept family: " + s);
}

std::string family_to_string(Family f) {
  switch (f) {
    case Family::Ring: return "ring";
    case Family::Spiral: return "spiral";
    case Family::Grid: return "grid";
    case Family::Moon: return "moon";
    case Family::BlobMixture: return "blob-mixture";
  }
  throw std::invalid_argument("bad family enum");
}

SampleSet generate(const ConceptSpec& spec, int n) {
  if (n < 1) throw std::invalid_argument("generate: n must be >= 1");
  Rng rng(spec.seed);
  SampleSet out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double x = 0.0, y = 0.0;
    switch (spec.family) {
      case Family::Ring: {
        const double a = 2.0 * kPi * rng.uniform();
        x = spec.radius * std::cos(a);
        y = spec.radius * std::sin(a);
        break;
      }
      case Family::Spiral: {
        const int arm = rng.uniform_int(0, spec.arms - 1);
        const double t = rng.uniform();  // position along the arm
        const double a = 2.0 * kPi * (t + static_cast<double>(arm) / spec.arms);
        const double r = spec.radius * t;
        x = r * std::cos(a);
        y = r * std::sin(a);
        break;
      }
      case Family::Grid: {
        const int cells = spec.arms;
        const int cx = rng.uniform_int(0, cells - 1);
        const int cy = rng.uniform_int(0, cells - 1);
        const double step =
            cells > 1 ? 2.0 * spec.radius / (cells - 1) : 0.0;
        x = -spec.radius + cx * step;
        y = -spec.radius + cy * step;
        break;
      }
      case Family::Moon: {
        const double a = kPi * rng.uniform();
        if (rng.uniform() < 0.5) {
          x = spec.radius * std::cos(a);
          y = spec.radius * std::sin(a);
        } else {
          x = spec.radius * (1.0 - std::cos(a));
          y = spec.radius * (0.5 - std::sin(a));
        }
        break;
      }
      case Family::BlobMixture: {
        const int k = static_cast<int>(spec.centers.size() / 2);
        const int c = rng.uniform_int(0, k - 1);
        x = spec.centers[2 * c];
        y = spec.centers[2 * c + 1];
        break;
      }
    }
    x += spec.noise * rng.normal();
    y += spec.noise * rng.normal();
    out.push_back({x, y});
  }
  return out;
}

}  // namespace cp::data
