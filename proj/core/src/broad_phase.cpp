#include "granpack/broad_phase.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <unordered_map>

namespace granpack {

Vec3 minimum_image(const Vec3& d, double edge) {
  Vec3 out = d;
  for (int k = 0; k < 3; ++k) out[k] -= edge * std::round(d[k] / edge);
  return out;
}

namespace {

bool bounds_touch(const Particle& a, const Particle& b, const Vec3& shift) {
  const double reach = a.shape.bounding_radius() + b.shape.bounding_radius();
  return (b.position + shift - a.position).squaredNorm() <= reach * reach;
}

Vec3 image_shift(const Particle& a, const Particle& b, const DomainSpec& domain) {
  if (!domain.is_periodic()) return Vec3::Zero();
  const Vec3 d = b.position - a.position;
  return minimum_image(d, domain.edge()) - d;
}

std::int64_t cell_key(std::int64_t x, std::int64_t y, std::int64_t z) {
  constexpr std::int64_t kSpan = 1 << 20;
  return ((x + kSpan) * (2 * kSpan) + (y + kSpan)) * (2 * kSpan) + (z + kSpan);
}

}  // namespace

std::vector<CandidatePair> all_pairs(std::span<const Particle> particles, const DomainSpec& domain) {
  std::vector<CandidatePair> out;
  const int n = static_cast<int>(particles.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const Vec3 shift = image_shift(particles[i], particles[j], domain);
      if (bounds_touch(particles[i], particles[j], shift)) out.push_back({i, j, shift});
    }
  }
  return out;
}

std::vector<CandidatePair> broad_phase(std::span<const Particle> particles, const DomainSpec& domain) {
  const int n = static_cast<int>(particles.size());
  if (n < 2) return {};
  double max_radius = 0.0;
  for (const auto& p : particles) max_radius = std::max(max_radius, p.shape.bounding_radius());
  double cell = 2.0 * max_radius;

  std::int64_t wrap = 0;
  Vec3 origin = Vec3::Zero();
  if (domain.is_periodic()) {
    wrap = static_cast<std::int64_t>(std::floor(domain.edge() / cell));
    // With fewer than three cells per side neighbouring cells alias.
    if (wrap < 3) return all_pairs(particles, domain);
    cell = domain.edge() / static_cast<double>(wrap);
  } else {
    origin = particles[0].position;
    for (const auto& p : particles) origin = origin.cwiseMin(p.position);
  }

  auto coord = [&](const Vec3& x) {
    std::array<std::int64_t, 3> c{};
    for (int k = 0; k < 3; ++k) {
      c[k] = static_cast<std::int64_t>(std::floor((x[k] - origin[k]) / cell));
      if (wrap > 0) c[k] = ((c[k] % wrap) + wrap) % wrap;
    }
    return c;
  };

  std::unordered_map<std::int64_t, std::vector<int>> grid;
  grid.reserve(static_cast<std::size_t>(n));
  std::vector<std::array<std::int64_t, 3>> cells(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    cells[i] = coord(particles[i].position);
    grid[cell_key(cells[i][0], cells[i][1], cells[i][2])].push_back(i);
  }

  std::vector<CandidatePair> out;
  std::vector<int> neighbours;
  for (int i = 0; i < n; ++i) {
    neighbours.clear();
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dz = -1; dz <= 1; ++dz) {
          std::int64_t x = cells[i][0] + dx, y = cells[i][1] + dy, z = cells[i][2] + dz;
          if (wrap > 0) {
            x = (x + wrap) % wrap;
            y = (y + wrap) % wrap;
            z = (z + wrap) % wrap;
          }
          const auto it = grid.find(cell_key(x, y, z));
          if (it == grid.end()) continue;
          for (int j : it->second) {
            if (j > i) neighbours.push_back(j);
          }
        }
      }
    }
    std::sort(neighbours.begin(), neighbours.end());
    neighbours.erase(std::unique(neighbours.begin(), neighbours.end()), neighbours.end());
    for (int j : neighbours) {
      const Vec3 shift = image_shift(particles[i], particles[j], domain);
      if (bounds_touch(particles[i], particles[j], shift)) out.push_back({i, j, shift});
    }
  }
  return out;
}

}  // namespace granpack
