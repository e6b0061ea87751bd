#include <doctest.h>

#include <set>

#include "granpack/broad_phase.hpp"
#include "granpack/contact.hpp"
#include "support.hpp"

using namespace granpack;
using testing_support::sphere_at;

namespace {

std::set<std::pair<int, int>> pairs_of(const std::vector<CandidatePair>& v) {
  std::set<std::pair<int, int>> out;
  for (const auto& c : v) out.insert({c.i, c.j});
  return out;
}

}  // namespace

TEST_CASE("distant spheres produce no candidates") {
  std::vector<Particle> ps{sphere_at(1, Vec3::Zero(), 0), sphere_at(1, Vec3(10, 0, 0), 1)};
  CHECK(broad_phase(ps, DomainSpec::open()).empty());
}

TEST_CASE("lattice neighbours are all present") {
  const auto s = testing_support::cubic_lattice(4, 0.5);
  const auto cand = pairs_of(broad_phase(s.particles, s.domain));
  // Periodic 4^3 lattice: every particle has 6 touching neighbours.
  int found = 0;
  for (std::size_t i = 0; i < s.particles.size(); ++i)
    for (std::size_t j = i + 1; j < s.particles.size(); ++j) {
      const Vec3 d = minimum_image(s.particles[j].position - s.particles[i].position, s.domain.edge());
      if (std::abs(d.norm() - 1.0) < 1e-12) {
        CHECK(cand.count({static_cast<int>(i), static_cast<int>(j)}) == 1);
        ++found;
      }
    }
  CHECK(found == 64 * 6 / 2);
}

TEST_CASE("random clouds: broad phase covers the brute-force overlap set") {
  SplitMix64 rng(8);
  for (const bool periodic : {false, true}) {
    std::vector<Particle> ps;
    const double edge = 8.0;
    for (int k = 0; k < 100; ++k) {
      Particle p = testing_support::at(
          ParticleShape::poly_ellipsoid(rng.uniform(0.3, 1.0), 0.3, 0.3, 0.3, 0.3, rng.uniform(0.3, 0.9)),
          Vec3(rng.uniform(0, edge), rng.uniform(0, edge), rng.uniform(0, edge)), k, rng.orientation());
      ps.push_back(p);
    }
    const DomainSpec domain = periodic ? DomainSpec::periodic(edge) : DomainSpec::open();
    const auto fast = broad_phase(ps, domain);
    const auto cand = pairs_of(fast);
    CHECK(std::is_sorted(fast.begin(), fast.end(),
                         [](const auto& a, const auto& b) { return std::pair(a.i, a.j) < std::pair(b.i, b.j); }));
    int overlapping = 0;
    for (const auto& c : all_pairs(ps, domain)) {
      Particle pj = ps[static_cast<std::size_t>(c.j)];
      pj.position += c.shift;
      if (detect_contact(ps[static_cast<std::size_t>(c.i)], pj)) {
        ++overlapping;
        CHECK(cand.count({c.i, c.j}) == 1);
      }
    }
    CHECK(overlapping > 0);
  }
}

TEST_CASE("minimum image") {
  CHECK((minimum_image(Vec3(3.5, -3.5, 1.0), 4.0) - Vec3(-0.5, 0.5, 1.0)).norm() < 1e-15);
  CHECK((minimum_image(Vec3(0.1, 0.2, -0.3), 4.0) - Vec3(0.1, 0.2, -0.3)).norm() < 1e-15);
}
