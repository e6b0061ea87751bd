#include <benchmark/benchmark.h>

#include "granpack/config.hpp"
#include "granpack/contact.hpp"
#include "granpack/dem.hpp"
#include "granpack/mc_packer.hpp"
#include "granpack/size_distribution.hpp"

using namespace granpack;

namespace {

Particle placed(const ParticleShape& shape, const Vec3& pos, std::int64_t id, const Orientation& q) {
  Particle p = Particle::make(id, shape, 2650.0);
  p.position = pos;
  p.orientation = q;
  return p;
}

void BM_ContactSpheres(benchmark::State& state) {
  const Particle a = placed(ParticleShape::sphere(1.0), Vec3::Zero(), 0, Orientation::Identity());
  const Particle b = placed(ParticleShape::sphere(0.8), Vec3(1.7, 0.1, 0.0), 1, Orientation::Identity());
  for (auto _ : state) benchmark::DoNotOptimize(detect_contact(a, b));
}
BENCHMARK(BM_ContactSpheres);

void BM_ContactEllipsoids(benchmark::State& state) {
  SplitMix64 rng(1);
  const Particle a = placed(ParticleShape::ellipsoid(1.0, 0.6, 0.4), Vec3::Zero(), 0, rng.orientation());
  const Particle b = placed(ParticleShape::ellipsoid(0.9, 0.7, 0.5), Vec3(1.1, 0.3, 0.2), 1, rng.orientation());
  for (auto _ : state) benchmark::DoNotOptimize(detect_contact(a, b));
}
BENCHMARK(BM_ContactEllipsoids);

void BM_ContactPolyEllipsoids(benchmark::State& state) {
  SplitMix64 rng(2);
  const auto carrot = ParticleShape::poly_ellipsoid(1.6, 0.6, 0.5, 0.5, 0.5, 0.5);
  const Particle a = placed(carrot, Vec3::Zero(), 0, rng.orientation());
  const Particle b = placed(carrot, Vec3(1.2, 0.4, 0.1), 1, rng.orientation());
  for (auto _ : state) benchmark::DoNotOptimize(detect_contact(a, b));
}
BENCHMARK(BM_ContactPolyEllipsoids);

std::vector<Particle> assembly(std::size_t n) {
  RunConfig c = parse_config({{"seed", 42}, {"assembly", {{"n", n}}}});
  return build_assembly(c.assembly);
}

void BM_McIteration(benchmark::State& state) {
  const auto particles = assembly(static_cast<std::size_t>(state.range(0)));
  McConfig config;
  McState mc = initial_placement(particles, initial_domain(particles, config.phi0), 42);
  for (auto _ : state) {
    const auto contacts = collect_contacts(mc, config);
    const auto moves = aggregate_moves(mc, contacts, config);
    apply_moves(mc, moves, config);
    benchmark::DoNotOptimize(mc.particles.data());
  }
}
BENCHMARK(BM_McIteration)->Arg(250)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_DemStep(benchmark::State& state) {
  const Container container;
  DemConfig config;
  DemState dem = initial_fill(assembly(static_cast<std::size_t>(state.range(0))), container, 42);
  const double dt = resolve_dt(dem.particles, config);
  for (auto _ : state) {
    Loads loads = resultant_loads(dem, container, config, dt);
    central_difference_step(dem, std::move(loads), config, dt);
  }
}
BENCHMARK(BM_DemStep)->Arg(250)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
