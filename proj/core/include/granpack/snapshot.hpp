#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "granpack/broad_phase.hpp"
#include "granpack/contact.hpp"
#include "granpack/geometry.hpp"

namespace granpack {

enum class Provenance : std::uint32_t { Assembly = 0, MonteCarlo = 1, Dem = 2 };

const char* to_string(Provenance p);

struct ContactRecord {
  Contact contact;
  bool has_force = false;
  // Total contact force acting on particle id_i (the wall side carries the reaction).
  Vec3 force = Vec3::Zero();
};

struct PackingSnapshot {
  Provenance provenance = Provenance::Assembly;
  DomainSpec domain;
  std::vector<Particle> particles;
  // Present for DEM snapshots only; angular velocities are body-frame.
  std::vector<Vec3> velocities;
  std::vector<Vec3> angular_velocities;
  std::vector<ContactRecord> contacts;
  // MC convergence or DEM rest flag.
  bool converged = false;
  std::uint64_t iterations = 0;
  std::uint64_t config_hash = 0;

  bool has_forces() const;
};

/// Binary snapshot format, fixed little-endian layout:
///
///   header   : "GRANPACK" u32 version u32 provenance u32 domain_kind u32 flags
///              f64 lo[3] f64 hi[3] u64 n_particles u64 n_contacts
///              u64 iterations u64 config_hash
///   particle : i64 id u32 shape_kind u32 0 f64 semi[6] f64 position[3]
///              f64 quaternion[4] (w, x, y, z) f64 mass f64 density
///              [flags bit 1] f64 velocity[3] f64 angular_velocity[3]
///   contact  : i64 id_i i64 id_j f64 point_i[3] f64 point_j[3] f64 delta[3]
///              f64 normal[3] f64 depth u32 has_force u32 0 f64 force[3]
///
/// flags: bit 0 converged / at rest, bit 1 velocities present.
inline constexpr std::uint32_t kSnapshotVersion = 1;

std::string encode_snapshot(const PackingSnapshot& s);
PackingSnapshot decode_snapshot(const std::string& bytes);

void write_snapshot(const std::filesystem::path& path, const PackingSnapshot& s);
PackingSnapshot read_snapshot(const std::filesystem::path& path);

// Plain-text summary written next to the binary file.
nlohmann::json snapshot_summary(const PackingSnapshot& s);

// FNV-1a over arbitrary bytes and over the encoded snapshot.
std::uint64_t fnv1a(const std::string& bytes, std::uint64_t seed = 0xcbf29ce484222325ull);
std::uint64_t snapshot_hash(const PackingSnapshot& s);

// Per-particle pose table: id,kind,a_pos,...,x,y,z,qw,qx,qy,qz,mass
std::string export_csv(const PackingSnapshot& s);

}  // namespace granpack
