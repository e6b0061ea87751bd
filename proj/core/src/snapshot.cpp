#include "granpack/snapshot.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "granpack/errors.hpp"

namespace granpack {

static_assert(std::endian::native == std::endian::little, "snapshot codec assumes a little-endian host");

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::Assembly: return "assembly";
    case Provenance::MonteCarlo: return "mc";
    case Provenance::Dem: return "dem";
  }
  return "unknown";
}

bool PackingSnapshot::has_forces() const {
  return provenance == Provenance::Dem;
}

namespace {

constexpr char kMagic[8] = {'G', 'R', 'A', 'N', 'P', 'A', 'C', 'K'};
constexpr std::uint32_t kFlagConverged = 1u << 0;
constexpr std::uint32_t kFlagVelocities = 1u << 1;

class Writer {
 public:
  template <typename T>
  void put(T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void put(const Vec3& v) {
    for (int k = 0; k < 3; ++k) put(v[k]);
  }
  void raw(const char* data, std::size_t n) { out_.append(data, n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > in_.size()) throw Error("CORRUPT_FILE", "snapshot truncated");
    T value;
    std::memcpy(&value, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  Vec3 vec() {
    Vec3 v;
    for (int k = 0; k < 3; ++k) v[k] = get<double>();
    return v;
  }
  void raw(char* data, std::size_t n) {
    if (pos_ + n > in_.size()) throw Error("CORRUPT_FILE", "snapshot truncated");
    std::memcpy(data, in_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  const std::string& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_snapshot(const PackingSnapshot& s) {
  const bool velocities = !s.velocities.empty();
  if (velocities && (s.velocities.size() != s.particles.size() ||
                     s.angular_velocities.size() != s.particles.size())) {
    throw std::invalid_argument("velocity arrays must match the particle count");
  }
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.put(kSnapshotVersion);
  w.put(static_cast<std::uint32_t>(s.provenance));
  w.put(static_cast<std::uint32_t>(s.domain.kind));
  w.put((s.converged ? kFlagConverged : 0u) | (velocities ? kFlagVelocities : 0u));
  w.put(s.domain.lo);
  w.put(s.domain.hi);
  w.put(static_cast<std::uint64_t>(s.particles.size()));
  w.put(static_cast<std::uint64_t>(s.contacts.size()));
  w.put(s.iterations);
  w.put(s.config_hash);
  for (std::size_t i = 0; i < s.particles.size(); ++i) {
    const Particle& p = s.particles[i];
    w.put(p.id);
    w.put(static_cast<std::uint32_t>(p.shape.kind()));
    w.put(std::uint32_t{0});
    for (double v : p.shape.semi_lengths()) w.put(v);
    w.put(p.position);
    w.put(p.orientation.w());
    w.put(p.orientation.x());
    w.put(p.orientation.y());
    w.put(p.orientation.z());
    w.put(p.mass());
    w.put(p.density);
    if (velocities) {
      w.put(s.velocities[i]);
      w.put(s.angular_velocities[i]);
    }
  }
  for (const auto& r : s.contacts) {
    const Contact& c = r.contact;
    w.put(c.id_i);
    w.put(c.id_j);
    w.put(c.point_i);
    w.put(c.point_j);
    w.put(c.delta);
    w.put(c.normal);
    w.put(c.depth);
    w.put(std::uint32_t{r.has_force ? 1u : 0u});
    w.put(std::uint32_t{0});
    w.put(r.force);
  }
  return w.take();
}

PackingSnapshot decode_snapshot(const std::string& bytes) {
  Reader r(bytes);
  char magic[8];
  r.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(magic)) != 0) throw Error("CORRUPT_FILE", "not a granpack snapshot");
  const auto version = r.get<std::uint32_t>();
  if (version != kSnapshotVersion) {
    throw Error("VERSION_MISMATCH", "snapshot format version " + std::to_string(version) + ", expected " +
                                        std::to_string(kSnapshotVersion));
  }
  PackingSnapshot s;
  const auto prov = r.get<std::uint32_t>();
  if (prov > 2) throw Error("CORRUPT_FILE", "unknown provenance");
  s.provenance = static_cast<Provenance>(prov);
  const auto kind = r.get<std::uint32_t>();
  if (kind > 2) throw Error("CORRUPT_FILE", "unknown domain kind");
  s.domain.kind = static_cast<DomainKind>(kind);
  const auto flags = r.get<std::uint32_t>();
  s.converged = flags & kFlagConverged;
  const bool velocities = flags & kFlagVelocities;
  s.domain.lo = r.vec();
  s.domain.hi = r.vec();
  const auto n = r.get<std::uint64_t>();
  const auto m = r.get<std::uint64_t>();
  s.iterations = r.get<std::uint64_t>();
  s.config_hash = r.get<std::uint64_t>();
  if (n > bytes.size() || m > bytes.size()) throw Error("CORRUPT_FILE", "implausible record counts");
  s.particles.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto id = r.get<std::int64_t>();
    const auto shape_kind = r.get<std::uint32_t>();
    r.get<std::uint32_t>();
    std::array<double, 6> semi{};
    for (double& v : semi) v = r.get<double>();
    if (shape_kind > 2) throw Error("CORRUPT_FILE", "unknown shape kind");
    ParticleShape shape;
    try {
      shape = ParticleShape::from_semi_lengths(static_cast<ShapeKind>(shape_kind), semi);
    } catch (const std::invalid_argument& e) {
      throw Error("CORRUPT_FILE", std::string("particle record: ") + e.what());
    }
    const Vec3 position = r.vec();
    const double qw = r.get<double>(), qx = r.get<double>(), qy = r.get<double>(), qz = r.get<double>();
    const double mass = r.get<double>();
    const double density = r.get<double>();
    if (!(density > 0.0)) throw Error("CORRUPT_FILE", "particle record: non-positive density");
    Particle p = Particle::make(id, shape, density);
    if (std::abs(p.mass() - mass) > 1e-10 * mass) throw Error("CORRUPT_FILE", "particle record: mass mismatch");
    p.position = position;
    p.orientation = Orientation(qw, qx, qy, qz);
    if (std::abs(p.orientation.norm() - 1.0) > 1e-14) p.orientation.normalize();
    s.particles.push_back(std::move(p));
    if (velocities) {
      s.velocities.push_back(r.vec());
      s.angular_velocities.push_back(r.vec());
    }
  }
  s.contacts.reserve(m);
  for (std::uint64_t k = 0; k < m; ++k) {
    ContactRecord rec;
    rec.contact.id_i = r.get<std::int64_t>();
    rec.contact.id_j = r.get<std::int64_t>();
    rec.contact.point_i = r.vec();
    rec.contact.point_j = r.vec();
    rec.contact.delta = r.vec();
    rec.contact.normal = r.vec();
    rec.contact.depth = r.get<double>();
    rec.has_force = r.get<std::uint32_t>() != 0;
    r.get<std::uint32_t>();
    rec.force = r.vec();
    s.contacts.push_back(rec);
  }
  if (!r.done()) throw Error("CORRUPT_FILE", "trailing bytes after snapshot records");
  return s;
}

void write_snapshot(const std::filesystem::path& path, const PackingSnapshot& s) {
  const std::string bytes = encode_snapshot(s);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("IO_ERROR", "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("IO_ERROR", "write failed for " + path.string());
}

PackingSnapshot read_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("IO_ERROR", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_snapshot(ss.str());
}

nlohmann::json snapshot_summary(const PackingSnapshot& s) {
  nlohmann::json j;
  j["format_version"] = kSnapshotVersion;
  j["provenance"] = to_string(s.provenance);
  j["domain"] = {{"kind", s.domain.kind == DomainKind::Periodic ? "periodic"
                          : s.domain.kind == DomainKind::Box   ? "box"
                                                               : "open"},
                 {"lo", {s.domain.lo.x(), s.domain.lo.y(), s.domain.lo.z()}},
                 {"hi", {s.domain.hi.x(), s.domain.hi.y(), s.domain.hi.z()}}};
  j["n_particles"] = s.particles.size();
  j["n_contacts"] = s.contacts.size();
  j["converged"] = s.converged;
  j["iterations"] = s.iterations;
  std::ostringstream hash;
  hash << std::hex << std::setw(16) << std::setfill('0') << s.config_hash;
  j["config_hash"] = hash.str();
  double volume = 0.0;
  for (const auto& p : s.particles) volume += p.shape.volume();
  j["total_particle_volume"] = volume;
  if (!s.particles.empty()) j["shape_kind"] = to_string(s.particles.front().shape.kind());
  return j;
}

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t snapshot_hash(const PackingSnapshot& s) { return fnv1a(encode_snapshot(s)); }

std::string export_csv(const PackingSnapshot& s) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "id,kind,a_pos,a_neg,b_pos,b_neg,c_pos,c_neg,x,y,z,qw,qx,qy,qz,mass\n";
  for (const auto& p : s.particles) {
    out << p.id << ',' << to_string(p.shape.kind());
    for (double v : p.shape.semi_lengths()) out << ',' << v;
    out << ',' << p.position.x() << ',' << p.position.y() << ',' << p.position.z() << ',' << p.orientation.w()
        << ',' << p.orientation.x() << ',' << p.orientation.y() << ',' << p.orientation.z() << ',' << p.mass()
        << '\n';
  }
  return out.str();
}

}  // namespace granpack
