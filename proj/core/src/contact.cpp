#include "granpack/contact.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>

namespace granpack {

Contact Contact::swapped() const {
  Contact c = *this;
  std::swap(c.id_i, c.id_j);
  std::swap(c.point_i, c.point_j);
  c.delta = -delta;
  c.normal = -normal;
  return c;
}

ContactNonConvergence::ContactNonConvergence(std::int64_t id_i, std::int64_t id_j,
                                             std::optional<Contact> last_iterate)
    : Error("CONTACT_NONCONVERGENCE",
            "contact search did not converge for pair (" + std::to_string(id_i) + ", " +
                std::to_string(id_j) + ")"),
      id_i_(id_i),
      id_j_(id_j),
      last_(std::move(last_iterate)) {}

namespace detail {

SphereQuadraticMin minimize_quadratic_on_sphere(const Mat3& h, const Vec3& g) {
  Eigen::SelfAdjointEigenSolver<Mat3> eig(h);
  const Vec3 lambda = eig.eigenvalues();
  const Mat3& v = eig.eigenvectors();
  const Vec3 gamma = v.transpose() * g;

  // Shift s = mu + lambda_min, so denominators are gap_k + s with gap_0 = 0.
  const Vec3 gap = (lambda.array() - lambda[0]).matrix();
  const double degenerate_tol = 1e-12 * std::max(1.0, std::abs(lambda[2]));
  const double gnorm = gamma.norm();

  SphereQuadraticMin out;
  double degenerate_weight = 0.0;
  double rest_phi = 0.0;
  for (int k = 0; k < 3; ++k) {
    if (gap[k] <= degenerate_tol) {
      degenerate_weight += gamma[k] * gamma[k];
    } else {
      rest_phi += gamma[k] * gamma[k] / (gap[k] * gap[k]);
    }
  }

  const double hard_tol = 1e-14 * std::max(1.0, gnorm);
  if (degenerate_weight <= hard_tol * hard_tol && rest_phi <= 1.0) {
    // Hard case: the multiplier sits at -lambda_min and the remaining length
    // is taken along the lowest eigenvector.
    Vec3 y = Vec3::Zero();
    bool placed = false;
    for (int k = 0; k < 3; ++k) {
      if (gap[k] > degenerate_tol) {
        y[k] = -gamma[k] / gap[k];
      } else if (!placed) {
        y[k] = std::sqrt(std::max(0.0, 1.0 - rest_phi));
        placed = true;
      }
    }
    out.u = (v * y).normalized();
    return out;
  }

  auto phi = [&](double s, double* dphi) {
    double p = 0.0, dp = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double den = gap[k] + s;
      const double t = gamma[k] * gamma[k] / (den * den);
      p += t;
      dp -= 2.0 * t / den;
    }
    *dphi = dp;
    return p;
  };

  // psi(s) = 1/sqrt(phi(s)) - 1 is increasing and concave on (0, inf);
  // phi(|g|) <= 1 brackets the root.
  double lo = 0.0;
  double hi = gnorm;
  double s = hi;
  bool converged = false;
  int it = 0;
  for (; it < 100; ++it) {
    double dphi = 0.0;
    const double p = phi(s, &dphi);
    const double psi = 1.0 / std::sqrt(p) - 1.0;
    if (std::abs(psi) < 1e-15) {
      converged = true;
      break;
    }
    if (psi > 0.0) {
      hi = s;
    } else {
      lo = s;
    }
    const double dpsi = -0.5 * dphi / (p * std::sqrt(p));
    double next = s - psi / dpsi;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - s) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(s, 1e-300)) {
      s = next;
      converged = true;
      break;
    }
    s = next;
  }
  Vec3 y;
  for (int k = 0; k < 3; ++k) y[k] = -gamma[k] / (gap[k] + s);
  out.u = (v * y).normalized();
  out.converged = converged;
  out.iterations = it;
  return out;
}

}  // namespace detail

namespace {

constexpr int kMaxOctantRounds = 16;
constexpr int kMaxPolishIterations = 500;
constexpr double kPointTolerance = 1e-10;

struct Frame {
  Vec3 junction;
  Mat3 rot;
};

Frame frame_of(const Particle& p) { return {p.junction(), p.rotation()}; }

struct PieceSolution {
  Vec3 local_a;  // on piece o of a, a's junction frame
  bool converged;
  int iterations;
};

// Minimise b's octant-q ellipsoid implicit over a's octant-o ellipsoid surface.
PieceSolution solve_piece(const Particle& a, const Frame& fa, int o, const Particle& b,
                          const Frame& fb, int q) {
  const Vec3 sa = a.shape.octant_semi_axes(o);
  const Vec3 inv_sb = b.shape.octant_semi_axes(q).cwiseInverse();
  const Mat3 m = inv_sb.asDiagonal() * (fb.rot.transpose() * fa.rot) * sa.asDiagonal();
  const Vec3 w = inv_sb.asDiagonal() * (fb.rot.transpose() * (fa.junction - fb.junction));
  const auto sol = detail::minimize_quadratic_on_sphere(m.transpose() * m, m.transpose() * w);
  return {sa.cwiseProduct(sol.u), sol.converged, sol.iterations};
}

double value_at(const Particle& b, const Frame& fb, const Vec3& world) {
  return b.shape.implicit(fb.rot.transpose() * (world - fb.junction));
}

// Projected gradient descent on the radial parameterisation of a's surface.
SurfaceSearch polish(const Particle& a, const Frame& fa, const Particle& b, const Frame& fb,
                     Vec3 start_local, int iterations_so_far) {
  auto eval = [&](const Vec3& u, Vec3* local, Vec3* grad) {
    const double gval = a.shape.implicit(u);
    *local = u / std::sqrt(gval);
    const Vec3 world = fa.junction + fa.rot * *local;
    const Vec3 y = fb.rot.transpose() * (world - fb.junction);
    const double f = b.shape.implicit(y);
    if (grad) {
      const Vec3 df_dlocal = fa.rot.transpose() * (fb.rot * b.shape.implicit_gradient(y));
      const Vec3 dg = a.shape.implicit_gradient(u);
      // d local / d u = I / sqrt(G) - u dG^T / (2 G^{3/2})
      const Vec3 gu = df_dlocal / std::sqrt(gval) -
                      dg * (u.dot(df_dlocal) / (2.0 * gval * std::sqrt(gval)));
      *grad = gu - gu.dot(u) * u;
    }
    return f;
  };

  Vec3 u = start_local.normalized();
  Vec3 local, grad;
  double f = eval(u, &local, &grad);
  double step = 0.1;
  const double scale = a.shape.major();
  SurfaceSearch out;
  out.converged = false;
  int it = 0;
  for (; it < kMaxPolishIterations; ++it) {
    const double gnorm2 = grad.squaredNorm();
    if (gnorm2 == 0.0) {
      out.converged = true;
      break;
    }
    bool accepted = false;
    Vec3 u_new, local_new, grad_new;
    double f_new = f;
    for (int ls = 0; ls < 60; ++ls) {
      u_new = (u - step * grad).normalized();
      f_new = eval(u_new, &local_new, nullptr);
      if (f_new <= f - 1e-4 * step * gnorm2) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No further decrease is representable: stationary to machine precision.
      out.converged = true;
      break;
    }
    eval(u_new, &local_new, &grad_new);
    const double moved = (local_new - local).norm();
    u = u_new;
    local = local_new;
    grad = grad_new;
    f = f_new;
    step *= 2.0;
    if (moved < kPointTolerance * std::max(1.0, scale)) {
      out.converged = true;
      break;
    }
  }
  out.point = fa.junction + fa.rot * local;
  out.value = f;
  out.iterations = iterations_so_far + it;
  return out;
}

}  // namespace

SurfaceSearch deepest_point(const Particle& a, const Particle& b) {
  const Frame fa = frame_of(a);
  const Frame fb = frame_of(b);

  if (a.shape.is_symmetric() && b.shape.is_symmetric()) {
    const auto piece = solve_piece(a, fa, 0, b, fb, 0);
    SurfaceSearch out;
    out.point = fa.junction + fa.rot * piece.local_a;
    out.value = value_at(b, fb, out.point);
    out.converged = piece.converged;
    out.iterations = piece.iterations;
    return out;
  }

  // Active-octant iteration: solve the ellipsoid problem for the current
  // octant pair, then reclassify the result until the pair is consistent.
  int o = octant_of(fa.rot.transpose() * (fb.junction - fa.junction));
  int q = octant_of(fb.rot.transpose() * (fa.junction - fb.junction));
  std::uint64_t visited = 0;
  SurfaceSearch best;
  best.value = std::numeric_limits<double>::infinity();
  Vec3 best_local = Vec3::UnitX();
  bool best_consistent = false;
  int iterations = 0;
  for (int round = 0; round < kMaxOctantRounds; ++round) {
    visited |= std::uint64_t{1} << (8 * o + q);
    const auto piece = solve_piece(a, fa, o, b, fb, q);
    iterations += piece.iterations + 1;
    const Vec3 local = a.shape.is_symmetric() ? piece.local_a : a.shape.project_to_surface(piece.local_a);
    const Vec3 world = fa.junction + fa.rot * local;
    const double value = value_at(b, fb, world);
    const int o2 = a.shape.is_symmetric() ? o : octant_of(local);
    const int q2 = b.shape.is_symmetric() ? q : octant_of(fb.rot.transpose() * (world - fb.junction));
    const bool consistent = piece.converged && o2 == o && q2 == q;
    if (value < best.value) {
      best.point = world;
      best.value = value;
      best_local = local;
      best_consistent = consistent;
    }
    if (consistent) break;
    if (visited & (std::uint64_t{1} << (8 * o2 + q2))) break;
    o = o2;
    q = q2;
  }
  if (best_consistent) {
    best.converged = true;
    best.iterations = iterations;
    return best;
  }
  SurfaceSearch refined = polish(a, fa, b, fb, best_local, iterations);
  if (refined.value > best.value) {
    refined.point = best.point;
    refined.value = best.value;
  }
  return refined;
}

namespace {

std::optional<Contact> sphere_sphere(const Particle& p_i, const Particle& p_j) {
  const double ri = p_i.shape.semi(0, false);
  const double rj = p_j.shape.semi(0, false);
  const Vec3 d = p_j.position - p_i.position;
  const double dist = d.norm();
  if (dist >= ri + rj) return std::nullopt;
  const Vec3 n = dist > 0.0 ? Vec3(d / dist) : Vec3(Vec3::UnitX());
  Contact c;
  c.id_i = p_i.id;
  c.id_j = p_j.id;
  c.point_i = p_i.position + ri * n;
  c.point_j = p_j.position - rj * n;
  c.depth = ri + rj - dist;
  c.delta = -c.depth * n;
  c.normal = n;
  return c;
}

// Deep-overlap fallback when the two surface points coincide: opposing
// support points along the branch direction.
Contact support_contact(const Particle& p_i, const Particle& p_j) {
  Vec3 n = p_j.position - p_i.position;
  n = n.norm() > 0.0 ? Vec3(n.normalized()) : Vec3(Vec3::UnitX());
  Contact c;
  c.id_i = p_i.id;
  c.id_j = p_j.id;
  c.point_i = p_i.to_world(p_i.shape.support(p_i.orientation.conjugate() * n));
  c.point_j = p_j.to_world(p_j.shape.support(p_j.orientation.conjugate() * (-n)));
  c.delta = c.point_j - c.point_i;
  c.depth = c.delta.norm();
  c.normal = n;
  return c;
}

}  // namespace

std::optional<Contact> detect_contact(const Particle& p_i, const Particle& p_j) {
  const double reach = p_i.shape.bounding_radius() + p_j.shape.bounding_radius();
  if ((p_j.position - p_i.position).squaredNorm() > reach * reach) return std::nullopt;
  if (p_i.shape.kind() == ShapeKind::Sphere && p_j.shape.kind() == ShapeKind::Sphere) {
    return sphere_sphere(p_i, p_j);
  }

  const SurfaceSearch a = deepest_point(p_i, p_j);
  const SurfaceSearch b = deepest_point(p_j, p_i);
  const bool overlapping =
      a.value < 1.0 || b.value < 1.0 || p_i.contains(p_j.position) || p_j.contains(p_i.position);

  std::optional<Contact> contact;
  if (overlapping) {
    Contact c;
    c.id_i = p_i.id;
    c.id_j = p_j.id;
    c.point_i = a.point;
    c.point_j = b.point;
    c.delta = b.point - a.point;
    c.depth = c.delta.norm();
    const double scale = std::min(p_i.shape.minor(), p_j.shape.minor());
    if (c.depth > 1e-12 * scale) {
      c.normal = -c.delta / c.depth;
    } else {
      c = support_contact(p_i, p_j);
    }
    if (c.depth > 0.0) contact = c;
  }
  if (!a.converged || !b.converged) throw ContactNonConvergence(p_i.id, p_j.id, contact);
  return contact;
}

std::optional<Contact> detect_wall_contact(const Particle& p, const Plane& wall) {
  const Vec3 n = wall.normal.normalized();
  const Vec3 extreme = p.to_world(p.shape.support(p.orientation.conjugate() * (-n)));
  const double penetration = -n.dot(extreme - wall.point);
  if (!(penetration > 0.0)) return std::nullopt;
  Contact c;
  c.id_i = p.id;
  c.id_j = wall.id;
  c.point_i = extreme;
  c.point_j = extreme + penetration * n;
  c.delta = penetration * n;
  c.depth = penetration;
  c.normal = -n;
  return c;
}

double relative_overlap(const Contact& c, const Particle& p_i, const Particle& p_j) {
  return c.depth / (p_i.shape.equivalent_radius() + p_j.shape.equivalent_radius());
}

double relative_overlap(const Contact& c, const Particle& p) {
  return c.depth / p.shape.equivalent_radius();
}

double curvature_radius(const Particle& p, const Vec3& world_point) {
  if (p.shape.kind() == ShapeKind::Sphere) return p.shape.semi(0, false);
  return p.shape.mean_curvature_radius(p.shape.project_to_surface(p.to_local(world_point)));
}

}  // namespace granpack
