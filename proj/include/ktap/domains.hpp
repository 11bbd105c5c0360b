#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ktap {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

enum class SensoryMode { metric, topological };

/* Cone geometry of what a particle can sense and see. theta is the symmetric
   semi-amplitude of the arc, n_c the critical neighbor count that sizes the
   topological sensory domain. */
struct SensoryConfig {
  double theta = 3.14159265358979323846;
  double r_visibility = 1.0;
  double n_c = 7.0;
  SensoryMode mode = SensoryMode::topological;
};

struct DomainPair {
  double r_sensory = 0.0;
  double r_visibility = 0.0;
  double theta = 3.14159265358979323846;
};

/** Radius of the topological sensory domain: the smallest R whose circular
    sector of semi-amplitude theta contains n_c neighbors at local density rho,
    i.e. rho * theta * R^2 = n_c. Zero density means no finite radius can
    collect the critical count; an infinite sentinel is returned. */
inline double sensory_radius(double rho, const SensoryConfig& cfg) {
  if (cfg.mode != SensoryMode::topological)
    throw std::logic_error("sensory_radius: metric mode uses a fixed radius, nothing to compute");
  if (rho < 0.0) throw std::invalid_argument("sensory_radius: negative density");
  if (!(cfg.theta > 0.0)) throw std::invalid_argument("sensory_radius: theta must be positive");
  if (!(cfg.n_c > 0.0)) throw std::invalid_argument("sensory_radius: n_c must be positive");
  if (rho == 0.0) return std::numeric_limits<double>::infinity();
  return std::sqrt(cfg.n_c / (rho * cfg.theta));
}

/** Radius of the effective interaction domain, the intersection of the sensory
    and visibility domains for co-axial equal-angle cones. */
inline double effective_radius(const DomainPair& pair) {
  if (pair.r_sensory < 0.0 || pair.r_visibility < 0.0)
    throw std::invalid_argument("effective_radius: negative radius");
  return std::min(pair.r_sensory, pair.r_visibility);
}

/** Membership test for the cone with vertex x_self, axis v_self, the given
    radius and semi-amplitude. Boundary inclusive; the vertex itself is not a
    neighbor; zero velocity degenerates to the full disk. */
inline bool in_domain(Vec2 x_self, Vec2 v_self, Vec2 x_other, double radius, double theta) {
  const Vec2 d = x_other - x_self;
  const double r = norm(d);
  if (r == 0.0) return false;
  if (!(r <= radius * (1.0 + 1e-12))) return false;
  const double speed = norm(v_self);
  if (speed == 0.0) return true;
  const double angle = std::atan2(std::abs(cross(v_self, d)), dot(v_self, d));
  return angle <= theta + 1e-12;
}

}  // namespace ktap
