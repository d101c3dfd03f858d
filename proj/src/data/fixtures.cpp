#include "grass/data/fixtures.hpp"

#include "grass/data/shape_record.hpp"
#include "grass/shape/relations.hpp"

#include <cmath>
#include <numbers>

namespace grass {

namespace {

constexpr double kThickness = 0.01;

Part rect(int id, double cx, double cy, double w, double h, double degrees = 0.0) {
  const double a = degrees * std::numbers::pi / 180.0;
  Obbd b;
  b.center = Vec3d(cx, cy, 0);
  b.dims = Vec3d(w, h, kThickness);
  b.axis1 = Vec3d(std::cos(a), std::sin(a), 0);
  b.axis2 = Vec3d(-std::sin(a), std::cos(a), 0);
  return {id, "", b};
}

// Half-height of a rotated w x h rectangle.
double half_extent_y(double w, double h, double degrees) {
  const double a = degrees * std::numbers::pi / 180.0;
  return (w * std::abs(std::sin(a)) + h * std::abs(std::cos(a))) / 2;
}

RuleFixture make(std::string rule, std::string expectation, std::vector<Part> parts,
                 std::vector<std::set<int>> expected) {
  PartGraph g;
  g.parts = std::move(parts);
  normalize_to_unit_sphere(g);
  RuleFixture f{std::move(rule), std::move(expectation), detect_relations(g.parts), std::move(expected)};
  return f;
}

}  // namespace

std::vector<RuleFixture> fixture_arrangements() {
  std::vector<RuleFixture> out;

  out.push_back(make("M1", "mirror pair grouped before either side is assembled to the bar",
                     {rect(0, 0, 0, 1.0, 0.2), rect(1, -0.6, 0, 0.2, 0.4), rect(2, 0.6, 0, 0.2, 0.4)}, {{1, 2}}));

  out.push_back(make("M2", "stacked blocks assembled on one side before grouping the equivalent mirror pairs",
                     {rect(0, 0, 0, 0.6, 0.2), rect(1, -0.4, 0, 0.2, 0.2), rect(2, -0.4, 0.25, 0.12, 0.3),
                      rect(3, 0.4, 0, 0.2, 0.2), rect(4, 0.4, 0.25, 0.12, 0.3)},
                     {{1, 2}, {3, 4}}));

  out.push_back(make("G1", "order-4 row grouped before the order-2 mirror pair",
                     {rect(0, 0, 0, 1.6, 0.2), rect(1, -0.6, 0.2, 0.15, 0.2), rect(2, -0.2, 0.2, 0.15, 0.2),
                      rect(3, 0.2, 0.2, 0.15, 0.2), rect(4, 0.6, 0.2, 0.15, 0.2), rect(5, -0.5, -0.25, 0.2, 0.3),
                      rect(6, 0.5, -0.25, 0.2, 0.3)},
                     {{1, 2, 3, 4}}));

  {
    const double hm = half_extent_y(0.2, 0.3, 20), ht = half_extent_y(0.25, 0.12, 30);
    out.push_back(make("G2", "reflective pair grouped before the translational pair of the same order",
                       {rect(0, 0, 0, 1.6, 0.2), rect(1, -0.6, -0.09 - hm, 0.2, 0.3, 20),
                        rect(2, 0.6, -0.09 - hm, 0.2, 0.3, -20), rect(3, -0.25, 0.09 + ht, 0.25, 0.12, 30),
                        rect(4, 0.25, 0.09 + ht, 0.25, 0.12, 30)},
                       {{1, 2}}));
  }

  out.push_back(make("G3", "closely spaced triple grouped before the widely spaced triple of the same order",
                     {rect(0, 0, 0, 1.6, 0.2), rect(1, -0.2, 0.2, 0.1, 0.2), rect(2, 0, 0.2, 0.1, 0.2),
                      rect(3, 0.2, 0.2, 0.1, 0.2), rect(4, -0.6, -0.225, 0.15, 0.25), rect(5, 0, -0.225, 0.15, 0.25),
                      rect(6, 0.6, -0.225, 0.15, 0.25)},
                     {{1, 2, 3}}));

  out.push_back(make("A1", "symmetry-preserving assembly of the centered block before the side block",
                     {rect(0, 0, 0, 0.8, 0.2), rect(1, 0, 0.2, 0.3, 0.2), rect(2, 0.5, -0.05, 0.2, 0.3)},
                     {{0, 1}}));

  out.push_back(make("A2", "flush contact assembled before the near-miss contact",
                     {rect(0, 0, 0, 0.8, 0.2), rect(1, -0.1, 0.2, 0.5, 0.2), rect(2, 0.25, -0.215, 0.2, 0.2)},
                     {{0, 1}}));
  return out;
}

}  // namespace grass
