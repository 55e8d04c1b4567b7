#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>

namespace mela {

// A point of the location set: one to three integer coordinates.
// Lines and graphs use one coordinate, grids two or three, nested
// structures append the outer graph vertex as the last coordinate.
struct Location {
  std::array<int, 3> c{};
  std::uint8_t arity = 0;

  Location() = default;
  explicit Location(int x) : c{x, 0, 0}, arity(1) {}
  Location(int x, int y) : c{x, y, 0}, arity(2) {}
  Location(int x, int y, int z) : c{x, y, z}, arity(3) {}

  int operator[](std::size_t i) const { return c[i]; }

  // lexicographic on (arity, coordinates)
  auto operator<=>(const Location&) const = default;
};

inline std::string to_string(const Location& l) {
  if (l.arity == 1) return std::to_string(l.c[0]);
  std::string out = "(";
  for (std::size_t i = 0; i < l.arity; ++i) {
    if (i) out += ',';
    out += std::to_string(l.c[i]);
  }
  return out + ")";
}

inline std::ostream& operator<<(std::ostream& os, const Location& l) {
  return os << to_string(l);
}

inline Location make_location(const int* coords, std::size_t n) {
  switch (n) {
    case 1: return Location(coords[0]);
    case 2: return Location(coords[0], coords[1]);
    case 3: return Location(coords[0], coords[1], coords[2]);
    default: throw std::invalid_argument("location must have 1 to 3 coordinates");
  }
}

}  // namespace mela
