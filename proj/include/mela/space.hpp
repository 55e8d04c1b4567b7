#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mela/box.hpp"
#include "mela/location.hpp"

namespace mela {

enum class Boundary { Periodic, Closed };
enum class NeighbourhoodKind { VonNeumann, Moore, GraphAdjacency };

struct NeighbourhoodSpec {
  NeighbourhoodKind kind = NeighbourhoodKind::VonNeumann;
  Boundary boundary = Boundary::Periodic;
  bool operator==(const NeighbourhoodSpec&) const = default;
};

// Integer segment origin, origin+1, ..., origin+length-1.
struct LineSpace {
  int length = 1;
  int origin = 0;
  NeighbourhoodSpec neighbourhood;
  bool operator==(const LineSpace&) const = default;
};

// Cells (x,y) with 0 <= x < width, 0 <= y < height.
struct Grid2DSpace {
  int width = 1;
  int height = 1;
  NeighbourhoodSpec neighbourhood;
  bool operator==(const Grid2DSpace&) const = default;
};

struct Grid3DSpace {
  int width = 1;
  int height = 1;
  int depth = 1;
  NeighbourhoodSpec neighbourhood;
  bool operator==(const Grid3DSpace&) const = default;
};

// Directed adjacency lists, kept in declaration order.
struct GraphSpace {
  std::vector<std::pair<int, std::vector<int>>> adjacency;
  bool operator==(const GraphSpace&) const = default;
};

struct SpaceDecl;

// Inner structure replicated at every vertex of an outer graph.
// Locations are the inner coordinates followed by the vertex.
struct NestedSpace {
  Box<SpaceDecl> inner;
  GraphSpace outer;
  Location entry;  // inner cell where inter-vertex moves land
  bool operator==(const NestedSpace&) const = default;
};

struct SpaceDecl {
  std::variant<LineSpace, Grid2DSpace, Grid3DSpace, GraphSpace, NestedSpace> shape;
  bool operator==(const SpaceDecl&) const = default;
};

class SpaceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline const char* to_string(Boundary b) { return b == Boundary::Periodic ? "periodic" : "closed"; }

inline const char* to_string(NeighbourhoodKind k) {
  switch (k) {
    case NeighbourhoodKind::VonNeumann: return "vonneumann";
    case NeighbourhoodKind::Moore: return "moore";
    case NeighbourhoodKind::GraphAdjacency: return "graph";
  }
  return "?";
}

// Number of coordinates of a location in the given space.
inline int space_arity(const SpaceDecl& decl) {
  return std::visit(
      [](const auto& s) -> int {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, LineSpace> || std::is_same_v<S, GraphSpace>) return 1;
        else if constexpr (std::is_same_v<S, Grid2DSpace>) return 2;
        else if constexpr (std::is_same_v<S, Grid3DSpace>) return 3;
        else return space_arity(*s.inner) + 1;
      },
      decl.shape);
}

// Enumerated location set with a stable lexicographic order, plus the
// neighbourhood structure used by new(l) destinations.
class Space {
 public:
  static Space build(const SpaceDecl& decl) {
    Space sp;
    sp.decl_ = decl;
    sp.arity_ = space_arity(decl);
    if (sp.arity_ > 3) throw SpaceError("locations may have at most 3 coordinates");
    sp.locations_ = enumerate(decl);
    std::sort(sp.locations_.begin(), sp.locations_.end());
    sp.locations_.erase(std::unique(sp.locations_.begin(), sp.locations_.end()), sp.locations_.end());
    for (std::size_t i = 0; i < sp.locations_.size(); ++i) sp.index_.emplace(sp.locations_[i], i);
    if (const auto* n = std::get_if<NestedSpace>(&decl.shape)) {
      Location probe = n->entry;
      if (probe.arity != sp.arity_ - 1) throw SpaceError("nested entry cell has wrong number of coordinates");
      if (!sp.contains(append(probe, n->outer.adjacency.front().first)))
        throw SpaceError("nested entry cell " + to_string(n->entry) + " is outside the inner space");
    }
    return sp;
  }

  const SpaceDecl& decl() const { return decl_; }
  const std::vector<Location>& locations() const { return locations_; }
  std::size_t size() const { return locations_.size(); }
  int arity() const { return arity_; }
  bool is_nested() const { return std::holds_alternative<NestedSpace>(decl_.shape); }

  bool contains(const Location& l) const { return index_.count(l) != 0; }

  std::optional<std::size_t> index_of(const Location& l) const {
    auto it = index_.find(l);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  // Neighbourhood declared with the space (for nested spaces: the inner one,
  // keeping the vertex fixed).
  std::vector<Location> neighbours(const Location& l) const {
    require(l);
    return neighbours_in(decl_, l, nullptr);
  }

  // Same, but overriding the declared neighbourhood kind/boundary. Graph
  // spaces only accept GraphAdjacency and grid-like spaces reject it.
  std::vector<Location> neighbours(const Location& l, NeighbourhoodSpec spec) const {
    require(l);
    return neighbours_in(decl_, l, &spec);
  }

  // Inter-vertex moves of a nested space: the entry cell of every outer
  // neighbour of the current vertex.
  std::vector<Location> outer_neighbours(const Location& l) const {
    require(l);
    const auto* n = std::get_if<NestedSpace>(&decl_.shape);
    if (!n) throw SpaceError("outer neighbourhood requested on a non-nested space");
    const int v = l.c[l.arity - 1];
    std::set<Location> out;
    for (int u : adjacency_of(n->outer, v)) out.insert(append(n->entry, u));
    return {out.begin(), out.end()};
  }

 private:
  void require(const Location& l) const {
    if (!contains(l)) throw SpaceError("location " + to_string(l) + " is outside the space");
  }

  static Location append(const Location& l, int v) {
    int coords[3] = {l.c[0], l.c[1], l.c[2]};
    coords[l.arity] = v;
    return make_location(coords, l.arity + 1u);
  }

  static const std::vector<int>& adjacency_of(const GraphSpace& g, int v) {
    for (const auto& [vertex, adj] : g.adjacency)
      if (vertex == v) return adj;
    throw SpaceError("vertex " + std::to_string(v) + " is not declared");
  }

  static void check_dims(std::initializer_list<int> dims) {
    for (int d : dims)
      if (d < 1) throw SpaceError("space dimensions must be at least 1");
  }

  static std::vector<Location> enumerate(const SpaceDecl& decl) {
    std::vector<Location> out;
    std::visit(
        [&](const auto& s) {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, LineSpace>) {
            check_dims({s.length});
            for (int i = 0; i < s.length; ++i) out.emplace_back(s.origin + i);
          } else if constexpr (std::is_same_v<S, Grid2DSpace>) {
            check_dims({s.width, s.height});
            for (int x = 0; x < s.width; ++x)
              for (int y = 0; y < s.height; ++y) out.emplace_back(x, y);
          } else if constexpr (std::is_same_v<S, Grid3DSpace>) {
            check_dims({s.width, s.height, s.depth});
            for (int x = 0; x < s.width; ++x)
              for (int y = 0; y < s.height; ++y)
                for (int z = 0; z < s.depth; ++z) out.emplace_back(x, y, z);
          } else if constexpr (std::is_same_v<S, GraphSpace>) {
            if (s.adjacency.empty()) throw SpaceError("graph must declare at least one vertex");
            std::set<int> vertices;
            for (const auto& [v, adj] : s.adjacency)
              if (!vertices.insert(v).second) throw SpaceError("vertex " + std::to_string(v) + " declared twice");
            for (const auto& [v, adj] : s.adjacency)
              for (int u : adj)
                if (!vertices.count(u))
                  throw SpaceError("edge " + std::to_string(v) + " -> " + std::to_string(u) +
                                   " references an undeclared vertex");
            for (int v : vertices) out.emplace_back(v);
          } else {
            if (std::holds_alternative<NestedSpace>(s.inner->shape))
              throw SpaceError("nested spaces may not be nested again");
            auto inner = enumerate(*s.inner);
            auto outer = enumerate(SpaceDecl{s.outer});
            for (const auto& cell : inner)
              for (const auto& v : outer) out.push_back(append(cell, v.c[0]));
          }
        },
        decl.shape);
    return out;
  }

  // Offsets of a neighbourhood stencil in `dims` dimensions.
  static std::vector<std::array<int, 3>> stencil(NeighbourhoodKind kind, int dims) {
    std::vector<std::array<int, 3>> out;
    if (kind == NeighbourhoodKind::VonNeumann) {
      for (int axis = 0; axis < dims; ++axis)
        for (int step : {1, -1}) {
          std::array<int, 3> o{};
          o[axis] = step;
          out.push_back(o);
        }
    } else {
      const int zmax = dims > 2 ? 1 : 0;
      const int ymax = dims > 1 ? 1 : 0;
      for (int dx = -1; dx <= 1; ++dx)
        for (int dy = -ymax; dy <= ymax; ++dy)
          for (int dz = -zmax; dz <= zmax; ++dz)
            if (dx || dy || dz) out.push_back({dx, dy, dz});
    }
    return out;
  }

  static std::vector<Location> grid_neighbours(const Location& l, const int* lo, const int* extent, int dims,
                                               NeighbourhoodSpec spec) {
    if (spec.kind == NeighbourhoodKind::GraphAdjacency)
      throw SpaceError("graph adjacency neighbourhood requires a graph space");
    std::set<Location> out;
    for (const auto& off : stencil(spec.kind, dims)) {
      int coords[3] = {0, 0, 0};
      bool inside = true;
      for (int a = 0; a < dims; ++a) {
        int rel = l.c[a] - lo[a] + off[a];
        if (spec.boundary == Boundary::Periodic) {
          rel = ((rel % extent[a]) + extent[a]) % extent[a];
        } else if (rel < 0 || rel >= extent[a]) {
          inside = false;
        }
        coords[a] = rel + lo[a];
      }
      if (!inside) continue;
      Location n = make_location(coords, static_cast<std::size_t>(dims));
      if (n != l) out.insert(n);
    }
    return {out.begin(), out.end()};
  }

  static std::vector<Location> neighbours_in(const SpaceDecl& decl, const Location& l,
                                             const NeighbourhoodSpec* override_spec) {
    return std::visit(
        [&](const auto& s) -> std::vector<Location> {
          using S = std::decay_t<decltype(s)>;
          auto spec_or = [&](NeighbourhoodSpec declared) { return override_spec ? *override_spec : declared; };
          if constexpr (std::is_same_v<S, LineSpace>) {
            const int lo[1] = {s.origin};
            const int ext[1] = {s.length};
            return grid_neighbours(l, lo, ext, 1, spec_or(s.neighbourhood));
          } else if constexpr (std::is_same_v<S, Grid2DSpace>) {
            const int lo[2] = {0, 0};
            const int ext[2] = {s.width, s.height};
            return grid_neighbours(l, lo, ext, 2, spec_or(s.neighbourhood));
          } else if constexpr (std::is_same_v<S, Grid3DSpace>) {
            const int lo[3] = {0, 0, 0};
            const int ext[3] = {s.width, s.height, s.depth};
            return grid_neighbours(l, lo, ext, 3, spec_or(s.neighbourhood));
          } else if constexpr (std::is_same_v<S, GraphSpace>) {
            if (override_spec && override_spec->kind != NeighbourhoodKind::GraphAdjacency)
              throw SpaceError("graph spaces only support graph adjacency neighbourhoods");
            std::set<Location> out;
            for (int u : adjacency_of(s, l.c[0])) out.emplace(u);
            return {out.begin(), out.end()};
          } else {
            const int v = l.c[l.arity - 1];
            int inner_coords[3] = {l.c[0], l.c[1], l.c[2]};
            Location cell = make_location(inner_coords, l.arity - 1u);
            std::vector<Location> out;
            for (const auto& n : neighbours_in(*s.inner, cell, override_spec)) out.push_back(append(n, v));
            return out;
          }
        },
        decl.shape);
  }

  SpaceDecl decl_;
  int arity_ = 1;
  std::vector<Location> locations_;
  std::map<Location, std::size_t> index_;
};

}  // namespace mela
