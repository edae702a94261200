#pragma once

// Standard cell, channel shape, periodic layer lattice and the conforming
// Cartesian meshes of the microscopic and effective domains (n = 2).
//
// Coordinates in the standard cell Z = (0,1) x (-1,1) are called y1 / yn;
// physical coordinates are x1 (along the interface) / xn (across it).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "chanhomog/error.hpp"

namespace chanhomog {

/// Axis-aligned rectangle in standard-cell coordinates.
struct Rect {
  double y1_lo = 0.0;
  double y1_hi = 0.0;
  double yn_lo = 0.0;
  double yn_hi = 0.0;

  friend bool operator==(const Rect&, const Rect&) = default;
};

/// Raw (unvalidated) channel description: a union of rectangles whose
/// corners lie on the (1/den)-grid of Z.
struct ChannelSpec {
  std::vector<Rect> rects;
  int den = 1;

  friend bool operator==(const ChannelSpec&, const ChannelSpec&) = default;
};

/// Exact rational measure num/den.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }

  Rational reduced() const {
    std::int64_t g = std::gcd(num, den);
    return g == 0 ? *this : Rational{num / g, den / g};
  }
  friend bool operator==(const Rational& a, const Rational& b) { return a.num * b.den == b.num * a.den; }
};

enum class EdgeKind : std::uint8_t { Lateral, Top, Bottom };

/// Unit edge (length 1/den) of the channel boundary, with the outward normal.
struct BoundaryEdge {
  double y1_a, yn_a, y1_b, yn_b;
  double normal_1, normal_n;
  EdgeKind kind;
};

struct ChannelMeasures {
  Rational area;     // |Z*|
  Rational lateral;  // |N|
  Rational top;      // |S*+|
  Rational bottom;   // |S*-|
  Rational delta;    // distance of N to the lateral cell walls
};

/// Validated channel. Holds the occupancy bitmap of the (1/den)-grid of Z:
/// column c covers y1 in (c/q, (c+1)/q), row r covers yn in (-1 + r/q, -1 + (r+1)/q).
class Channel {
 public:
  int den() const { return q_; }
  int columns() const { return q_; }
  int rows() const { return 2 * q_; }
  const ChannelSpec& spec() const { return spec_; }

  bool occupied(int col, int row) const {
    if (col < 0 || col >= q_ || row < 0 || row >= 2 * q_) return false;
    return bits_[static_cast<std::size_t>(row) * q_ + col] != 0;
  }

  /// Closure membership of a standard-cell point (y1 in [0,1], yn in [-1,1]).
  bool contains(double y1, double yn, double tol = 1e-12) const {
    for (const Rect& r : spec_.rects) {
      if (y1 >= r.y1_lo - tol && y1 <= r.y1_hi + tol && yn >= r.yn_lo - tol && yn <= r.yn_hi + tol) {
        return true;
      }
    }
    return false;
  }

  const std::vector<BoundaryEdge>& boundary() const { return edges_; }

  friend Channel build_channel(const ChannelSpec& spec);

 private:
  ChannelSpec spec_;
  int q_ = 1;
  std::vector<std::uint8_t> bits_;
  std::vector<BoundaryEdge> edges_;
};

namespace detail {

inline int grid_index(double coord, int q, const char* what) {
  double scaled = coord * q;
  double rounded = std::round(scaled);
  if (std::abs(scaled - rounded) > 1e-9) {
    throw Error(ErrorCode::OffGridCorner,
                std::string(what) + " coordinate " + std::to_string(coord) + " is not a multiple of 1/" +
                    std::to_string(q));
  }
  return static_cast<int>(rounded);
}

struct IntRect {
  int c0, c1, r0, r1;  // half-open column/row ranges on the (1/q)-grid
};

// Positive-length contact or overlap between two closed rectangles.
inline bool rects_adjacent(const IntRect& a, const IntRect& b) {
  int ox = std::min(a.c1, b.c1) - std::max(a.c0, b.c0);
  int oy = std::min(a.r1, b.r1) - std::max(a.r0, b.r0);
  return (ox >= 0 && oy > 0) || (ox > 0 && oy >= 0);
}

}  // namespace detail

inline Channel build_channel(const ChannelSpec& spec) {
  if (spec.den < 1) throw Error(ErrorCode::InvalidRect, "denominator must be >= 1");
  if (spec.rects.empty()) throw Error(ErrorCode::InvalidRect, "channel has no rectangles");
  const int q = spec.den;

  std::vector<detail::IntRect> irects;
  for (const Rect& r : spec.rects) {
    detail::IntRect ir{detail::grid_index(r.y1_lo, q, "y1"), detail::grid_index(r.y1_hi, q, "y1"),
                       detail::grid_index(r.yn_lo + 1.0, q, "yn"), detail::grid_index(r.yn_hi + 1.0, q, "yn")};
    if (ir.c0 < 0 || ir.c1 > q || ir.r0 < 0 || ir.r1 > 2 * q || ir.c0 >= ir.c1 || ir.r0 >= ir.r1) {
      throw Error(ErrorCode::InvalidRect, "rectangle empty or outside the standard cell");
    }
    irects.push_back(ir);
  }

  // Connectivity over the rectangle adjacency graph.
  std::vector<std::size_t> parent(irects.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t i = 0; i < irects.size(); ++i) {
    for (std::size_t j = i + 1; j < irects.size(); ++j) {
      if (detail::rects_adjacent(irects[i], irects[j])) parent[find(i)] = find(j);
    }
  }
  for (std::size_t i = 1; i < irects.size(); ++i) {
    if (find(i) != find(0)) throw Error(ErrorCode::DisconnectedChannel, "channel rectangles are not connected");
  }

  Channel ch;
  ch.spec_ = spec;
  ch.q_ = q;
  ch.bits_.assign(static_cast<std::size_t>(2 * q) * q, 0);
  for (const auto& ir : irects) {
    for (int r = ir.r0; r < ir.r1; ++r) {
      for (int c = ir.c0; c < ir.c1; ++c) ch.bits_[static_cast<std::size_t>(r) * q + c] = 1;
    }
  }

  bool any_top = false;
  bool any_bottom = false;
  for (int c = 0; c < q; ++c) {
    any_top = any_top || ch.occupied(c, 2 * q - 1);
    any_bottom = any_bottom || ch.occupied(c, 0);
  }
  if (!any_top || !any_bottom) {
    throw Error(ErrorCode::EmptyTopBottomFace, "channel must touch both yn = 1 and yn = -1");
  }

  const double h = 1.0 / q;
  for (int r = 0; r < 2 * q; ++r) {
    for (int c = 0; c < q; ++c) {
      if (!ch.occupied(c, r)) continue;
      double y1a = c * h;
      double y1b = (c + 1) * h;
      double yna = -1.0 + r * h;
      double ynb = -1.0 + (r + 1) * h;
      if (!ch.occupied(c - 1, r)) ch.edges_.push_back({y1a, yna, y1a, ynb, -1.0, 0.0, EdgeKind::Lateral});
      if (!ch.occupied(c + 1, r)) ch.edges_.push_back({y1b, yna, y1b, ynb, 1.0, 0.0, EdgeKind::Lateral});
      if (!ch.occupied(c, r - 1)) {
        ch.edges_.push_back({y1a, yna, y1b, yna, 0.0, -1.0, r == 0 ? EdgeKind::Bottom : EdgeKind::Lateral});
      }
      if (!ch.occupied(c, r + 1)) {
        ch.edges_.push_back({y1a, ynb, y1b, ynb, 0.0, 1.0, r == 2 * q - 1 ? EdgeKind::Top : EdgeKind::Lateral});
      }
    }
  }
  for (const BoundaryEdge& e : ch.edges_) {
    if (e.kind != EdgeKind::Lateral) continue;
    double lo = std::min(e.y1_a, e.y1_b);
    double hi = std::max(e.y1_a, e.y1_b);
    if (lo <= 0.5 * h || hi >= 1.0 - 0.5 * h) {
      throw Error(ErrorCode::ChannelTouchesCellWall, "lateral channel boundary touches the cell wall");
    }
  }
  return ch;
}

/// Exact measures of a validated channel, from its boundary bookkeeping.
inline ChannelMeasures channel_measures(const Channel& ch) {
  const int q = ch.den();
  std::int64_t cells = 0;
  for (int r = 0; r < ch.rows(); ++r) {
    for (int c = 0; c < ch.columns(); ++c) cells += ch.occupied(c, r) ? 1 : 0;
  }
  std::int64_t lateral = 0, top = 0, bottom = 0;
  for (const BoundaryEdge& e : ch.boundary()) {
    if (e.kind == EdgeKind::Lateral) ++lateral;
    if (e.kind == EdgeKind::Top) ++top;
    if (e.kind == EdgeKind::Bottom) ++bottom;
  }
  int cmin = q, cmax = -1;
  for (const BoundaryEdge& e : ch.boundary()) {
    if (e.kind != EdgeKind::Lateral) continue;
    cmin = std::min(cmin, static_cast<int>(std::lround(std::min(e.y1_a, e.y1_b) * q)));
    cmax = std::max(cmax, static_cast<int>(std::lround(std::max(e.y1_a, e.y1_b) * q)));
  }
  ChannelMeasures m;
  m.area = Rational{cells, static_cast<std::int64_t>(q) * q}.reduced();
  m.lateral = Rational{lateral, q}.reduced();
  m.top = Rational{top, q}.reduced();
  m.bottom = Rational{bottom, q}.reduced();
  m.delta = Rational{std::min<std::int64_t>(cmin, q - cmax), q}.reduced();
  return m;
}

/// Lattice of channel copies along the interface: I_eps = {0, ..., L/eps - 1}.
struct LayerLattice {
  double eps = 1.0;
  int cells = 0;  // |I_eps|

  std::vector<int> index_set() const {
    std::vector<int> k(static_cast<std::size_t>(cells));
    std::iota(k.begin(), k.end(), 0);
    return k;
  }
};

/// Integer n with 1/eps = n, or NonConformingResolution.
inline int inverse_eps(double eps) {
  if (!(eps > 0.0) || eps > 1.0) throw Error(ErrorCode::NonConformingResolution, "eps must lie in (0, 1]");
  double inv = 1.0 / eps;
  double r = std::round(inv);
  if (std::abs(inv - r) > 1e-9 * r) {
    throw Error(ErrorCode::NonConformingResolution, "1/eps must be a natural number");
  }
  return static_cast<int>(r);
}

inline int checked_ratio(double num, double den, const char* what) {
  double v = num / den;
  double r = std::round(v);
  if (r < 1.0 || std::abs(v - r) > 1e-9 * std::max(1.0, r)) {
    throw Error(ErrorCode::NonConformingResolution, std::string(what) + " is not an integer multiple of the grid spacing");
  }
  return static_cast<int>(r);
}

inline LayerLattice build_lattice(double eps, int sigma_length) {
  int n = inverse_eps(eps);
  return LayerLattice{1.0 / n, n * sigma_length};
}

enum class CellKind : std::uint8_t { BulkPlus, BulkMinus, Channel, Void };
enum class FaceKind : std::uint8_t { Interior, InterfacePlus, InterfaceMinus, Lateral, Outer };
enum class Axis : std::uint8_t { X1, Xn };

struct ActiveCell {
  int i = 0;  // column
  int j = 0;  // row, 0 at xn = -H
  CellKind kind = CellKind::BulkPlus;
  double x1 = 0.0;
  double xn = 0.0;
  double y1 = 0.0;  // fast coordinates (meaningful for channel cells)
  double yn = 0.0;
};

/// Face of the active region. For faces with two active cells, `b` is the
/// neighbour in the +axis direction of `a`; for boundary faces b == -1 and
/// `normal_sign` gives the outward normal of `a` along `axis`.
struct Face {
  int a = -1;
  int b = -1;
  FaceKind kind = FaceKind::Interior;
  Axis axis = Axis::X1;
  int normal_sign = 1;
  double x1 = 0.0;
  double xn = 0.0;
  double y1 = 0.0;  // fast coordinates of the midpoint (lateral faces)
  double yn = 0.0;
};

/// Conforming Cartesian mesh of Omega_eps with spacing h = eps / (m q).
class MicroMesh {
 public:
  double eps() const { return eps_; }
  int m() const { return m_; }
  int den() const { return q_; }
  double h() const { return h_; }
  double height() const { return height_; }
  int sigma_length() const { return length_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int bulk_rows() const { return bulk_rows_; }    // rows per bulk side
  int layer_rows() const { return 2 * m_ * q_; }  // rows across the layer
  int per_cell() const { return m_ * q_; }        // grid columns per lattice cell
  const LayerLattice& lattice() const { return lattice_; }
  const Channel& channel() const { return channel_; }

  CellKind kind(int i, int j) const { return kinds_[idx(i, j)]; }
  int active_index(int i, int j) const { return active_[idx(i, j)]; }
  const std::vector<ActiveCell>& cells() const { return cells_; }
  const std::vector<Face>& faces() const { return faces_; }
  std::size_t size() const { return cells_.size(); }

  /// Row index of the first layer row (xn = -eps) and first bulk+ row (xn = +eps).
  int layer_begin() const { return bulk_rows_; }
  int plus_begin() const { return bulk_rows_ + layer_rows(); }

  friend MicroMesh build_micro_mesh(const Channel&, double, int, double, int);

 private:
  std::size_t idx(int i, int j) const { return static_cast<std::size_t>(j) * nx_ + i; }

  double eps_ = 1.0;
  int m_ = 1;
  int q_ = 1;
  double h_ = 1.0;
  double height_ = 1.0;
  int length_ = 1;
  int nx_ = 0;
  int ny_ = 0;
  int bulk_rows_ = 0;
  LayerLattice lattice_;
  Channel channel_;
  std::vector<CellKind> kinds_;
  std::vector<int> active_;
  std::vector<ActiveCell> cells_;
  std::vector<Face> faces_;
};

inline MicroMesh build_micro_mesh(const Channel& channel, double eps, int m, double height, int sigma_length) {
  if (m < 1) throw Error(ErrorCode::NonConformingResolution, "m must be >= 1 to resolve the channel grid");
  if (sigma_length < 1) throw Error(ErrorCode::NonConformingResolution, "interface length must be a positive integer");
  MicroMesh mesh;
  mesh.lattice_ = build_lattice(eps, sigma_length);
  mesh.eps_ = mesh.lattice_.eps;
  mesh.m_ = m;
  mesh.q_ = channel.den();
  mesh.channel_ = channel;
  mesh.height_ = height;
  mesh.length_ = sigma_length;
  const int per_cell = m * mesh.q_;
  mesh.h_ = mesh.eps_ / per_cell;
  if (!(height > mesh.eps_)) throw Error(ErrorCode::NonConformingResolution, "H must exceed eps");
  int rows_h = checked_ratio(height, mesh.h_, "H");
  mesh.bulk_rows_ = rows_h - per_cell;
  if (mesh.bulk_rows_ < 1) throw Error(ErrorCode::NonConformingResolution, "no bulk rows");
  mesh.nx_ = mesh.lattice_.cells * per_cell;
  mesh.ny_ = 2 * rows_h;

  const double h = mesh.h_;
  const int layer0 = mesh.bulk_rows_;
  const int layer1 = layer0 + 2 * per_cell;
  mesh.kinds_.assign(static_cast<std::size_t>(mesh.nx_) * mesh.ny_, CellKind::Void);
  mesh.active_.assign(mesh.kinds_.size(), -1);
  for (int j = 0; j < mesh.ny_; ++j) {
    for (int i = 0; i < mesh.nx_; ++i) {
      CellKind k;
      double y1 = 0.0, yn = 0.0;
      if (j < layer0) {
        k = CellKind::BulkMinus;
      } else if (j >= layer1) {
        k = CellKind::BulkPlus;
      } else {
        int s = i % per_cell;
        int r = j - layer0;
        k = channel.occupied(s / m, r / m) ? CellKind::Channel : CellKind::Void;
        y1 = (s + 0.5) / per_cell;
        yn = -1.0 + (r + 0.5) / per_cell;
      }
      mesh.kinds_[mesh.idx(i, j)] = k;
      if (k == CellKind::Void) continue;
      mesh.active_[mesh.idx(i, j)] = static_cast<int>(mesh.cells_.size());
      double x1 = (i + 0.5) * h;
      double xn = -height + (j + 0.5) * h;
      if (k != CellKind::Channel) {
        y1 = x1 / mesh.eps_;
        y1 -= std::floor(y1);
        yn = xn / mesh.eps_;
      }
      mesh.cells_.push_back({i, j, k, x1, xn, y1, yn});
    }
  }

  auto fast_y1 = [&](double x1) {
    double y = x1 / mesh.eps_;
    return y - std::floor(y);
  };
  auto classify = [&](CellKind ka, CellKind kb) {
    if (ka == CellKind::Channel && kb != CellKind::Channel) {
      return kb == CellKind::BulkPlus ? FaceKind::InterfacePlus : FaceKind::InterfaceMinus;
    }
    if (kb == CellKind::Channel && ka != CellKind::Channel) {
      return ka == CellKind::BulkPlus ? FaceKind::InterfacePlus : FaceKind::InterfaceMinus;
    }
    return FaceKind::Interior;
  };
  // Vertical faces (normal along x1): between columns i-1 and i.
  for (int j = 0; j < mesh.ny_; ++j) {
    for (int i = 0; i <= mesh.nx_; ++i) {
      int a = i > 0 ? mesh.active_[mesh.idx(i - 1, j)] : -1;
      int b = i < mesh.nx_ ? mesh.active_[mesh.idx(i, j)] : -1;
      if (a < 0 && b < 0) continue;
      Face f;
      f.axis = Axis::X1;
      f.x1 = i * h;
      f.xn = -height + (j + 0.5) * h;
      if (a >= 0 && b >= 0) {
        f.a = a;
        f.b = b;
        f.kind = classify(mesh.cells_[a].kind, mesh.cells_[b].kind);
      } else {
        f.a = a >= 0 ? a : b;
        f.normal_sign = a >= 0 ? 1 : -1;
        bool on_wall = (i == 0 || i == mesh.nx_);
        f.kind = (!on_wall && mesh.cells_[f.a].kind == CellKind::Channel) ? FaceKind::Lateral : FaceKind::Outer;
      }
      if (f.kind == FaceKind::Lateral) {
        const ActiveCell& c = mesh.cells_[f.a];
        f.y1 = c.y1 + 0.5 * f.normal_sign / per_cell;
        f.yn = c.yn;
      } else {
        f.y1 = fast_y1(f.x1);
        f.yn = f.xn / mesh.eps_;
      }
      mesh.faces_.push_back(f);
    }
  }
  // Horizontal faces (normal along xn): between rows j-1 and j.
  for (int j = 0; j <= mesh.ny_; ++j) {
    for (int i = 0; i < mesh.nx_; ++i) {
      int a = j > 0 ? mesh.active_[mesh.idx(i, j - 1)] : -1;
      int b = j < mesh.ny_ ? mesh.active_[mesh.idx(i, j)] : -1;
      if (a < 0 && b < 0) continue;
      Face f;
      f.axis = Axis::Xn;
      f.x1 = (i + 0.5) * h;
      f.xn = -height + j * h;
      if (a >= 0 && b >= 0) {
        f.a = a;
        f.b = b;
        f.kind = classify(mesh.cells_[a].kind, mesh.cells_[b].kind);
      } else {
        f.a = a >= 0 ? a : b;
        f.normal_sign = a >= 0 ? 1 : -1;
        bool on_wall = (j == 0 || j == mesh.ny_);
        f.kind = (!on_wall && mesh.cells_[f.a].kind == CellKind::Channel) ? FaceKind::Lateral : FaceKind::Outer;
      }
      if (f.kind == FaceKind::Lateral) {
        const ActiveCell& c = mesh.cells_[f.a];
        f.y1 = c.y1;
        f.yn = c.yn + 0.5 * f.normal_sign / per_cell;
      } else {
        f.y1 = fast_y1(f.x1);
        f.yn = f.xn / mesh.eps_;
      }
      mesh.faces_.push_back(f);
    }
  }
  return mesh;
}

/// Cartesian grids of the effective bulk domains plus the interface grid on
/// Sigma. Unknown ordering: [Omega+ cells | Omega- cells | interface cells].
class MacroMesh {
 public:
  double h() const { return h_; }
  double height() const { return height_; }
  int sigma_length() const { return length_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }  // rows per bulk side

  /// Row j counts away from Sigma on both sides.
  int plus(int i, int j) const { return j * nx_ + i; }
  int minus(int i, int j) const { return nx_ * ny_ + j * nx_ + i; }
  int interface(int i) const { return 2 * nx_ * ny_ + i; }
  std::size_t size() const { return static_cast<std::size_t>(2 * nx_ * ny_ + nx_); }

  double x1(int i) const { return (i + 0.5) * h_; }
  double xn_plus(int j) const { return (j + 0.5) * h_; }
  double xn_minus(int j) const { return -(j + 0.5) * h_; }

  friend MacroMesh build_macro_mesh(double, double, int);

 private:
  double h_ = 1.0;
  double height_ = 1.0;
  int length_ = 1;
  int nx_ = 0;
  int ny_ = 0;
};

inline MacroMesh build_macro_mesh(double h_macro, double height, int sigma_length) {
  if (!(h_macro > 0.0)) throw Error(ErrorCode::NonConformingResolution, "h_macro must be positive");
  MacroMesh mesh;
  mesh.h_ = h_macro;
  mesh.height_ = height;
  mesh.length_ = sigma_length;
  mesh.nx_ = checked_ratio(sigma_length, h_macro, "interface length");
  mesh.ny_ = checked_ratio(height, h_macro, "H");
  return mesh;
}

}  // namespace chanhomog
