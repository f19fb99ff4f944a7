#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mfgnet {

struct VertexId {
  std::size_t value = 0;
  friend bool operator==(VertexId, VertexId) = default;
  friend auto operator<=>(VertexId, VertexId) = default;
};

struct EdgeId {
  std::size_t value = 0;
  friend bool operator==(EdgeId, EdgeId) = default;
  friend auto operator<=>(EdgeId, EdgeId) = default;
};

enum class EdgeEnd { start, end };

/// Discrete analogue of the oriented derivative at a vertex.
enum class VertexStencil {
  second_order,  ///< (-3 f(v) + 4 f_1 - f_2) / 2h
  first_order,   ///< (f_1 - f(v)) / h
};

struct EdgeSpec {
  std::string id;
  std::string from;
  std::string to;
  double length = 1.0;
  double diffusion = 1.0;
  int cells = 10;

  friend bool operator==(const EdgeSpec&, const EdgeSpec&) = default;
};

struct GraphSpec {
  std::vector<std::string> vertices;
  std::vector<EdgeSpec> edges;

  friend bool operator==(const GraphSpec&, const GraphSpec&) = default;
};

struct EdgeRecord {
  EdgeId id;
  std::string name;
  VertexId start;
  VertexId end;
  double length;
  double diffusion;
  int cells;
  double h;

  int interior_nodes() const noexcept { return cells - 1; }
  /// Arclength coordinate of grid node k, k = 0..cells.
  double node_x(int k) const noexcept { return k == cells ? length : k * h; }
};

struct Incidence {
  EdgeId edge;
  EdgeEnd end;
};

/// Index map of the degrees of freedom of a grid function: vertex values
/// first, then the interior nodes of each edge in edge order.
class DofLayout {
 public:
  DofLayout(std::size_t vertex_count, std::vector<int> interior_per_edge);

  std::size_t size() const noexcept { return size_; }
  std::size_t vertex_count() const noexcept { return vertex_count_; }
  std::size_t edge_count() const noexcept { return offsets_.size(); }
  std::size_t vertex_dof(VertexId v) const noexcept { return v.value; }
  /// DOF of interior node k (1 <= k <= N_j - 1) of edge j.
  std::size_t interior_dof(EdgeId j, int k) const noexcept {
    return offsets_[j.value] + static_cast<std::size_t>(k - 1);
  }
  std::size_t edge_offset(EdgeId j) const noexcept { return offsets_[j.value]; }
  int interior_count(EdgeId j) const noexcept { return interior_[j.value]; }

  friend bool operator==(const DofLayout&, const DofLayout&) = default;

 private:
  std::size_t vertex_count_;
  std::vector<int> interior_;
  std::vector<std::size_t> offsets_;
  std::size_t size_;
};

/// A network of vertices joined by parametrized edges, each carrying a
/// uniform grid. Immutable after construction.
class MetricGraph {
 public:
  static constexpr int min_cells = 4;

  /// Validates the spec and derives incidence, routing and the DOF layout.
  static MetricGraph build(const GraphSpec& spec);

  std::size_t vertex_count() const noexcept { return vertex_names_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  const std::vector<EdgeRecord>& edges() const noexcept { return edges_; }
  const EdgeRecord& edge(EdgeId j) const { return edges_.at(j.value); }
  const std::string& vertex_name(VertexId v) const { return vertex_names_.at(v.value); }
  const std::vector<Incidence>& incident(VertexId v) const { return incidence_.at(v.value); }
  int degree(VertexId v) const { return static_cast<int>(incident(v).size()); }

  /// Routing probabilities beta_ij aligned with incident(v).
  const std::vector<double>& routing(VertexId v) const { return routing_.at(v.value); }

  VertexId vertex_of(EdgeId j, EdgeEnd end) const {
    const auto& e = edge(j);
    return end == EdgeEnd::start ? e.start : e.end;
  }
  /// Which end of edge j touches v; throws if j is not incident to v.
  EdgeEnd end_at(VertexId v, EdgeId j) const;
  std::optional<VertexId> find_vertex(const std::string& name) const;
  std::optional<EdgeId> find_edge(const std::string& name) const;

  double total_length() const noexcept { return total_length_; }
  double min_length() const noexcept;
  double max_diffusion() const noexcept;
  double min_diffusion() const noexcept;

  const std::shared_ptr<const DofLayout>& layout() const noexcept { return layout_; }
  std::size_t dof_count() const noexcept { return layout_->size(); }

  /// Composite trapezoid weights over the DOF vector.
  std::span<const double> quadrature_weights() const noexcept { return weights_; }

  const GraphSpec& spec() const noexcept { return spec_; }

 private:
  MetricGraph() = default;

  GraphSpec spec_;
  std::vector<std::string> vertex_names_;
  std::vector<EdgeRecord> edges_;
  std::vector<std::vector<Incidence>> incidence_;
  std::vector<std::vector<double>> routing_;
  std::shared_ptr<const DofLayout> layout_;
  std::vector<double> weights_;
  double total_length_ = 0.0;
};

/// A continuous scalar field on the network: shared vertex values plus the
/// interior node values of each edge.
class GridFunction {
 public:
  GridFunction() = default;
  explicit GridFunction(const MetricGraph& g, double fill = 0.0);
  GridFunction(const MetricGraph& g, std::vector<double> values);

  /// Samples f(edge, x) at every grid node; vertex values are taken from the
  /// first incident edge.
  static GridFunction sample(const MetricGraph& g,
                             const std::function<double(EdgeId, double)>& f);

  std::size_t size() const noexcept { return values_.size(); }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  double vertex(VertexId v) const { return values_[layout_->vertex_dof(v)]; }
  double& vertex(VertexId v) { return values_[layout_->vertex_dof(v)]; }
  std::span<const double> interior(EdgeId j) const;
  std::span<double> interior(EdgeId j);

  /// Value at grid node k = 0..N_j of edge j (k = 0 and k = N_j are vertices).
  double node(const MetricGraph& g, EdgeId j, int k) const;
  /// All N_j + 1 node values of edge j, endpoints included.
  std::vector<double> edge_profile(const MetricGraph& g, EdgeId j) const;
  /// Piecewise-linear interpolation at arclength x on edge j.
  double at(const MetricGraph& g, EdgeId j, double x) const;

  bool compatible_with(const MetricGraph& g) const noexcept;
  const std::shared_ptr<const DofLayout>& layout() const noexcept { return layout_; }

  double max_abs() const noexcept;
  double min() const noexcept;
  double max() const noexcept;

  GridFunction& operator+=(const GridFunction& other);
  GridFunction& operator-=(const GridFunction& other);
  GridFunction& operator*=(double s);
  GridFunction& operator+=(double c);
  friend GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
  friend GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
  friend GridFunction operator*(double s, GridFunction a) { return a *= s; }

 private:
  std::shared_ptr<const DofLayout> layout_;
  std::vector<double> values_;
};

/// Throws ValidationError unless f lives on g.
void require_compatible(const MetricGraph& g, const GridFunction& f, const char* what);

/// Trapezoid-rule integral over the whole network.
double integrate(const MetricGraph& g, const GridFunction& f);

/// Mean value over the network, integrate / total length.
double mean(const MetricGraph& g, const GridFunction& f);

/// Derivative of f at v along edge j, pointing into the edge.
double oriented_derivative(const MetricGraph& g, const GridFunction& f, VertexId v, EdgeId j,
                           VertexStencil stencil = VertexStencil::second_order);

/// Stencil weights (vertex, node 1, node 2) of the oriented derivative at an
/// edge end, already divided by h.
struct OrientedStencilWeights {
  double vertex;
  double first;
  double second;
};
OrientedStencilWeights oriented_weights(VertexStencil stencil, double h) noexcept;

}  // namespace mfgnet
