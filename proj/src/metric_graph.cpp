#include "mfgnet/metric_graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <unordered_map>
#include <unordered_set>

#include "mfgnet/errors.hpp"
#include "mfgnet/kernels.hpp"

namespace mfgnet {

DofLayout::DofLayout(std::size_t vertex_count, std::vector<int> interior_per_edge)
    : vertex_count_(vertex_count), interior_(std::move(interior_per_edge)) {
  offsets_.reserve(interior_.size());
  std::size_t next = vertex_count_;
  for (int n : interior_) {
    offsets_.push_back(next);
    next += static_cast<std::size_t>(n);
  }
  size_ = next;
}

MetricGraph MetricGraph::build(const GraphSpec& spec) {
  MetricGraph g;
  g.spec_ = spec;
  if (spec.vertices.empty()) throw ValidationError("graph.vertices", "graph has no vertices");
  if (spec.edges.empty()) throw ValidationError("graph.edges", "graph has no edges");

  std::unordered_map<std::string, std::size_t> vertex_index;
  for (const auto& name : spec.vertices) {
    if (!vertex_index.emplace(name, vertex_index.size()).second)
      throw ValidationError("graph.vertices", "duplicate vertex id '" + name + "'");
    g.vertex_names_.push_back(name);
  }

  std::unordered_set<std::string> edge_ids;
  g.incidence_.resize(spec.vertices.size());
  for (std::size_t j = 0; j < spec.edges.size(); ++j) {
    const auto& e = spec.edges[j];
    const std::string field = "graph.edges." + e.id;
    if (!edge_ids.insert(e.id).second) throw ValidationError(field, "duplicate edge id");
    auto from = vertex_index.find(e.from);
    auto to = vertex_index.find(e.to);
    if (from == vertex_index.end()) throw ValidationError(field, "unknown vertex '" + e.from + "'");
    if (to == vertex_index.end()) throw ValidationError(field, "unknown vertex '" + e.to + "'");
    if (from->second == to->second)
      throw ValidationError(field, "edge endpoints must be distinct vertices");
    if (!(e.length > 0.0) || !std::isfinite(e.length))
      throw ValidationError(field, "nonpositive length");
    if (!(e.diffusion > 0.0) || !std::isfinite(e.diffusion))
      throw ValidationError(field, "nonpositive diffusion");
    if (e.cells < min_cells)
      throw ValidationError(field, "cells must be at least " + std::to_string(min_cells));

    EdgeRecord rec{EdgeId{j},  e.id,        VertexId{from->second}, VertexId{to->second},
                   e.length,   e.diffusion, e.cells,                e.length / e.cells};
    g.incidence_[from->second].push_back({rec.id, EdgeEnd::start});
    g.incidence_[to->second].push_back({rec.id, EdgeEnd::end});
    g.total_length_ += e.length;
    g.edges_.push_back(std::move(rec));
  }

  for (std::size_t v = 0; v < g.incidence_.size(); ++v) {
    if (g.incidence_[v].size() < 2)
      throw ValidationError("graph.vertices." + g.vertex_names_[v],
                            "degree-" + std::to_string(g.incidence_[v].size()) +
                                " vertex (boundary vertices are not supported)");
  }

  // connectivity
  std::vector<bool> seen(g.vertex_count(), false);
  std::queue<std::size_t> frontier;
  frontier.push(0);
  seen[0] = true;
  while (!frontier.empty()) {
    const std::size_t v = frontier.front();
    frontier.pop();
    for (const auto& inc : g.incidence_[v]) {
      const auto& e = g.edges_[inc.edge.value];
      const std::size_t w = inc.end == EdgeEnd::start ? e.end.value : e.start.value;
      if (!seen[w]) {
        seen[w] = true;
        frontier.push(w);
      }
    }
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end())
    throw ValidationError("graph", "disconnected graph");

  g.routing_.resize(g.vertex_count());
  for (std::size_t v = 0; v < g.vertex_count(); ++v) {
    double total = 0.0;
    for (const auto& inc : g.incidence_[v]) total += g.edges_[inc.edge.value].diffusion;
    for (const auto& inc : g.incidence_[v])
      g.routing_[v].push_back(g.edges_[inc.edge.value].diffusion / total);
  }

  std::vector<int> interior;
  for (const auto& e : g.edges_) interior.push_back(e.interior_nodes());
  g.layout_ = std::make_shared<const DofLayout>(g.vertex_count(), std::move(interior));

  g.weights_.assign(g.layout_->size(), 0.0);
  for (const auto& e : g.edges_) {
    g.weights_[e.start.value] += 0.5 * e.h;
    g.weights_[e.end.value] += 0.5 * e.h;
    const std::size_t off = g.layout_->edge_offset(e.id);
    for (int k = 0; k < e.interior_nodes(); ++k) g.weights_[off + k] = e.h;
  }
  return g;
}

EdgeEnd MetricGraph::end_at(VertexId v, EdgeId j) const {
  const auto& e = edge(j);
  if (e.start == v) return EdgeEnd::start;
  if (e.end == v) return EdgeEnd::end;
  throw ValidationError("edge '" + e.name + "' is not incident to vertex '" + vertex_name(v) + "'");
}

std::optional<VertexId> MetricGraph::find_vertex(const std::string& name) const {
  auto it = std::find(vertex_names_.begin(), vertex_names_.end(), name);
  if (it == vertex_names_.end()) return std::nullopt;
  return VertexId{static_cast<std::size_t>(it - vertex_names_.begin())};
}

std::optional<EdgeId> MetricGraph::find_edge(const std::string& name) const {
  for (const auto& e : edges_)
    if (e.name == name) return e.id;
  return std::nullopt;
}

double MetricGraph::min_length() const noexcept {
  double out = edges_.front().length;
  for (const auto& e : edges_) out = std::min(out, e.length);
  return out;
}

double MetricGraph::max_diffusion() const noexcept {
  double out = 0.0;
  for (const auto& e : edges_) out = std::max(out, e.diffusion);
  return out;
}

double MetricGraph::min_diffusion() const noexcept {
  double out = edges_.front().diffusion;
  for (const auto& e : edges_) out = std::min(out, e.diffusion);
  return out;
}

// ---------------------------------------------------------------------------

GridFunction::GridFunction(const MetricGraph& g, double fill)
    : layout_(g.layout()), values_(g.dof_count(), fill) {}

GridFunction::GridFunction(const MetricGraph& g, std::vector<double> values)
    : layout_(g.layout()), values_(std::move(values)) {
  if (values_.size() != layout_->size())
    throw ValidationError("grid function has " + std::to_string(values_.size()) +
                          " values, graph has " + std::to_string(layout_->size()) + " DOFs");
}

GridFunction GridFunction::sample(const MetricGraph& g,
                                  const std::function<double(EdgeId, double)>& f) {
  GridFunction out(g);
  std::vector<bool> vertex_set(g.vertex_count(), false);
  for (const auto& e : g.edges()) {
    if (!vertex_set[e.start.value]) {
      out.vertex(e.start) = f(e.id, 0.0);
      vertex_set[e.start.value] = true;
    }
    if (!vertex_set[e.end.value]) {
      out.vertex(e.end) = f(e.id, e.length);
      vertex_set[e.end.value] = true;
    }
    auto in = out.interior(e.id);
    for (int k = 1; k < e.cells; ++k) in[k - 1] = f(e.id, e.node_x(k));
  }
  return out;
}

std::span<const double> GridFunction::interior(EdgeId j) const {
  return std::span<const double>(values_).subspan(layout_->edge_offset(j),
                                                  layout_->interior_count(j));
}

std::span<double> GridFunction::interior(EdgeId j) {
  return std::span<double>(values_).subspan(layout_->edge_offset(j), layout_->interior_count(j));
}

double GridFunction::node(const MetricGraph& g, EdgeId j, int k) const {
  const auto& e = g.edge(j);
  if (k == 0) return vertex(e.start);
  if (k == e.cells) return vertex(e.end);
  return values_[layout_->interior_dof(j, k)];
}

std::vector<double> GridFunction::edge_profile(const MetricGraph& g, EdgeId j) const {
  const auto& e = g.edge(j);
  std::vector<double> out(static_cast<std::size_t>(e.cells) + 1);
  out.front() = vertex(e.start);
  out.back() = vertex(e.end);
  auto in = interior(j);
  std::copy(in.begin(), in.end(), out.begin() + 1);
  return out;
}

double GridFunction::at(const MetricGraph& g, EdgeId j, double x) const {
  const auto& e = g.edge(j);
  const double s = std::clamp(x / e.h, 0.0, static_cast<double>(e.cells));
  int k = static_cast<int>(s);
  if (k >= e.cells) k = e.cells - 1;
  const double t = s - k;
  return (1.0 - t) * node(g, j, k) + t * node(g, j, k + 1);
}

bool GridFunction::compatible_with(const MetricGraph& g) const noexcept {
  return layout_ && (layout_ == g.layout() || *layout_ == *g.layout());
}

double GridFunction::max_abs() const noexcept {
  double out = 0.0;
  for (double v : values_) out = std::max(out, std::abs(v));
  return out;
}

double GridFunction::min() const noexcept { return *std::min_element(values_.begin(), values_.end()); }
double GridFunction::max() const noexcept { return *std::max_element(values_.begin(), values_.end()); }

GridFunction& GridFunction::operator+=(const GridFunction& other) {
  if (other.values_.size() != values_.size()) throw ValidationError("grid function size mismatch");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

GridFunction& GridFunction::operator-=(const GridFunction& other) {
  if (other.values_.size() != values_.size()) throw ValidationError("grid function size mismatch");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

GridFunction& GridFunction::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

GridFunction& GridFunction::operator+=(double c) {
  for (double& v : values_) v += c;
  return *this;
}

void require_compatible(const MetricGraph& g, const GridFunction& f, const char* what) {
  if (!f.compatible_with(g))
    throw ValidationError(std::string(what) + ": dimension mismatch (" + std::to_string(f.size()) +
                          " values, graph has " + std::to_string(g.dof_count()) + " DOFs)");
}

double integrate(const MetricGraph& g, const GridFunction& f) {
  require_compatible(g, f, "integrate");
  const auto w = g.quadrature_weights();
  return kernels::dot(w.data(), f.values().data(), w.size());
}

double mean(const MetricGraph& g, const GridFunction& f) { return integrate(g, f) / g.total_length(); }

OrientedStencilWeights oriented_weights(VertexStencil stencil, double h) noexcept {
  if (stencil == VertexStencil::first_order) return {-1.0 / h, 1.0 / h, 0.0};
  return {-1.5 / h, 2.0 / h, -0.5 / h};
}

double oriented_derivative(const MetricGraph& g, const GridFunction& f, VertexId v, EdgeId j,
                           VertexStencil stencil) {
  require_compatible(g, f, "oriented_derivative");
  const auto& e = g.edge(j);
  const EdgeEnd end = g.end_at(v, j);
  const auto w = oriented_weights(stencil, e.h);
  const int k1 = end == EdgeEnd::start ? 1 : e.cells - 1;
  const int k2 = end == EdgeEnd::start ? 2 : e.cells - 2;
  return w.vertex * f.vertex(v) + w.first * f.node(g, j, k1) + w.second * f.node(g, j, k2);
}

}  // namespace mfgnet
