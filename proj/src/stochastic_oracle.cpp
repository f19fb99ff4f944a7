#include "mfgnet/stochastic_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include <boost/math/distributions/chi_squared.hpp>

#include "mfgnet/errors.hpp"

namespace mfgnet {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform on [0, 1) from the top 53 bits, and standard normals by the
// Box-Muller transform (both outputs of a pair are used).
class AgentRng {
 public:
  AgentRng(std::uint64_t seed, std::uint64_t agent)
      : engine_(splitmix64(seed ^ splitmix64(agent + 0x632be59bd9b4e019ULL))) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * M_PI * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

struct Tally {
  std::vector<std::vector<std::uint64_t>> counts;
  std::vector<std::vector<std::uint64_t>> crossings;
};

Tally empty_tally(const MetricGraph& g) {
  Tally t;
  for (const auto& e : g.edges()) t.counts.emplace_back(static_cast<std::size_t>(e.cells), 0);
  for (std::size_t v = 0; v < g.vertex_count(); ++v)
    t.crossings.emplace_back(g.incident(VertexId{v}).size(), 0);
  return t;
}

class Walker {
 public:
  Walker(const MetricGraph& g, const DriftProfiles& drift, const OracleConfig& cfg)
      : g_(g), drift_(drift), cfg_(cfg), sqrt_dt_(std::sqrt(cfg.dt)) {
    cumulative_.resize(g.vertex_count());
    for (std::size_t v = 0; v < g.vertex_count(); ++v) {
      double c = 0.0;
      for (double b : g.routing(VertexId{v})) cumulative_[v].push_back(c += b);
    }
  }

  void run(std::size_t agent, Tally& tally) const {
    AgentRng rng(cfg_.seed, agent);
    // uniform start along the network
    double s = rng.uniform() * g_.total_length();
    std::size_t j = 0;
    while (j + 1 < g_.edge_count() && s >= g_.edges()[j].length) s -= g_.edges()[j++].length;
    double x = std::min(s, g_.edges()[j].length);

    const auto burn = static_cast<std::size_t>(cfg_.burn_in * static_cast<double>(cfg_.n_steps));
    for (std::size_t n = 0; n < cfg_.n_steps; ++n) {
      const auto& e = g_.edges()[j];
      x += -drift_at(j, x) * cfg_.dt + std::sqrt(2.0 * e.diffusion) * sqrt_dt_ * rng.normal();
      while (x < 0.0 || x > g_.edges()[j].length) {
        const auto& cur = g_.edges()[j];
        const bool at_start = x < 0.0;
        const double overshoot = at_start ? -x : x - cur.length;
        const VertexId v = at_start ? cur.start : cur.end;
        const std::size_t slot = pick(v, rng.uniform());
        ++tally.crossings[v.value][slot];
        const auto& inc = g_.incident(v)[slot];
        j = inc.edge.value;
        x = inc.end == EdgeEnd::start ? overshoot : g_.edges()[j].length - overshoot;
      }
      if (n >= burn) {
        const auto& cur = g_.edges()[j];
        const int k = std::min(cur.cells - 1, static_cast<int>(x / cur.h));
        ++tally.counts[j][static_cast<std::size_t>(k)];
      }
    }
  }

 private:
  double drift_at(std::size_t j, double x) const {
    const auto& a = drift_[j];
    const auto& e = g_.edges()[j];
    const double t = x / e.h;
    const int k = std::clamp(static_cast<int>(t), 0, e.cells - 1);
    const double w = t - k;
    return (1.0 - w) * a[static_cast<std::size_t>(k)] + w * a[static_cast<std::size_t>(k) + 1];
  }

  std::size_t pick(VertexId v, double u) const {
    const auto& c = cumulative_[v.value];
    for (std::size_t s = 0; s + 1 < c.size(); ++s)
      if (u < c[s]) return s;
    return c.size() - 1;
  }

  const MetricGraph& g_;
  const DriftProfiles& drift_;
  const OracleConfig& cfg_;
  double sqrt_dt_;
  std::vector<std::vector<double>> cumulative_;
};

}  // namespace

void validate(const OracleConfig& cfg) {
  if (cfg.n_agents == 0) throw ValidationError("oracle.agents", "must be positive");
  if (cfg.n_steps == 0) throw ValidationError("oracle.steps", "must be positive");
  if (!(cfg.dt > 0.0)) throw ValidationError("oracle.dt", "must be positive");
  if (!(cfg.burn_in >= 0.0 && cfg.burn_in < 1.0))
    throw ValidationError("oracle.burn_in", "must lie in [0, 1)");
}

DriftProfiles zero_drift(const MetricGraph& g) {
  DriftProfiles out;
  for (const auto& e : g.edges()) out.emplace_back(static_cast<std::size_t>(e.cells) + 1, 0.0);
  return out;
}

double OccupationHistogram::density(const MetricGraph& g, EdgeId j, int k) const {
  return static_cast<double>(counts.at(j.value).at(static_cast<std::size_t>(k))) /
         (static_cast<double>(total) * g.edge(j).h);
}

OccupationHistogram simulate(const MetricGraph& g, const DriftProfiles& drift,
                             const OracleConfig& cfg) {
  validate(cfg);
  if (drift.size() != g.edge_count())
    throw ValidationError("drift", "expects one profile per edge");
  double a_max = 0.0;
  for (const auto& e : g.edges()) {
    const auto& a = drift[e.id.value];
    if (a.size() != static_cast<std::size_t>(e.cells) + 1)
      throw ValidationError("drift", "profile of edge '" + e.name + "' must have cells + 1 values");
    for (double v : a) {
      if (!std::isfinite(v)) throw ValidationError("drift", "non-finite drift");
      a_max = std::max(a_max, std::abs(v));
    }
  }
  const double reach = a_max * cfg.dt + 3.0 * std::sqrt(2.0 * g.max_diffusion() * cfg.dt);
  if (!(reach < 0.5 * g.min_length()))
    throw ValidationError("oracle.dt", "time step too large: per-step displacement " +
                                           format_number(reach) + " must stay below half the "
                                           "shortest edge (" + format_number(0.5 * g.min_length()) + ")");

  unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, cfg.n_agents));
  const Walker walker(g, drift, cfg);
  std::vector<Tally> tallies(threads, empty_tally(g));
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      const std::size_t lo = cfg.n_agents * t / threads;
      const std::size_t hi = cfg.n_agents * (t + 1) / threads;
      for (std::size_t a = lo; a < hi; ++a) walker.run(a, tallies[t]);
    });
  }
  for (auto& th : pool) th.join();

  OccupationHistogram out;
  auto merged = empty_tally(g);
  for (const auto& t : tallies) {
    for (std::size_t j = 0; j < merged.counts.size(); ++j)
      for (std::size_t k = 0; k < merged.counts[j].size(); ++k) merged.counts[j][k] += t.counts[j][k];
    for (std::size_t v = 0; v < merged.crossings.size(); ++v)
      for (std::size_t s = 0; s < merged.crossings[v].size(); ++s)
        merged.crossings[v][s] += t.crossings[v][s];
  }
  out.counts = std::move(merged.counts);
  out.crossings = std::move(merged.crossings);
  for (const auto& c : out.counts)
    for (auto n : c) out.total += n;
  out.elapsed = static_cast<double>(cfg.n_steps) * cfg.dt;
  return out;
}

double compare_histogram(const MetricGraph& g, const OccupationHistogram& hist,
                         const GridFunction& m) {
  require_compatible(g, m, "compare_histogram");
  if (hist.counts.size() != g.edge_count())
    throw ValidationError("histogram", "binning does not match the graph");
  for (const auto& e : g.edges())
    if (hist.counts[e.id.value].size() != static_cast<std::size_t>(e.cells))
      throw ValidationError("histogram", "binning of edge '" + e.name + "' does not match its grid");
  if (hist.total == 0) throw ValidationError("histogram", "no samples");

  double out = 0.0;
  for (const auto& e : g.edges()) {
    const auto p = m.edge_profile(g, e.id);
    for (int k = 0; k < e.cells; ++k) {
      const double cell = 0.5 * (p[static_cast<std::size_t>(k)] + p[static_cast<std::size_t>(k) + 1]);
      out += std::abs(hist.density(g, e.id, k) - cell) * e.h;
    }
  }
  return out;
}

std::vector<RoutingVertexTest> routing_test(const MetricGraph& g, const OccupationHistogram& hist) {
  if (hist.crossings.size() != g.vertex_count())
    throw ValidationError("histogram", "crossing tally does not match the graph");
  std::vector<RoutingVertexTest> out;
  for (std::size_t v = 0; v < g.vertex_count(); ++v) {
    const auto& obs = hist.crossings[v];
    const auto& beta = g.routing(VertexId{v});
    RoutingVertexTest t;
    for (auto n : obs) t.crossings += n;
    t.dof = static_cast<int>(obs.size()) - 1;
    if (t.crossings > 0) {
      for (std::size_t s = 0; s < obs.size(); ++s) {
        const double expected = beta[s] * static_cast<double>(t.crossings);
        const double d = static_cast<double>(obs[s]) - expected;
        t.chi_squared += d * d / expected;
      }
      const boost::math::chi_squared dist(t.dof);
      t.p_value = boost::math::cdf(boost::math::complement(dist, t.chi_squared));
    }
    out.push_back(t);
  }
  return out;
}

}  // namespace mfgnet
