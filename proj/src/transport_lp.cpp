#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>

#include "ksjko/error.hpp"
#include "ksjko/transport.hpp"

namespace ksjko {

namespace {

constexpr double kResidualFloor = 1e-18;

double squared_distance(const DensityField& a, std::size_t i, const DensityField& b, std::size_t j) {
  const auto x = a.grid.center(i);
  const auto y = b.grid.center(j);
  double d = (x[0] - y[0]) * (x[0] - y[0]);
  if (a.grid.dimension() == 2) d += (x[1] - y[1]) * (x[1] - y[1]);
  return d;
}

}  // namespace

TransportResult lp_transport_oracle(const DensityField& rho, const DensityField& g) {
  if (rho.size() > 64 || g.size() > 64)
    throw Error(ErrorKind::size, fmt::format("lp oracle is limited to 64 cells (got {} and {})",
                                             rho.size(), g.size()));
  if (rho.grid.dimension() != g.grid.dimension())
    throw Error(ErrorKind::invalid_argument, "lp oracle needs fields of equal dimension");
  const double ta = total_mass(rho), tb = total_mass(g);
  if (std::abs(ta - tb) > 1e-9)
    throw Error(ErrorKind::marginal, fmt::format("mass mismatch {:.3e}", ta - tb), ta - tb);

  std::vector<std::size_t> src, dst;
  std::vector<double> supply, demand;
  const auto am = rho.masses();
  const auto bm = g.masses();
  for (std::size_t i = 0; i < am.size(); ++i)
    if (am[i] > 0.0) { src.push_back(i); supply.push_back(am[i]); }
  for (std::size_t j = 0; j < bm.size(); ++j)
    if (bm[j] > 0.0) { dst.push_back(j); demand.push_back(bm[j] * ta / tb); }

  const std::size_t S = src.size(), T = dst.size();
  std::vector<double> cost(S * T), flow(S * T, 0.0);
  for (std::size_t i = 0; i < S; ++i)
    for (std::size_t j = 0; j < T; ++j) cost[i * T + j] = squared_distance(rho, src[i], g, dst[j]);

  // Node layout: 0 = super source, 1..S sources, S+1..S+T sinks, S+T+1 = super sink.
  const std::size_t V = S + T + 2, sink = V - 1;
  const auto is_src = [&](std::size_t v) { return v >= 1 && v <= S; };
  const auto is_dst = [&](std::size_t v) { return v > S && v < sink; };
  std::vector<double> supply_left(supply), demand_left(demand), pot(V, 0.0);
  const double inf = std::numeric_limits<double>::infinity();

  // Visits every residual arc leaving v as (w, cost, capacity).
  const auto for_arcs = [&](std::size_t v, auto&& fn) {
    if (v == 0) {
      for (std::size_t i = 0; i < S; ++i)
        if (supply_left[i] > kResidualFloor) fn(1 + i, 0.0, supply_left[i]);
    } else if (is_src(v)) {
      const std::size_t i = v - 1;
      if (supply[i] - supply_left[i] > kResidualFloor) fn(0, 0.0, supply[i] - supply_left[i]);
      for (std::size_t j = 0; j < T; ++j) fn(S + 1 + j, cost[i * T + j], inf);
    } else if (is_dst(v)) {
      const std::size_t j = v - S - 1;
      if (demand_left[j] > kResidualFloor) fn(sink, 0.0, demand_left[j]);
      for (std::size_t i = 0; i < S; ++i)
        if (flow[i * T + j] > kResidualFloor) fn(1 + i, -cost[i * T + j], flow[i * T + j]);
    } else {
      for (std::size_t j = 0; j < T; ++j)
        if (demand[j] - demand_left[j] > kResidualFloor)
          fn(S + 1 + j, 0.0, demand[j] - demand_left[j]);
    }
  };

  int iterations = 0;
  double remaining = 0.0;
  for (double s : supply_left) remaining += s;
  while (remaining > 1e-15) {
    std::vector<double> dist(V, inf);
    std::vector<std::size_t> prev(V, V);
    std::vector<bool> done(V, false);
    dist[0] = 0.0;
    for (std::size_t round = 0; round < V; ++round) {
      std::size_t v = V;
      for (std::size_t w = 0; w < V; ++w)
        if (!done[w] && dist[w] < inf && (v == V || dist[w] < dist[v])) v = w;
      if (v == V) break;
      done[v] = true;
      for_arcs(v, [&](std::size_t w, double c, double) {
        const double nd = dist[v] + std::max(0.0, c + pot[v] - pot[w]);
        if (nd < dist[w]) { dist[w] = nd; prev[w] = v; }
      });
    }
    if (dist[sink] == inf) break;
    for (std::size_t v = 0; v < V; ++v) pot[v] += dist[v] < inf ? dist[v] : dist[sink];

    double push = inf;
    for (std::size_t v = sink; v != 0; v = prev[v]) {
      const std::size_t u = prev[v];
      for_arcs(u, [&](std::size_t w, double, double cap) {
        if (w == v) push = std::min(push, cap);
      });
    }
    for (std::size_t v = sink; v != 0; v = prev[v]) {
      const std::size_t u = prev[v];
      if (u == 0) supply_left[v - 1] -= push;
      else if (v == 0) supply_left[u - 1] += push;
      else if (v == sink) demand_left[u - S - 1] -= push;
      else if (u == sink) demand_left[v - S - 1] += push;
      else if (is_src(u)) flow[(u - 1) * T + (v - S - 1)] += push;
      else flow[(v - 1) * T + (u - S - 1)] -= push;
    }
    remaining -= push;
    ++iterations;
  }

  TransportResult res;
  res.method = TransportMethod::lp;
  res.model = MeasureModel::atomic;
  res.source = rho;
  res.target = g;
  res.iterations = iterations;
  const int d = rho.grid.dimension();
  for (int ax = 0; ax < d; ++ax) {
    res.map_T[ax].assign(rho.size(), 0.0);
    for (std::size_t c = 0; c < rho.size(); ++c) res.map_T[ax][c] = rho.grid.center(c, ax);
  }
  double w2 = 0.0;
  std::vector<double> moment_x(S, 0.0), moment_y(S, 0.0);
  for (std::size_t i = 0; i < S; ++i)
    for (std::size_t j = 0; j < T; ++j) {
      const double f = flow[i * T + j];
      if (f <= 0.0) continue;
      w2 += f * cost[i * T + j];
      res.plan.push_back({src[i], dst[j], f});
      moment_x[i] += f * g.grid.center(dst[j], 0);
      if (d == 2) moment_y[i] += f * g.grid.center(dst[j], 1);
    }
  for (std::size_t i = 0; i < S; ++i) {
    res.map_T[0][src[i]] = moment_x[i] / supply[i];
    if (d == 2) res.map_T[1][src[i]] = moment_y[i] / supply[i];
  }
  res.w2_squared = w2;
  res.transport_cost = w2;
  res.marginal_defect = remaining;

  // Reduced costs c_ij + pot_i − pot_j vanish on the support, so −pot on
  // the sources is a dual potential for cost |x−y|².
  std::vector<double> phi(rho.size(), 0.0);
  double mean = 0.0;
  for (std::size_t i = 0; i < S; ++i) mean += -pot[1 + i] / 2.0;
  mean /= double(std::max<std::size_t>(S, 1));
  for (std::size_t i = 0; i < S; ++i) phi[src[i]] = -pot[1 + i] / 2.0 - mean;
  res.phi = ScalarField(rho.grid, std::move(phi));
  return res;
}

}  // namespace ksjko
