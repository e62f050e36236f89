#include "efhc/topology.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <queue>
#include <sstream>

#include <fmt/format.h>

#include "efhc/error.hpp"
#include "efhc/rng.hpp"

namespace efhc {

namespace {

void normalize(std::vector<Edge>& edges) {
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

class DisjointSets {
 public:
  explicit DisjointSets(int n) : parent_(n), components_(n) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(int x, int y) {
    x = find(x);
    y = find(y);
    if (x != y) {
      parent_[y] = x;
      --components_;
    }
  }
  int components() const { return components_; }

 private:
  std::vector<int> parent_;
  int components_;
};

// BFS tree from device 0, as a list of edges.
std::vector<Edge> spanning_tree(const GraphSnapshot& g) {
  std::vector<Edge> tree;
  if (g.size() == 0) return tree;
  const auto adj = g.adjacency();
  std::vector<bool> seen(g.size(), false);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = true;
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop();
    for (int v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        tree.emplace_back(u, v);
        frontier.push(v);
      }
    }
  }
  return tree;
}

}  // namespace

GraphSnapshot::GraphSnapshot(int m) : m_(m) {
  if (m < 0) throw InvalidArgument("graph size must be non-negative");
}

GraphSnapshot::GraphSnapshot(int m, std::vector<Edge> edges)
    : m_(m), edges_(std::move(edges)) {
  if (m < 0) throw InvalidArgument("graph size must be non-negative");
  for (const auto& e : edges_) {
    if (e.a == e.b) {
      throw InvalidArgument(fmt::format("self-loop at device {}", e.a));
    }
    if (e.a < 0 || e.b >= m_) {
      throw InvalidArgument(
          fmt::format("edge ({}, {}) outside 0..{}", e.a, e.b, m_ - 1));
    }
  }
  normalize(edges_);
}

bool GraphSnapshot::has_edge(int i, int j) const {
  if (i == j) return false;
  return std::binary_search(edges_.begin(), edges_.end(), Edge(i, j));
}

std::vector<int> GraphSnapshot::degrees() const {
  std::vector<int> d(m_, 0);
  for (const auto& e : edges_) {
    ++d[e.a];
    ++d[e.b];
  }
  return d;
}

std::vector<std::vector<int>> GraphSnapshot::adjacency() const {
  std::vector<std::vector<int>> adj(m_);
  for (const auto& e : edges_) {
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
  }
  return adj;
}

GeneratedGraph gen_rgg(int m, double connectivity, std::uint64_t seed,
                       RggReading reading) {
  if (m < 2) throw InvalidArgument("gen_rgg needs m >= 2");
  if (!(connectivity > 0.0) || !std::isfinite(connectivity)) {
    throw InvalidArgument("connectivity must be positive");
  }
  if (reading == RggReading::density && connectivity > 1.0) {
    throw InvalidArgument("edge density must lie in (0, 1]");
  }

  for (int attempt = 0; attempt < kRggMaxAttempts; ++attempt) {
    auto rng = make_rng({seed, static_cast<std::uint64_t>(attempt), 0x5267ull});
    std::vector<double> x(m), y(m);
    for (int i = 0; i < m; ++i) {
      x[i] = uniform01(rng);
      y[i] = uniform01(rng);
    }

    std::vector<Edge> edges;
    if (reading == RggReading::radius) {
      const double r2 = connectivity * connectivity;
      for (int i = 0; i < m; ++i) {
        for (int j = i + 1; j < m; ++j) {
          const double dx = x[i] - x[j];
          const double dy = y[i] - y[j];
          if (dx * dx + dy * dy <= r2) edges.emplace_back(i, j);
        }
      }
    } else {
      std::vector<std::pair<double, Edge>> pairs;
      for (int i = 0; i < m; ++i) {
        for (int j = i + 1; j < m; ++j) {
          const double dx = x[i] - x[j];
          const double dy = y[i] - y[j];
          pairs.emplace_back(dx * dx + dy * dy, Edge(i, j));
        }
      }
      std::sort(pairs.begin(), pairs.end());
      const auto target = static_cast<std::size_t>(
          std::ceil(connectivity * static_cast<double>(pairs.size())));
      for (std::size_t p = 0; p < target && p < pairs.size(); ++p) {
        edges.push_back(pairs[p].second);
      }
    }

    GraphSnapshot g(m, std::move(edges));
    if (is_connected(g)) return {std::move(g), attempt};
  }
  throw RetryExhausted(fmt::format(
      "gen_rgg: no connected graph for m={} connectivity={} after {} draws",
      m, connectivity, kRggMaxAttempts));
}

std::vector<std::vector<Edge>> cyclic_partition(const GraphSnapshot& g,
                                                int groups) {
  if (groups < 1) throw InvalidArgument("partition needs at least one group");
  std::vector<std::vector<Edge>> parts(groups);
  const auto& edges = g.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    parts[e % groups].push_back(edges[e]);
  }
  return parts;
}

GraphSnapshot snapshot_at(const TopologySchedule& schedule, std::int64_t k) {
  const auto& base = schedule.base_graph;
  const int window = std::max(schedule.window, 1);
  switch (schedule.mode) {
    case ScheduleMode::static_graph:
      return base;

    case ScheduleMode::cyclic_partition: {
      // Every window of B1 consecutive iterations visits every group, so the
      // window union is the base graph.
      const auto parts = cyclic_partition(base, window);
      return GraphSnapshot(base.size(), parts[static_cast<std::size_t>(k % window)]);
    }

    case ScheduleMode::random_subset: {
      std::vector<Edge> active;
      for (const auto& e : base.edges()) {
        const double u = hash_uniform01(
            {schedule.seed, static_cast<std::uint64_t>(k),
             static_cast<std::uint64_t>(e.a), static_cast<std::uint64_t>(e.b)});
        if (u < schedule.subset_p) active.push_back(e);
      }
      // Repair: each spanning-tree edge owns a residue class mod B1 and is
      // forced on whenever k falls in it.
      for (const auto& e : spanning_tree(base)) {
        const auto slot = mix64(schedule.seed ^ mix64((static_cast<std::uint64_t>(e.a) << 32) |
                                                       static_cast<std::uint64_t>(e.b))) %
                          static_cast<std::uint64_t>(window);
        if (static_cast<std::uint64_t>(k % window) == slot) active.push_back(e);
      }
      return GraphSnapshot(base.size(), std::move(active));
    }
  }
  return base;
}

GraphSnapshot union_graph(const std::vector<GraphSnapshot>& snapshots) {
  if (snapshots.empty()) return GraphSnapshot(0);
  const int m = snapshots.front().size();
  std::vector<Edge> all;
  for (const auto& s : snapshots) {
    if (s.size() != m) {
      throw InvalidArgument(fmt::format(
          "union_graph: snapshot sizes differ ({} vs {})", m, s.size()));
    }
    all.insert(all.end(), s.edges().begin(), s.edges().end());
  }
  return GraphSnapshot(m, std::move(all));
}

bool is_connected(const GraphSnapshot& g) {
  const int m = g.size();
  if (m <= 1) return true;
  const auto adj = g.adjacency();
  std::vector<bool> seen(m, false);
  std::vector<int> stack{0};
  seen[0] = true;
  int reached = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++reached;
        stack.push_back(v);
      }
    }
  }
  return reached == m;
}

int compute_window_B(int B1, int B2) {
  if (B1 < 1 || B2 < 1) throw InvalidArgument("B1 and B2 must be >= 1");
  // l * B1 <= B2 <= (l + 1) * B1 - 1 pins l = floor(B2 / B1).
  const int l = B2 / B1;
  return (l + 2) * B1;
}

void InfoFlowLog::push(GraphSnapshot used) {
  if (used.size() != m_) {
    throw InvalidArgument(fmt::format(
        "info-flow round has {} devices, log expects {}", used.size(), m_));
  }
  rounds_.push_back(std::move(used));
}

ConnectivityReport certify_B_connectivity(const InfoFlowLog& log, int B) {
  if (B < 1) throw InvalidArgument("window B must be >= 1");
  if (log.size() < static_cast<std::size_t>(B)) {
    throw InvalidArgument(fmt::format(
        "info-flow log covers {} iterations, shorter than B={}", log.size(), B));
  }
  ConnectivityReport report;
  report.window = B;

  // Sliding multiset of edges in the current window; connectivity of the
  // window union is then a union-find pass over the distinct edges.
  std::map<Edge, int> live;
  auto add = [&](const GraphSnapshot& g, int delta) {
    for (const auto& e : g.edges()) {
      auto& c = live[e];
      c += delta;
      if (c == 0) live.erase(e);
    }
  };
  for (int s = 0; s < B; ++s) add(log.at(s), +1);

  const std::size_t starts = log.size() - B + 1;
  for (std::size_t k = 0; k < starts; ++k) {
    if (k > 0) {
      add(log.at(k - 1), -1);
      add(log.at(k + B - 1), +1);
    }
    DisjointSets sets(log.devices());
    for (const auto& [e, count] : live) sets.unite(e.a, e.b);
    if (log.devices() > 1 && sets.components() != 1) {
      report.violations.push_back(k);
    }
  }
  report.windows_checked = starts;
  return report;
}

void write_edge_list(std::ostream& out, const GraphSnapshot& g) {
  out << "m " << g.size() << '\n';
  for (const auto& e : g.edges()) out << e.a << ' ' << e.b << '\n';
}

namespace {

struct EdgeListParser {
  explicit EdgeListParser(std::istream& s) : in(s) {}

  std::istream& in;
  std::size_t line_no = 0;
  std::string pending;
  bool has_pending = false;

  bool next(std::string& line) {
    if (has_pending) {
      line = std::move(pending);
      has_pending = false;
      return true;
    }
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  }
  void push_back(std::string line) {
    pending = std::move(line);
    has_pending = true;
  }

  bool block(GraphSnapshot& out) {
    std::string line;
    if (!next(line)) return false;
    std::istringstream header(line);
    std::string tag;
    int m = -1;
    if (!(header >> tag >> m) || tag != "m" || m < 0) {
      throw FormatError(fmt::format("edge list line {}: expected \"m <count>\"", line_no));
    }
    std::vector<Edge> edges;
    while (next(line)) {
      std::istringstream row(line);
      int i = 0;
      int j = 0;
      if (line.find_first_not_of(" \t") != std::string::npos &&
          line[line.find_first_not_of(" \t")] == 'm') {
        push_back(std::move(line));
        break;
      }
      if (!(row >> i >> j)) {
        throw FormatError(fmt::format("edge list line {}: expected \"i j\"", line_no));
      }
      if (i >= j || i < 0 || j >= m) {
        throw FormatError(fmt::format(
            "edge list line {}: pair ({}, {}) must satisfy 0 <= i < j < {}", line_no, i, j, m));
      }
      edges.emplace_back(i, j);
    }
    out = GraphSnapshot(m, std::move(edges));
    return true;
  }
};

}  // namespace

GraphSnapshot read_edge_list(std::istream& in) {
  EdgeListParser parser(in);
  GraphSnapshot g;
  if (!parser.block(g)) throw FormatError("edge list is empty");
  return g;
}

void write_info_flow(std::ostream& out, const InfoFlowLog& log) {
  for (const auto& round : log.rounds()) write_edge_list(out, round);
}

InfoFlowLog read_info_flow(std::istream& in) {
  EdgeListParser parser(in);
  GraphSnapshot g;
  if (!parser.block(g)) throw FormatError("info-flow log is empty");
  InfoFlowLog log(g.size());
  log.push(std::move(g));
  while (parser.block(g)) {
    if (g.size() != log.devices()) {
      throw FormatError(fmt::format("info-flow block {} has m={}, expected {}",
                                    log.size(), g.size(), log.devices()));
    }
    log.push(std::move(g));
  }
  return log;
}

InfoFlowLog read_info_flow_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument(fmt::format("cannot open info-flow log {}", path));
  return read_info_flow(in);
}

}  // namespace efhc
