#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace efhc {

// Unordered device pair stored with first < second.
struct Edge {
  int a = 0;
  int b = 0;

  Edge() = default;
  Edge(int i, int j) : a(i < j ? i : j), b(i < j ? j : i) {}

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// Undirected simple graph over devices 0..m-1. Edges are kept sorted and
// unique, so two snapshots with the same edge set compare equal.
class GraphSnapshot {
 public:
  GraphSnapshot() = default;
  explicit GraphSnapshot(int m);
  GraphSnapshot(int m, std::vector<Edge> edges);

  int size() const { return m_; }
  const std::vector<Edge>& edges() const { return edges_; }
  bool has_edge(int i, int j) const;
  std::vector<int> degrees() const;
  std::vector<std::vector<int>> adjacency() const;

  friend bool operator==(const GraphSnapshot&, const GraphSnapshot&) = default;

 private:
  int m_ = 0;
  std::vector<Edge> edges_;
};

// --- random geometric graphs ---------------------------------------------

enum class RggReading {
  radius,   // connectivity is the connection radius in the unit square
  density,  // connectivity is the target fraction of all possible edges
};

struct GeneratedGraph {
  GraphSnapshot graph;
  int resamples = 0;
};

inline constexpr int kRggMaxAttempts = 1000;

// Places m points uniformly in the unit square and links pairs within the
// radius (or the closest pairs up to the density target). Disconnected draws
// are redrawn with the next sub-seed, up to kRggMaxAttempts.
GeneratedGraph gen_rgg(int m, double connectivity, std::uint64_t seed,
                       RggReading reading = RggReading::radius);

// --- time-varying schedules ----------------------------------------------

enum class ScheduleMode { static_graph, cyclic_partition, random_subset };

struct TopologySchedule {
  GraphSnapshot base_graph;
  ScheduleMode mode = ScheduleMode::static_graph;
  int window = 1;            // B1
  double subset_p = 1.0;     // random_subset only
  std::uint64_t seed = 0;
};

// Physical graph G^(k). Pure function of (schedule, k); every window of
// `window` consecutive snapshots has a connected union when the base graph
// is connected.
GraphSnapshot snapshot_at(const TopologySchedule& schedule, std::int64_t k);

// Edge partition used by cyclic mode: round-robin over the sorted edge list.
std::vector<std::vector<Edge>> cyclic_partition(const GraphSnapshot& g,
                                                int groups);

GraphSnapshot union_graph(const std::vector<GraphSnapshot>& snapshots);

bool is_connected(const GraphSnapshot& g);

// B = (l + 2) * B1 with l * B1 <= B2 <= (l + 1) * B1 - 1.
int compute_window_B(int B1, int B2);

// --- information flow ------------------------------------------------------

// Edges actually used for parameter exchange, one set per iteration.
class InfoFlowLog {
 public:
  InfoFlowLog() = default;
  explicit InfoFlowLog(int m) : m_(m) {}

  int devices() const { return m_; }
  std::size_t size() const { return rounds_.size(); }
  void push(GraphSnapshot used);
  const GraphSnapshot& at(std::size_t k) const { return rounds_.at(k); }
  const std::vector<GraphSnapshot>& rounds() const { return rounds_; }

 private:
  int m_ = 0;
  std::vector<GraphSnapshot> rounds_;
};

struct ConnectivityReport {
  int window = 0;
  std::size_t windows_checked = 0;
  std::vector<std::size_t> violations;  // window start iterations

  bool certified() const { return violations.empty(); }
};

ConnectivityReport certify_B_connectivity(const InfoFlowLog& log, int B);

// --- edge-list text format -------------------------------------------------
// "m <count>" then one "i j" line per edge, 0-indexed, i < j. A log is a
// sequence of such blocks, one per iteration.

void write_edge_list(std::ostream& out, const GraphSnapshot& g);
GraphSnapshot read_edge_list(std::istream& in);
void write_info_flow(std::ostream& out, const InfoFlowLog& log);
InfoFlowLog read_info_flow(std::istream& in);
InfoFlowLog read_info_flow_file(const std::string& path);

}  // namespace efhc
