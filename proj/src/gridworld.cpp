#include "lstdac/gridworld.hpp"

#include "lstdac/errors.hpp"
#include "lstdac/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <sstream>

namespace lstdac {

namespace {

bool is_absorbing(CellLabel l) { return l == CellLabel::Goal || l == CellLabel::Unsafe; }

Move left_of(Move m) { return static_cast<Move>((static_cast<ActionIndex>(m) + 3) % 4); }
Move right_of(Move m) { return static_cast<Move>((static_cast<ActionIndex>(m) + 1) % 4); }
Move back_of(Move m) { return static_cast<Move>((static_cast<ActionIndex>(m) + 2) % 4); }

std::string cell_name(const GridSpec& spec, std::size_t c) {
  return "(row " + std::to_string(spec.row_of(c)) + ", col " + std::to_string(spec.col_of(c)) + ")";
}

} // namespace

SlipModel::Masses SlipModel::masses(double roughness) const {
  const double intended = base_intended * (1.0 - roughness_gain * roughness);
  const double slip = 1.0 - intended;
  return {intended, lateral_split * slip, lateral_split * slip, back_fraction * slip};
}

void SlipModel::validate() const {
  const auto bad = [](const std::string& what) { throw ValidationError("SlipModel: " + what); };
  if (!(base_intended >= 0.0 && base_intended <= 1.0)) bad("base_intended must lie in [0,1]");
  if (!(lateral_split >= 0.0 && back_fraction >= 0.0)) bad("slip fractions must be nonnegative");
  if (std::abs(2.0 * lateral_split + back_fraction - 1.0) > 1e-12) {
    bad("2*lateral_split + back_fraction must equal 1");
  }
  if (!(roughness_gain >= 0.0 && roughness_gain <= 1.0)) bad("roughness_gain must lie in [0,1]");
}

std::size_t GridSpec::initial_cell() const {
  const auto it = std::find(labels.begin(), labels.end(), CellLabel::Initial);
  if (it == labels.end()) throw ValidationError("grid has no initial cell");
  return static_cast<std::size_t>(it - labels.begin());
}

std::vector<std::size_t> GridSpec::cells_with(CellLabel l) const {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < labels.size(); ++c) {
    if (labels[c] == l) out.push_back(c);
  }
  return out;
}

void validate_grid(const GridSpec& spec) {
  if (spec.width == 0 || spec.height == 0) throw ValidationError("grid is empty");
  if (spec.labels.size() != spec.num_cells()) throw ValidationError("label table size mismatch");
  if (spec.roughness.size() != spec.num_cells()) {
    throw ValidationError("roughness table size mismatch");
  }
  const auto initials = spec.cells_with(CellLabel::Initial).size();
  if (initials != 1) {
    throw ValidationError("grid needs exactly one initial cell, found " + std::to_string(initials));
  }
  if (spec.cells_with(CellLabel::Goal).empty()) throw ValidationError("grid has no goal cell");
  for (std::size_t c = 0; c < spec.num_cells(); ++c) {
    if (!(spec.roughness[c] >= 0.0 && spec.roughness[c] < 1.0)) {
      throw ValidationError("roughness outside [0,1) at " + cell_name(spec, c));
    }
  }
  spec.slip.validate();
}

std::optional<std::size_t> neighbor(const GridSpec& spec, std::size_t c, Move m) {
  const std::size_t r = spec.row_of(c);
  const std::size_t k = spec.col_of(c);
  switch (m) {
    case Move::North:
      if (r == 0) return std::nullopt;
      return spec.cell(r - 1, k);
    case Move::East:
      if (k + 1 == spec.width) return std::nullopt;
      return spec.cell(r, k + 1);
    case Move::South:
      if (r + 1 == spec.height) return std::nullopt;
      return spec.cell(r + 1, k);
    case Move::West:
      if (k == 0) return std::nullopt;
      return spec.cell(r, k - 1);
  }
  return std::nullopt;
}

MrpProblem build_grid_mdp(const GridSpec& spec) {
  validate_grid(spec);
  MrpProblem problem;
  problem.mdp = FiniteMdp(spec.num_cells(), kNumMoves, spec.initial_cell());
  for (std::size_t c = 0; c < spec.num_cells(); ++c) {
    if (is_absorbing(spec.label(c))) {
      problem.mdp.set_available(c, 0, true);
      problem.mdp.set_row(c, 0, {{c, 1.0}});
      (spec.label(c) == CellLabel::Goal ? problem.goal_states : problem.unsafe_states).push_back(c);
      continue;
    }
    const auto m = spec.slip.masses(spec.roughness[c]);
    for (ActionIndex u = 0; u < kNumMoves; ++u) {
      const Move move = static_cast<Move>(u);
      const auto target = neighbor(spec, c, move);
      if (!target) continue;
      problem.mdp.set_available(c, u, true);
      std::vector<Transition> row{{*target, m.intended}};
      const auto push = [&](Move dir, double mass) {
        if (mass == 0.0) return;
        row.push_back({neighbor(spec, c, dir).value_or(c), mass});
      };
      push(left_of(move), m.left);
      push(right_of(move), m.right);
      push(back_of(move), m.back);
      problem.mdp.set_row(c, u, std::move(row));
    }
  }
  return problem;
}

namespace {

// Cells within `radius` grid steps of `start`, ignoring labels.
std::size_t count_ball(const GridSpec& spec, std::size_t start, std::size_t radius,
                       bool include_self, std::size_t& safe) {
  std::vector<std::size_t> dist(spec.num_cells(), static_cast<std::size_t>(-1));
  std::deque<std::size_t> queue{start};
  dist[start] = 0;
  std::size_t total = 0;
  safe = 0;
  while (!queue.empty()) {
    const std::size_t c = queue.front();
    queue.pop_front();
    if (c != start || include_self) {
      ++total;
      if (spec.label(c) != CellLabel::Unsafe) ++safe;
    }
    if (dist[c] == radius) continue;
    for (ActionIndex u = 0; u < kNumMoves; ++u) {
      const auto n = neighbor(spec, c, static_cast<Move>(u));
      if (n && dist[*n] == static_cast<std::size_t>(-1)) {
        dist[*n] = dist[c] + 1;
        queue.push_back(*n);
      }
    }
  }
  return total;
}

} // namespace

double safety_score(const GridSpec& spec, std::size_t c) {
  std::size_t safe = 0;
  const std::size_t total =
      count_ball(spec, c, spec.neighborhood_radius, spec.neighborhood_includes_self, safe);
  if (total == 0) return spec.label(c) == CellLabel::Unsafe ? 0.0 : 1.0;
  return static_cast<double>(safe) / static_cast<double>(total);
}

std::vector<double> safety_table(const GridSpec& spec) {
  std::vector<double> out(spec.num_cells());
  for (std::size_t c = 0; c < spec.num_cells(); ++c) out[c] = safety_score(spec, c);
  return out;
}

std::vector<double> progress_score(const GridSpec& spec) {
  std::vector<double> dist(spec.num_cells(), kUnreachable);
  std::deque<std::size_t> queue;
  for (std::size_t g : spec.cells_with(CellLabel::Goal)) {
    dist[g] = 0.0;
    queue.push_back(g);
  }
  while (!queue.empty()) {
    const std::size_t c = queue.front();
    queue.pop_front();
    if (spec.label(c) == CellLabel::Unsafe && !spec.progress_through_unsafe) continue;
    for (ActionIndex u = 0; u < kNumMoves; ++u) {
      const auto n = neighbor(spec, c, static_cast<Move>(u));
      if (n && dist[*n] == kUnreachable) {
        dist[*n] = dist[c] + 1.0;
        queue.push_back(*n);
      }
    }
  }
  return dist;
}

GridFeatures::GridFeatures(const GridSpec& spec, const MrpProblem& problem)
    : TabularFeatures(problem.mdp, 2), safety_(safety_table(spec)), progress_(progress_score(spec)) {
  if (problem.mdp.num_states() != spec.num_cells()) {
    throw std::invalid_argument("GridFeatures: MDP does not match grid");
  }
  for (std::size_t c = 0; c < spec.num_cells(); ++c) {
    if (is_absorbing(spec.label(c))) continue;
    for (ActionIndex u = 0; u < kNumMoves; ++u) {
      if (!problem.mdp.available(c, u)) continue;
      double exp_safety = 0.0;
      double exp_progress = 0.0;
      for (const auto& t : problem.mdp.row(c, u)) {
        if (progress_[t.next] == kUnreachable) {
          throw ValidationError("grid_features: no path to a goal from " +
                                cell_name(spec, t.next) + " reached from " + cell_name(spec, c));
        }
        exp_safety += t.prob * safety_[t.next];
        exp_progress += t.prob * progress_[t.next];
      }
      if (progress_[c] == kUnreachable) {
        throw ValidationError("grid_features: no path to a goal from " + cell_name(spec, c));
      }
      Eigen::VectorXd phi(2);
      phi << exp_safety, exp_progress - progress_[c];
      set_features(c, u, phi);
    }
  }
}

GridSpec load_grid(std::string_view text) {
  GridSpec spec;
  std::vector<std::string> rows;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(pos, end - pos));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    rows.push_back(std::move(line));
    pos = end + 1;
  }
  while (!rows.empty() && rows.back().empty()) rows.pop_back();
  if (rows.empty()) throw ValidationError("load_grid: empty grid");

  spec.width = rows.front().size();
  spec.height = rows.size();
  if (spec.width == 0) throw ValidationError("load_grid: empty first row");
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != spec.width) {
      throw ValidationError("load_grid: ragged row " + std::to_string(r) + " (length " +
                            std::to_string(rows[r].size()) + ", expected " +
                            std::to_string(spec.width) + ")");
    }
    for (std::size_t k = 0; k < rows[r].size(); ++k) {
      const char ch = rows[r][k];
      switch (ch) {
        case '.': case 'S': case 'G': case '#':
          spec.labels.push_back(static_cast<CellLabel>(ch));
          break;
        default:
          throw ValidationError(std::string("load_grid: unknown glyph '") + ch + "' at row " +
                                std::to_string(r) + ", col " + std::to_string(k));
      }
    }
  }
  spec.roughness.assign(spec.num_cells(), 0.0);
  const auto initials = spec.cells_with(CellLabel::Initial).size();
  if (initials != 1) {
    throw ValidationError("load_grid: need exactly one initial cell 'S', found " +
                          std::to_string(initials));
  }
  return spec;
}

std::string save_grid(const GridSpec& spec) {
  std::string out;
  out.reserve((spec.width + 1) * spec.height);
  for (std::size_t r = 0; r < spec.height; ++r) {
    for (std::size_t k = 0; k < spec.width; ++k) out.push_back(static_cast<char>(spec.labels[spec.cell(r, k)]));
    out.push_back('\n');
  }
  return out;
}

std::vector<double> load_roughness_csv(std::string_view text, std::size_t width,
                                       std::size_t height) {
  std::vector<double> out;
  out.reserve(width * height);
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string field;
    std::size_t cols = 0;
    while (std::getline(fields, field, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(field, &used);
      } catch (const std::exception&) {
        throw ValidationError("roughness csv: bad number '" + field + "'");
      }
      out.push_back(v);
      ++cols;
    }
    if (cols != width) throw ValidationError("roughness csv: row " + std::to_string(rows) + " has wrong width");
    ++rows;
  }
  if (rows != height) throw ValidationError("roughness csv: wrong number of rows");
  return out;
}

std::string save_roughness_csv(const GridSpec& spec) {
  std::string out;
  char buf[32];
  for (std::size_t r = 0; r < spec.height; ++r) {
    for (std::size_t k = 0; k < spec.width; ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", spec.roughness[spec.cell(r, k)]);
      if (k) out.push_back(',');
      out += buf;
    }
    out.push_back('\n');
  }
  return out;
}

void assign_random_roughness(GridSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  spec.roughness.resize(spec.num_cells());
  for (double& r : spec.roughness) r = rng.uniform();
}

namespace {

struct Block {
  std::size_t row0, col0, rows, cols;
};

GridSpec layout(std::size_t size, const std::vector<Block>& blocks) {
  GridSpec spec;
  spec.width = spec.height = size;
  spec.labels.assign(size * size, CellLabel::Free);
  spec.roughness.assign(size * size, 0.0);
  for (const auto& b : blocks) {
    for (std::size_t r = b.row0; r < b.row0 + b.rows; ++r) {
      for (std::size_t k = b.col0; k < b.col0 + b.cols; ++k) spec.labels[spec.cell(r, k)] = CellLabel::Unsafe;
    }
  }
  spec.labels[spec.cell(size - 1, 0)] = CellLabel::Initial;
  spec.labels[spec.cell(0, 0)] = CellLabel::Goal;
  spec.labels[spec.cell(0, size - 1)] = CellLabel::Goal;
  spec.labels[spec.cell(size - 1, size - 1)] = CellLabel::Goal;
  return spec;
}

} // namespace

GridSpec fixture_grid(std::string_view name) {
  if (name == "paper50") {
    return layout(50, {
                          {5, 8, 6, 10},
                          {3, 30, 4, 6},
                          {14, 2, 3, 12},
                          {16, 22, 10, 5},
                          {12, 38, 3, 9},
                          {24, 6, 5, 8},
                          {30, 30, 6, 12},
                          {33, 14, 4, 8},
                          {40, 4, 3, 7},
                          {42, 22, 5, 4},
                          {44, 36, 3, 8},
                          {20, 44, 6, 3},
                      });
  }
  if (name == "lab20") {
    return layout(20, {
                          {3, 4, 2, 5},
                          {2, 13, 3, 2},
                          {8, 2, 2, 4},
                          {7, 9, 4, 3},
                          {10, 15, 2, 4},
                          {14, 5, 2, 3},
                          {15, 12, 2, 4},
                      });
  }
  throw std::invalid_argument("fixture_grid: unknown fixture '" + std::string(name) + "'");
}

} // namespace lstdac
