#pragma once

#include "lstdac/boltzmann.hpp"
#include "lstdac/mrp_transform.hpp"

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace lstdac {

enum class CellLabel : char { Free = '.', Initial = 'S', Goal = 'G', Unsafe = '#' };

/// Motion primitives in the order North, East, South, West.
enum class Move : ActionIndex { North = 0, East = 1, South = 2, West = 3 };
inline constexpr std::size_t kNumMoves = 4;

/**
 * Parametric slip model for one motion primitive in a cell of roughness rho:
 * the intended neighbour gets p0 (1 - gain rho); the remaining slip mass goes
 * lateral_split to each side and back_fraction backwards. Requires
 * 2 lateral_split + back_fraction = 1.
 */
struct SlipModel {
  double base_intended = 0.85;
  double lateral_split = 0.5;
  double back_fraction = 0.0;
  double roughness_gain = 0.3;

  struct Masses {
    double intended, left, right, back;
  };

  Masses masses(double roughness) const;
  /// Throws ValidationError on an inconsistent parameter set.
  void validate() const;

  bool operator==(const SlipModel&) const = default;
};

struct GridSpec {
  std::size_t width = 0;
  std::size_t height = 0;
  /// Row-major, row 0 is the northern edge.
  std::vector<CellLabel> labels;
  /// Per-cell roughness in [0, 1).
  std::vector<double> roughness;
  SlipModel slip;
  std::size_t neighborhood_radius = 2;
  /// Whether a cell counts as its own neighbour in the safety score.
  bool neighborhood_includes_self = true;
  /// Progress distances may pass through unsafe cells (pure geometric distance).
  bool progress_through_unsafe = false;

  std::size_t num_cells() const { return width * height; }
  std::size_t cell(std::size_t row, std::size_t col) const { return row * width + col; }
  std::size_t row_of(std::size_t c) const { return c / width; }
  std::size_t col_of(std::size_t c) const { return c % width; }
  CellLabel label(std::size_t c) const { return labels[c]; }

  std::size_t initial_cell() const;
  std::vector<std::size_t> cells_with(CellLabel label) const;

  bool operator==(const GridSpec&) const = default;
};

/// Throws ValidationError unless the spec has exactly one initial cell, at
/// least one goal, matching table sizes, roughness in [0,1), and a valid slip
/// model.
void validate_grid(const GridSpec& spec);

/// Neighbour of `c` in direction `m`, or nullopt at the boundary.
std::optional<std::size_t> neighbor(const GridSpec& spec, std::size_t c, Move m);

/// One state per cell, moves masked at the boundary, slip mass aimed at a
/// wall stays in the current cell. Goal and unsafe cells are absorbing with a
/// single self-loop action.
MrpProblem build_grid_mdp(const GridSpec& spec);

/// Fraction of non-unsafe cells within grid distance r_n of `c`.
double safety_score(const GridSpec& spec, std::size_t c);
std::vector<double> safety_table(const GridSpec& spec);

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

/// Breadth-first distance to the nearest goal. Unsafe cells are assigned a
/// distance but never expanded (unless progress_through_unsafe); cells with no
/// path carry kUnreachable.
std::vector<double> progress_score(const GridSpec& spec);

/// Safety/progress features phi_u(x) = (E[s(next)], E[d_g(next)] - d_g(x)),
/// expectations taken under the model's transition row for (x, u).
class GridFeatures : public TabularFeatures {
public:
  GridFeatures(const GridSpec& spec, const MrpProblem& problem);

  const std::vector<double>& safety() const { return safety_; }
  const std::vector<double>& progress() const { return progress_; }

private:
  std::vector<double> safety_;
  std::vector<double> progress_;
};

/// Grid text: one row per line, 'S' initial, 'G' goal, '#' unsafe, '.' free.
/// Roughness is zero and the slip model default.
GridSpec load_grid(std::string_view text);
std::string save_grid(const GridSpec& spec);

/// Roughness sidecar: `height` lines of `width` comma-separated decimals.
std::vector<double> load_roughness_csv(std::string_view text, std::size_t width,
                                       std::size_t height);
std::string save_roughness_csv(const GridSpec& spec);

/// I.i.d. uniform [0,1) roughness drawn from `seed`, cells in row-major order.
void assign_random_roughness(GridSpec& spec, std::uint64_t seed);

/// Built-in layouts: "paper50" (50x50, initial in the south-west corner,
/// goals in the other three corners, unsafe blocks in between) and "lab20"
/// (a 20x20 layout of the same shape). Roughness is left at zero.
GridSpec fixture_grid(std::string_view name);

} // namespace lstdac
