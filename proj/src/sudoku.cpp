#include "vmfflow/sudoku.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "vmfflow/error.hpp"

namespace vmfflow {

namespace {

bool fits(const SudokuGrid& g, int cell, int v) {
  const int r = cell / 4, c = cell % 4, br = r / 2 * 2, bc = c / 2 * 2;
  for (int i = 0; i < 4; ++i) {
    if (g[static_cast<std::size_t>(r * 4 + i)] == v || g[static_cast<std::size_t>(i * 4 + c)] == v) return false;
    if (g[static_cast<std::size_t>((br + i / 2) * 4 + bc + i % 2)] == v) return false;
  }
  return true;
}

void enumerate(SudokuGrid& g, int cell, std::vector<SudokuGrid>& out) {
  if (cell == kSudokuCells) {
    out.push_back(g);
    return;
  }
  for (int v = 1; v <= 4; ++v) {
    if (!fits(g, cell, v)) continue;
    g[static_cast<std::size_t>(cell)] = v;
    enumerate(g, cell + 1, out);
    g[static_cast<std::size_t>(cell)] = 0;
  }
}

// All 288 solved 4x4 grids, in lexicographic order.
const std::vector<SudokuGrid>& all_solutions() {
  static const std::vector<SudokuGrid> grids = [] {
    std::vector<SudokuGrid> out;
    SudokuGrid g{};
    enumerate(g, 0, out);
    return out;
  }();
  return grids;
}

SudokuGrid random_solution(Rng& rng) {
  const auto& grids = all_solutions();
  return grids[rng.index(grids.size())];
}

std::array<bool, kSudokuCells> random_clues(double clue_fraction, Rng& rng) {
  const int n = static_cast<int>(std::lround(clue_fraction * kSudokuCells));
  std::array<int, kSudokuCells> order{};
  std::iota(order.begin(), order.end(), 0);
  for (int i = kSudokuCells - 1; i > 0; --i) {
    std::swap(order[static_cast<std::size_t>(i)], order[rng.index(static_cast<std::size_t>(i) + 1)]);
  }
  std::array<bool, kSudokuCells> clues{};
  for (int i = 0; i < n; ++i) clues[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
  return clues;
}

}  // namespace

ClueMask MiniSudokuTask::clue_mask(std::size_t i) const {
  ClueMask m;
  m.pinned.assign(clues[i].begin(), clues[i].end());
  m.values.assign(solutions[i].begin(), solutions[i].end());
  for (std::size_t c = 0; c < m.values.size(); ++c) {
    if (!m.pinned[c]) m.values[c] = 0;
  }
  return m;
}

Example MiniSudokuTask::example(std::size_t i) const {
  return {std::vector<int>(solutions[i].begin(), solutions[i].end()),
          std::vector<bool>(clues[i].begin(), clues[i].end())};
}

bool valid_sudoku(std::span<const int> grid) {
  if (grid.size() != kSudokuCells) return false;
  auto group_ok = [&](auto cell) {
    unsigned seen = 0;
    for (int i = 0; i < 4; ++i) {
      const int v = grid[static_cast<std::size_t>(cell(i))];
      if (v < 1 || v > 4) return false;
      const unsigned bit = 1u << v;
      if (seen & bit) return false;
      seen |= bit;
    }
    return true;
  };
  for (int g = 0; g < 4; ++g) {
    if (!group_ok([g](int i) { return g * 4 + i; })) return false;
    if (!group_ok([g](int i) { return i * 4 + g; })) return false;
    const int br = (g / 2) * 2, bc = (g % 2) * 2;
    if (!group_ok([br, bc](int i) { return (br + i / 2) * 4 + bc + i % 2; })) return false;
  }
  return true;
}

MiniSudokuTask mini_sudoku(int count, double clue_fraction, Rng& rng) {
  if (!(clue_fraction > 0.0 && clue_fraction < 1.0)) throw InvalidConfig("clue_fraction must be in (0, 1)");
  MiniSudokuTask task;
  task.solutions.reserve(static_cast<std::size_t>(count));
  task.clues.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    task.solutions.push_back(random_solution(rng));
    task.clues.push_back(random_clues(clue_fraction, rng));
  }
  return task;
}

DataSource sudoku_source(double clue_fraction) {
  if (!(clue_fraction > 0.0 && clue_fraction < 1.0)) throw InvalidConfig("clue_fraction must be in (0, 1)");
  return [clue_fraction](Rng& rng) {
    const auto sol = random_solution(rng);
    const auto clues = random_clues(clue_fraction, rng);
    return Example{std::vector<int>(sol.begin(), sol.end()), std::vector<bool>(clues.begin(), clues.end())};
  };
}

double random_fill_validity(const MiniSudokuTask& task, Rng& rng) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < task.size(); ++i) {
    SudokuGrid g = task.solutions[i];
    for (std::size_t c = 0; c < g.size(); ++c) {
      if (!task.clues[i][c]) g[c] = 1 + static_cast<int>(rng.index(4));
    }
    ok += valid_sudoku(g) ? 1 : 0;
  }
  return task.size() ? static_cast<double>(ok) / static_cast<double>(task.size()) : 0.0;
}

double validity_rate(std::span<const std::vector<int>> boards) {
  std::size_t ok = 0;
  for (const auto& b : boards) ok += valid_sudoku(b) ? 1 : 0;
  return boards.empty() ? 0.0 : static_cast<double>(ok) / static_cast<double>(boards.size());
}

}  // namespace vmfflow
