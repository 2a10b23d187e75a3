#pragma once

// 4x4 Sudoku with 2x2 boxes. Digits 1..4 are token indices 1..4; token 0 is
// a reserved blank that the data never contains.

#include <array>
#include <span>
#include <vector>

#include "vmfflow/rng.hpp"
#include "vmfflow/samplers.hpp"
#include "vmfflow/training.hpp"

namespace vmfflow {

inline constexpr int kSudokuSide = 4;
inline constexpr int kSudokuCells = 16;
inline constexpr int kSudokuVocab = 5;

using SudokuGrid = std::array<int, kSudokuCells>;

struct MiniSudokuTask {
  std::vector<SudokuGrid> solutions;
  std::vector<std::array<bool, kSudokuCells>> clues;

  std::size_t size() const { return solutions.size(); }
  ClueMask clue_mask(std::size_t i) const;
  Example example(std::size_t i) const;
};

/// Row, column and box uniqueness over digits 1..4 (any other value fails).
bool valid_sudoku(std::span<const int> grid);

/// Solutions drawn uniformly from all 288 solved grids; round(16
/// clue_fraction) clues chosen uniformly per board.
MiniSudokuTask mini_sudoku(int count, double clue_fraction, Rng& rng);

/// Training data: a fresh board per call, clue positions pinned.
DataSource sudoku_source(double clue_fraction);

/// Fraction of boards that are valid after filling every non-clue cell with
/// a uniform digit.
double random_fill_validity(const MiniSudokuTask& task, Rng& rng);

/// Fraction of valid decoded boards (tokens per board).
double validity_rate(std::span<const std::vector<int>> boards);

}  // namespace vmfflow
