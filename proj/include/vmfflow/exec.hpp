#pragma once

namespace vmfflow {

/// Selects between the serial reference loop and the OpenMP kernel. Both
/// produce bitwise-identical results; the serial path exists for testing and
/// benchmarking.
enum class Exec { Serial, Parallel };

void set_num_threads(int n);
int max_threads();

}  // namespace vmfflow
