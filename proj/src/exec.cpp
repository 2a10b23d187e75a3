#include "vmfflow/exec.hpp"

#include <omp.h>

namespace vmfflow {

void set_num_threads(int n) {
  if (n > 0) omp_set_num_threads(n);
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace vmfflow
