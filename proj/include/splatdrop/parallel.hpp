#pragma once

#include <cstddef>
#include <functional>

namespace splatdrop {

// Caps OpenMP workers. n <= 0 selects the SPLATDROP_THREADS environment
// variable, falling back to the runtime default.
void set_num_threads(int n);
int num_threads();

// Sum of f(i) for i in [0, n). Partial sums are formed over fixed-size blocks
// and combined serially, so the result does not depend on the worker count.
double deterministic_sum(std::size_t n, const std::function<double(std::size_t)>& f);

}  // namespace splatdrop
