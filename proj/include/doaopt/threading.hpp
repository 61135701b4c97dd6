#pragma once

#include <exception>
#include <functional>

namespace doaopt {

// Global worker-thread cap. 1 (the default) means fully serial
// execution; results are deterministic either way because every loop
// body writes only its own slot.
void set_max_threads(int n);
int max_threads();

// Runs fn(i) for i in [0, n). Splits into contiguous chunks across up
// to max_threads() workers when allowed; otherwise runs serially. The
// first exception thrown by any worker is rethrown on the caller.
void parallel_for(long n, const std::function<void(long)>& fn,
                  bool allow_threads = true);

}  // namespace doaopt
