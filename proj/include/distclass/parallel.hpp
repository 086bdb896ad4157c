#pragma once

#include <cstddef>
#include <functional>

namespace distclass {

/// Number of workers to use when the caller asks for 0 ("all cores").
std::size_t default_workers();

/// Runs body(i) for i in [0, n) on up to `workers` threads. Work items are
/// handed out dynamically, so body must only write state owned by index i.
/// The first exception thrown by any body is rethrown after all workers
/// stop.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& body);

}  // namespace distclass
