#pragma once

#include <cstddef>
#include <functional>

namespace rfharvest {

/// Number of worker threads to use when the caller passes 0.
unsigned default_threads() noexcept;

/// Runs body(i) for i in [0, n) on up to `threads` workers using a static
/// block partition. Bodies must write only to slot i of pre-sized outputs.
/// The first exception thrown by any body is rethrown on the caller.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace rfharvest
