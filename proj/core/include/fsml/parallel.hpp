#pragma once

#include <cstddef>
#include <functional>

namespace fsml {

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Work items
/// must write only to their own output slots. If any call throws, the
/// exception from the lowest failing index is rethrown after all workers join.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace fsml
