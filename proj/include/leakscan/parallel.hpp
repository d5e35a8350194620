#pragma once

#include <cstddef>
#include <functional>

namespace leakscan {

// 0 means one worker per hardware thread.
std::size_t resolve_threads(std::size_t requested) noexcept;

// Calls fn(task) for every task in [0, n_tasks) using up to `threads`
// workers. The first exception thrown by any task is rethrown after all
// workers have stopped.
void parallel_for(std::size_t n_tasks, std::size_t threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace leakscan
