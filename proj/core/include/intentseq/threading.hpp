#pragma once

#include <cstddef>
#include <functional>

namespace intentseq {

/// Worker cap for data-parallel loops: INTENTSEQ_THREADS when set and
/// positive, otherwise the machine core count.
std::size_t worker_cap();

/// Runs fn(0..count-1) across up to worker_cap() threads. Each index must be
/// independent; the first exception thrown is rethrown on the caller.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace intentseq
