#pragma once

#include <cstdint>
#include <functional>

// Deterministic task parallelism: parallel_for runs body(i) for i in [0,count)
// on up to max_threads() workers. Bodies must write only to their own output
// slot; with that discipline results are identical for every thread count.

namespace ddc {

// 0 = use hardware concurrency.
void set_max_threads(int n);
int max_threads();

void parallel_for(std::int64_t count, const std::function<void(std::int64_t)>& body);

}  // namespace ddc
