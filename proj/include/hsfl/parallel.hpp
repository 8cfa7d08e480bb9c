#pragma once

#include <functional>

namespace hsfl {

// Static-partition parallel loop over [0, count). Each index must write only
// its own output slot; callers do any reduction sequentially afterwards so
// results do not depend on the worker count.
void parallel_for(int count, int threads, const std::function<void(int)>& body);

}  // namespace hsfl
