#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace pmap {

// Worker count for internal loops. 0 means hardware concurrency. Results are
// invariant to this setting: work is split into chunks whose layout depends
// only on the item count, and callers combine chunk results in index order.
void set_worker_count(int workers);
int worker_count();
int worker_count_setting();  // raw value as set, 0 = auto

namespace detail {

void run_chunked(std::size_t count, std::size_t chunk_size,
                 const std::function<void(std::size_t chunk_index,
                                          std::size_t begin,
                                          std::size_t end)>& body);

}  // namespace detail

// Calls body(chunk_index, begin, end) for consecutive ranges covering
// [0, count). Chunks may run on different threads; chunk boundaries are a
// function of (count, chunk_size) only.
template <class Body>
void for_each_chunk(std::size_t count, std::size_t chunk_size, Body&& body) {
  detail::run_chunked(count, chunk_size,
                      std::function<void(std::size_t, std::size_t, std::size_t)>(
                          std::forward<Body>(body)));
}

inline std::size_t chunk_count(std::size_t count, std::size_t chunk_size) {
  return count == 0 ? 0 : (count + chunk_size - 1) / chunk_size;
}

}  // namespace pmap
