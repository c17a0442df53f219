// SPDX-License-Identifier: Apache-2.0

#ifndef BLOCHKIT_PARALLEL_HPP
#define BLOCHKIT_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace blochkit
{

// Runs body(i) for i in [0, n) on up to num_threads workers. Work items are
// claimed dynamically but results must be written to slot i by the caller, so
// the output order never depends on the schedule. The exception thrown by the
// lowest failing index is rethrown.
template <typename Body>
void ParallelFor(int n, int num_threads, Body &&body)
{
  if (n <= 0)
  {
    return;
  }
  const int workers = std::clamp(num_threads, 1, n);
  if (workers == 1)
  {
    for (int i = 0; i < n; i++)
    {
      body(i);
    }
    return;
  }
  std::atomic<int> next{0};
  std::mutex err_mutex;
  int err_index = n;
  std::exception_ptr err;
  auto run = [&]()
  {
    for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1))
    {
      try
      {
        body(i);
      }
      catch (...)
      {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (i < err_index)
        {
          err_index = i;
          err = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int w = 1; w < workers; w++)
  {
    pool.emplace_back(run);
  }
  run();
  for (auto &t : pool)
  {
    t.join();
  }
  if (err)
  {
    std::rethrow_exception(err);
  }
}

}  // namespace blochkit

#endif  // BLOCHKIT_PARALLEL_HPP
