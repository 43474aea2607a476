#include "dpp/trajectory.hpp"

#include <ctime>

namespace dpp {

double thread_cpu_seconds() noexcept {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

void CpuStopwatch::start() noexcept {
  if (running_) return;
  started_at_ = thread_cpu_seconds();
  running_ = true;
}

void CpuStopwatch::stop() noexcept {
  if (!running_) return;
  accumulated_ += thread_cpu_seconds() - started_at_;
  running_ = false;
}

double CpuStopwatch::seconds() const noexcept {
  return running_ ? accumulated_ + (thread_cpu_seconds() - started_at_) : accumulated_;
}

}  // namespace dpp
