#include "loopflow/util.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "loopflow/errors.hpp"

namespace loopflow {

double Rng::uniform() {
  return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // Box-Muller; reject u1 == 0 so the log stays finite.
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * M_PI * u2;
  spare_ = r * std::sin(t);
  have_spare_ = true;
  return r * std::cos(t);
}

Complex Rng::cgaussian() {
  const double re = gaussian();
  const double im = gaussian();
  return Complex(re, im) / std::sqrt(2.0);
}

int worker_count() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n <= 0) n = 1;
  if (const char* env = std::getenv("LOOPFLOW_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0 && cap < n) n = cap;
  }
  return n;
}

void parallel_for(int n, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  const int workers = std::min(worker_count(), n);
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto body = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_fraction(const std::string& text, long long* num, long long* den) {
  const auto slash = text.find('/');
  if (slash == std::string::npos) {
    if (num) *num = 0;
    if (den) *den = 0;  // marks "not an exact fraction"
    try {
      std::size_t used = 0;
      const double v = std::stod(text, &used);
      if (used != text.size()) throw UsageError("trailing characters in number: " + text);
      return v;
    } catch (const std::invalid_argument&) {
      throw UsageError("cannot parse number: " + text);
    }
  }
  long long n = 0, d = 0;
  auto r1 = std::from_chars(text.data(), text.data() + slash, n);
  auto r2 = std::from_chars(text.data() + slash + 1, text.data() + text.size(), d);
  if (r1.ec != std::errc() || r2.ec != std::errc() || r1.ptr != text.data() + slash ||
      r2.ptr != text.data() + text.size() || d == 0) {
    throw UsageError("cannot parse fraction: " + text);
  }
  if (num) *num = n;
  if (den) *den = d;
  return static_cast<double>(n) / static_cast<double>(d);
}

}  // namespace loopflow
