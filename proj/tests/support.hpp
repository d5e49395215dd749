#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include <Eigen/Core>

namespace spamp::testing {

// Input generator for property checks. Uses the standard library engine so the
// draws are independent of the generator under test.
class Draws {
 public:
  explicit Draws(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }
  bool coin(double p) { return uniform(0.0, 1.0) < p; }

  // Magnitudes spread log-uniformly over 1e-6..1e6 with random signs and
  // occasional exact zeros.
  double component() {
    if (coin(0.05)) return 0.0;
    const double magnitude = std::pow(10.0, uniform(-6.0, 6.0));
    return coin(0.5) ? -magnitude : magnitude;
  }

  Eigen::VectorXd gradient(int max_dim = 32) {
    Eigen::VectorXd g(integer(1, max_dim));
    for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = component();
    return g;
  }

  double positive(double lo_exp = -3.0, double hi_exp = 3.0) {
    return std::pow(10.0, uniform(lo_exp, hi_exp));
  }

 private:
  std::mt19937_64 engine_;
};

// Equality at 8 ulp or 1e-12 relative, whichever is looser.
inline bool close(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  const double ulps = 8.0 * std::numeric_limits<double>::epsilon() * scale;
  return std::abs(a - b) <= std::max(ulps, 1e-12 * scale);
}

inline bool relative_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

// Composite Simpson rule on [a, b] with an even number of panels.
template <typename F>
double simpson(F f, double a, double b, int panels) {
  if (panels % 2 != 0) ++panels;
  const double h = (b - a) / panels;
  double sum = f(a) + f(b);
  for (int i = 1; i < panels; ++i) sum += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

// E[min(X, tau)^2] for X ~ exponential(1), by quadrature of the truncated
// second moment plus the tail mass term.
inline double exponential_clipped_second_moment(double tau) {
  const double body = simpson([](double x) { return x * x * std::exp(-x); }, 0.0, tau, 20000);
  return body + tau * tau * std::exp(-tau);
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("spamp_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Every regular file under root, keyed by relative path.
inline std::map<std::string, std::string> snapshot(const std::filesystem::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    if (entry.is_regular_file()) {
      files[std::filesystem::relative(entry.path(), root).string()] = read_file(entry.path());
    }
  }
  return files;
}

}  // namespace spamp::testing
