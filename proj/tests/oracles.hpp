// Test-only oracles, independent of the library implementations they check.
#ifndef GASJITTER_TESTS_ORACLES_HPP
#define GASJITTER_TESTS_ORACLES_HPP

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace oracles {

// Fine-grid RK4 integration of the quasi-static momentum balance
//   dp/dx = -(beta / 2 d) * flux * |flux| / p
// from p_in over [0, x_end]. Independent of the closed-form solver.
inline double integrate_pressure(double p_in, double beta, double diameter, double flux,
                                 double x_end, int steps = 200000) {
  double p = p_in;
  double h = x_end / steps;
  auto f = [&](double pv) { return -(beta / (2.0 * diameter)) * flux * std::abs(flux) / pv; };
  for (int i = 0; i < steps; ++i) {
    if (p <= 0) throw std::runtime_error("oracle: pressure collapsed");
    double k1 = f(p);
    double k2 = f(p + 0.5 * h * k1);
    double k3 = f(p + 0.5 * h * k2);
    double k4 = f(p + h * k3);
    p += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  if (p <= 0) throw std::runtime_error("oracle: pressure collapsed");
  return p;
}

// Composite Simpson quadrature.
inline double simpson(const std::function<double(double)>& f, double a, double b,
                      int intervals = 2000) {
  if (intervals % 2) ++intervals;
  double h = (b - a) / intervals;
  double s = f(a) + f(b);
  for (int i = 1; i < intervals; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

struct SampleStats {
  double mean = 0.0;
  double variance = 0.0;
};

inline SampleStats stats(const std::vector<double>& xs) {
  SampleStats s;
  for (double x : xs) s.mean += x;
  s.mean /= xs.size();
  for (double x : xs) s.variance += (x - s.mean) * (x - s.mean);
  s.variance /= (xs.size() - 1);
  return s;
}

// Lag-k sample autocorrelation.
inline double autocorrelation(const std::vector<double>& xs, size_t lag) {
  SampleStats s = stats(xs);
  double num = 0.0;
  for (size_t i = 0; i + lag < xs.size(); ++i)
    num += (xs[i] - s.mean) * (xs[i + lag] - s.mean);
  return num / ((xs.size() - lag) * s.variance);
}

}  // namespace oracles

#endif
