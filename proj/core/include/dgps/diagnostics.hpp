#ifndef DGPS_DIAGNOSTICS_HPP
#define DGPS_DIAGNOSTICS_HPP

#include <functional>
#include <string>
#include <vector>

namespace dgps {

// One point of a training/diagnostic curve, suitable for delimited-text
// emission and external plotting.
struct CurvePoint {
  std::string method;
  long iteration = 0;
  double wall_clock_s = 0.0;
  std::string metric;
  double value = 0.0;
};

using DiagnosticsSink = std::function<void(const CurvePoint&)>;

// Convenience sink that appends to a vector.
inline DiagnosticsSink collect_into(std::vector<CurvePoint>& out) {
  return [&out](const CurvePoint& p) { out.push_back(p); };
}

}  // namespace dgps

#endif  // DGPS_DIAGNOSTICS_HPP
