#ifndef DGPS_ERRORS_HPP
#define DGPS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace dgps {

// Factorizations or downstream numerics failed beyond recoverable jitter.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what, double last_jitter = 0.0)
      : std::runtime_error(what), last_jitter_(last_jitter) {}

  double last_jitter() const { return last_jitter_; }

 private:
  double last_jitter_;
};

// An operation was called on an object whose state does not permit it
// (e.g. predicting from an empty sample window).
class InvalidStateError : public std::runtime_error {
 public:
  explicit InvalidStateError(const std::string& what) : std::runtime_error(what) {}
};

// Statistic requested on data that cannot support it (e.g. zero variance).
class DegenerateInputError : public std::invalid_argument {
 public:
  explicit DegenerateInputError(const std::string& what) : std::invalid_argument(what) {}
};

// Malformed input file; carries 1-based row/column of the offending cell
// when known (0 = not applicable).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, long row = 0, long column = 0)
      : std::runtime_error(what), row_(row), column_(column) {}

  long row() const { return row_; }
  long column() const { return column_; }

 private:
  long row_;
  long column_;
};

// Persisted-state file failed to load; names the offending field.
class LoadError : public std::runtime_error {
 public:
  explicit LoadError(const std::string& what, const std::string& field = "")
      : std::runtime_error(what), field_(field) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace dgps

#endif  // DGPS_ERRORS_HPP
