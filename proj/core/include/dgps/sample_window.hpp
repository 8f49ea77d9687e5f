#ifndef DGPS_SAMPLE_WINDOW_HPP
#define DGPS_SAMPLE_WINDOW_HPP

#include <deque>
#include <stdexcept>

#include <Eigen/Dense>

namespace dgps {

// Fixed-capacity FIFO of flattened posterior samples. Pushing into a full
// window evicts exactly the oldest entry.
class SampleWindow {
 public:
  explicit SampleWindow(int capacity) : capacity_(capacity) {
    if (capacity <= 0) throw std::invalid_argument("SampleWindow: capacity must be positive");
  }

  void push(Eigen::VectorXd sample) {
    if (static_cast<int>(entries_.size()) == capacity_) entries_.pop_front();
    entries_.push_back(std::move(sample));
  }

  int size() const { return static_cast<int>(entries_.size()); }
  int capacity() const { return capacity_; }
  bool empty() const { return entries_.empty(); }
  bool full() const { return size() == capacity_; }

  // i = 0 is the oldest entry.
  const Eigen::VectorXd& at(int i) const { return entries_.at(i); }

  const std::deque<Eigen::VectorXd>& entries() const { return entries_; }

 private:
  int capacity_;
  std::deque<Eigen::VectorXd> entries_;
};

}  // namespace dgps

#endif  // DGPS_SAMPLE_WINDOW_HPP
