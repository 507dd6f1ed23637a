#pragma once

// FIFO ring buffer of joint transitions with uniform sampling without
// replacement inside one draw. Storage grows lazily up to the capacity.

#include "mamt/env/posg.hpp"
#include "mamt/mamd/batch.hpp"

#include <algorithm>
#include <mutex>
#include <random>
#include <unordered_set>

namespace mamt::harness {

class ReplayBuffer {
 public:
  ReplayBuffer(long capacity, std::vector<int> obs_dims)
      : capacity_(capacity), obs_dims_(std::move(obs_dims)), n_(static_cast<int>(obs_dims_.size())) {
    if (capacity < 1) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
    for (int d : obs_dims_) row_width_ += 2 * d;
    row_width_ += 3 * n_;  // action, reward, done per agent
  }

  long capacity() const { return capacity_; }
  long size() const { return size_; }
  int n_agents() const { return n_; }

  void push(const env::TransitionRecord& t) {
    if (!t.consistent(n_)) throw std::invalid_argument("ReplayBuffer: inconsistent transition");
    std::lock_guard<std::mutex> lock(mu_);
    std::vector<double> row;
    row.reserve(static_cast<std::size_t>(row_width_));
    for (int i = 0; i < n_; ++i) {
      if (static_cast<int>(t.obs[i].size()) != obs_dims_[i] || static_cast<int>(t.next_obs[i].size()) != obs_dims_[i])
        throw std::invalid_argument("ReplayBuffer: observation width mismatch");
      row.insert(row.end(), t.obs[i].begin(), t.obs[i].end());
      row.insert(row.end(), t.next_obs[i].begin(), t.next_obs[i].end());
      row.push_back(static_cast<double>(t.actions[i]));
      row.push_back(t.rewards[i]);
      row.push_back(t.dones[i] ? 1.0 : 0.0);
    }
    if (size_ < capacity_) {
      rows_.push_back(std::move(row));
      ++size_;
    } else {
      rows_[static_cast<std::size_t>(head_)] = std::move(row);
    }
    head_ = (head_ + 1) % capacity_;
  }

  /// Record at logical position k, 0 = oldest retained.
  env::TransitionRecord at(long k) const {
    if (k < 0 || k >= size_) throw std::out_of_range("ReplayBuffer::at");
    const long phys = size_ < capacity_ ? k : (head_ + k) % capacity_;
    const auto& row = rows_[static_cast<std::size_t>(phys)];
    env::TransitionRecord t;
    std::size_t off = 0;
    for (int i = 0; i < n_; ++i) {
      const auto d = static_cast<std::size_t>(obs_dims_[i]);
      t.obs.emplace_back(row.begin() + static_cast<long>(off), row.begin() + static_cast<long>(off + d));
      off += d;
      t.next_obs.emplace_back(row.begin() + static_cast<long>(off), row.begin() + static_cast<long>(off + d));
      off += d;
      t.actions.push_back(static_cast<int>(row[off++]));
      t.rewards.push_back(row[off++]);
      t.dones.push_back(row[off++] > 0.5);
    }
    return t;
  }

  /// Distinct physical indices, shuffled.
  std::vector<long> sample_indices(int batch, std::mt19937_64& rng) const {
    if (batch < 1 || batch > size_) throw std::invalid_argument("ReplayBuffer: batch larger than stored data");
    // Floyd's algorithm: exactly `batch` distinct draws, no full index scan.
    std::vector<long> idx;
    idx.reserve(static_cast<std::size_t>(batch));
    std::unordered_set<long> taken;
    for (long j = size_ - batch; j < size_; ++j) {
      const long t = std::uniform_int_distribution<long>(0, j)(rng);
      const long pick = taken.count(t) ? j : t;
      taken.insert(pick);
      idx.push_back(pick);
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
  }

  mamd::Batch sample(int batch, std::mt19937_64& rng) const {
    return gather(sample_indices(batch, rng));
  }

  mamd::Batch gather(const std::vector<long>& idx) const {
    mamd::Batch b;
    const auto rows = static_cast<Eigen::Index>(idx.size());
    for (int i = 0; i < n_; ++i) {
      b.obs.emplace_back(rows, obs_dims_[i]);
      b.next_obs.emplace_back(rows, obs_dims_[i]);
      b.actions.emplace_back(idx.size());
      b.rewards.emplace_back(rows, 1);
      b.dones.emplace_back(rows, 1);
    }
    for (Eigen::Index r = 0; r < rows; ++r) {
      const auto& row = rows_[static_cast<std::size_t>(idx[static_cast<std::size_t>(r)])];
      std::size_t off = 0;
      for (int i = 0; i < n_; ++i) {
        const int d = obs_dims_[i];
        for (int c = 0; c < d; ++c) b.obs[i](r, c) = row[off + c];
        off += static_cast<std::size_t>(d);
        for (int c = 0; c < d; ++c) b.next_obs[i](r, c) = row[off + c];
        off += static_cast<std::size_t>(d);
        b.actions[i][static_cast<std::size_t>(r)] = static_cast<int>(row[off++]);
        b.rewards[i](r, 0) = row[off++];
        b.dones[i](r, 0) = row[off++];
      }
    }
    return b;
  }

 private:
  long capacity_;
  std::vector<int> obs_dims_;
  int n_;
  long row_width_ = 0;
  std::vector<std::vector<double>> rows_;
  long size_ = 0;
  long head_ = 0;
  mutable std::mutex mu_;
};

}  // namespace mamt::harness
