#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string_view>

namespace dprgd {

/// Named substreams. Every consumer of randomness draws from its own stream so
/// that, e.g., choosing an output iterate never perturbs the trajectory.
enum class StreamId : std::uint32_t {
  noise = 1,
  subsample = 2,
  init = 3,
  output_select = 4,
  data = 5,
};

inline std::string_view to_string(StreamId id) {
  switch (id) {
  case StreamId::noise: return "noise";
  case StreamId::subsample: return "subsample";
  case StreamId::init: return "init";
  case StreamId::output_select: return "output-select";
  case StreamId::data: return "data";
  }
  return "unknown";
}

/// SplitMix64 finalizer; used to derive child seeds from a master seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t label) {
  return mix_seed(parent ^ mix_seed(label));
}

/// Deterministic random stream keyed by (seed, stream id). Identical keys
/// replay identical sequences.
class RngStream {
public:
  RngStream(std::uint64_t seed, StreamId id) : seed_(seed), id_(id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(id), 0x64707267u};
    engine_.seed(seq);
  }

  std::uint64_t seed() const { return seed_; }
  StreamId id() const { return id_; }
  std::uint64_t draws() const { return draws_; }

  double normal() {
    ++draws_;
    return normal_(engine_);
  }

  double uniform() {
    ++draws_;
    return uniform_(engine_);
  }

  /// Uniform integer in [0, n).
  std::size_t uniform_index(std::size_t n) {
    ++draws_;
    std::uniform_int_distribution<std::size_t> dist(0, n - 1);
    return dist(engine_);
  }

  Eigen::VectorXd normal_vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i)
      v(i) = normal();
    return v;
  }

  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i)
        m(i, j) = normal();
    return m;
  }

  std::mt19937_64 &engine() { return engine_; }

private:
  std::uint64_t seed_;
  StreamId id_;
  std::uint64_t draws_ = 0;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

} // namespace dprgd
