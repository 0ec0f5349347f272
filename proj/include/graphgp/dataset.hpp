#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "graphgp/errors.hpp"
#include "graphgp/matrix.hpp"

namespace graphgp {

struct VertexBlock {
  Matrix inputs;   // N_m x D
  Vector outputs;  // N_m

  std::size_t size() const { return outputs.size(); }
};

// Per-vertex observation blocks. Empty blocks (N_m = 0) are allowed, which is
// how missing-vertex scenarios are expressed. Layout and scenario flags are
// derived from the blocks rather than stored.
class MultiDataset {
 public:
  explicit MultiDataset(std::vector<VertexBlock> blocks) : blocks_(std::move(blocks)) {
    input_dim_ = 0;
    for (const auto& b : blocks_) {
      if (b.inputs.rows() != b.outputs.size())
        throw DimensionMismatch("MultiDataset: inputs and outputs disagree in a block");
      if (b.size() == 0) continue;
      if (input_dim_ == 0)
        input_dim_ = b.inputs.cols();
      else if (b.inputs.cols() != input_dim_)
        throw DimensionMismatch("MultiDataset: input dimension varies across blocks");
    }
  }

  std::size_t num_vertices() const { return blocks_.size(); }
  std::size_t input_dim() const { return input_dim_; }
  const VertexBlock& block(std::size_t m) const { return blocks_[m]; }
  const std::vector<VertexBlock>& blocks() const { return blocks_; }

  std::size_t total_points() const {
    std::size_t n = 0;
    for (const auto& b : blocks_) n += b.size();
    return n;
  }

  // All non-empty blocks share bitwise-identical inputs.
  bool isotopic() const {
    const Matrix* ref = nullptr;
    for (const auto& b : blocks_) {
      if (b.size() == 0) continue;
      if (!ref) {
        ref = &b.inputs;
        continue;
      }
      if (b.inputs.rows() != ref->rows() || b.inputs.data() != ref->data()) return false;
    }
    return true;
  }

  bool symmetric_counts() const {
    std::size_t n = blocks_.empty() ? 0 : blocks_.front().size();
    for (const auto& b : blocks_)
      if (b.size() != n) return false;
    return true;
  }

  // Outputs stacked vertex-major.
  Vector stacked_outputs() const {
    Vector y;
    y.reserve(total_points());
    for (const auto& b : blocks_) y.insert(y.end(), b.outputs.begin(), b.outputs.end());
    return y;
  }

  MultiDataset with_outputs_shifted(double delta) const {
    std::vector<VertexBlock> blocks = blocks_;
    for (auto& b : blocks)
      for (double& v : b.outputs) v += delta;
    return MultiDataset(std::move(blocks));
  }

 private:
  std::vector<VertexBlock> blocks_;
  std::size_t input_dim_ = 0;
};

// Per-vertex observation noise variances. Zero is accepted so noise-free
// interpolation works; training keeps variances strictly positive through the
// log transform.
struct NoiseModel {
  Vector variances;
  bool shared = true;

  static NoiseModel shared_variance(std::size_t num_vertices, double variance) {
    NoiseModel n;
    n.variances.assign(num_vertices, variance);
    n.shared = true;
    n.validate();
    return n;
  }

  static NoiseModel per_vertex(Vector variances) {
    NoiseModel n;
    n.variances = std::move(variances);
    n.shared = false;
    n.validate();
    return n;
  }

  void validate() const {
    for (double v : variances)
      if (v < 0.0) throw InputError("NoiseModel: variances must be non-negative");
    if (shared)
      for (double v : variances)
        if (v != variances.front())
          throw InputError("NoiseModel: shared flag set but variances differ");
  }
};

// Query blocks over an ordered vertex subset; the subset is all vertices for
// standard prediction.
struct TestQuery {
  std::vector<int> vertices;   // distinct, ordered
  std::vector<Matrix> inputs;  // parallel to vertices, T_m x D

  TestQuery() = default;
  TestQuery(std::vector<int> v, std::vector<Matrix> in)
      : vertices(std::move(v)), inputs(std::move(in)) {
    if (vertices.size() != inputs.size())
      throw DimensionMismatch("TestQuery: vertices and input blocks disagree");
  }

  static TestQuery all_vertices(std::vector<Matrix> in) {
    std::vector<int> v(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) v[i] = static_cast<int>(i);
    return TestQuery(std::move(v), std::move(in));
  }

  std::size_t total_points() const {
    std::size_t t = 0;
    for (const auto& m : inputs) t += m.rows();
    return t;
  }

  std::size_t input_dim() const {
    for (const auto& m : inputs)
      if (m.rows() > 0) return m.cols();
    return 0;
  }

  void validate_against(std::size_t num_vertices, std::size_t input_dim) const {
    if (total_points() == 0) throw InputError("TestQuery: no test points");
    std::vector<bool> seen(num_vertices, false);
    for (int v : vertices) {
      if (v < 0 || static_cast<std::size_t>(v) >= num_vertices)
        throw InputError("TestQuery: vertex " + std::to_string(v) + " out of range");
      if (seen[v]) throw InputError("TestQuery: duplicate vertex " + std::to_string(v));
      seen[v] = true;
    }
    if (input_dim > 0)
      for (const auto& m : inputs)
        if (m.rows() > 0 && m.cols() != input_dim)
          throw DimensionMismatch("TestQuery: input dimension disagrees with training data");
  }
};

}  // namespace graphgp
