#pragma once

#include "varmaformer/rng.hpp"
#include "varmaformer/tensor.hpp"

#include <string>
#include <vector>

namespace varmaformer {

struct Parameter {
  std::string name;  // dotted path, e.g. "vfe.phi.1"
  Tensor tensor;
  bool trainable = true;
};

// Plain copy of a parameter's values, detached from any graph.
struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<double> values;
};
using ParameterSnapshot = std::vector<NamedArray>;

const NamedArray& find_array(const ParameterSnapshot& snapshot, const std::string& name);
const NamedArray* try_find_array(const ParameterSnapshot& snapshot, const std::string& name);

// Owns every learnable tensor of a model, keyed by unique name, in registration order.
class ParameterRegistry {
 public:
  // Throws std::invalid_argument on a duplicate name.
  Tensor add(std::string name, Tensor tensor, bool trainable = true);

  bool contains(const std::string& name) const;
  Tensor at(const std::string& name) const;
  const std::vector<Parameter>& all() const { return params_; }
  std::vector<Parameter>& all() { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();
  ParameterSnapshot snapshot() const;
  // Overwrites values in place; names and shapes must match exactly.
  void load(const ParameterSnapshot& snapshot);
  // FNV-1a over names and raw value bytes.
  std::uint64_t fingerprint() const;

 private:
  std::vector<Parameter> params_;
};

// Affine map y = x W + b over the last axis.
struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  Tensor operator()(const Tensor& x) const { return add(matmul(x, weight), bias); }
  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }
};

// Registers "<name>.weight" and "<name>.bias", both U(-1/sqrt(in), 1/sqrt(in)).
Linear make_linear(ParameterRegistry& registry, const std::string& name, std::size_t in,
                   std::size_t out, Rng& rng);

Tensor make_uniform(ParameterRegistry& registry, const std::string& name, Shape shape, double bound,
                    Rng& rng);

}  // namespace varmaformer
