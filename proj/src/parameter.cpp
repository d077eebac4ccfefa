#include "varmaformer/parameter.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace varmaformer {

const NamedArray* try_find_array(const ParameterSnapshot& snapshot, const std::string& name) {
  auto it = std::find_if(snapshot.begin(), snapshot.end(),
                         [&](const NamedArray& a) { return a.name == name; });
  return it == snapshot.end() ? nullptr : &*it;
}

const NamedArray& find_array(const ParameterSnapshot& snapshot, const std::string& name) {
  if (const NamedArray* a = try_find_array(snapshot, name)) return *a;
  throw std::out_of_range("parameter '" + name + "' missing from snapshot");
}

Tensor ParameterRegistry::add(std::string name, Tensor tensor, bool trainable) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
  tensor.set_requires_grad(trainable);
  params_.push_back({std::move(name), tensor, trainable});
  return tensor;
}

bool ParameterRegistry::contains(const std::string& name) const {
  return std::any_of(params_.begin(), params_.end(), [&](const Parameter& p) { return p.name == name; });
}

Tensor ParameterRegistry::at(const std::string& name) const {
  for (const Parameter& p : params_) {
    if (p.name == name) return p.tensor;
  }
  throw std::out_of_range("unknown parameter '" + name + "'");
}

std::size_t ParameterRegistry::scalar_count() const {
  std::size_t total = 0;
  for (const Parameter& p : params_) total += p.tensor.size();
  return total;
}

void ParameterRegistry::zero_grad() {
  for (Parameter& p : params_) {
    p.tensor.mutable_grad();
    p.tensor.zero_grad();
  }
}

ParameterSnapshot ParameterRegistry::snapshot() const {
  ParameterSnapshot out;
  out.reserve(params_.size());
  for (const Parameter& p : params_) {
    out.push_back({p.name, p.tensor.shape(), {p.tensor.data().begin(), p.tensor.data().end()}});
  }
  return out;
}

void ParameterRegistry::load(const ParameterSnapshot& snapshot) {
  if (snapshot.size() != params_.size()) {
    throw std::invalid_argument("snapshot has " + std::to_string(snapshot.size()) +
                                " parameters, model has " + std::to_string(params_.size()));
  }
  for (Parameter& p : params_) {
    const NamedArray& a = find_array(snapshot, p.name);
    if (a.shape != p.tensor.shape()) {
      throw ShapeError("parameter '" + p.name + "': snapshot shape " + to_string(a.shape) +
                       " vs model shape " + to_string(p.tensor.shape()));
    }
    std::copy(a.values.begin(), a.values.end(), p.tensor.mutable_data().begin());
  }
}

std::uint64_t ParameterRegistry::fingerprint() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* bytes, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (const Parameter& p : params_) {
    mix(p.name.data(), p.name.size());
    mix(p.tensor.data().data(), p.tensor.size() * sizeof(double));
  }
  return h;
}

Tensor make_uniform(ParameterRegistry& registry, const std::string& name, Shape shape, double bound,
                    Rng& rng) {
  std::vector<double> values(element_count(shape));
  for (double& v : values) v = rng.uniform(-bound, bound);
  return registry.add(name, Tensor::from(std::move(shape), std::move(values)));
}

Linear make_linear(ParameterRegistry& registry, const std::string& name, std::size_t in,
                   std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Linear layer;
  layer.weight = make_uniform(registry, name + ".weight", {in, out}, bound, rng);
  layer.bias = make_uniform(registry, name + ".bias", {out}, bound, rng);
  return layer;
}

}  // namespace varmaformer
