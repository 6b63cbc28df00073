#include "uqf/dataset.hpp"

#include <algorithm>

#include "uqf/error.hpp"

namespace uqf {

Shape LabeledDataset::sample_shape() const {
  if (images.rank() < 2) throw ShapeError("dataset images need a leading sample axis");
  return Shape(images.shape().begin() + 1, images.shape().end());
}

std::size_t LabeledDataset::sample_size() const { return shape_size(sample_shape()); }

Tensor LabeledDataset::sample(std::size_t i) const {
  if (i >= size()) throw ShapeError("sample index " + std::to_string(i) + " out of range");
  const std::size_t n = sample_size();
  const float* begin = images.data() + i * n;
  return Tensor(sample_shape(), std::vector<float>(begin, begin + n));
}

void LabeledDataset::validate(std::size_t class_count) const {
  if (images.rank() < 2 || images.shape()[0] != labels.size()) {
    throw ShapeError("dataset has " + std::to_string(labels.size()) + " labels but images of shape " +
                     shape_to_string(images.shape()));
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= class_count) {
      throw ConfigError("label " + std::to_string(labels[i]) + " at index " + std::to_string(i) +
                        " is not below class count " + std::to_string(class_count));
    }
  }
}

LabeledDataset LabeledDataset::select(const std::vector<std::size_t>& indices) const {
  if (indices.empty()) throw ShapeError("cannot select an empty subset");
  const std::size_t n = sample_size();
  Shape shape = images.shape();
  shape[0] = indices.size();
  std::vector<float> data;
  data.reserve(indices.size() * n);
  std::vector<std::size_t> out_labels;
  for (auto i : indices) {
    if (i >= size()) throw ShapeError("subset index " + std::to_string(i) + " out of range");
    data.insert(data.end(), images.data() + i * n, images.data() + (i + 1) * n);
    out_labels.push_back(labels[i]);
  }
  return {Tensor(std::move(shape), std::move(data)), std::move(out_labels), provenance};
}

LabeledDataset LabeledDataset::from_samples(const std::vector<Tensor>& samples, std::vector<std::size_t> labels,
                                            std::string provenance) {
  if (samples.empty()) throw ShapeError("cannot build a dataset from zero samples");
  if (samples.size() != labels.size()) throw ShapeError("sample and label counts differ");
  Shape shape{samples.size()};
  const Shape& s0 = samples.front().shape();
  shape.insert(shape.end(), s0.begin(), s0.end());
  std::vector<float> data;
  data.reserve(shape_size(shape));
  for (const auto& s : samples) {
    if (s.shape() != s0) throw ShapeError("samples have differing shapes");
    data.insert(data.end(), s.values().begin(), s.values().end());
  }
  return {Tensor(std::move(shape), std::move(data)), std::move(labels), std::move(provenance)};
}

}  // namespace uqf
