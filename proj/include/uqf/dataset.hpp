#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "uqf/tensor.hpp"

namespace uqf {

/// n samples stacked along the first axis of `images`; pixels in [0,1].
struct LabeledDataset {
  Tensor images;  // [n, ...sample shape]
  std::vector<std::size_t> labels;
  std::string provenance;

  std::size_t size() const noexcept { return labels.size(); }
  Shape sample_shape() const;
  std::size_t sample_size() const;
  Tensor sample(std::size_t i) const;

  /// Throws unless image count matches labels and every label < class_count.
  void validate(std::size_t class_count) const;

  /// Subset in the given order.
  LabeledDataset select(const std::vector<std::size_t>& indices) const;
  static LabeledDataset from_samples(const std::vector<Tensor>& samples, std::vector<std::size_t> labels,
                                     std::string provenance);
};

}  // namespace uqf
