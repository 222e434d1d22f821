// Copyright 2026 crsam-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "crsam/batch.hpp"

#include <algorithm>
#include <string>

#include "crsam/errors.hpp"

namespace crsam {

void validate_batch(const Batch& batch) {
  if (batch.labels.empty()) throw ContractError("batch must contain at least one example");
  if (batch.inputs.rows != batch.labels.size())
    throw ContractError("batch has " + std::to_string(batch.inputs.rows) + " input rows but " +
                        std::to_string(batch.labels.size()) + " labels");
  if (batch.inputs.data.size() != batch.inputs.rows * batch.inputs.cols)
    throw ContractError("batch input storage does not match its shape");
}

Batch gather(const Batch& source, std::span<const std::size_t> indices) {
  Batch out;
  out.inputs = DenseMatrix(indices.size(), source.inputs.cols);
  out.labels.resize(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t r = indices[k];
    if (r >= source.size()) throw ContractError("gather: row index out of range");
    std::ranges::copy(source.inputs.row(r), out.inputs.row(k).begin());
    out.labels[k] = source.labels[r];
  }
  return out;
}

}  // namespace crsam
