#ifndef SEPLOSS_LOSS_OUTPUT_HPP
#define SEPLOSS_LOSS_OUTPUT_HPP

#include <optional>
#include <string>

#include "seploss/common.hpp"

namespace seploss {

// Scalar loss plus gradient with respect to the estimate. Losses never emit
// +/-inf: degenerate inputs (identical signals, orthogonal projections,
// silent targets) produce the eps-capped value with `degenerate` set.
struct LossOutput {
    double value = 0.0;
    std::optional<Tensor> gradient;
    bool degenerate = false;
    std::string note;  // what tripped the eps cap, when degenerate

    LossOutput() = default;
    LossOutput(double v, Tensor g) : value(v), gradient(std::move(g)) {}
};

}  // namespace seploss

#endif
