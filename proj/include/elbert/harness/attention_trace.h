#pragma once

#include <ostream>
#include <span>
#include <string>

#include "elbert/model/model.h"
#include "elbert/numerics/matrix.h"

namespace elbert {

// depth x tokens matrix over the real (unpadded) positions. Row i is the
// running mean over layers 1..i of the head-averaged attention row from
// [CLS] to every position, so each row is itself a distribution.
Matrix export_attention_trace(const Parameters& params, const TokenSequence& x);

// Header row of token strings, then one row per layer.
void write_attention_csv(std::ostream& out, std::span<const std::string> tokens,
                         const Matrix& trace);

}  // namespace elbert
