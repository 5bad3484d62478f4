#pragma once

#include <string>

#include "mtgpk/types.hpp"

namespace mtgpk {

/// Reads a dataset CSV: header `x0,...,x{d-1},task,y`, one observation per
/// row, UTF-8, comma separated, '.' decimal point. The task count is inferred
/// as max task index + 1; noise variances are zero-initialized (they come
/// from the experiment config, not the data file). Errors report row and
/// column numbers.
Dataset load_dataset(const std::string& path);

/// Writes the same format with 17 significant digits, giving exact text
/// round-trips of every double.
void save_dataset(const Dataset& ds, const std::string& path);

}  // namespace mtgpk
