#pragma once

#include <span>
#include <vector>

namespace hwnas {

// Median of a non-empty sample; even sizes average the two middle values.
double median(std::span<const double> values);
double mean(std::span<const double> values);
// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double stddev(std::span<const double> values);
// Average ranks (1-based), ties share the mean of their positions.
std::vector<double> ranks(std::span<const double> values);
// Pearson correlation of the average ranks.
double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace hwnas
