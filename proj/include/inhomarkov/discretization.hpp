#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace inhomarkov {

/// Interior quantile edges. Bin i covers [edges[i-1], edges[i]); the outer
/// bins are open towards -inf and +inf.
struct BinEdges {
  std::vector<double> interior;
  std::size_t requested = 0;  // bin count asked for before duplicate edges collapsed

  std::size_t bins() const { return interior.size() + 1; }
  bool collapsed() const { return bins() < requested; }
};

enum class LabelKind { forward_return, state_to_state };

struct StateSeries {
  std::vector<int> states;
  std::size_t n = 0;

  std::size_t size() const { return states.size(); }
};

/// Discrete targets aligned to the state timeline: labels[t] is the target
/// for the state at t. Labels exist for t in [0, labels.size()).
struct LabelSeries {
  std::vector<int> labels;
  std::size_t m = 0;
  std::size_t horizon = 1;
  LabelKind kind = LabelKind::state_to_state;
  BinEdges edges;  // forward-return bins; empty for state-to-state labels

  std::size_t size() const { return labels.size(); }
};

/// Linear interpolation between order statistics (position q*(N-1)).
double quantile_sorted(std::span<const double> sorted, double q);

BinEdges fit_quantile_bins(std::span<const double> train_values, std::size_t n);

std::size_t bin_of(double value, const BinEdges& edges);

StateSeries discretize(std::span<const double> values, const BinEdges& edges);

/// Forward returns R_t = (P[t+1+h] - P[t+1]) / P[t+1], binned into m quantile
/// bins fit on labels with t < train_end. Prices are indexed on the label
/// timeline; the last h+1 entries get no label.
LabelSeries forward_return_labels(std::span<const double> prices, std::size_t horizon, std::size_t m,
                                  std::size_t train_end);

/// labels[t] = states[t+h].
LabelSeries state_labels(const StateSeries& states, std::size_t horizon);

std::string to_json(const BinEdges& edges);
BinEdges bin_edges_from_json(const std::string& text);

}  // namespace inhomarkov
