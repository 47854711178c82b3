#include "inhomarkov/discretization.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <json.hpp>

#include "inhomarkov/common.hpp"

namespace inhomarkov {

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw InputError("quantile of an empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

BinEdges fit_quantile_bins(std::span<const double> train_values, std::size_t n) {
  if (n < 2) throw InputError(fmt::format("bin count must be at least 2, got {}", n));
  if (train_values.size() < n)
    throw InputError(fmt::format("need at least {} training values for {} bins, got {}", n, n, train_values.size()));
  std::vector<double> sorted(train_values.begin(), train_values.end());
  for (std::size_t i = 0; i < sorted.size(); ++i)
    if (std::isnan(sorted[i])) throw InputError(fmt::format("NaN training value at index {}", i));
  std::sort(sorted.begin(), sorted.end());

  BinEdges edges;
  edges.requested = n;
  for (std::size_t k = 1; k < n; ++k) {
    const double edge = quantile_sorted(sorted, static_cast<double>(k) / static_cast<double>(n));
    if (edges.interior.empty() || edge > edges.interior.back()) edges.interior.push_back(edge);
  }
  if (edges.interior.empty() || sorted.front() == sorted.back())
    throw InputError("degenerate discretization: all training values are equal");
  return edges;
}

std::size_t bin_of(double value, const BinEdges& edges) {
  return static_cast<std::size_t>(
      std::upper_bound(edges.interior.begin(), edges.interior.end(), value) - edges.interior.begin());
}

StateSeries discretize(std::span<const double> values, const BinEdges& edges) {
  StateSeries out;
  out.n = edges.bins();
  out.states.reserve(values.size());
  for (std::size_t t = 0; t < values.size(); ++t) {
    if (std::isnan(values[t])) throw InputError(fmt::format("NaN value at index {}", t));
    out.states.push_back(static_cast<int>(bin_of(values[t], edges)));
  }
  return out;
}

LabelSeries forward_return_labels(std::span<const double> prices, std::size_t horizon, std::size_t m,
                                  std::size_t train_end) {
  if (horizon < 1) throw InputError("horizon must be at least 1");
  if (m < 2) throw InputError("forward-return labels need at least 2 bins");
  const std::size_t count = prices.size() > horizon + 1 ? prices.size() - horizon - 1 : 0;
  const std::size_t train_count = std::min(train_end, count);
  if (train_count == 0)
    throw InputError(fmt::format("horizon {} leaves no labelled training rows", horizon));

  std::vector<double> returns(count);
  for (std::size_t t = 0; t < count; ++t) {
    const double base = prices[t + 1];
    if (!(base > 0.0)) throw InputError(fmt::format("non-positive price at index {}", t + 1));
    returns[t] = (prices[t + 1 + horizon] - base) / base;
  }

  LabelSeries out;
  out.kind = LabelKind::forward_return;
  out.horizon = horizon;
  if (std::all_of(returns.begin(), returns.begin() + static_cast<std::ptrdiff_t>(train_count),
                  [&](double r) { return r == returns.front(); })) {
    // Constant training returns: a single collapsed bin, every label identical.
    out.edges.requested = m;
    out.m = m;
    out.labels.assign(count, 0);
    return out;
  }
  out.edges = fit_quantile_bins(std::span(returns).first(train_count), m);
  out.m = out.edges.bins();
  out.labels.reserve(count);
  for (double r : returns) out.labels.push_back(static_cast<int>(bin_of(r, out.edges)));
  return out;
}

LabelSeries state_labels(const StateSeries& states, std::size_t horizon) {
  if (horizon < 1) throw InputError("horizon must be at least 1 (h = 0 is not a transition)");
  if (horizon >= states.size())
    throw InputError(fmt::format("horizon {} is not shorter than the series ({})", horizon, states.size()));
  LabelSeries out;
  out.kind = LabelKind::state_to_state;
  out.horizon = horizon;
  out.m = states.n;
  out.labels.assign(states.states.begin() + static_cast<std::ptrdiff_t>(horizon), states.states.end());
  return out;
}

std::string to_json(const BinEdges& edges) {
  nlohmann::ordered_json j;
  j["n"] = edges.bins();
  j["requested"] = edges.requested;
  j["edges"] = edges.interior;
  return j.dump(2) + "\n";
}

BinEdges bin_edges_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    BinEdges edges;
    edges.interior = j.at("edges").get<std::vector<double>>();
    edges.requested = j.value("requested", edges.interior.size() + 1);
    if (j.at("n").get<std::size_t>() != edges.bins()) throw InputError("bin edge count does not match n");
    for (std::size_t i = 1; i < edges.interior.size(); ++i)
      if (!(edges.interior[i] > edges.interior[i - 1])) throw InputError("bin edges must be strictly increasing");
    return edges;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(fmt::format("invalid bin edge JSON: {}", e.what()));
  }
}

}  // namespace inhomarkov
