#include "inhomarkov/config.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "inhomarkov/csv.hpp"
#include "inhomarkov/rng.hpp"

namespace inhomarkov {

namespace {

namespace pt = boost::property_tree;

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return {};
  s = s.substr(first, s.find_last_not_of(" \t") - first + 1);
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split_list(const std::string& value) {
  std::string v = trim(value);
  if (!v.empty() && v.front() == '[' && v.back() == ']') v = v.substr(1, v.size() - 2);
  std::vector<std::string> out;
  for (auto& f : csv::split_line(v)) {
    f = trim(f);
    if (!f.empty()) out.push_back(f);
  }
  return out;
}

std::uint64_t parse_u64(const std::string& text, const std::string& key) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
    throw InputError(fmt::format("config key '{}': '{}' is not a non-negative integer", key, text));
  return v;
}

bool parse_bool(const std::string& text, const std::string& key) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw InputError(fmt::format("config key '{}': '{}' is not a boolean", key, text));
}

LabelKind parse_kind(const std::string& text) {
  if (text == "state" || text == "state_to_state") return LabelKind::state_to_state;
  if (text == "forward" || text == "forward_return") return LabelKind::forward_return;
  throw InputError(fmt::format("unknown target kind '{}'", text));
}

const std::map<std::string, std::set<std::string>> kKnownKeys{
    {"run", {"seed", "out"}},
    {"data", {"source", "path", "default_fill", "max_interp_gap", "max_leading_missing", "top_k", "mi_bins",
              "train_fraction", "val_fraction"}},
    {"synthetic", {"states", "length", "persistence", "noise_sigma", "stay"}},
    {"discretization", {"states", "horizons", "targets", "label_bins"}},
    {"train", {"learning_rate", "adam_beta1", "adam_beta2", "adam_eps", "weight_decay", "grad_clip_norm", "dropout_p",
               "batch_size", "max_epochs", "patience", "label_smoothing_eps", "min_improvement"}},
    {"smoothing", {"alphas", "lambdas"}},
    {"eval", {"block_len", "reps", "level", "ece_bins"}},
    {"diagnose", {"rv_window", "tail_fraction", "export_operators"}},
    {"ck", {"horizons"}},
};

}  // namespace

std::uint64_t RunConfig::sub_seed(std::uint64_t offset) const { return derive_seed(seed, offset); }

const HorizonSpec* RunConfig::find_horizon(std::size_t h, LabelKind kind) const {
  for (const auto& spec : horizons)
    if (spec.horizon == h && spec.kind == kind) return &spec;
  return nullptr;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw InputError(fmt::format("config file '{}' does not exist", path.string()));
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw InputError(fmt::format("config '{}': {}", path.string(), e.what()));
  }

  std::map<std::string, std::string> fill_section;
  for (const auto& [section, body] : tree) {
    if (section == "fill") {
      for (const auto& [key, value] : body) fill_section[key] = trim(value.data());
      continue;
    }
    const auto known = kKnownKeys.find(section);
    if (known == kKnownKeys.end()) throw InputError(fmt::format("config: unknown section [{}]", section));
    for (const auto& [key, value] : body)
      if (!known->second.contains(key)) throw InputError(fmt::format("config: unknown key '{}' in [{}]", key, section));
  }

  auto get = [&](const std::string& key) -> std::optional<std::string> {
    if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(key, '.'))) return trim(*v);
    return std::nullopt;
  };
  auto get_size = [&](const std::string& key, std::size_t& target) {
    if (auto v = get(key)) target = static_cast<std::size_t>(parse_u64(*v, key));
  };
  auto get_double = [&](const std::string& key, double& target) {
    if (auto v = get(key)) target = csv::parse_double(*v, fmt::format("config key '{}'", key));
  };

  RunConfig c;
  c.config_path = path;
  const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");

  if (auto v = get("run.seed")) c.seed = parse_u64(*v, "run.seed");
  if (auto v = get("run.out")) c.out_dir = base / *v;

  if (auto v = get("data.source")) {
    if (*v == "csv") c.source = DataSource::csv;
    else if (*v == "synthetic") c.source = DataSource::synthetic;
    else throw InputError(fmt::format("config: unknown data source '{}'", *v));
  }
  if (auto v = get("data.path")) c.data_path = base / *v;
  if (c.source == DataSource::csv) {
    if (c.data_path.empty()) throw InputError("config: data.path is required for csv sources");
    if (!std::filesystem::exists(c.data_path))
      throw InputError(fmt::format("config: data file '{}' does not exist", c.data_path.string()));
  }
  if (auto v = get("data.default_fill")) c.default_fill = parse_fill_mode(*v);
  for (const auto& [name, mode] : fill_section) c.fill_modes[name] = parse_fill_mode(mode);
  get_size("data.max_interp_gap", c.align.max_interp_gap);
  get_size("data.max_leading_missing", c.align.max_leading_missing);
  get_size("data.top_k", c.top_k);
  get_size("data.mi_bins", c.mi_bins);
  get_double("data.train_fraction", c.train_fraction);
  get_double("data.val_fraction", c.val_fraction);

  get_size("synthetic.states", c.synth_states);
  get_size("synthetic.length", c.synth_length);
  get_double("synthetic.persistence", c.synth_persistence);
  get_double("synthetic.noise_sigma", c.synth_noise_sigma);
  get_double("synthetic.stay", c.synth_stay);

  get_size("discretization.states", c.states);
  if (auto v = get("discretization.horizons")) {
    const auto hs = split_list(*v);
    const auto kinds = get("discretization.targets") ? split_list(*get("discretization.targets")) : std::vector<std::string>{};
    const auto bins = get("discretization.label_bins") ? split_list(*get("discretization.label_bins")) : std::vector<std::string>{};
    if (hs.empty()) throw InputError("config: discretization.horizons is empty");
    if (!kinds.empty() && kinds.size() != hs.size())
      throw InputError("config: discretization.targets must list one kind per horizon");
    if (!bins.empty() && bins.size() != hs.size())
      throw InputError("config: discretization.label_bins must list one count per horizon");
    c.horizons.clear();
    for (std::size_t k = 0; k < hs.size(); ++k) {
      HorizonSpec spec;
      spec.horizon = static_cast<std::size_t>(parse_u64(hs[k], "discretization.horizons"));
      if (spec.horizon < 1) throw InputError("config: horizons must be at least 1");
      spec.kind = kinds.empty() ? LabelKind::state_to_state : parse_kind(kinds[k]);
      spec.label_bins = bins.empty() ? c.states : static_cast<std::size_t>(parse_u64(bins[k], "discretization.label_bins"));
      if (c.find_horizon(spec.horizon, spec.kind)) throw InputError("config: duplicate horizon/target pair");
      c.horizons.push_back(spec);
    }
  }

  auto& t = c.train;
  get_double("train.learning_rate", t.learning_rate);
  get_double("train.adam_beta1", t.adam_beta1);
  get_double("train.adam_beta2", t.adam_beta2);
  get_double("train.adam_eps", t.adam_eps);
  get_double("train.weight_decay", t.weight_decay);
  get_double("train.grad_clip_norm", t.grad_clip_norm);
  get_double("train.dropout_p", t.dropout_p);
  get_size("train.batch_size", t.batch_size);
  get_size("train.max_epochs", t.max_epochs);
  get_size("train.patience", t.patience);
  get_double("train.label_smoothing_eps", t.label_smoothing_eps);
  get_double("train.min_improvement", t.min_improvement);
  t.validate();

  auto get_doubles = [&](const std::string& key, std::vector<double>& target) {
    if (auto v = get(key)) {
      target.clear();
      for (const auto& f : split_list(*v)) target.push_back(csv::parse_double(f, fmt::format("config key '{}'", key)));
      if (target.empty()) throw InputError(fmt::format("config key '{}' is empty", key));
    }
  };
  get_doubles("smoothing.alphas", c.smoothing.alphas);
  get_doubles("smoothing.lambdas", c.smoothing.lambdas);

  get_size("eval.block_len", c.bootstrap.block_len);
  get_size("eval.reps", c.bootstrap.reps);
  get_double("eval.level", c.bootstrap.level);
  get_size("eval.ece_bins", c.ece_bins);

  get_size("diagnose.rv_window", c.rv_window);
  get_double("diagnose.tail_fraction", c.tail_fraction);
  if (auto v = get("diagnose.export_operators")) c.export_operators = parse_bool(*v, "diagnose.export_operators");

  if (auto v = get("ck.horizons"))
    for (const auto& f : split_list(*v)) c.ck_horizons.push_back(static_cast<std::size_t>(parse_u64(f, "ck.horizons")));

  if (c.states < 2) throw InputError("config: discretization.states must be at least 2");
  return c;
}

}  // namespace inhomarkov
