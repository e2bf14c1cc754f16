#include "hbd/config.hpp"

#include "hbd/csv.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <fstream>
#include <functional>
#include <sstream>

namespace hbd {

namespace {

namespace pt = boost::property_tree;

double to_double(const std::string& key, const std::string& v) {
  const auto d = csv::parse_double(v);
  if (!d) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return *d;
}

long long to_int(const std::string& key, const std::string& v) {
  const auto i = csv::parse_int(v);
  if (!i) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return *i;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  const long long i = to_int(key, v);
  if (i < 0) throw ConfigError(key + ": must be non-negative");
  return static_cast<std::size_t>(i);
}

struct Field {
  std::string section;
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define HBD_REAL(SEC, KEY, MEMBER)                                                                   \
  Field {                                                                                            \
    SEC, KEY, [](ExperimentConfig& c, const std::string& v) { c.MEMBER = to_double(KEY, v); },       \
        [](const ExperimentConfig& c) { return csv::format_double(c.MEMBER); }                       \
  }
#define HBD_SIZE(SEC, KEY, MEMBER)                                                                   \
  Field {                                                                                            \
    SEC, KEY, [](ExperimentConfig& c, const std::string& v) { c.MEMBER = to_size(KEY, v); },         \
        [](const ExperimentConfig& c) { return std::to_string(c.MEMBER); }                           \
  }
#define HBD_INT(SEC, KEY, MEMBER)                                                                    \
  Field {                                                                                            \
    SEC, KEY, [](ExperimentConfig& c, const std::string& v) {                                        \
      c.MEMBER = static_cast<decltype(c.MEMBER)>(to_int(KEY, v));                                    \
    },                                                                                               \
        [](const ExperimentConfig& c) { return std::to_string(c.MEMBER); }                           \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table{
      Field{"dataset", "source", [](ExperimentConfig& c, const std::string& v) { c.source = v; },
            [](const ExperimentConfig& c) { return c.source; }},
      Field{"dataset", "radius_policy",
            [](ExperimentConfig& c, const std::string& v) {
              if (v == "as_is") c.radius_policy = RadiusPolicy::as_is;
              else if (v == "renormalize") c.radius_policy = RadiusPolicy::renormalize;
              else throw ConfigError("radius_policy: expected as_is or renormalize, got '" + v + "'");
            },
            [](const ExperimentConfig& c) {
              return std::string(c.radius_policy == RadiusPolicy::as_is ? "as_is" : "renormalize");
            }},
      HBD_SIZE("dataset", "n_samples", synthetic.n_samples),
      HBD_INT("dataset", "n_classes", synthetic.n_classes),
      HBD_SIZE("dataset", "dim", synthetic.dim),
      HBD_REAL("dataset", "cluster_spread", synthetic.cluster_spread),
      HBD_REAL("dataset", "center_lo", synthetic.center_lo),
      HBD_REAL("dataset", "center_hi", synthetic.center_hi),
      HBD_REAL("dataset", "boundary_lo", synthetic.boundary_lo),
      HBD_REAL("dataset", "boundary_hi", synthetic.boundary_hi),
      HBD_REAL("dataset", "train_fraction", synthetic.train_fraction),

      HBD_REAL("trigger", "alpha", alpha),
      HBD_REAL("trigger", "beta", beta),
      HBD_REAL("trigger", "noise_sigma", noise_sigma),
      HBD_REAL("trigger", "projection_radius", projection_radius),
      HBD_REAL("trigger", "sparsity_fraction", sparsity_fraction),

      HBD_INT("poison", "target_class", target_class),
      HBD_REAL("poison", "fraction", poison_fraction),
      HBD_REAL("poison", "sigma", sigma),
      HBD_REAL("poison", "gamma", gamma),
      Field{"poison", "selection",
            [](ExperimentConfig& c, const std::string& v) {
              if (v == "adaptive") c.selection = SelectionRule::adaptive;
              else if (v == "uniform") c.selection = SelectionRule::uniform;
              else throw ConfigError("selection: expected adaptive or uniform, got '" + v + "'");
            },
            [](const ExperimentConfig& c) {
              return std::string(c.selection == SelectionRule::adaptive ? "adaptive" : "uniform");
            }},

      HBD_REAL("train", "learning_rate", train.learning_rate),
      HBD_REAL("train", "weight_decay", train.weight_decay),
      HBD_INT("train", "epochs", train.epochs),
      HBD_REAL("train", "grad_clip", train.grad_clip),
      HBD_REAL("train", "lambda1", train.lambda1),
      HBD_REAL("train", "lambda2", train.lambda2),
      HBD_SIZE("train", "batch_size", train.batch_size),
      Field{"train", "hidden",
            [](ExperimentConfig& c, const std::string& v) {
              c.hidden.clear();
              std::stringstream in(v);
              std::string part;
              while (std::getline(in, part, ',')) c.hidden.push_back(to_size("hidden", part));
            },
            [](const ExperimentConfig& c) {
              std::string out;
              for (std::size_t i = 0; i < c.hidden.size(); ++i) out += (i ? "," : "") + std::to_string(c.hidden[i]);
              return out;
            }},

      HBD_REAL("detector", "tau", tau),

      Field{"experiment", "modes",
            [](ExperimentConfig& c, const std::string& v) { c.modes = parse_mode_selection(v); },
            [](const ExperimentConfig& c) { return to_string(c.modes); }},
      HBD_SIZE("experiment", "seed", seed),
      HBD_INT("experiment", "trials", trials),
      Field{"experiment", "out_dir", [](ExperimentConfig& c, const std::string& v) { c.out_dir = v; },
            [](const ExperimentConfig& c) { return c.out_dir.string(); }},
      HBD_INT("experiment", "parallel", parallel),
  };
  return table;
}

#undef HBD_REAL
#undef HBD_SIZE
#undef HBD_INT

}  // namespace

std::string to_string(ModeSelection m) {
  switch (m) {
    case ModeSelection::adaptive:
      return "adaptive";
    case ModeSelection::baseline:
      return "baseline";
    case ModeSelection::both:
      return "both";
  }
  return "both";
}

ModeSelection parse_mode_selection(const std::string& s) {
  if (s == "adaptive") return ModeSelection::adaptive;
  if (s == "baseline") return ModeSelection::baseline;
  if (s == "both") return ModeSelection::both;
  throw ConfigError("modes: expected adaptive, baseline or both, got '" + s + "'");
}

void ExperimentConfig::validate() const {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  need(!source.empty(), "dataset.source must not be empty");
  need(synthetic.n_samples >= 10, "dataset.n_samples must be >= 10");
  need(synthetic.n_classes >= 2, "dataset.n_classes must be >= 2");
  need(synthetic.dim >= 1, "dataset.dim must be >= 1");
  need(synthetic.cluster_spread >= 0.0, "dataset.cluster_spread must be >= 0");
  need(0.0 <= synthetic.center_lo && synthetic.center_lo <= synthetic.center_hi &&
           synthetic.center_hi <= synthetic.boundary_lo && synthetic.boundary_lo <= synthetic.boundary_hi &&
           synthetic.boundary_hi < 1.0,
       "dataset radius bands must satisfy 0 <= center_lo <= center_hi <= boundary_lo <= boundary_hi < 1");
  need(synthetic.train_fraction > 0.0 && synthetic.train_fraction < 1.0, "dataset.train_fraction must be in (0, 1)");
  need(alpha > 0.0, "trigger.alpha must be > 0");
  need(beta >= 0.0 && beta <= 1.0, "trigger.beta must be in [0, 1]");
  need(noise_sigma >= 0.0, "trigger.noise_sigma must be >= 0");
  need(projection_radius > 0.0 && projection_radius < 1.0, "trigger.projection_radius must be in (0, 1)");
  need(sparsity_fraction > 0.0 && sparsity_fraction <= 1.0, "trigger.sparsity_fraction must be in (0, 1]");
  need(target_class >= 0, "poison.target_class must be >= 0");
  need(source != "synthetic" || target_class < synthetic.n_classes, "poison.target_class must be < n_classes");
  need(poison_fraction > 0.0 && poison_fraction < 1.0, "poison.fraction must be in (0, 1)");
  need(sigma > 0.0, "poison.sigma must be > 0");
  need(gamma >= 0.0, "poison.gamma must be >= 0");
  try {
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  need(!hidden.empty(), "train.hidden must list at least one layer width");
  for (auto h : hidden) need(h > 0, "train.hidden widths must be positive");
  need(tau > 0.0, "detector.tau must be > 0");
  need(trials >= 1, "experiment.trials must be >= 1");
  need(parallel >= 1, "experiment.parallel must be >= 1");
}

std::vector<std::uint64_t> ExperimentConfig::trial_seeds() const {
  std::vector<std::uint64_t> out;
  for (int i = 0; i < trials; ++i) out.push_back(seed + static_cast<std::uint64_t>(i));
  return out;
}

ExperimentConfig parse_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  ExperimentConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError("config: key '" + section + "' outside a section");
    for (const auto& [key, value] : body) {
      const auto& table = fields();
      auto it = std::find_if(table.begin(), table.end(),
                             [&](const Field& f) { return f.section == section && f.key == key; });
      if (it == table.end()) throw ConfigError("config: unknown key [" + section + "] " + key);
      it->set(cfg, value.data());
    }
    const bool known = std::any_of(fields().begin(), fields().end(), [&](const Field& f) { return f.section == section; });
    if (!known) throw ConfigError("config: unknown section [" + section + "]");
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const ExperimentConfig& config) {
  std::string out, current;
  for (const auto& f : fields()) {
    if (f.section != current) {
      if (!current.empty()) out += "\n";
      out += "[" + f.section + "]\n";
      current = f.section;
    }
    out += f.key + " = " + f.get(config) + "\n";
  }
  return out;
}

void save_config(const ExperimentConfig& config, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("config: cannot write " + path.string());
  out << serialize_config(config);
}

}  // namespace hbd
