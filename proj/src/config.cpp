#include "ewfm/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "ewfm/csv.hpp"
#include "ewfm/error.hpp"
#include "ewfm/rng.hpp"

namespace ewfm {

namespace {

// Values are parsed here; the caller attaches line and key on failure.
struct ValueError {
  std::string what;
};

std::uint64_t parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ValueError{"expected a non-negative integer, got '" + std::string(s) + "'"};
  }
  return v;
}

std::size_t parse_size(std::string_view s) { return static_cast<std::size_t>(parse_u64(s)); }

double parse_real(std::string_view s) {
  try {
    return parse_double(s);
  } catch (const InvalidInput&) {
    throw ValueError{"expected a number, got '" + std::string(s) + "'"};
  }
}

bool parse_bool(std::string_view s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw ValueError{"expected true or false, got '" + std::string(s) + "'"};
}

std::string parse_choice(std::string_view s, std::initializer_list<std::string_view> allowed) {
  for (auto a : allowed) {
    if (s == a) return std::string(s);
  }
  std::string msg = "expected one of";
  for (auto a : allowed) msg += " " + std::string(a);
  throw ValueError{msg + ", got '" + std::string(s) + "'"};
}

std::vector<double> parse_real_list(std::string_view s) {
  std::vector<double> out;
  if (trim(s).empty()) return out;
  for (const auto& tok : split(s, ',')) out.push_back(parse_real(trim(tok)));
  return out;
}

std::string join_reals(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_double(v[i]);
  return s;
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};

#define EWFM_SIZE(sec, member, name)                                                   \
  Field { sec, name, [](const RunConfig& c) { return std::to_string(c.member); },      \
          [](RunConfig& c, std::string_view v) { c.member = parse_size(v); } }
#define EWFM_REAL(sec, member, name)                                                   \
  Field { sec, name, [](const RunConfig& c) { return format_double(c.member); },       \
          [](RunConfig& c, std::string_view v) { c.member = parse_real(v); } }
#define EWFM_BOOL(sec, member, name)                                                   \
  Field { sec, name, [](const RunConfig& c) { return bool_str(c.member); },            \
          [](RunConfig& c, std::string_view v) { c.member = parse_bool(v); } }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"", "schema", [](const RunConfig& c) { return std::to_string(c.schema); },
       [](RunConfig& c, std::string_view v) {
         const auto s = parse_u64(v);
         if (s != static_cast<std::uint64_t>(kConfigSchema)) {
           throw ValueError{"unsupported schema " + std::string(v) + " (expected " + std::to_string(kConfigSchema) +
                            ")"};
         }
         c.schema = static_cast<int>(s);
       }},
      {"", "seed", [](const RunConfig& c) { return std::to_string(c.seed); },
       [](RunConfig& c, std::string_view v) { c.seed = parse_u64(v); }},
      {"", "output_dir", [](const RunConfig& c) { return c.output_dir; },
       [](RunConfig& c, std::string_view v) {
         if (v.empty()) throw ValueError{"output_dir must not be empty"};
         c.output_dir = std::string(v);
       }},

      {"system", "type", [](const RunConfig& c) { return c.system.type; },
       [](RunConfig& c, std::string_view v) {
         c.system.type = parse_choice(v, {"gmm", "double-well", "lennard-jones", "harmonic"});
       }},
      EWFM_REAL("system", system.temperature, "temperature"),
      EWFM_SIZE("system", system.dim, "dim"),
      {"system", "layout", [](const RunConfig& c) { return c.system.layout; },
       [](RunConfig& c, std::string_view v) {
         c.system.layout = parse_choice(v, {"ring", "grid", "uniform-random", "explicit"});
       }},
      EWFM_SIZE("system", system.components, "components"),
      EWFM_REAL("system", system.radius, "radius"),
      EWFM_REAL("system", system.half_width, "half_width"),
      EWFM_REAL("system", system.variance, "variance"),
      {"system", "means",
       [](const RunConfig& c) {
         std::string s;
         for (std::size_t i = 0; i < c.system.means.size(); ++i) s += (i ? "; " : "") + join_reals(c.system.means[i]);
         return s;
       },
       [](RunConfig& c, std::string_view v) {
         c.system.means.clear();
         if (trim(v).empty()) return;
         for (const auto& row : split(v, ';')) c.system.means.push_back(parse_real_list(row));
       }},
      {"system", "weights", [](const RunConfig& c) { return join_reals(c.system.weights); },
       [](RunConfig& c, std::string_view v) { c.system.weights = parse_real_list(v); }},
      EWFM_SIZE("system", system.n_particles, "n_particles"),
      EWFM_SIZE("system", system.space_dim, "space_dim"),
      EWFM_REAL("system", system.dw.a, "dw_a"),
      EWFM_REAL("system", system.dw.b, "dw_b"),
      EWFM_REAL("system", system.dw.c, "dw_c"),
      EWFM_REAL("system", system.dw.d0, "dw_d0"),
      EWFM_REAL("system", system.dw.tau, "dw_tau"),
      EWFM_REAL("system", system.lj.epsilon, "lj_epsilon"),
      EWFM_REAL("system", system.lj.r_m, "lj_r_m"),
      EWFM_REAL("system", system.lj.c_osc, "lj_c_osc"),
      EWFM_REAL("system", system.lj.r_min, "lj_r_min"),
      EWFM_BOOL("system", system.lj.use_floor, "lj_use_floor"),
      EWFM_REAL("system", system.sigma, "sigma"),

      {"model", "hidden",
       [](const RunConfig& c) {
         std::string s;
         for (std::size_t i = 0; i < c.model.hidden.size(); ++i) s += (i ? ", " : "") + std::to_string(c.model.hidden[i]);
         return s;
       },
       [](RunConfig& c, std::string_view v) {
         c.model.hidden.clear();
         for (const auto& tok : split(v, ',')) c.model.hidden.push_back(parse_size(trim(tok)));
       }},
      EWFM_SIZE("model", model.time_embed_dim, "time_embed_dim"),
      EWFM_REAL("model", model.time_max_frequency, "time_max_frequency"),

      EWFM_REAL("train", train.lr, "lr"),
      EWFM_REAL("train", train.beta1, "beta1"),
      EWFM_REAL("train", train.beta2, "beta2"),
      EWFM_REAL("train", train.adam_eps, "adam_eps"),
      EWFM_SIZE("train", train.n_buffer, "n_buffer"),
      EWFM_SIZE("train", train.n_batch, "n_batch"),
      EWFM_SIZE("train", train.epochs, "epochs"),
      EWFM_SIZE("train", train.minibatches_per_epoch, "minibatches_per_epoch"),
      EWFM_SIZE("train", train.refresh_every, "refresh_every"),
      {"train", "clip", [](const RunConfig& c) { return c.train.clip; },
       [](RunConfig& c, std::string_view v) { c.train.clip = parse_choice(v, {"none", "clip-energy", "clip-logweight"}); }},
      EWFM_REAL("train", train.clip_percentile, "clip_percentile"),
      EWFM_SIZE("train", train.ode_steps, "ode_steps"),
      {"train", "divergence", [](const RunConfig& c) { return c.train.divergence; },
       [](RunConfig& c, std::string_view v) { c.train.divergence = parse_choice(v, {"auto", "exact", "hutchinson"}); }},
      EWFM_SIZE("train", train.hutchinson_probes, "hutchinson_probes"),
      EWFM_REAL("train", train.proposal_scale, "proposal_scale"),
      EWFM_BOOL("train", train.reset_moments_per_level, "reset_moments_per_level"),
      EWFM_SIZE("train", train.max_degenerate_steps, "max_degenerate_steps"),
      EWFM_SIZE("train", train.checkpoint_every, "checkpoint_every"),

      EWFM_REAL("anneal", anneal->t_init, "t_init"),
      EWFM_REAL("anneal", anneal->t_final, "t_final"),
      EWFM_SIZE("anneal", anneal->epochs_per_temperature, "epochs_per_temperature"),
      EWFM_SIZE("anneal", anneal->total_anneal_epochs, "total_anneal_epochs"),

      EWFM_SIZE("eval", eval.n_model_samples, "n_model_samples"),
      EWFM_SIZE("eval", eval.ode_steps, "ode_steps"),
      EWFM_SIZE("eval", eval.w2_exact_threshold, "w2_exact_threshold"),
      EWFM_REAL("eval", eval.sinkhorn_reg, "sinkhorn_reg"),
      EWFM_SIZE("eval", eval.histogram_bins, "histogram_bins"),

      EWFM_REAL("oracle", oracle.step_size, "step_size"),
      EWFM_SIZE("oracle", oracle.n_chains, "n_chains"),
      EWFM_SIZE("oracle", oracle.burn_in, "burn_in"),
      EWFM_SIZE("oracle", oracle.thinning, "thinning"),
      EWFM_SIZE("oracle", oracle.n_samples, "n_samples"),
  };
  return table;
}

#undef EWFM_SIZE
#undef EWFM_REAL
#undef EWFM_BOOL

const std::set<std::string>& section_names() {
  static const std::set<std::string> names = {"system", "model", "train", "anneal", "eval", "oracle"};
  return names;
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::string section;
  std::set<std::string> seen;  // "section.key"
  std::set<std::string> sections_seen;
  bool have_schema = false;
  std::size_t line_no = 0;

  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string_view line = trim(raw);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("malformed section header", line_no);
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (!section_names().count(section)) throw ConfigError("unknown section [" + section + "]", line_no, section);
      if (!sections_seen.insert(section).second) throw ConfigError("duplicate section [" + section + "]", line_no, section);
      if (section == "anneal") cfg.anneal.emplace();
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'", line_no);
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    const std::string qualified = section.empty() ? key : section + "." + key;

    const Field* field = nullptr;
    for (const auto& f : fields()) {
      if (f.section == section && f.key == key) {
        field = &f;
        break;
      }
    }
    if (!field) throw ConfigError("unknown key '" + qualified + "'", line_no, qualified);
    if (!seen.insert(qualified).second) throw ConfigError("duplicate key '" + qualified + "'", line_no, qualified);
    try {
      field->set(cfg, value);
    } catch (const ValueError& e) {
      throw ConfigError(qualified + ": " + e.what, line_no, qualified);
    } catch (const InvalidInput& e) {
      throw ConfigError(qualified + ": " + e.what(), line_no, qualified);
    }
    if (qualified == "schema") have_schema = true;
  }
  if (!have_schema) throw ConfigError("missing 'schema' key", 0, "schema");
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    if (f.section == "anneal" && !cfg.anneal) continue;
    if (f.section != section) {
      section = f.section;
      out += "\n[" + section + "]\n";
    }
    out += f.key + " = " + f.get(cfg) + "\n";
  }
  return out;
}

std::string config_hash(const RunConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize_config(cfg)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::unique_ptr<EnergySystem> make_system(const RunConfig& cfg) {
  const SystemSection& s = cfg.system;
  if (!(s.temperature > 0.0)) throw ConfigError("system.temperature must be positive", 0, "system.temperature");
  if (s.type == "gmm") {
    GmmSpec spec;
    if (s.layout == "ring") {
      if (s.dim != 2) throw ConfigError("ring layout is 2-D", 0, "system.dim");
      spec = ring_gmm(s.components, s.radius, s.variance);
    } else if (s.layout == "grid") {
      if (s.dim != 2) throw ConfigError("grid layout is 2-D", 0, "system.dim");
      spec = grid_gmm(s.components, s.half_width, s.variance);
    } else if (s.layout == "uniform-random") {
      spec = uniform_random_gmm(s.components, s.dim, s.half_width, derive_seed(cfg.seed, streams::kLayout), s.variance);
    } else {
      if (s.means.empty()) throw ConfigError("explicit layout needs means", 0, "system.means");
      spec.means = s.means;
      spec.variance = s.variance;
      for (const auto& m : spec.means) {
        if (m.size() != s.dim) throw ConfigError("mean length differs from system.dim", 0, "system.means");
      }
    }
    spec.weights = s.weights;
    try {
      return std::make_unique<GmmEnergy>(std::move(spec), s.temperature);
    } catch (const InvalidInput& e) {
      throw ConfigError(e.what(), 0, "system");
    }
  }
  if (s.type == "double-well") {
    return std::make_unique<DoubleWellEnergy>(ParticleSpec{s.n_particles, s.space_dim}, s.dw, s.temperature);
  }
  if (s.type == "lennard-jones") {
    return std::make_unique<LennardJonesEnergy>(ParticleSpec{s.n_particles, s.space_dim}, s.lj, s.temperature);
  }
  return std::make_unique<HarmonicEnergy>(s.dim, s.sigma, s.temperature);
}

MlpArchitecture make_architecture(const RunConfig& cfg, const EnergySystem& system) {
  MlpArchitecture a;
  a.dim = system.dim();
  a.hidden = cfg.model.hidden;
  a.time_embed_dim = cfg.model.time_embed_dim;
  a.time_max_frequency = cfg.model.time_max_frequency;
  a.center_space_dim = system.n_particles() > 0 ? system.space_dim() : 0;
  a.validate();
  return a;
}

TrainConfig make_train_config(const RunConfig& cfg) {
  const TrainSection& t = cfg.train;
  TrainConfig c;
  c.adam = {t.lr, t.beta1, t.beta2, t.adam_eps};
  c.n_buffer = t.n_buffer;
  c.n_batch = t.n_batch;
  c.epochs = t.epochs;
  c.minibatches_per_epoch = t.minibatches_per_epoch;
  c.refresh_every = t.refresh_every;
  c.clip = {parse_clip_strategy(t.clip), t.clip_percentile};
  c.ode.n_steps = t.ode_steps;
  c.auto_divergence = t.divergence == "auto";
  c.divergence = t.divergence == "hutchinson" ? DivergenceMode::hutchinson(t.hutchinson_probes) : DivergenceMode::exact();
  c.proposal_scale = t.proposal_scale;
  c.seed = cfg.seed;
  c.reset_moments_per_level = t.reset_moments_per_level;
  c.max_degenerate_steps = t.max_degenerate_steps;
  c.validate();
  return c;
}

AnnealSchedule make_anneal_schedule(const AnnealSection& a) {
  AnnealSchedule s{a.t_init, a.t_final, a.epochs_per_temperature, a.total_anneal_epochs};
  s.validate();
  return s;
}

EvalOptions make_eval_options(const RunConfig& cfg) {
  EvalOptions o;
  o.n_model_samples = cfg.eval.n_model_samples;
  o.ode.n_steps = cfg.eval.ode_steps;
  o.w2.exact_threshold = cfg.eval.w2_exact_threshold;
  o.w2.sinkhorn_reg = cfg.eval.sinkhorn_reg;
  o.histogram_bins = cfg.eval.histogram_bins;
  o.seed = cfg.seed;
  return o;
}

MhConfig make_mh_config(const RunConfig& cfg) {
  MhConfig m;
  m.step_size = cfg.oracle.step_size;
  m.n_chains = cfg.oracle.n_chains;
  m.burn_in = cfg.oracle.burn_in;
  m.thinning = cfg.oracle.thinning;
  m.n_samples = cfg.oracle.n_samples;
  m.seed = derive_seed(cfg.seed, streams::kOracle);
  m.validate();
  return m;
}

}  // namespace ewfm
