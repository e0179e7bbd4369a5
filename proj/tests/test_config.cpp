#include <filesystem>
#include <string>

#include "doctest.h"
#include "ewfm/config.hpp"
#include "ewfm/error.hpp"

using namespace ewfm;

namespace {

std::size_t error_line(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return 0;
}

std::string error_key(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return {};
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("defaults round-trip") {
  RunConfig c;
  CHECK(parse_config(serialize_config(c)) == c);
  c.anneal = AnnealSection{};
  c.system.layout = "explicit";
  c.system.means = {{0.5, -1.0}, {1e-300, 3.25}};
  c.system.weights = {0.25, 0.75};
  c.train.lr = 0.1 + 0.2;  // not a short decimal
  c.model.hidden = {7};
  c.seed = 18446744073709551615ULL;
  const RunConfig back = parse_config(serialize_config(c));
  CHECK(back == c);
  CHECK(serialize_config(back) == serialize_config(c));
}

TEST_CASE("shipped presets parse and round-trip") {
  for (const char* name : {"gmm8_desk.cfg", "gmm40.cfg", "gmm40_long.cfg", "dw4.cfg", "lj13.cfg", "lj55.cfg"}) {
    CAPTURE(name);
    const RunConfig c = load_config(std::filesystem::path(EWFM_SOURCE_DIR) / "configs" / name);
    CHECK(parse_config(serialize_config(c)) == c);
    const auto sys = make_system(c);
    CHECK(sys->dim() > 0);
    CHECK_NOTHROW(make_train_config(c));
    CHECK_NOTHROW(make_architecture(c, *sys));
    if (c.anneal) CHECK_NOTHROW(make_anneal_schedule(*c.anneal));
  }
}

TEST_CASE("errors carry line and key") {
  CHECK(error_line("schema = 1\n[train]\nlr = 1e-3\nbogus = 4\n") == 4);
  CHECK(error_key("schema = 1\n[train]\nlr = 1e-3\nbogus = 4\n") == "train.bogus");
  CHECK(error_line("schema = 1\n\n[train]\nepochs = many\n") == 4);
  CHECK(error_key("schema = 1\n[train]\nepochs = -5\n") == "train.epochs");
  CHECK(error_line("schema = 1\n[nope]\n") == 2);
  CHECK(error_line("schema = 1\n[train]\nlr = 1\nlr = 2\n") == 4);
  CHECK(error_line("schema = 2\n") == 1);
  CHECK(error_line("schema = 1\n[train]\nclip = sometimes\n") == 3);
  CHECK(error_line("schema = 1\njust words\n") == 2);
  CHECK(error_key("[train]\nlr = 1\n") == "schema");
}

TEST_CASE("comments and whitespace") {
  const RunConfig c = parse_config("# header\nschema = 1   # trailing\n  seed=7\n[model]\nhidden = 8 , 9\n");
  CHECK(c.seed == 7);
  CHECK(c.model.hidden == std::vector<std::size_t>{8, 9});
  CHECK_FALSE(c.anneal.has_value());
  CHECK(parse_config("schema = 1\n[anneal]\n").anneal.has_value());
}

TEST_CASE("hash is stable and sensitive") {
  RunConfig a, b;
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  b.train.epochs = 11;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("systems from config") {
  RunConfig c;
  c.system.type = "double-well";
  CHECK(make_system(c)->dim() == 8);
  c.system.type = "lennard-jones";
  c.system.n_particles = 13;
  c.system.space_dim = 3;
  const auto lj = make_system(c);
  CHECK(lj->dim() == 39);
  CHECK(make_architecture(c, *lj).center_space_dim == 3);
  c.system.type = "harmonic";
  c.system.dim = 5;
  CHECK(make_system(c)->dim() == 5);
  c.system.type = "gmm";
  c.system.layout = "uniform-random";
  c.system.components = 40;
  c.system.dim = 2;
  const auto g1 = make_system(c), g2 = make_system(c);
  CHECK(g1->mode_centers() == g2->mode_centers());
  c.system.layout = "explicit";
  CHECK_THROWS_AS(make_system(c), ConfigError);
  c.system.layout = "ring";
  c.system.dim = 3;
  CHECK_THROWS_AS(make_system(c), ConfigError);
}

TEST_CASE("conversions carry the run seed and sections") {
  RunConfig c;
  c.seed = 12;
  c.train.divergence = "hutchinson";
  c.train.hutchinson_probes = 3;
  c.train.clip = "clip-energy";
  const TrainConfig t = make_train_config(c);
  CHECK(t.seed == 12);
  CHECK_FALSE(t.auto_divergence);
  CHECK(t.divergence.probes == 3);
  CHECK(t.clip.strategy == ClipStrategy::clip_energy);
  CHECK(make_eval_options(c).seed == 12);
  CHECK(make_mh_config(c).n_samples == c.oracle.n_samples);
}

}
