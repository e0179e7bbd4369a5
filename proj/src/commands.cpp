#include "ewfm/commands.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "ewfm/cnf.hpp"
#include "ewfm/config.hpp"
#include "ewfm/csv.hpp"
#include "ewfm/error.hpp"
#include "ewfm/evaluation.hpp"
#include "ewfm/kernels.hpp"
#include "ewfm/reference_sampler.hpp"
#include "ewfm/trainer.hpp"

namespace fs = std::filesystem;

namespace ewfm {

namespace {

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what();
    if (!e.key().empty()) err << " [key: " << e.key() << "]";
    err << '\n';
    return kExitUsage;
  } catch (const InvalidInput& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitUsage;
  } catch (const TrainingAborted& e) {
    err << "training aborted: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw InvalidInput("cannot write " + path.string());
  f << text;
  if (!f) throw InvalidInput("write failed: " + path.string());
}

void require_file(const fs::path& p, std::string_view what) {
  if (!fs::is_regular_file(p)) throw InvalidInput(std::string(what) + " not found: " + p.string());
}

// Evaluation must see the unmodified potential.
void disable_energy_floor(EnergySystem& system) {
  if (auto* lj = dynamic_cast<LennardJonesEnergy*>(&system)) lj->set_use_floor(false);
}

}  // namespace

fs::path resolve_output_dir(const std::string& configured) {
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return fs::path(env);
  return fs::path(configured);
}

std::map<std::string, std::string> read_key_value_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[std::string(trim(std::string_view(line).substr(0, eq)))] = std::string(trim(std::string_view(line).substr(eq + 1)));
  }
  return kv;
}

int cmd_train(const TrainOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load_config(opts.config);
    const Algorithm algo = parse_algorithm(opts.algo);
    if (algo == Algorithm::aewfm && !cfg.anneal) {
      throw ConfigError("--algo aewfm needs an [anneal] section", 0, "anneal");
    }
    const auto system = make_system(cfg);
    const TrainConfig tc = make_train_config(cfg);
    std::optional<AnnealSchedule> schedule;
    if (algo == Algorithm::aewfm) schedule = make_anneal_schedule(*cfg.anneal);
    VectorFieldNet net = VectorFieldNet::initialized(make_architecture(cfg, *system), cfg.seed);

    const fs::path dir = resolve_output_dir(cfg.output_dir);
    fs::create_directories(dir);
    write_text(dir / "config.cfg", serialize_config(cfg));

    TrainHooks hooks;
    hooks.on_epoch_end = [&](std::size_t epoch, const VectorFieldNet& n) {
      if (cfg.train.checkpoint_every > 0 && epoch % cfg.train.checkpoint_every == 0 && epoch < tc.epochs) {
        std::ostringstream name;
        name << "checkpoint_epoch_" << epoch << ".ckpt";
        save_checkpoint(dir / name.str(), n, cfg.seed);
      }
      if (opts.log_every > 0 && (epoch % opts.log_every == 0 || epoch == tc.epochs)) {
        out << "epoch " << epoch << "/" << tc.epochs << " eval_count " << system->eval_count() << '\n' << std::flush;
      }
    };
    hooks.log = [&](std::string_view msg) { err << msg << '\n'; };

    out << "training " << algorithm_name(algo) << " on " << system->name() << " (d=" << system->dim()
        << ", kernels " << kernels::active().name << ")\n";
    TrainResult result;
    switch (algo) {
      case Algorithm::ewfm: result = train_ewfm(*system, net, tc, hooks); break;
      case Algorithm::iewfm: result = train_iewfm(*system, net, tc, hooks); break;
      case Algorithm::aewfm: result = train_aewfm(*system, net, tc, *schedule, hooks); break;
    }

    write_metrics_csv(dir / "metrics.csv", result.metrics);
    save_checkpoint(dir / "model.ckpt", net, cfg.seed);

    const std::uint64_t expected =
        static_cast<std::uint64_t>(tc.n_buffer) * (1 + result.refresh_count) - result.samples_dropped;
    std::ostringstream m;
    m << "version = " << kVersion << '\n'
      << "algo = " << algorithm_name(algo) << '\n'
      << "config_hash = " << config_hash(cfg) << '\n'
      << "seed = " << cfg.seed << '\n'
      << "system = " << system->name() << '\n'
      << "dim = " << system->dim() << '\n'
      << "epochs = " << tc.epochs << '\n'
      << "n_buffer = " << tc.n_buffer << '\n'
      << "eval_count = " << result.eval_count << '\n'
      << "refresh_count = " << result.refresh_count << '\n'
      << "buffer_generations = " << result.buffer_generations << '\n'
      << "samples_dropped = " << result.samples_dropped << '\n'
      << "eval_count_audit = " << (expected == result.eval_count ? "ok" : "mismatch") << '\n'
      << "proposal_source = " << proposal_source_name(result.final_source) << '\n'
      << "final_temperature = " << format_double(result.final_temperature) << '\n'
      << "degenerate_steps = " << result.degenerate_steps << '\n'
      << "rejected_updates = " << result.rejected_updates << '\n'
      << "checkpoint = model.ckpt\n";
    write_text(dir / "manifest.txt", m.str());
    out << "done: eval_count " << result.eval_count << ", refreshes " << result.refresh_count << ", run dir "
        << dir.string() << '\n';
    if (expected != result.eval_count) {
      err << "energy-evaluation audit mismatch: counted " << result.eval_count << ", expected " << expected << '\n';
      return static_cast<int>(kExitRuntime);
    }
    return static_cast<int>(kExitOk);
  });
}

int cmd_sample(const SampleOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Checkpoint ck = load_checkpoint(opts.checkpoint);
    OdeConfig ode;
    ode.n_steps = opts.ode_steps;
    ode.validate();
    const GaussianPrior prior = prior_for(ck.net);
    const std::size_t d = ck.net.dim();
    if (opts.with_logdensity) {
      const DivergenceMode div = d <= 8 ? DivergenceMode::exact() : DivergenceMode::hutchinson(10);
      const DensitySamples s = sample_with_logdensity(ck.net, prior, opts.n, ode, div, opts.seed);
      write_samples_csv(opts.out_csv, s.samples, &s.log_q, d);
    } else {
      const Matrix s = sample_forward(ck.net, prior, opts.n, ode, opts.seed);
      write_samples_csv(opts.out_csv, s, nullptr, d);
    }
    out << "wrote " << opts.n << " samples to " << opts.out_csv.string() << '\n';
    return static_cast<int>(kExitOk);
  });
}

int cmd_evaluate(const EvaluateOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    require_file(opts.reference, "reference file");
    const RunConfig cfg = load_config(opts.config);
    const Checkpoint ck = load_checkpoint(opts.checkpoint);
    auto system = make_system(cfg);
    disable_energy_floor(*system);
    const SampleTable ref = read_samples_csv(opts.reference);
    if (ref.samples.cols() != system->dim() || ck.net.dim() != system->dim()) {
      throw InvalidInput("dimension mismatch: reference d=" + std::to_string(ref.samples.cols()) + ", checkpoint d=" +
                         std::to_string(ck.net.dim()) + ", system d=" + std::to_string(system->dim()));
    }

    EvalOutputs res = evaluate_model(*system, ck.net, ref.samples, make_eval_options(cfg));
    const fs::path manifest = opts.checkpoint.parent_path() / "manifest.txt";
    if (fs::is_regular_file(manifest)) {
      const auto kv = read_key_value_file(manifest);
      if (auto it = kv.find("eval_count"); it != kv.end()) res.report.eval_count = std::stoull(it->second);
    } else {
      err << "warning: no manifest next to the checkpoint; eval_count reported as 0\n";
    }

    const fs::path dir = opts.out_dir.value_or(opts.checkpoint.parent_path().empty() ? fs::path(".")
                                                                                      : opts.checkpoint.parent_path());
    fs::create_directories(dir);
    write_text(dir / "report.txt", res.report.to_key_value());
    write_text(dir / "report.csv", res.report.csv_header() + "\n" + res.report.csv_row() + "\n");
    write_histogram_csv(dir / "energy_hist.csv", res.energy_hist);
    if (res.distance_hist) write_histogram_csv(dir / "dist_hist.csv", *res.distance_hist);
    write_samples_csv(dir / "model_samples.csv", res.model_samples, nullptr, system->dim());
    out << res.report.to_key_value();
    return static_cast<int>(kExitOk);
  });
}

int cmd_oracle(const OracleOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load_config(opts.config);
    auto system = make_system(cfg);
    disable_energy_floor(*system);
    const MhConfig mh = make_mh_config(cfg);
    const MhResult r = mh_sample(*system, mh, default_initial_states(*system, mh.n_chains, mh.seed));
    for (const auto& w : r.warnings) err << "warning: " << w << '\n';
    write_samples_csv(opts.out_csv, r.samples, nullptr, system->dim());
    std::ostringstream summary;
    summary << "n_samples = " << r.samples.rows() << '\n'
            << "acceptance_rate = " << format_double(r.acceptance_rate) << '\n'
            << "n_chains = " << mh.n_chains << '\n'
            << "step_size = " << format_double(mh.step_size) << '\n';
    fs::path summary_path = opts.out_csv;
    summary_path += ".summary.txt";
    write_text(summary_path, summary.str());
    out << summary.str();
    return static_cast<int>(kExitOk);
  });
}

int cmd_export(const ExportOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    require_file(opts.samples_a, "sample file");
    require_file(opts.samples_b, "sample file");
    const RunConfig cfg = load_config(opts.config);
    auto system = make_system(cfg);
    disable_energy_floor(*system);
    const SampleTable a = read_samples_csv(opts.samples_a);
    const SampleTable b = read_samples_csv(opts.samples_b);
    if (a.samples.cols() != system->dim() || b.samples.cols() != system->dim()) {
      throw InvalidInput("sample dimension differs from the system dimension");
    }
    fs::create_directories(opts.out_dir);
    std::vector<double> ea, eb;
    for (double e : system->energies(a.samples)) {
      if (std::isfinite(e)) ea.push_back(e);
    }
    for (double e : system->energies(b.samples)) {
      if (std::isfinite(e)) eb.push_back(e);
    }
    const auto [lo, hi] = joint_range(eb, eb);
    write_histogram_csv(opts.out_dir / "energy_hist.csv",
                        histogram_densities(ea, eb, cfg.eval.histogram_bins, lo, hi));
    if (system->n_particles() > 0) {
      const auto da = all_pair_distances(a.samples, system->n_particles(), system->space_dim());
      const auto db = all_pair_distances(b.samples, system->n_particles(), system->space_dim());
      const auto [dlo, dhi] = joint_range(da, db);
      write_histogram_csv(opts.out_dir / "dist_hist.csv",
                          histogram_densities(da, db, cfg.eval.histogram_bins, dlo, dhi));
    }
    out << "wrote histogram data to " << opts.out_dir.string() << '\n';
    return static_cast<int>(kExitOk);
  });
}

}  // namespace ewfm
