#include <iostream>

#include "CLI11.hpp"
#include "ewfm/commands.hpp"
#include "ewfm/kernels.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Energy-weighted flow matching: train, sample and evaluate continuous normalizing flows"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ewfm::kVersion));

  ewfm::TrainOptions train;
  auto* c_train = app.add_subcommand("train", "Train a flow from a run config");
  c_train->add_option("config", train.config, "Run config file")->required();
  c_train->add_option("--algo", train.algo, "ewfm | iewfm | aewfm")
      ->check(CLI::IsMember({"ewfm", "iewfm", "aewfm"}))
      ->capture_default_str();
  c_train->add_option("--log-every", train.log_every, "Epochs between progress lines (0: quiet)")->capture_default_str();

  ewfm::SampleOptions sample;
  auto* c_sample = app.add_subcommand("sample", "Draw samples from a checkpoint");
  c_sample->add_option("checkpoint", sample.checkpoint)->required();
  c_sample->add_option("n", sample.n, "Number of samples")->required();
  c_sample->add_option("out", sample.out_csv, "Output CSV")->required();
  c_sample->add_flag("--with-logdensity", sample.with_logdensity, "Append log q for each sample");
  c_sample->add_option("--seed", sample.seed)->capture_default_str();
  c_sample->add_option("--ode-steps", sample.ode_steps)->capture_default_str();

  ewfm::EvaluateOptions eval;
  std::string eval_out;
  auto* c_eval = app.add_subcommand("evaluate", "Compare a checkpoint against reference samples");
  c_eval->add_option("checkpoint", eval.checkpoint)->required();
  c_eval->add_option("reference", eval.reference, "Reference samples CSV")->required();
  c_eval->add_option("config", eval.config, "Run config file")->required();
  c_eval->add_option("--out-dir", eval_out, "Report directory (default: checkpoint directory)");

  ewfm::OracleOptions oracle;
  auto* c_oracle = app.add_subcommand("oracle", "Metropolis-Hastings reference samples for a config's system");
  c_oracle->add_option("config", oracle.config)->required();
  c_oracle->add_option("out", oracle.out_csv, "Output CSV")->required();

  ewfm::ExportOptions exp;
  auto* c_export = app.add_subcommand("export", "Histogram plot data for two sample files");
  c_export->add_option("config", exp.config)->required();
  c_export->add_option("samples_a", exp.samples_a)->required();
  c_export->add_option("samples_b", exp.samples_b)->required();
  c_export->add_option("out_dir", exp.out_dir)->required();

  std::string kernels;
  app.add_option("--kernels", kernels, "Force a kernel set: scalar | avx2");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : ewfm::kExitUsage;
  }

  if (!kernels.empty()) {
    try {
      ewfm::kernels::select(ewfm::kernels::parse_isa(kernels));
    } catch (const std::exception& e) {
      std::cerr << e.what() << '\n';
      return ewfm::kExitUsage;
    }
  }

  if (*c_train) return ewfm::cmd_train(train, std::cout, std::cerr);
  if (*c_sample) return ewfm::cmd_sample(sample, std::cout, std::cerr);
  if (*c_eval) {
    if (!eval_out.empty()) eval.out_dir = eval_out;
    return ewfm::cmd_evaluate(eval, std::cout, std::cerr);
  }
  if (*c_oracle) return ewfm::cmd_oracle(oracle, std::cout, std::cerr);
  return ewfm::cmd_export(exp, std::cout, std::cerr);
}
