#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#include "gdpen/certification.hpp"
#include "gdpen/experiment.hpp"
#include "gdpen/io.hpp"
#include "gdpen/report.hpp"
#include "gdpen/solver.hpp"

using namespace gdpen;
namespace fs = std::filesystem;

namespace {

struct LossArgs {
  std::string data;
  std::string response;
  std::string kind = "squared";
  int n = 0;
};

void add_loss_options(CLI::App* cmd, LossArgs& a) {
  cmd->add_option("--data", a.data,
                  "squared: design X; logdet: sample covariance; gaussian/bernoulli/poisson: "
                  "rows of sufficient statistics")
      ->required();
  cmd->add_option("--response", a.response, "response y (squared loss)");
  cmd->add_option("--loss", a.kind, "squared|logdet|gaussian|bernoulli|poisson")
      ->check(CLI::IsMember({"squared", "logdet", "gaussian", "bernoulli", "poisson"}));
  cmd->add_option("--n", a.n, "sample count behind the covariance (logdet)");
}

LossPtr build_loss(const LossArgs& a) {
  const Matrix data = read_matrix(a.data);
  if (a.kind == "squared") {
    if (a.response.empty()) throw Error("--response is required for the squared loss");
    return std::make_shared<SquaredLoss>(data, read_vector(a.response));
  }
  if (a.kind == "logdet") {
    if (a.n < 1) throw Error("--n is required for the logdet loss");
    return std::make_shared<LogDetLoss>(data, a.n);
  }
  const Vector phi_bar = data.colwise().mean().transpose();
  const int n = static_cast<int>(data.rows());
  if (a.kind == "gaussian") return std::make_shared<ExpFamilyLoss>(phi_bar, gaussian_log_partition(), n);
  if (a.kind == "bernoulli") return std::make_shared<ExpFamilyLoss>(phi_bar, bernoulli_log_partition(), n);
  return std::make_shared<ExpFamilyLoss>(phi_bar, poisson_log_partition(), n);
}

std::optional<ErrorNorm> parse_norm(const std::string& s) {
  if (s.empty()) return std::nullopt;
  if (s == "linf") return ErrorNorm::Linf;
  if (s == "l2") return ErrorNorm::L2;
  if (s == "group_linf") return ErrorNorm::GroupLinf;
  throw Error("unknown error norm '" + s + "'");
}

std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
  if (out.empty()) throw Error("empty lambda grid");
  for (double l : out)
    if (!(l > 0.0)) throw Error("lambda values must be positive");
  return out;
}

int exit_code(Verdict v) {
  switch (v) {
    case Verdict::Pass: return 0;
    case Verdict::Fail: return 2;
    case Verdict::Indeterminate: return 3;
  }
  return 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certification and estimation with geometrically decomposable penalties"};
  app.require_subcommand(1);

  // phase
  std::string phase_config, phase_out;
  std::optional<std::uint64_t> phase_seed;
  bool phase_serial = false;
  auto* phase = app.add_subcommand("phase", "run a phase-transition sweep");
  phase->add_option("--config", phase_config, "JSON config")->required();
  phase->add_option("--out", phase_out, "output directory")->required();
  phase->add_option("--seed", phase_seed, "master seed (overrides the config)");
  phase->add_flag("--serial", phase_serial, "run trials on one thread");

  // certify
  std::string cert_q, cert_penalty, cert_theta, cert_norm, cert_json;
  std::optional<double> cert_grad;
  std::uint64_t cert_seed = 0;
  auto* cert = app.add_subcommand("certify", "check irrepresentability and compute constants");
  cert->add_option("--q", cert_q, "Hessian Q (CSV or .mtx)")->required();
  cert->add_option("--penalty", cert_penalty, "penalty JSON")->required();
  cert->add_option("--theta-star", cert_theta, "true parameter (must lie in M)");
  cert->add_option("--grad-norm", cert_grad, "error norm of the gradient at theta_star");
  cert->add_option("--error-norm", cert_norm, "linf|l2|group_linf");
  cert->add_option("--json", cert_json, "also write the report to this file");
  cert->add_option("--seed", cert_seed, "seed for sampled constants");

  // fit
  LossArgs fit_loss;
  std::string fit_penalty, fit_grid, fit_out;
  std::optional<double> fit_lambda;
  double fit_tol = 1e-8;
  int fit_iter = 50000;
  auto* fit = app.add_subcommand("fit", "solve the penalized problem");
  add_loss_options(fit, fit_loss);
  fit->add_option("--penalty", fit_penalty, "penalty JSON")->required();
  auto* fl = fit->add_option("--lambda", fit_lambda, "regularization weight");
  auto* fg = fit->add_option("--lambda-grid", fit_grid, "comma-separated weights");
  fl->excludes(fg);
  fit->add_option("--out", fit_out, "output directory")->required();
  fit->add_option("--tol", fit_tol, "stopping tolerance");
  fit->add_option("--max-iter", fit_iter, "iteration cap");

  // witness
  LossArgs wit_loss;
  std::string wit_penalty, wit_out;
  double wit_lambda = 0.0;
  auto* wit = app.add_subcommand("witness", "restricted solve followed by the dual certificate");
  add_loss_options(wit, wit_loss);
  wit->add_option("--penalty", wit_penalty, "penalty JSON built on the true model")->required();
  wit->add_option("--lambda", wit_lambda, "regularization weight")->required();
  wit->add_option("--out", wit_out, "write the JSON report here instead of stdout");

  // converse
  std::string conv_q, conv_theta, conv_out;
  ConverseOptions conv_opts;
  auto* conv = app.add_subcommand("converse", "empirical success when irrepresentability fails");
  conv->add_option("--q", conv_q, "population covariance")->required();
  conv->add_option("--theta-star", conv_theta, "true parameter")->required();
  conv->add_option("--trials", conv_opts.trials, "trials per lambda");
  conv->add_option("--n", conv_opts.n, "samples per trial");
  conv->add_option("--sigma", conv_opts.sigma, "noise level");
  conv->add_option("--seed", conv_opts.seed, "master seed");
  conv->add_option("--out", conv_out, "write the JSON report here instead of stdout");

  // plot
  std::string plot_in, plot_out;
  auto* plot = app.add_subcommand("plot", "render phase.json as SVG");
  plot->add_option("--in", plot_in, "phase JSON")->required();
  plot->add_option("--out", plot_out, "SVG path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*phase) {
      PhaseConfig cfg = phase_config_from_json(Json::parse(read_text(phase_config)));
      if (phase_seed) cfg.master_seed = *phase_seed;
      const PhaseResult res = run_phase(cfg, phase_serial ? Execution::Serial : Execution::Parallel);
      emit_report(res, phase_out);
      for (const SizeSummary& s : res.sizes) {
        std::cout << "size " << s.size << ": 50% crossing n = ";
        if (s.crossing_n) std::cout << *s.crossing_n << " (rescaled " << *s.crossing_rescaled << ")";
        else std::cout << "not reached";
        std::cout << '\n';
      }
      return 0;
    }
    if (*cert) {
      const Penalty rho = read_penalty(cert_penalty);
      const Matrix q = read_matrix(cert_q);
      CertifyOptions opts;
      opts.error_norm = parse_norm(cert_norm);
      opts.seed = cert_seed;
      if (!cert_theta.empty()) {
        const Vector ts = read_vector(cert_theta);
        require_dim(ts.size(), rho.dim(), "--theta-star");
        if (!rho.M().contains(ts)) throw Error("theta_star does not lie in the model subspace");
        opts.theta_star = ts;
      }
      CertificateReport rep = certify_quadratic(q, rho, opts);
      if (cert_grad) {
        rep.has_gradient = true;
        rep.grad_norm = *cert_grad;
        rep.lambda_window = lambda_window(rep, rep.grad_norm);
      }
      const std::string js = to_json(rep).dump(2);
      std::cout << js << "\n\n" << certificate_table(rep);
      if (!cert_json.empty()) write_text(cert_json, js + "\n");
      return exit_code(rep.overall());
    }
    if (*fit) {
      const LossPtr loss = build_loss(fit_loss);
      const Penalty rho = read_penalty(fit_penalty);
      std::vector<double> grid;
      if (fit_lambda) grid = {*fit_lambda};
      else if (!fit_grid.empty()) grid = parse_grid(fit_grid);
      else throw Error("one of --lambda or --lambda-grid is required");
      fs::create_directories(fit_out);
      SolverOptions so;
      so.tol = fit_tol;
      so.max_iter = fit_iter;
      Json all = Json::array();
      for (size_t k = 0; k < grid.size(); ++k) {
        const EstimateResult er = solve(*loss, rho, grid[k], so);
        if (er.converged) so.init = er.theta_hat;
        Json j = to_json(er);
        j["lambda"] = grid[k];
        const std::string stem = grid.size() == 1 ? "estimate" : "estimate_" + std::to_string(k);
        write_text(fs::path(fit_out) / (stem + ".json"), j.dump(2) + "\n");
        write_vector_csv(fs::path(fit_out) / (stem == "estimate" ? "theta_hat.csv"
                                                                : "theta_hat_" + std::to_string(k) + ".csv"),
                         er.theta_hat);
        std::cout << "lambda " << grid[k] << ": objective " << er.objective << ", "
                  << er.iterations << " iterations, "
                  << (er.converged ? "converged" : "NOT converged") << '\n';
        all.push_back(std::move(j));
      }
      if (grid.size() > 1) write_text(fs::path(fit_out) / "path.json", all.dump(2) + "\n");
      return 0;
    }
    if (*wit) {
      const LossPtr loss = build_loss(wit_loss);
      const Penalty rho = read_penalty(wit_penalty);
      if (!(wit_lambda > 0.0)) throw Error("--lambda must be positive");
      const EstimateResult rr = solve_restricted(*loss, rho, wit_lambda);
      const WitnessReport w = dual_certificate(*loss, rho, wit_lambda, rr.theta_hat);
      const std::string js = to_json(w).dump(2) + "\n";
      if (wit_out.empty()) std::cout << js;
      else write_text(wit_out, js);
      return w.certified_unique ? 0 : (w.indeterminate ? 3 : 2);
    }
    if (*conv) {
      const Matrix q = read_matrix(conv_q);
      const Vector ts = read_vector(conv_theta);
      IndexSet active;
      for (int i = 0; i < ts.size(); ++i)
        if (ts[i] != 0.0) active.push_back(i);
      const Penalty rho = make_lasso(static_cast<int>(ts.size()), active);
      const ConverseReport rep = converse_check(rho, q, ts, conv_opts);
      const std::string js = to_json(rep).dump(2) + "\n";
      if (conv_out.empty()) std::cout << js;
      else write_text(conv_out, js);
      return 0;
    }
    if (*plot) {
      const PhaseResult res = phase_result_from_json(Json::parse(read_text(plot_in)));
      write_text(plot_out, phase_svg(res));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
