#include "gdpen/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace gdpen {

namespace {

Json num(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

Json opt(const std::optional<double>& x) { return x ? num(*x) : Json(nullptr); }

double get_num(const Json& j, const char* key, double fallback = 0.0) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<double>();
}

Json vec(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
  return a;
}

Json interval(const Interval& iv) { return Json{{"lo", num(iv.lo)}, {"hi", num(iv.hi)}}; }

Family family_from(const std::string& s) {
  if (s == "lasso") return Family::Lasso;
  if (s == "generalized_lasso") return Family::GeneralizedLasso;
  if (s == "group_glasso") return Family::GroupGlasso;
  throw Error("unknown family '" + s + "'");
}

LambdaRule rule_from(const std::string& s) {
  if (s == "theory") return LambdaRule::Theory;
  if (s == "proportional") return LambdaRule::Proportional;
  throw Error("unknown lambda_rule '" + s + "'");
}

Graph graph_from(const std::string& s) {
  if (s == "chain") return Graph::Chain;
  if (s == "grid") return Graph::Grid;
  throw Error("unknown graph '" + s + "'");
}

std::string fmt(double x, int digits = 6) {
  if (!std::isfinite(x)) return x > 0 ? "inf" : (x < 0 ? "-inf" : "nan");
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

std::string fixed(double x, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

}  // namespace

Json to_json(const PhaseConfig& c) {
  return Json{{"family", to_string(c.family)},
              {"sizes", c.sizes},
              {"n_grid", c.n_grid},
              {"trials", c.trials},
              {"sigma", c.sigma},
              {"tau_target", c.tau_target},
              {"master_seed", c.master_seed},
              {"lambda_rule", to_string(c.lambda_rule)},
              {"lambda_const", c.lambda_const},
              {"sparsity", c.sparsity},
              {"theta_min", c.theta_min},
              {"graph", to_string(c.graph)},
              {"block_size", c.block_size},
              {"delta", c.delta},
              {"edge_weight", c.edge_weight},
              {"eps_supp", c.eps_supp},
              {"tol", c.tol},
              {"max_iter", c.max_iter},
              {"attach_certificates", c.attach_certificates}};
}

PhaseConfig phase_config_from_json(const Json& j) {
  PhaseConfig c;
  if (!j.is_object()) throw Error("phase config must be a JSON object");
  static const char* known[] = {"family",      "sizes",     "n_grid",     "trials",
                                "sigma",       "tau_target", "master_seed", "lambda_rule",
                                "lambda_const", "sparsity", "theta_min",  "graph",
                                "block_size",  "delta",     "edge_weight", "eps_supp",
                                "tol",         "max_iter",  "attach_certificates"};
  for (const auto& [key, _] : j.items())
    if (std::find_if(std::begin(known), std::end(known),
                     [&](const char* k) { return key == k; }) == std::end(known))
      throw Error("phase config: unknown key '" + key + "'");
  if (j.contains("family")) c.family = family_from(j.at("family").get<std::string>());
  if (j.contains("sizes")) c.sizes = j.at("sizes").get<std::vector<int>>();
  if (j.contains("n_grid")) c.n_grid = j.at("n_grid").get<std::vector<int>>();
  if (j.contains("trials")) c.trials = j.at("trials").get<int>();
  if (j.contains("sigma")) c.sigma = j.at("sigma").get<double>();
  if (j.contains("tau_target")) c.tau_target = j.at("tau_target").get<double>();
  if (j.contains("master_seed")) c.master_seed = j.at("master_seed").get<std::uint64_t>();
  if (j.contains("lambda_rule")) c.lambda_rule = rule_from(j.at("lambda_rule").get<std::string>());
  if (j.contains("lambda_const")) c.lambda_const = j.at("lambda_const").get<double>();
  if (j.contains("sparsity")) c.sparsity = j.at("sparsity").get<int>();
  if (j.contains("theta_min")) c.theta_min = j.at("theta_min").get<double>();
  if (j.contains("graph")) c.graph = graph_from(j.at("graph").get<std::string>());
  if (j.contains("block_size")) c.block_size = j.at("block_size").get<int>();
  if (j.contains("delta")) c.delta = j.at("delta").get<double>();
  if (j.contains("edge_weight")) c.edge_weight = j.at("edge_weight").get<double>();
  if (j.contains("eps_supp")) c.eps_supp = j.at("eps_supp").get<double>();
  if (j.contains("tol")) c.tol = j.at("tol").get<double>();
  if (j.contains("max_iter")) c.max_iter = j.at("max_iter").get<int>();
  if (j.contains("attach_certificates"))
    c.attach_certificates = j.at("attach_certificates").get<bool>();
  return c;
}

Json to_json(const PhaseResult& res) {
  Json cells = Json::array();
  for (const PhaseCell& c : res.cells) {
    Json jc{{"size", c.size},
            {"n", c.n},
            {"trials", c.trials},
            {"successes", c.successes},
            {"nonconverged", c.nonconverged},
            {"success_fraction", c.success_fraction},
            {"mean_l2_error", num(c.mean_l2_error)},
            {"lambda", num(c.lambda)},
            {"rescaled_axis", num(c.rescaled)},
            {"certified", c.certified}};
    if (!c.records.empty()) {
      Json recs = Json::array();
      for (const TrialRecord& r : c.records) {
        Json jr{{"seed", r.seed},          {"success", r.success},
                {"converged", r.converged}, {"l2_error", num(r.l2_error)},
                {"lambda", num(r.lambda)},  {"iterations", r.iterations}};
        if (!r.error.empty()) jr["error"] = r.error;
        if (r.has_certificate) {
          jr["irrep_ub"] = num(r.irrep_ub);
          jr["window_lo"] = num(r.window_lo);
          jr["in_window"] = r.in_window;
        }
        recs.push_back(std::move(jr));
      }
      jc["trials_detail"] = std::move(recs);
    }
    cells.push_back(std::move(jc));
  }
  Json sizes = Json::array();
  for (const SizeSummary& s : res.sizes)
    sizes.push_back(Json{{"size", s.size},
                         {"dim", s.dim},
                         {"groups", s.groups},
                         {"max_group", s.max_group},
                         {"crossing_n", opt(s.crossing_n)},
                         {"crossing_rescaled", opt(s.crossing_rescaled)}});
  return Json{{"config", to_json(res.config)}, {"cells", cells}, {"sizes", sizes}};
}

PhaseResult phase_result_from_json(const Json& j) {
  PhaseResult res;
  res.config = phase_config_from_json(j.at("config"));
  for (const Json& js : j.at("sizes")) {
    SizeSummary s;
    s.size = js.at("size").get<int>();
    s.dim = js.at("dim").get<int>();
    s.groups = js.at("groups").get<int>();
    s.max_group = js.at("max_group").get<int>();
    if (!js.at("crossing_n").is_null()) s.crossing_n = js.at("crossing_n").get<double>();
    if (!js.at("crossing_rescaled").is_null())
      s.crossing_rescaled = js.at("crossing_rescaled").get<double>();
    res.sizes.push_back(s);
  }
  for (const Json& jc : j.at("cells")) {
    PhaseCell c;
    c.size = jc.at("size").get<int>();
    c.n = jc.at("n").get<int>();
    c.trials = jc.at("trials").get<int>();
    c.successes = jc.at("successes").get<int>();
    c.nonconverged = jc.at("nonconverged").get<int>();
    c.success_fraction = jc.at("success_fraction").get<double>();
    c.mean_l2_error = get_num(jc, "mean_l2_error");
    c.lambda = get_num(jc, "lambda");
    c.rescaled = get_num(jc, "rescaled_axis");
    c.certified = jc.value("certified", 0);
    for (size_t i = 0; i < res.sizes.size(); ++i)
      if (res.sizes[i].size == c.size) c.size_index = static_cast<int>(i);
    const auto& grid = res.config.n_grid;
    c.n_index = static_cast<int>(std::find(grid.begin(), grid.end(), c.n) - grid.begin());
    res.cells.push_back(std::move(c));
  }
  return res;
}

Json to_json(const CertificateReport& r) {
  Json j{{"irrepresentable", to_string(r.irrepresentable)},
         {"irrep_sup", interval(r.irrep_sup)},
         {"irrep_method", r.irrep_method},
         {"face_sampling", r.face_sampling},
         {"tau", num(r.tau)},
         {"tau_bar", num(r.tau_bar)},
         {"tau_bar_raw", num(r.tau_bar_raw)},
         {"tau_bar_restricted", num(r.tau_bar_restricted)},
         {"kappa_err", num(r.kappa_err)},
         {"kappa_err_star", num(r.kappa_err_star)},
         {"kappa_A", num(r.kappa_A)},
         {"constants_estimated", r.constants_estimated},
         {"m_C", num(r.m_C)},
         {"L_C", num(r.L_C)},
         {"rss", to_string(r.rss)},
         {"error_norm", to_string(r.error_norm)},
         {"overall", to_string(r.overall())}};
  if (r.has_gradient) {
    j["grad_norm"] = num(r.grad_norm);
    j["lambda_window"] = Json{{"lo", num(r.lambda_window.lo)},
                              {"hi", num(r.lambda_window.hi)},
                              {"empty", r.lambda_window.empty},
                              {"degenerate", r.lambda_window.degenerate}};
  }
  if (r.m_C > 0.0) j["error_bound_coefficient"] = num(r.error_bound_coefficient());
  return j;
}

Json to_json(const WitnessReport& w) {
  return Json{{"lambda", num(w.lambda)},
              {"theta_hat", vec(w.theta_hat)},
              {"u_A", vec(w.u_A)},
              {"u_I", vec(w.u_I)},
              {"u_S_perp", vec(w.u_S_perp)},
              {"gauge_I_of_u_I", num(w.gauge_I_of_u_I)},
              {"stationarity_residual", num(w.stationarity_residual)},
              {"certified_unique", w.certified_unique},
              {"indeterminate", w.indeterminate}};
}

Json to_json(const EstimateResult& r) {
  return Json{{"theta_hat", vec(r.theta_hat)},
              {"objective", num(r.objective)},
              {"iterations", r.iterations},
              {"stationarity_residual", num(r.stationarity_residual)},
              {"converged", r.converged},
              {"support", r.support},
              {"solver", r.solver}};
}

Json to_json(const ConverseReport& r) {
  return Json{{"applicable", r.applicable},
              {"reason", r.reason},
              {"violation", num(r.violation)},
              {"lambdas", r.lambdas},
              {"successes", r.successes},
              {"trials", r.trials},
              {"max_success", num(r.max_success)},
              {"best_lambda", num(r.best_lambda)},
              {"wilson", interval(r.wilson)}};
}

std::string phase_csv(const PhaseResult& res) {
  std::ostringstream os;
  os << "size,n,trials,successes,nonconverged,success_fraction,mean_l2_error,lambda,"
        "rescaled_axis,certified\n";
  for (const PhaseCell& c : res.cells)
    os << c.size << ',' << c.n << ',' << c.trials << ',' << c.successes << ','
       << c.nonconverged << ',' << fmt(c.success_fraction, 17) << ','
       << fmt(c.mean_l2_error, 17) << ',' << fmt(c.lambda, 17) << ',' << fmt(c.rescaled, 17)
       << ',' << c.certified << '\n';
  return os.str();
}

std::string phase_svg(const PhaseResult& res) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                 "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
  const double pw = 360, ph = 240, ml = 50, mt = 30, gap = 70;
  const double width = ml + 2 * pw + gap + 20, height = mt + ph + 60;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed(width, 0) << "\" height=\""
     << fixed(height, 0) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (int panel = 0; panel < 2; ++panel) {
    const double x0 = ml + panel * (pw + gap);
    double xmin = kInf, xmax = -kInf;
    for (const PhaseCell& c : res.cells) {
      const double x = panel == 0 ? c.n : c.rescaled;
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
    }
    if (!(xmin < xmax)) {
      xmin = std::isfinite(xmin) ? xmin - 1 : 0;
      xmax = xmin + 2;
    }
    auto sx = [&](double x) { return x0 + (x - xmin) / (xmax - xmin) * pw; };
    auto sy = [&](double y) { return mt + (1.0 - y) * ph; };

    os << "<rect x=\"" << fixed(x0) << "\" y=\"" << fixed(mt) << "\" width=\"" << fixed(pw)
       << "\" height=\"" << fixed(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
      const double y = k / 4.0;
      os << "<line x1=\"" << fixed(x0) << "\" y1=\"" << fixed(sy(y)) << "\" x2=\""
         << fixed(x0 + pw) << "\" y2=\"" << fixed(sy(y)) << "\" stroke=\"#ddd\"/>\n";
      os << "<text x=\"" << fixed(x0 - 6) << "\" y=\"" << fixed(sy(y) + 4)
         << "\" text-anchor=\"end\">" << fixed(y) << "</text>\n";
    }
    for (int k = 0; k <= 4; ++k) {
      const double x = xmin + k * (xmax - xmin) / 4.0;
      os << "<text x=\"" << fixed(sx(x)) << "\" y=\"" << fixed(mt + ph + 16)
         << "\" text-anchor=\"middle\">" << fmt(x, 4) << "</text>\n";
    }
    os << "<text x=\"" << fixed(x0 + pw / 2) << "\" y=\"" << fixed(mt + ph + 36)
       << "\" text-anchor=\"middle\">"
       << (panel == 0 ? "n" : "n / (max group size * log #groups)") << "</text>\n";
    os << "<text x=\"" << fixed(x0 + pw / 2) << "\" y=\"" << fixed(mt - 10)
       << "\" text-anchor=\"middle\">success fraction (" << to_string(res.config.family)
       << ")</text>\n";

    for (size_t si = 0; si < res.sizes.size(); ++si) {
      const char* color = colors[si % 8];
      std::ostringstream pts;
      bool first = true;
      for (const PhaseCell& c : res.cells) {
        if (c.size_index != static_cast<int>(si)) continue;
        const double x = panel == 0 ? c.n : c.rescaled;
        pts << (first ? "" : " ") << fixed(sx(x)) << ',' << fixed(sy(c.success_fraction));
        first = false;
        os << "<circle cx=\"" << fixed(sx(x)) << "\" cy=\"" << fixed(sy(c.success_fraction))
           << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
      }
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"" << pts.str()
         << "\"/>\n";
      if (panel == 0)
        os << "<text x=\"" << fixed(x0 + 8) << "\" y=\"" << fixed(mt + 14 + 14 * si)
           << "\" fill=\"" << color << "\">size " << res.sizes[si].size << "</text>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

std::string certificate_table(const CertificateReport& r) {
  std::ostringstream os;
  auto row = [&](const std::string& k, const std::string& v) {
    os << k;
    for (size_t i = k.size(); i < 22; ++i) os << ' ';
    os << v << '\n';
  };
  row("irrepresentable", std::string(to_string(r.irrepresentable)) + "  sup in [" +
                             fmt(r.irrep_sup.lo) + ", " + fmt(r.irrep_sup.hi) + "] (" +
                             r.irrep_method + ")");
  row("tau", fmt(r.tau));
  row("tau_bar", fmt(r.tau_bar) + (r.constants_estimated ? "  (estimated)" : ""));
  if (std::isfinite(r.tau_bar_restricted)) row("tau_bar on M", fmt(r.tau_bar_restricted));
  row("kappa_err", fmt(r.kappa_err));
  row("kappa_err*", fmt(r.kappa_err_star));
  row("kappa_A", fmt(r.kappa_A));
  row("m_C", fmt(r.m_C));
  row("L_C", fmt(r.L_C));
  row("rss", to_string(r.rss));
  row("error norm", to_string(r.error_norm));
  if (r.has_gradient) {
    row("grad norm", fmt(r.grad_norm));
    row("lambda window", r.lambda_window.empty
                             ? std::string("empty")
                             : "(" + fmt(r.lambda_window.lo) + ", " + fmt(r.lambda_window.hi) + ")");
  }
  row("overall", to_string(r.overall()));
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void emit_report(const PhaseResult& res, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create '" + dir.string() + "': " + ec.message());
  write_text(dir / "phase.json", to_json(res).dump(2) + "\n");
  write_text(dir / "phase.csv", phase_csv(res));
  write_text(dir / "phase.svg", phase_svg(res));
}

}  // namespace gdpen
