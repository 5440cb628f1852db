#include "ssreg/cli.hpp"

#include <CLI11.hpp>
#include <iostream>
#include <map>

#include "ssreg/csv.hpp"
#include "ssreg/estimators.hpp"
#include "ssreg/inference.hpp"
#include "ssreg/nodewise.hpp"
#include "ssreg/rng.hpp"
#include "ssreg/simulate.hpp"
#include "ssreg/tuning.hpp"

namespace ssreg::cli {

namespace {

SimModel parse_model(const std::string& name) {
  if (name == "model1") return SimModel::model1;
  if (name == "model2") return SimModel::model2;
  throw std::invalid_argument("unknown model: " + name);
}

struct LoadedData {
  Dataset data;
  std::vector<std::string> names;
};

LoadedData load_and_center(const std::string& labeled, const std::string& unlabeled,
                           const std::string& response, bool impute, bool standardize) {
  LoadedData out;
  out.data = load_dataset(labeled, unlabeled, response, impute, &out.names);
  out.data = center(out.data, standardize);
  return out;
}

struct FitContext {
  SplitPlan plan;
  CrossFitPredictors preds;
  bool have_preds = false;
  PrecisionEstimate omega_pooled;
  bool have_pooled = false;
  PrecisionEstimate omega_labeled;
  bool have_labeled = false;
  CvFit theta_l;
  bool have_theta_l = false;
  BMatrix b;
  bool have_b = false;
};

FitContext make_context(const Dataset& d, std::uint64_t seed) {
  FitContext ctx;
  ctx.plan = make_split(d.n(), d.N(), Rng::mix(seed, 2));
  return ctx;
}

void ensure_preds(FitContext& ctx, const Dataset& d, int df) {
  if (!ctx.have_preds) {
    ctx.preds = crossfit(d, ctx.plan, df);
    ctx.have_preds = true;
  }
}

void ensure_pooled_omega(FitContext& ctx, const Dataset& d, int folds, std::uint64_t seed) {
  if (!ctx.have_pooled) {
    Matrix stacked(d.n() + d.N(), d.p());
    stacked.topRows(d.n()) = d.x_labeled;
    if (d.N() > 0) stacked.bottomRows(d.N()) = d.x_unlabeled;
    ctx.omega_pooled = nodewise_precision_cv(stacked, folds, Rng::mix(seed, 3));
    ctx.have_pooled = true;
  }
}

void ensure_theta_l(FitContext& ctx, const Dataset& d, int folds, std::uint64_t seed,
                    int grid_size) {
  if (!ctx.have_theta_l) {
    ctx.theta_l = theta_L_cv(d, folds, Rng::mix(seed, 5), grid_size);
    ctx.have_theta_l = true;
  }
}

void ensure_b(FitContext& ctx, const Dataset& d, int df, int folds, std::uint64_t seed,
              int grid_size) {
  ensure_preds(ctx, d, df);
  ensure_theta_l(ctx, d, folds, seed, grid_size);
  if (!ctx.have_b) {
    ctx.b = estimate_B(d, ctx.plan, ctx.preds, ctx.theta_l.estimate, {}, folds,
                       Rng::mix(seed, 8));
    ctx.have_b = true;
  }
}

SparseEstimate lasso_cv_labeled(const Dataset& d, int folds, std::uint64_t seed, int grid_size) {
  const double lmax = labeled_score(d).cwiseAbs().maxCoeff();
  if (!(lmax > 0)) return lasso_cd(d.x_labeled, d.y, 0.0);
  std::vector<double> grid = geometric_grid(lmax, grid_size);
  PathFitter fitter = [&](const std::vector<int>& rows, const std::vector<double>& g) {
    Matrix xs(rows.size(), d.p());
    Vector ys(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      xs.row(static_cast<Index>(i)) = d.x_labeled.row(rows[i]);
      ys(static_cast<Index>(i)) = d.y(rows[i]);
    }
    const double nr = static_cast<double>(rows.size());
    return lasso_path_gram(xs.transpose() * xs / nr, xs.transpose() * ys / nr, g, -1, 1e-7, 5000);
  };
  double lambda = cv_tune(fitter, d.x_labeled, d.y, grid, folds, seed);
  return lasso_cd(d.x_labeled, d.y, lambda);
}

}  // namespace

void run_estimate(const EstimateArgs& args) {
  LoadedData loaded =
      load_and_center(args.labeled, args.unlabeled, args.response, args.impute_mean,
                      args.standardize);
  const Dataset& d = loaded.data;
  FitContext ctx = make_context(d, args.seed);

  std::vector<std::string> rows;
  for (const std::string& name : args.methods) {
    Method m = method_from_name(name);
    Vector coef;
    switch (m) {
      case Method::Dantzig: {
        if (args.lambda >= 0) {
          coef = theta_L(d, args.lambda).coef;
        } else {
          ensure_theta_l(ctx, d, args.folds, args.seed, args.grid_size);
          coef = ctx.theta_l.estimate.coef;
        }
        break;
      }
      case Method::UDantzig: {
        coef = args.lambda >= 0
                   ? theta_U(d, args.lambda).coef
                   : theta_U_cv(d, args.folds, Rng::mix(args.seed, 6), args.grid_size)
                         .estimate.coef;
        break;
      }
      case Method::OSSL: {
        ensure_preds(ctx, d, args.df);
        coef = args.lambda >= 0
                   ? theta_D(d, ctx.plan, ctx.preds, args.lambda).coef
                   : theta_D_cv(d, ctx.plan, ctx.preds, args.folds, Rng::mix(args.seed, 7),
                                args.grid_size)
                         .estimate.coef;
        break;
      }
      case Method::SSSL: {
        ensure_b(ctx, d, args.df, args.folds, args.seed, args.grid_size);
        coef = args.lambda >= 0
                   ? theta_S(d, ctx.plan, ctx.preds, ctx.b, args.psi, args.lambda).coef
                   : theta_S_cv(d, ctx.plan, ctx.preds, ctx.b, args.psi, args.folds,
                                Rng::mix(args.seed, 9), args.grid_size)
                         .estimate.coef;
        break;
      }
      default:
        throw std::invalid_argument("estimate: method '" + name + "' is inference-only");
    }
    Vector original_scale = unscale_coef(d, coef);
    for (Index j = 0; j < d.p(); ++j) {
      rows.push_back(name + "," + loaded.names[static_cast<std::size_t>(j)] + "," +
                     format_double(original_scale(j)));
    }
  }
  write_csv(args.out, "method,coef,estimate", rows);
}

void run_infer(const InferArgs& args) {
  LoadedData loaded =
      load_and_center(args.labeled, args.unlabeled, args.response, args.impute_mean,
                      args.standardize);
  const Dataset& d = loaded.data;
  FitContext ctx = make_context(d, args.seed);

  std::vector<std::string> rows;
  for (const std::string& name : args.methods) {
    Method m = method_from_name(name);
    Vector point, sd_diag;
    switch (m) {
      case Method::OSSL: {
        ensure_preds(ctx, d, args.df);
        ensure_pooled_omega(ctx, d, args.folds, args.seed);
        CvFit td = theta_D_cv(d, ctx.plan, ctx.preds, args.folds, Rng::mix(args.seed, 7),
                              args.grid_size);
        point = debias_efficient(d, ctx.plan, ctx.preds, td.estimate, ctx.omega_pooled);
        VarianceComponents comp;
        comp.sigma_sq_hat = sigma_sq_hat(d, ctx.plan, ctx.preds);
        comp.gamma_hat = gamma_hat(d, ctx.plan, ctx.preds, td.estimate, ctx.omega_pooled);
        const double rho = static_cast<double>(d.n()) / static_cast<double>(d.n() + d.N());
        Matrix vmat =
            comp.sigma_sq_hat * ctx.omega_pooled.symmetrized() + rho * comp.gamma_hat;
        sd_diag = vmat.diagonal().cwiseMax(0.0).cwiseSqrt();
        break;
      }
      case Method::SSSL: {
        ensure_b(ctx, d, args.df, args.folds, args.seed, args.grid_size);
        ensure_pooled_omega(ctx, d, args.folds, args.seed);
        point = debias_safe(d, ctx.plan, ctx.preds, ctx.theta_l.estimate, ctx.b,
                            ctx.omega_pooled, args.psi);
        VarianceComponents comp =
            gamma_psi_hat(d, ctx.plan, ctx.preds, ctx.theta_l.estimate, ctx.b, args.psi);
        Matrix vmat =
            ctx.omega_pooled.omega * comp.gamma_sym * ctx.omega_pooled.omega.transpose();
        sd_diag = vmat.diagonal().cwiseMax(0.0).cwiseSqrt();
        break;
      }
      case Method::DLasso1:
      case Method::DLasso2: {
        SparseEstimate lasso_fit =
            lasso_cv_labeled(d, args.folds, Rng::mix(args.seed, 10), args.grid_size);
        const PrecisionEstimate* om = nullptr;
        if (m == Method::DLasso1) {
          if (!ctx.have_labeled) {
            ctx.omega_labeled =
                nodewise_precision_cv(d.x_labeled, args.folds, Rng::mix(args.seed, 4));
            ctx.have_labeled = true;
          }
          om = &ctx.omega_labeled;
        } else {
          ensure_pooled_omega(ctx, d, args.folds, args.seed);
          om = &ctx.omega_pooled;
        }
        point = debias_supervised(d, lasso_fit.coef, om->omega);
        Matrix khat = sandwich_k(d, lasso_fit.coef);
        Matrix vmat = om->omega * khat * om->omega.transpose();
        sd_diag = vmat.diagonal().cwiseMax(0.0).cwiseSqrt();
        break;
      }
      default:
        throw std::invalid_argument("infer: method '" + name + "' has no debiased form");
    }

    std::vector<double> pvals;
    std::vector<InferenceResult> results;
    for (Index j = 0; j < d.p(); ++j) {
      const double scale = d.x_scales(j);
      double sd = sd_diag(j);
      if (!(sd > 0)) throw NumericError("degenerate variance for coefficient " + std::to_string(j));
      InferenceResult r = ci_and_test(point(j) / scale, sd / scale, d.n(), args.alpha, {}, name);
      pvals.push_back(r.p_value);
      results.push_back(std::move(r));
    }
    std::vector<double> holm = holm_adjust(pvals);
    for (Index j = 0; j < d.p(); ++j) {
      const auto& r = results[static_cast<std::size_t>(j)];
      rows.push_back(name + "," + loaded.names[static_cast<std::size_t>(j)] + "," +
                     format_double(r.point) + "," + format_double(r.sd) + "," +
                     format_double(r.ci_low) + "," + format_double(r.ci_high) + "," +
                     format_double(r.p_value) + "," +
                     format_double(holm[static_cast<std::size_t>(j)]));
    }
  }
  write_csv(args.out, "method,coef,estimate,sd,ci_low,ci_high,p,p_holm", rows);
}

void run_simulate(const SimulateArgs& args) {
  std::vector<std::string> rows;
  for (std::uint64_t N : args.N_list) {
    SimConfig cfg;
    cfg.model = parse_model(args.model);
    cfg.n = static_cast<Index>(args.n);
    cfg.N = static_cast<Index>(N);
    cfg.p = static_cast<Index>(args.p);
    cfg.reps = args.reps;
    cfg.alpha = args.alpha;
    cfg.psi = args.psi;
    cfg.seed = args.seed;
    cfg.threads = args.threads;
    for (const auto& name : args.methods) cfg.methods.push_back(method_from_name(name));
    SimMetrics metrics = run_experiment(cfg);
    for (auto& row : metrics.csv_rows()) rows.push_back(std::move(row));
    for (const auto& f : metrics.failures) std::cerr << "warning: " << f << "\n";
  }
  write_csv(args.out, SimMetrics::csv_header(), rows);
}

void run_oracle(const OracleArgs& args) {
  std::vector<std::string> rows;
  if (args.what == "theta_star") {
    Vector theta = theta_star_oracle(parse_model(args.model), static_cast<Index>(args.p),
                                     static_cast<Index>(args.samples), args.seed);
    for (Index j = 0; j < theta.size(); ++j) {
      rows.push_back("x" + std::to_string(j + 1) + "," + format_double(theta(j)));
    }
    write_csv(args.out, "coef,value", rows);
  } else if (args.what == "phi_sq") {
    PhiSqResult r = phi_sq_oracle(parse_model(args.model), static_cast<Index>(args.p),
                                  static_cast<Index>(args.samples), args.seed);
    rows.push_back(format_double(r.value) + "," + format_double(r.std_error));
    write_csv(args.out, "phi_sq,std_error", rows);
  } else if (args.what == "bounds") {
    std::vector<double> grid = args.N_grid;
    if (grid.empty()) {
      for (int k = 0; k <= 8; ++k) grid.push_back(static_cast<double>(args.n) * k);
    }
    auto pts = bound_curves(args.phi, args.sigma, args.s, static_cast<double>(args.p),
                            static_cast<double>(args.n), grid,
                            args.q <= 0 ? std::numeric_limits<double>::infinity() : args.q);
    for (const auto& pt : pts) {
      rows.push_back(format_double(pt.N) + "," + format_double(pt.lower_bound) + "," +
                     format_double(pt.supervised_upper));
    }
    write_csv(args.out, "N,lower_bound,supervised_upper", rows);
  } else {
    throw std::invalid_argument("oracle: unknown target '" + args.what + "'");
  }
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Semi-supervised high-dimensional linear regression estimators and inference"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "configuration file with [subcommand] sections of key = value; flags win; "
                 "place before the subcommand");

  EstimateArgs est;
  InferArgs inf;
  SimulateArgs sim;
  OracleArgs ora;

  auto* est_cmd = app.add_subcommand("estimate", "Fit sparse coefficient estimates");
  est_cmd->add_option("--labeled", est.labeled, "labeled CSV path")->required();
  est_cmd->add_option("--unlabeled", est.unlabeled, "unlabeled CSV path");
  est_cmd->add_option("--response", est.response, "response column name");
  est_cmd->add_option("--method", est.methods, "methods (Dantzig,UDantzig,OSSL,SSSL)")
      ->delimiter(',');
  est_cmd->add_option("--lambda", est.lambda, "fixed lambda (default: 5-fold CV)");
  est_cmd->add_option("--psi", est.psi, "safe-path psi");
  est_cmd->add_option("--seed", est.seed, "RNG seed");
  est_cmd->add_option("--out", est.out, "output CSV path");
  est_cmd->add_flag("--impute-mean", est.impute_mean, "mean-impute missing covariate cells");
  est_cmd->add_flag("--standardize", est.standardize, "unit-variance column scaling");
  est_cmd->add_option("--df", est.df, "spline degrees of freedom");
  est_cmd->add_option("--folds", est.folds, "CV folds");
  est_cmd->add_option("--grid-size", est.grid_size, "lambda grid size");

  auto* inf_cmd = app.add_subcommand("infer", "Debiased confidence intervals and tests");
  inf_cmd->add_option("--labeled", inf.labeled, "labeled CSV path")->required();
  inf_cmd->add_option("--unlabeled", inf.unlabeled, "unlabeled CSV path");
  inf_cmd->add_option("--response", inf.response, "response column name");
  inf_cmd->add_option("--method", inf.methods, "methods (OSSL,SSSL,DLasso1,DLasso2)")
      ->delimiter(',');
  inf_cmd->add_option("--alpha", inf.alpha, "CI level is 1 - alpha");
  inf_cmd->add_option("--psi", inf.psi, "safe-path psi");
  inf_cmd->add_option("--seed", inf.seed, "RNG seed");
  inf_cmd->add_option("--out", inf.out, "output CSV path");
  inf_cmd->add_flag("--impute-mean", inf.impute_mean, "mean-impute missing covariate cells");
  inf_cmd->add_flag("--standardize", inf.standardize, "unit-variance column scaling");
  inf_cmd->add_option("--df", inf.df, "spline degrees of freedom");
  inf_cmd->add_option("--folds", inf.folds, "CV folds");
  inf_cmd->add_option("--grid-size", inf.grid_size, "lambda grid size");

  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo study");
  sim_cmd->add_option("--model", sim.model, "model1 or model2");
  sim_cmd->add_option("--n", sim.n, "labeled sample size");
  sim_cmd->add_option("--N", sim.N_list, "unlabeled sizes (comma list)")->delimiter(',');
  sim_cmd->add_option("--p", sim.p, "dimension");
  sim_cmd->add_option("--reps", sim.reps, "replications");
  sim_cmd->add_option("--method", sim.methods, "methods")->delimiter(',');
  sim_cmd->add_option("--alpha", sim.alpha, "CI level is 1 - alpha");
  sim_cmd->add_option("--psi", sim.psi, "safe-path psi");
  sim_cmd->add_option("--seed", sim.seed, "RNG seed");
  sim_cmd->add_option("--threads", sim.threads, "worker threads");
  sim_cmd->add_option("--out", sim.out, "output CSV path");

  auto* ora_cmd = app.add_subcommand("oracle", "theta*, Phi^2 and bound tables");
  ora_cmd->add_option("--what", ora.what, "theta_star | phi_sq | bounds");
  ora_cmd->add_option("--model", ora.model, "model1 or model2");
  ora_cmd->add_option("--p", ora.p, "dimension");
  ora_cmd->add_option("--samples", ora.samples, "Monte Carlo samples");
  ora_cmd->add_option("--seed", ora.seed, "RNG seed");
  ora_cmd->add_option("--out", ora.out, "output CSV path");
  ora_cmd->add_option("--phi", ora.phi, "bounds: Phi");
  ora_cmd->add_option("--sigma", ora.sigma, "bounds: sigma");
  ora_cmd->add_option("--s", ora.s, "bounds: sparsity");
  ora_cmd->add_option("--q", ora.q, "bounds: norm exponent (<= 0 for infinity)");
  ora_cmd->add_option("--n", ora.n, "bounds: labeled size");
  ora_cmd->add_option("--N", ora.N_grid, "bounds: N grid (comma list)")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (est_cmd->parsed()) run_estimate(est);
    if (inf_cmd->parsed()) run_infer(inf);
    if (sim_cmd->parsed()) run_simulate(sim);
    if (ora_cmd->parsed()) run_oracle(ora);
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace ssreg::cli
