#include "ssreg/simulate.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "ssreg/additive.hpp"
#include "ssreg/csv.hpp"
#include "ssreg/estimators.hpp"
#include "ssreg/inference.hpp"
#include "ssreg/lasso.hpp"
#include "ssreg/nodewise.hpp"
#include "ssreg/stats.hpp"
#include "ssreg/tuning.hpp"

namespace ssreg {

std::string method_name(Method m) {
  switch (m) {
    case Method::OSSL: return "OSSL";
    case Method::SSSL: return "SSSL";
    case Method::Dantzig: return "Dantzig";
    case Method::UDantzig: return "UDantzig";
    case Method::DLasso1: return "DLasso1";
    case Method::DLasso2: return "DLasso2";
  }
  return "?";
}

Method method_from_name(const std::string& name) {
  for (Method m : {Method::OSSL, Method::SSSL, Method::Dantzig, Method::UDantzig, Method::DLasso1,
                   Method::DLasso2}) {
    if (method_name(m) == name) return m;
  }
  throw std::invalid_argument("unknown method: " + name);
}

void SimConfig::validate() const {
  if (reps < 1) throw std::invalid_argument("sim config: reps must be >= 1");
  if (n < 10) throw std::invalid_argument("sim config: n must be >= 10");
  if (p < 7) throw std::invalid_argument("sim config: p must be >= 7");
  if (!(alpha > 0 && alpha < 1)) throw std::invalid_argument("sim config: alpha must be in (0,1)");
  if (methods.empty()) throw std::invalid_argument("sim config: no methods selected");
}

namespace {

// AR(1) row with correlation 0.3; X1 = |U1|.
void sample_row(Rng& rng, RowVec& x) {
  const Index p = x.size();
  double u = rng.normal();
  x(0) = std::fabs(u);
  const double rho = 0.3;
  const double scale = std::sqrt(1.0 - rho * rho);
  for (Index j = 1; j < p; ++j) {
    u = rho * u + scale * rng.normal();
    x(j) = u;
  }
}

double f_model1(const Eigen::Ref<const RowVec>& x) {
  return 0.5 * x(0) * x(0) + 0.8 * x(2) * x(2) * x(2) - (x(3) - 2.0) * (x(3) - 2.0) +
         2.0 * (x(4) + 1.0) * (x(4) + 1.0) + 2.0 * x(5);
}

double f_model2(const Eigen::Ref<const RowVec>& x) {
  const double s = x(0) + x(1);
  return 0.6 * s * s + 0.4 * x(3) * x(3) * x(3) - x(4) + 2.0 * x(5);
}

Dataset gen_model(SimModel model, Index n, Index N, Index p, std::uint64_t seed) {
  if (p < 7) throw std::invalid_argument("generator: p must be >= 7");
  Rng rng(Rng::mix(seed, 0xda7a));
  Matrix xl(n, p);
  Vector y(n);
  RowVec row(p);
  for (Index i = 0; i < n; ++i) {
    sample_row(rng, row);
    xl.row(i) = row;
    y(i) = model_f(model, row) + rng.normal();
  }
  Matrix xu(N, p);
  for (Index u = 0; u < N; ++u) {
    sample_row(rng, row);
    xu.row(u) = row;
  }
  return make_dataset(std::move(xl), std::move(y), std::move(xu));
}

}  // namespace

double model_f(SimModel model, const Eigen::Ref<const RowVec>& x) {
  return model == SimModel::model1 ? f_model1(x) : f_model2(x);
}

Dataset gen_model1(Index n, Index N, Index p, std::uint64_t seed) {
  return gen_model(SimModel::model1, n, N, p, seed);
}

Dataset gen_model2(Index n, Index N, Index p, std::uint64_t seed) {
  return gen_model(SimModel::model2, n, N, p, seed);
}

namespace {

struct MomentAccumulator {
  Matrix xx;      // sum X X'
  Vector x_sum;   // sum X
  Vector xf_sum;  // sum X f
  double f_sum = 0.0;
  double ff_sum = 0.0;
  double count = 0.0;
};

MomentAccumulator accumulate_moments(const CustomModel& model, Index p, Index mc,
                                     std::uint64_t seed) {
  MomentAccumulator acc;
  acc.xx = Matrix::Zero(p, p);
  acc.x_sum = Vector::Zero(p);
  acc.xf_sum = Vector::Zero(p);
  Rng rng(Rng::mix(seed, 0x0a0c));
  const Index chunk = 4096;
  Matrix block(chunk, p);
  Vector fblock(chunk);
  RowVec row(p);
  Index done = 0;
  while (done < mc) {
    const Index b = std::min(chunk, mc - done);
    for (Index i = 0; i < b; ++i) {
      model.sample_x(rng, row);
      block.row(i) = row;
      fblock(i) = model.f(row);
    }
    auto xb = block.topRows(b);
    auto fb = fblock.head(b);
    acc.xx.selfadjointView<Eigen::Lower>().rankUpdate(xb.adjoint());
    acc.x_sum += xb.colwise().sum().transpose();
    acc.xf_sum += xb.transpose() * fb;
    acc.f_sum += fb.sum();
    acc.ff_sum += fb.squaredNorm();
    done += b;
  }
  acc.xx.triangularView<Eigen::StrictlyUpper>() = acc.xx.adjoint();
  acc.count = static_cast<double>(mc);
  return acc;
}

Vector project_theta(const MomentAccumulator& acc) {
  const double m = acc.count;
  Vector xbar = acc.x_sum / m;
  const double fbar = acc.f_sum / m;
  Matrix gram_c = acc.xx / m - xbar * xbar.transpose();
  Vector b_c = acc.xf_sum / m - xbar * fbar;
  Eigen::LDLT<Matrix> ldlt(gram_c);
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 1e-12) {
    throw NumericError("theta_star_oracle: singular MC Gram");
  }
  return ldlt.solve(b_c);
}

CustomModel as_custom(SimModel model) {
  CustomModel c;
  c.sample_x = [](Rng& rng, RowVec& row) { sample_row(rng, row); };
  c.f = [model](const Eigen::Ref<const RowVec>& x) { return model_f(model, x); };
  return c;
}

}  // namespace

Vector theta_star_oracle(const CustomModel& model, Index p, Index mc_samples,
                         std::uint64_t seed) {
  if (mc_samples < 100000) {
    throw std::invalid_argument("theta_star_oracle: mc_samples must be >= 1e5");
  }
  return project_theta(accumulate_moments(model, p, mc_samples, seed));
}

Vector theta_star_oracle(SimModel model, Index p, Index mc_samples, std::uint64_t seed) {
  return theta_star_oracle(as_custom(model), p, mc_samples, seed);
}

PhiSqResult phi_sq_oracle(const CustomModel& model, Index p, Index mc_samples, std::uint64_t seed,
                          const Vector* theta_star) {
  MomentAccumulator acc = accumulate_moments(model, p, mc_samples, seed);
  Vector theta = theta_star ? *theta_star : project_theta(acc);
  Vector xbar = acc.x_sum / acc.count;
  const double fbar = acc.f_sum / acc.count;

  // fresh pass in batches for the point estimate and its MC standard error
  Rng rng(Rng::mix(seed, 0x0b1f));
  const int batches = 50;
  const Index per_batch = std::max<Index>(1, mc_samples / batches);
  std::vector<double> batch_means;
  RowVec row(p);
  for (int b = 0; b < batches; ++b) {
    double s = 0.0;
    for (Index i = 0; i < per_batch; ++i) {
      model.sample_x(rng, row);
      const double fc = model.f(row) - fbar;
      const double pred = (row - xbar.transpose()).dot(theta);
      const double r = fc - pred;
      s += r * r;
    }
    batch_means.push_back(s / static_cast<double>(per_batch));
  }
  PhiSqResult out;
  for (double bm : batch_means) out.value += bm;
  out.value /= batches;
  double var = 0.0;
  for (double bm : batch_means) var += (bm - out.value) * (bm - out.value);
  var /= (batches - 1);
  out.std_error = std::sqrt(var / batches);
  return out;
}

PhiSqResult phi_sq_oracle(SimModel model, Index p, Index mc_samples, std::uint64_t seed) {
  return phi_sq_oracle(as_custom(model), p, mc_samples, seed, nullptr);
}

std::vector<BoundPoint> bound_curves(double phi, double sigma, double s, double p, double n,
                                     const std::vector<double>& N_grid, double q) {
  if (!(s > 0) || !(p > s) || !(n > 0)) throw std::invalid_argument("bound_curves: bad parameters");
  const double s_factor = std::isinf(q) ? 1.0 : std::pow(s, 1.0 / q);
  const double log_ps = std::log(p / s);
  const double upper = s * (phi + sigma) * std::sqrt(std::log(p) / n);
  std::vector<BoundPoint> out;
  out.reserve(N_grid.size());
  for (double N : N_grid) {
    BoundPoint pt;
    pt.N = N;
    pt.lower_bound =
        s_factor * (phi * std::sqrt(log_ps / (n + N)) + sigma * std::sqrt(log_ps / n));
    pt.supervised_upper = upper;
    out.push_back(pt);
  }
  return out;
}

const Vector& theta_star_cached(SimModel model, Index p) {
  static std::mutex mu;
  static std::map<std::pair<int, Index>, Vector> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_pair(static_cast<int>(model), p);
  auto it = cache.find(key);
  if (it == cache.end()) {
    it = cache.emplace(key, theta_star_oracle(model, p, 1000000, 0x7e7a5eed)).first;
  }
  return it->second;
}

namespace {

struct RepResult {
  bool ok = false;
  std::string fail_reason;
  std::map<Method, double> l1, l2;
  std::map<Method, Vector> ci_len;  // per-coordinate
  std::map<Method, std::vector<char>> covered;
};

struct ReportSets {
  std::vector<int> report;
  std::vector<int> off_support;
};

ReportSets report_sets(SimModel model, Index p) {
  ReportSets sets;
  std::vector<int> support;
  if (model == SimModel::model1) {
    sets.report = {0, 4, 5};          // X1, X5, X6
    support = {0, 2, 3, 4, 5};        // theta* support
  } else {
    sets.report = {0, 1, 5};          // X1, X2, X6
    support = {0, 1, 3, 4, 5};
  }
  for (Index j = 0; j < p; ++j) {
    bool in_support = false;
    for (int s : support) {
      if (s == static_cast<int>(j)) in_support = true;
    }
    if (!in_support) sets.off_support.push_back(static_cast<int>(j));
  }
  return sets;
}

bool wants(const SimConfig& cfg, Method m) {
  for (Method x : cfg.methods) {
    if (x == m) return true;
  }
  return false;
}

// CV-tuned plain lasso on the labeled rows (baseline initial estimator).
SparseEstimate lasso_cv_fit(const Dataset& d, int folds, std::uint64_t seed, int grid_size) {
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
    Matrix gram = xs.transpose() * xs / nr;
    Vector c = xs.transpose() * ys / nr;
    return lasso_path_gram(gram, c, g, -1, 1e-7, 5000);
  };
  const double lambda = cv_tune(fitter, d.x_labeled, d.y, grid, folds, seed);
  return lasso_cd(d.x_labeled, d.y, lambda);
}

void record_inference(RepResult& rep, Method m, const Vector& point, const Vector& sd_diag,
                      const Vector& theta_star, double alpha, Index n) {
  const Index p = point.size();
  const double z = normal_quantile(1.0 - alpha / 2.0);
  Vector len(p);
  std::vector<char> cov(static_cast<std::size_t>(p));
  const double root_n = std::sqrt(static_cast<double>(n));
  for (Index j = 0; j < p; ++j) {
    const double half = z * sd_diag(j) / root_n;
    len(j) = 2.0 * half;
    const double lo = point(j) - half;
    const double hi = point(j) + half;
    cov[static_cast<std::size_t>(j)] = (lo <= theta_star(j) && theta_star(j) <= hi) ? 1 : 0;
  }
  rep.ci_len[m] = len;
  rep.covered[m] = cov;
}

RepResult run_rep(const SimConfig& cfg, int rep_index, const Vector& theta_star) {
  RepResult rep;
  const std::uint64_t seed_r = Rng::mix(cfg.seed, static_cast<std::uint64_t>(rep_index));
  Dataset raw = (cfg.model == SimModel::model1) ? gen_model1(cfg.n, cfg.N, cfg.p, seed_r)
                                                : gen_model2(cfg.n, cfg.N, cfg.p, seed_r);
  Dataset d = center(raw);
  SplitPlan plan = make_split(cfg.n, cfg.N, Rng::mix(seed_r, 2));

  const bool need_crossfit = wants(cfg, Method::OSSL) || wants(cfg, Method::SSSL);
  const bool need_pooled_omega =
      cfg.with_inference && (wants(cfg, Method::OSSL) || wants(cfg, Method::SSSL) ||
                             wants(cfg, Method::DLasso2));

  CrossFitPredictors preds;
  if (need_crossfit) preds = crossfit(d, plan, cfg.df);

  PrecisionEstimate omega_pooled;
  if (need_pooled_omega) {
    Matrix stacked(d.n() + d.N(), d.p());
    stacked.topRows(d.n()) = d.x_labeled;
    if (d.N() > 0) stacked.bottomRows(d.N()) = d.x_unlabeled;
    omega_pooled = nodewise_precision_cv(stacked, cfg.cv_folds, Rng::mix(seed_r, 3));
  }
  PrecisionEstimate omega_labeled;
  if (cfg.with_inference && wants(cfg, Method::DLasso1)) {
    omega_labeled = nodewise_precision_cv(d.x_labeled, cfg.cv_folds, Rng::mix(seed_r, 4));
  }

  auto record_error = [&](Method m, const Vector& est) {
    rep.l1[m] = (est - theta_star).lpNorm<1>();
    rep.l2[m] = (est - theta_star).norm();
  };

  CvFit tl;
  bool have_tl = false;
  auto ensure_tl = [&]() {
    if (!have_tl) {
      tl = theta_L_cv(d, cfg.cv_folds, Rng::mix(seed_r, 5), cfg.grid_size);
      have_tl = true;
    }
  };

  if (wants(cfg, Method::Dantzig)) {
    ensure_tl();
    record_error(Method::Dantzig, tl.estimate.coef);
  }
  if (wants(cfg, Method::UDantzig)) {
    CvFit tu = theta_U_cv(d, cfg.cv_folds, Rng::mix(seed_r, 6), cfg.grid_size);
    record_error(Method::UDantzig, tu.estimate.coef);
  }

  if (wants(cfg, Method::OSSL)) {
    CvFit td = theta_D_cv(d, plan, preds, cfg.cv_folds, Rng::mix(seed_r, 7), cfg.grid_size);
    record_error(Method::OSSL, td.estimate.coef);
    if (cfg.with_inference) {
      Vector point = debias_efficient(d, plan, preds, td.estimate, omega_pooled);
      VarianceComponents comp;
      comp.sigma_sq_hat = sigma_sq_hat(d, plan, preds);
      comp.gamma_hat = gamma_hat(d, plan, preds, td.estimate, omega_pooled);
      const double rho = static_cast<double>(d.n()) / static_cast<double>(d.n() + d.N());
      Matrix vmat = comp.sigma_sq_hat * omega_pooled.symmetrized() + rho * comp.gamma_hat;
      Vector sd_diag = vmat.diagonal().cwiseMax(0.0).cwiseSqrt();
      record_inference(rep, Method::OSSL, point, sd_diag, theta_star, cfg.alpha, d.n());
    }
  }

  if (wants(cfg, Method::SSSL)) {
    ensure_tl();
    BMatrix b = estimate_B(d, plan, preds, tl.estimate, {}, cfg.cv_folds, Rng::mix(seed_r, 8));
    CvFit ts = theta_S_cv(d, plan, preds, b, cfg.psi, cfg.cv_folds, Rng::mix(seed_r, 9),
                          cfg.grid_size);
    record_error(Method::SSSL, ts.estimate.coef);
    if (cfg.with_inference) {
      Vector point = debias_safe(d, plan, preds, tl.estimate, b, omega_pooled, cfg.psi);
      VarianceComponents comp = gamma_psi_hat(d, plan, preds, tl.estimate, b, cfg.psi);
      Matrix vmat = omega_pooled.omega * comp.gamma_sym * omega_pooled.omega.transpose();
      Vector sd_diag = vmat.diagonal().cwiseMax(0.0).cwiseSqrt();
      record_inference(rep, Method::SSSL, point, sd_diag, theta_star, cfg.alpha, d.n());
    }
  }

  if (wants(cfg, Method::DLasso1) || wants(cfg, Method::DLasso2)) {
    SparseEstimate lasso_fit = lasso_cv_fit(d, cfg.cv_folds, Rng::mix(seed_r, 10), cfg.grid_size);
    Matrix khat;
    if (cfg.with_inference) khat = sandwich_k(d, lasso_fit.coef);
    for (Method m : {Method::DLasso1, Method::DLasso2}) {
      if (!wants(cfg, m)) continue;
      record_error(m, lasso_fit.coef);
      if (!cfg.with_inference) continue;
      const PrecisionEstimate& om = (m == Method::DLasso1) ? omega_labeled : omega_pooled;
      Vector point = debias_supervised(d, lasso_fit.coef, om.omega);
      Matrix vmat = om.omega * khat * om.omega.transpose();
      Vector sd_diag = vmat.diagonal().cwiseMax(0.0).cwiseSqrt();
      record_inference(rep, m, point, sd_diag, theta_star, cfg.alpha, d.n());
    }
  }

  rep.ok = true;
  return rep;
}

}  // namespace

std::string SimMetrics::csv_header() { return "model,p,n,N,reps,method,metric,mean,sd"; }

namespace {

std::pair<double, double> mean_sd(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var = v.size() > 1 ? var / static_cast<double>(v.size() - 1) : 0.0;
  return {mean, std::sqrt(var)};
}

}  // namespace

std::vector<std::string> SimMetrics::csv_rows() const {
  std::vector<std::string> rows;
  const std::string prefix =
      std::string(config.model == SimModel::model1 ? "model1" : "model2") + "," +
      std::to_string(config.p) + "," + std::to_string(config.n) + "," + std::to_string(config.N) +
      "," + std::to_string(config.reps);
  auto emit = [&](Method m, const std::string& metric, const std::vector<double>& v) {
    auto [mean, sd] = mean_sd(v);
    rows.push_back(prefix + "," + method_name(m) + "," + metric + "," + format_double(mean) + "," +
                   format_double(sd));
  };
  for (const auto& [m, mm] : by_method) {
    emit(m, "l1_error", mm.l1);
    emit(m, "l2_error", mm.l2);
    if (!mm.has_inference()) continue;
    for (std::size_t t = 0; t < report_coords.size(); ++t) {
      std::vector<double> len, cov;
      for (const auto& arr : mm.len_targets) len.push_back(arr[t]);
      for (const auto& arr : mm.cov_targets) cov.push_back(arr[t]);
      const std::string label = "x" + std::to_string(report_coords[t] + 1);
      emit(m, "ci_length_" + label, len);
      emit(m, "coverage_" + label, cov);
    }
    emit(m, "ci_length_off_support", mm.len_off);
    emit(m, "coverage_off_support", mm.cov_off);
  }
  return rows;
}

SimMetrics run_experiment(const SimConfig& config) {
  config.validate();
  const Vector& theta_star = theta_star_cached(config.model, config.p);
  ReportSets sets = report_sets(config.model, config.p);

  std::vector<RepResult> results(static_cast<std::size_t>(config.reps));
  std::atomic<int> next{0};
  auto worker = [&]() {
    while (true) {
      const int r = next.fetch_add(1);
      if (r >= config.reps) break;
      try {
        results[static_cast<std::size_t>(r)] = run_rep(config, r, theta_star);
      } catch (const std::exception& e) {
        results[static_cast<std::size_t>(r)].ok = false;
        results[static_cast<std::size_t>(r)].fail_reason = e.what();
      }
    }
  };
  const int threads = std::max(1, config.threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  SimMetrics metrics;
  metrics.config = config;
  metrics.report_coords = sets.report;
  metrics.off_support = sets.off_support;
  for (Method m : config.methods) metrics.by_method[m] = MethodMetrics{};

  for (int r = 0; r < config.reps; ++r) {
    const RepResult& rep = results[static_cast<std::size_t>(r)];
    if (!rep.ok) {
      ++metrics.failed_reps;
      metrics.failures.push_back("rep " + std::to_string(r) + ": " + rep.fail_reason);
      continue;
    }
    for (Method m : config.methods) {
      MethodMetrics& mm = metrics.by_method[m];
      mm.l1.push_back(rep.l1.at(m));
      mm.l2.push_back(rep.l2.at(m));
      auto it = rep.ci_len.find(m);
      if (it == rep.ci_len.end()) continue;
      const Vector& len = it->second;
      const auto& cov = rep.covered.at(m);
      std::array<double, 3> lt{}, ct{};
      for (std::size_t t = 0; t < sets.report.size(); ++t) {
        lt[t] = len(sets.report[t]);
        ct[t] = cov[static_cast<std::size_t>(sets.report[t])];
      }
      mm.len_targets.push_back(lt);
      mm.cov_targets.push_back(ct);
      double lo = 0.0, co = 0.0;
      for (int j : sets.off_support) {
        lo += len(j);
        co += cov[static_cast<std::size_t>(j)];
      }
      mm.len_off.push_back(lo / static_cast<double>(sets.off_support.size()));
      mm.cov_off.push_back(co / static_cast<double>(sets.off_support.size()));
    }
  }

  if (metrics.failed_reps > config.reps / 10) {
    std::ostringstream msg;
    msg << "run_experiment: " << metrics.failed_reps << "/" << config.reps
        << " replications failed";
    if (!metrics.failures.empty()) msg << " (first: " << metrics.failures.front() << ")";
    throw NumericError(msg.str());
  }
  return metrics;
}

}  // namespace ssreg
