#include "sirep/detectors.hpp"

#include "sirep/errors.hpp"
#include "sirep/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace sirep {

double euclidean(const Eigen::MatrixXd& a, Eigen::Index i, const Eigen::MatrixXd& b, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    const double d = a(i, c) - b(j, c);
    s += d * d;
  }
  return std::sqrt(s);
}

// --- LOF ----------------------------------------------------------------------

namespace {

constexpr double kLrdEpsilon = 1e-10;

// Distances from row `i` of `from` to every training point; `skip` (if >= 0)
// is excluded from the neighborhood.
void row_distances(const Eigen::MatrixXd& from, Eigen::Index i, const Eigen::MatrixXd& train, std::vector<double>& d) {
  d.resize(static_cast<std::size_t>(train.rows()));
  for (Eigen::Index j = 0; j < train.rows(); ++j) d[static_cast<std::size_t>(j)] = euclidean(from, i, train, j);
}

double kth_smallest(const std::vector<double>& d, Eigen::Index skip, int k, std::vector<double>& scratch) {
  scratch.clear();
  for (std::size_t j = 0; j < d.size(); ++j)
    if (static_cast<Eigen::Index>(j) != skip) scratch.push_back(d[j]);
  std::nth_element(scratch.begin(), scratch.begin() + (k - 1), scratch.end());
  return scratch[static_cast<std::size_t>(k - 1)];
}

// Mean reachability distance over the tie-inclusive neighborhood, and the
// neighbor list in index order.
double mean_reach(const std::vector<double>& d, Eigen::Index skip, double kd, const std::vector<double>& train_kd,
                  std::vector<std::size_t>& neighbors) {
  neighbors.clear();
  double sum = 0.0;
  for (std::size_t j = 0; j < d.size(); ++j) {
    if (static_cast<Eigen::Index>(j) == skip || d[j] > kd) continue;
    neighbors.push_back(j);
    sum += std::max(train_kd[j], d[j]);
  }
  return sum / static_cast<double>(neighbors.size());
}

}  // namespace

LofModel lof_fit(const Eigen::MatrixXd& train, int k) {
  const Eigen::Index n = train.rows();
  if (k < 1 || k >= n) {
    throw ConfigError("LOF needs 1 <= k < number of training points (k = " + std::to_string(k) +
                      ", n = " + std::to_string(n) + ")");
  }
  LofModel m;
  m.train = train;
  m.k = k;
  m.k_distance.resize(static_cast<std::size_t>(n));
  m.lrd.resize(static_cast<std::size_t>(n));
  std::vector<double> d, scratch;
  for (Eigen::Index i = 0; i < n; ++i) {
    row_distances(train, i, train, d);
    m.k_distance[static_cast<std::size_t>(i)] = kth_smallest(d, i, k, scratch);
  }
  std::vector<std::size_t> nb;
  for (Eigen::Index i = 0; i < n; ++i) {
    row_distances(train, i, train, d);
    const double r = mean_reach(d, i, m.k_distance[static_cast<std::size_t>(i)], m.k_distance, nb);
    m.lrd[static_cast<std::size_t>(i)] = 1.0 / (r + kLrdEpsilon);
  }
  return m;
}

std::vector<double> lof_score(const LofModel& model, const Eigen::MatrixXd& queries) {
  if (queries.rows() > 0 && queries.cols() != model.train.cols()) throw DataError("LOF query dimension mismatch");
  std::vector<double> out(static_cast<std::size_t>(queries.rows()));
  std::vector<double> d, scratch;
  std::vector<std::size_t> nb;
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    row_distances(queries, q, model.train, d);
    const double kd = kth_smallest(d, -1, model.k, scratch);
    const double lrd_q = 1.0 / (mean_reach(d, -1, kd, model.k_distance, nb) + kLrdEpsilon);
    double sum = 0.0;
    for (auto j : nb) sum += model.lrd[j];
    out[static_cast<std::size_t>(q)] = sum / static_cast<double>(nb.size()) / lrd_q;
  }
  return out;
}

std::vector<double> lof_scores(const Eigen::MatrixXd& train, const Eigen::MatrixXd& queries, int k) {
  return lof_score(lof_fit(train, k), queries);
}

// --- LSA ----------------------------------------------------------------------

namespace {

Eigen::VectorXd rbf_features(const LsaModel& m, const Eigen::MatrixXd& pts, Eigen::Index i) {
  Eigen::VectorXd phi(m.centers.rows());
  for (Eigen::Index c = 0; c < m.centers.rows(); ++c) {
    const double d = euclidean(pts, i, m.centers, c);
    phi(c) = std::exp(-m.gamma * d * d);
  }
  return phi;
}

}  // namespace

LsaModel lsa_fit(const Eigen::MatrixXd& train, const LsaConfig& config) {
  const Eigen::Index n = train.rows();
  if (n == 0) throw DataError("LSA needs training points");
  if (config.centers < 1) throw ConfigError("LSA needs at least one center");
  if (!(config.rho > 0.0) || !(config.ridge > 0.0) || config.gamma < 0.0) {
    throw ConfigError("LSA rho and ridge must be positive, gamma non-negative");
  }
  const Eigen::Index n_centers = std::min<Eigen::Index>(config.centers, n);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  Rng rng = make_rng(config.seed, 31);
  for (Eigen::Index i = 0; i < n_centers; ++i) {
    const auto j = i + static_cast<Eigen::Index>(uniform01(rng) * static_cast<double>(n - i));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  LsaModel m;
  m.rho = config.rho;
  m.centers.resize(n_centers, train.cols());
  for (Eigen::Index i = 0; i < n_centers; ++i) m.centers.row(i) = train.row(idx[static_cast<std::size_t>(i)]);

  m.gamma = config.gamma;
  if (m.gamma == 0.0) {
    std::vector<double> sq;
    for (Eigen::Index i = 0; i < n_centers; ++i)
      for (Eigen::Index j = i + 1; j < n_centers; ++j) {
        const double d = euclidean(m.centers, i, m.centers, j);
        sq.push_back(d * d);
      }
    double med = 0.0;
    if (!sq.empty()) {
      std::nth_element(sq.begin(), sq.begin() + static_cast<std::ptrdiff_t>(sq.size() / 2), sq.end());
      med = sq[sq.size() / 2];
    }
    m.gamma = med > 0.0 ? 1.0 / med : 1.0;
  }

  Eigen::MatrixXd phi(n, n_centers);
  for (Eigen::Index i = 0; i < n; ++i) phi.row(i) = rbf_features(m, train, i).transpose();
  Eigen::MatrixXd gram = phi.transpose() * phi;
  gram.diagonal().array() += config.ridge;
  const Eigen::VectorXd rhs = phi.transpose() * Eigen::VectorXd::Ones(n);
  m.theta = gram.ldlt().solve(rhs);
  return m;
}

double lsa_score(const LsaModel& model, const Eigen::VectorXd& z) {
  if (z.size() != model.centers.cols()) throw DataError("LSA query dimension mismatch");
  const Eigen::MatrixXd row = z.transpose();
  const double inlier = std::max(0.0, model.theta.dot(rbf_features(model, row, 0)));
  return model.rho / (inlier + model.rho);
}

std::vector<double> lsa_scores(const LsaModel& model, const Eigen::MatrixXd& queries) {
  std::vector<double> out(static_cast<std::size_t>(queries.rows()));
  for (Eigen::Index i = 0; i < queries.rows(); ++i) out[static_cast<std::size_t>(i)] = lsa_score(model, queries.row(i).transpose());
  return out;
}

// --- Neural detector ----------------------------------------------------------

namespace {

Eigen::MatrixXd standardize(const NnDetector& m, const Eigen::MatrixXd& latents) {
  // rows are samples; the network wants columns
  Eigen::MatrixXd x = latents.transpose();
  x.colwise() -= m.mean;
  x.array().colwise() /= m.scale.array();
  return x;
}

}  // namespace

NnDetector nn_detector_train(const Eigen::MatrixXd& latents, std::span<const int> labels, const NnDetectorConfig& config) {
  const auto n = static_cast<std::size_t>(latents.rows());
  if (n == 0 || labels.size() != n) throw DataError("detector training needs one label per latent");
  const auto valid = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (valid == 0 || valid == n) throw DataError("the supervised detector needs both classes");
  if (config.epochs < 1 || config.batch_size < 1) throw ConfigError("detector epochs and batch size must be >= 1");

  NnDetector m;
  m.mean = latents.colwise().mean().transpose();
  m.scale = ((latents.rowwise() - m.mean.transpose()).array().square().colwise().mean()).sqrt().transpose();
  for (Eigen::Index i = 0; i < m.scale.size(); ++i)
    if (!(m.scale(i) > 1e-12)) m.scale(i) = 1.0;

  std::vector<LayerSpec> spec;
  std::size_t in = static_cast<std::size_t>(latents.cols());
  for (auto h : config.hidden) {
    spec.push_back({in, h, Activation::relu});
    in = h;
  }
  spec.push_back({in, 1, Activation::sigmoid});
  m.net = xavier_init(spec, derive_seed(config.seed, 41));

  const Eigen::MatrixXd x = standardize(m, latents);
  AdamState adam;
  const auto bs = static_cast<std::size_t>(config.batch_size);
  Eigen::MatrixXd batch;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, config.lr0, config.decay);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(derive_seed(config.seed, 42) ^ static_cast<std::uint64_t>(epoch));
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i))]);
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t b = std::min(bs, n - start);
      batch.resize(x.rows(), static_cast<Eigen::Index>(b));
      for (std::size_t i = 0; i < b; ++i) batch.col(static_cast<Eigen::Index>(i)) = x.col(static_cast<Eigen::Index>(perm[start + i]));
      ForwardTrace trace;
      const Eigen::MatrixXd p = forward(m.net, batch, trace);
      Eigen::MatrixXd dp = Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(b));
      for (std::size_t i = 0; i < b; ++i) {
        const double pi = p(0, static_cast<Eigen::Index>(i));
        if (pi <= kProbabilityClamp || pi >= 1.0 - kProbabilityClamp) continue;
        const int y = labels[perm[start + i]];
        dp(0, static_cast<Eigen::Index>(i)) = (y == 1 ? -1.0 / pi : 1.0 / (1.0 - pi)) / static_cast<double>(b);
      }
      NetworkGrad g = zero_grad(m.net);
      backward(m.net, trace, dp, g);
      adam_step(adam, parameter_blocks(m.net), gradient_blocks(g), lr);
    }
  }
  return m;
}

std::vector<double> nn_detector_predict(const NnDetector& model, const Eigen::MatrixXd& latents) {
  if (latents.rows() > 0 && latents.cols() != model.mean.size()) throw DataError("detector input dimension mismatch");
  const Eigen::MatrixXd p = model.net.forward(standardize(model, latents));
  return {p.data(), p.data() + p.size()};
}

double nn_detector_predict(const NnDetector& model, const Eigen::VectorXd& z) {
  const Eigen::MatrixXd row = z.transpose();
  return nn_detector_predict(model, row).front();
}

// --- Evaluation -------------------------------------------------------------------

std::string_view to_string(DetectorKind k) {
  switch (k) {
    case DetectorKind::lof: return "lof";
    case DetectorKind::lsa: return "lsa";
    case DetectorKind::nn: return "nn";
  }
  return "?";
}

DetectionReport evaluate_scores(DetectorKind kind, std::span<const double> anomaly_scores, std::span<const int> labels,
                                double threshold) {
  if (anomaly_scores.empty()) throw DataError("cannot evaluate a detector on an empty test set");
  if (anomaly_scores.size() != labels.size()) throw DataError("score and label counts differ");
  DetectionReport r;
  r.detector = kind;
  r.threshold = threshold;
  r.scores.assign(anomaly_scores.begin(), anomaly_scores.end());
  r.labels.assign(labels.begin(), labels.end());
  r.predictions.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int pred = anomaly_scores[i] > threshold ? 0 : 1;
    r.predictions[i] = pred;
    if (labels[i] == 1) {
      (pred == 1 ? r.confusion.true_valid : r.confusion.false_invalid)++;
    } else {
      (pred == 0 ? r.confusion.true_invalid : r.confusion.false_valid)++;
    }
  }
  const auto& c = r.confusion;
  r.accuracy = 100.0 * static_cast<double>(c.true_valid + c.true_invalid) / static_cast<double>(c.total());
  const std::size_t invalid = c.true_invalid + c.false_valid;
  r.tnr = invalid == 0 ? 0.0 : 100.0 * static_cast<double>(c.true_invalid) / static_cast<double>(invalid);
  return r;
}

double tune_threshold(std::span<const double> anomaly_scores, std::span<const int> labels) {
  const std::size_t n = anomaly_scores.size();
  if (n == 0 || labels.size() != n) throw DataError("threshold tuning needs one label per score");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return anomaly_scores[a] < anomaly_scores[b]; });
  std::size_t invalid_total = 0;
  for (int y : labels) invalid_total += y == 0;
  // i = number of lowest scores predicted valid.
  std::size_t valid_below = 0, invalid_below = 0;
  std::size_t best_correct = invalid_total;
  double best_t = anomaly_scores[order.front()] - 1.0;
  for (std::size_t i = 1; i <= n; ++i) {
    (labels[order[i - 1]] == 1 ? valid_below : invalid_below)++;
    const double lo = anomaly_scores[order[i - 1]];
    if (i < n && !(anomaly_scores[order[i]] > lo)) continue;
    const std::size_t correct = valid_below + (invalid_total - invalid_below);
    if (correct > best_correct) {
      best_correct = correct;
      if (i == n) {
        best_t = lo;
      } else {
        const double mid = 0.5 * (lo + anomaly_scores[order[i]]);
        best_t = mid < anomaly_scores[order[i]] ? mid : lo;
      }
    }
  }
  return best_t;
}

nlohmann::json to_json(const DetectionReport& r) {
  return {{"detector", std::string(to_string(r.detector))},
          {"accuracy", r.accuracy},
          {"tnr", r.tnr},
          {"threshold", r.threshold},
          {"n", r.confusion.total()},
          {"confusion",
           {{"true_valid", r.confusion.true_valid},
            {"false_invalid", r.confusion.false_invalid},
            {"true_invalid", r.confusion.true_invalid},
            {"false_valid", r.confusion.false_valid}}}};
}

void write_scores_csv(const DetectionReport& r, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.precision(17);
  out << "sample_id,score,label,prediction\n";
  for (std::size_t i = 0; i < r.scores.size(); ++i) {
    out << i << ',' << r.scores[i] << ',' << r.labels[i] << ',' << r.predictions[i] << '\n';
  }
}

DetectorSuiteConfig detector_suite_config_from_json(const nlohmann::json& j) {
  DetectorSuiteConfig c;
  try {
    c.lof_k = j.value("lof_k", c.lof_k);
    c.fit_fraction = j.value("fit_fraction", c.fit_fraction);
    c.seed = j.value("seed", c.seed);
    if (j.contains("lsa")) {
      const auto& l = j.at("lsa");
      c.lsa.centers = l.value("centers", c.lsa.centers);
      c.lsa.gamma = l.value("gamma", c.lsa.gamma);
      c.lsa.rho = l.value("rho", c.lsa.rho);
      c.lsa.ridge = l.value("ridge", c.lsa.ridge);
    }
    if (j.contains("nn")) {
      const auto& n = j.at("nn");
      if (n.contains("hidden")) c.nn.hidden = n.at("hidden").get<std::vector<std::size_t>>();
      c.nn.epochs = n.value("epochs", c.nn.epochs);
      c.nn.batch_size = n.value("batch_size", c.nn.batch_size);
      c.nn.lr0 = n.value("lr0", c.nn.lr0);
      c.nn.decay = n.value("decay", c.nn.decay);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed detector config: ") + e.what());
  }
  if (!(c.fit_fraction > 0.0 && c.fit_fraction < 1.0)) throw ConfigError("fit_fraction must lie in (0, 1)");
  return c;
}

nlohmann::json to_json(const DetectorSuiteConfig& c) {
  return {{"lof_k", c.lof_k},
          {"fit_fraction", c.fit_fraction},
          {"seed", c.seed},
          {"lsa", {{"centers", c.lsa.centers}, {"gamma", c.lsa.gamma}, {"rho", c.lsa.rho}, {"ridge", c.lsa.ridge}}},
          {"nn",
           {{"hidden", c.nn.hidden},
            {"epochs", c.nn.epochs},
            {"batch_size", c.nn.batch_size},
            {"lr0", c.nn.lr0},
            {"decay", c.nn.decay}}}};
}

namespace {

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

}  // namespace

std::vector<DetectionReport> run_detectors(const Eigen::MatrixXd& train_latents, std::span<const int> train_labels,
                                           const Eigen::MatrixXd& test_latents, std::span<const int> test_labels,
                                           const DetectorSuiteConfig& config) {
  if (test_latents.rows() == 0) throw DataError("test split is empty");
  if (static_cast<std::size_t>(train_latents.rows()) != train_labels.size() ||
      static_cast<std::size_t>(test_latents.rows()) != test_labels.size()) {
    throw DataError("latent and label counts differ");
  }
  std::vector<Eigen::Index> valid, invalid;
  for (std::size_t i = 0; i < train_labels.size(); ++i) (train_labels[i] == 1 ? valid : invalid).push_back(static_cast<Eigen::Index>(i));
  if (valid.size() < 2) throw DataError("detectors need valid training latents");

  Rng rng = make_rng(config.seed, 21);
  for (std::size_t i = valid.size(); i > 1; --i) std::swap(valid[i - 1], valid[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i))]);
  const auto n_fit = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::lround(config.fit_fraction * static_cast<double>(valid.size()))));
  std::vector<Eigen::Index> fit(valid.begin(), valid.begin() + static_cast<std::ptrdiff_t>(std::min(n_fit, valid.size())));
  std::vector<Eigen::Index> tune(valid.begin() + static_cast<std::ptrdiff_t>(fit.size()), valid.end());
  tune.insert(tune.end(), invalid.begin(), invalid.end());
  std::sort(fit.begin(), fit.end());
  std::sort(tune.begin(), tune.end());
  const Eigen::MatrixXd fit_set = take_rows(train_latents, fit);
  const Eigen::MatrixXd tune_set = take_rows(train_latents, tune);
  std::vector<int> tune_labels;
  for (auto i : tune) tune_labels.push_back(train_labels[static_cast<std::size_t>(i)]);

  std::vector<DetectionReport> out;
  {
    const LofModel lof = lof_fit(fit_set, config.lof_k);
    const double t = tune_labels.empty() ? 1.5 : tune_threshold(lof_score(lof, tune_set), tune_labels);
    out.push_back(evaluate_scores(DetectorKind::lof, lof_score(lof, test_latents), test_labels, t));
  }
  {
    LsaConfig lc = config.lsa;
    lc.seed = derive_seed(config.seed, 22);
    const LsaModel lsa = lsa_fit(fit_set, lc);
    const double t = tune_labels.empty() ? 0.5 : tune_threshold(lsa_scores(lsa, tune_set), tune_labels);
    out.push_back(evaluate_scores(DetectorKind::lsa, lsa_scores(lsa, test_latents), test_labels, t));
  }
  {
    NnDetectorConfig nc = config.nn;
    nc.seed = derive_seed(config.seed, 23);
    const NnDetector nn = nn_detector_train(train_latents, train_labels, nc);
    std::vector<double> anomaly = nn_detector_predict(nn, test_latents);
    for (auto& p : anomaly) p = 1.0 - p;
    out.push_back(evaluate_scores(DetectorKind::nn, anomaly, test_labels, 0.5));
  }
  return out;
}

}  // namespace sirep
