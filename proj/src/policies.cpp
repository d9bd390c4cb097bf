#include "cpc/policies.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>
#include <string>

namespace cpc {

namespace {

double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

std::vector<double> cumulative(std::span<const double> probs) {
  std::vector<double> cdf(probs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    cdf[i] = acc;
  }
  return cdf;
}

std::size_t invert_cdf(const std::vector<double>& cdf, double u) {
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u * cdf.back());
  return std::min(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

void check_probability_vector(std::span<const double> probs, const char* who) {
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument(std::string(who) + ": negative probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument(std::string(who) + ": probabilities must sum to 1");
}

}  // namespace

// ---------------------------------------------------------------- discrete

DiscretePolicy::DiscretePolicy(std::vector<Point> points, std::vector<double> probs) : points_(std::move(points)) {
  if (points_.empty()) throw std::invalid_argument("DiscretePolicy: empty support");
  if (points_.size() != probs.size()) throw std::invalid_argument("DiscretePolicy: size mismatch");
  check_probability_vector(probs, "DiscretePolicy");
  double total = 0.0;
  for (double p : probs) total += p;
  log_probs_.resize(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) log_probs_[i] = safe_log(probs[i] / total);
  index_points();
}

DiscretePolicy DiscretePolicy::from_log_weights(std::vector<Point> points, std::span<const double> log_weights) {
  if (points.empty() || points.size() != log_weights.size()) {
    throw std::invalid_argument("DiscretePolicy::from_log_weights: size mismatch");
  }
  const double log_total = logsumexp(log_weights);
  if (!std::isfinite(log_total)) throw std::invalid_argument("DiscretePolicy::from_log_weights: zero or infinite mass");
  DiscretePolicy out;
  out.points_ = std::move(points);
  out.log_probs_.resize(log_weights.size());
  for (std::size_t i = 0; i < log_weights.size(); ++i) out.log_probs_[i] = log_weights[i] - log_total;
  out.index_points();
  return out;
}

void DiscretePolicy::index_points() {
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!index_.emplace(points_[i], i).second) throw std::invalid_argument("DiscretePolicy: duplicate point");
  }
  cdf_ = cumulative(probs());
}

std::vector<double> DiscretePolicy::probs() const {
  std::vector<double> p(log_probs_.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(log_probs_[i]);
  return p;
}

double DiscretePolicy::log_density(const Point& x) const {
  const auto it = index_.find(x);
  return it == index_.end() ? kNegInf : log_probs_[it->second];
}

std::size_t DiscretePolicy::sample_index(Rng& rng) const { return invert_cdf(cdf_, uniform01(rng)); }

Point DiscretePolicy::sample(Rng& rng) const { return points_[sample_index(rng)]; }

nlohmann::json DiscretePolicy::to_json() const {
  return {{"kind", "discrete"}, {"points", points_}, {"probs", probs()}};
}

DiscretePolicy make_categorical(std::vector<double> probs) {
  std::vector<Point> pts(probs.size());
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = {static_cast<double>(i)};
  return DiscretePolicy(std::move(pts), std::move(probs));
}

// ---------------------------------------------------------------- gaussian

DiagonalGaussian::DiagonalGaussian(std::vector<double> mean, std::vector<double> sd)
    : mean_(std::move(mean)), sd_(std::move(sd)) {
  if (mean_.empty() || mean_.size() != sd_.size()) throw std::invalid_argument("DiagonalGaussian: size mismatch");
  for (double s : sd_) {
    if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("DiagonalGaussian: sd must be positive");
  }
}

double DiagonalGaussian::log_density(const Point& x) const {
  if (x.size() != mean_.size()) throw std::invalid_argument("DiagonalGaussian: dimension mismatch");
  constexpr double half_log_2pi = 0.91893853320467274178;
  double acc = 0.0;
  for (std::size_t d = 0; d < x.size(); ++d) {
    const double z = (x[d] - mean_[d]) / sd_[d];
    acc += -0.5 * z * z - std::log(sd_[d]) - half_log_2pi;
  }
  return acc;
}

Point DiagonalGaussian::sample(Rng& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  Point x(mean_.size());
  for (std::size_t d = 0; d < x.size(); ++d) x[d] = mean_[d] + sd_[d] * normal(rng);
  return x;
}

nlohmann::json DiagonalGaussian::to_json() const { return {{"kind", "gaussian"}, {"mean", mean_}, {"sd", sd_}}; }

// ---------------------------------------------------------------- markov

MarkovSequencePolicy::MarkovSequencePolicy(int vocab, int length, std::vector<double> initial,
                                           std::vector<double> transitions, BannedMask banned)
    : vocab_(vocab),
      length_(length),
      initial_(std::move(initial)),
      trans_(std::move(transitions)),
      banned_(std::move(banned)) {
  if (vocab_ < 1 || length_ < 1) throw std::invalid_argument("MarkovSequencePolicy: vocab and length must be >= 1");
  const auto v = static_cast<std::size_t>(vocab_);
  if (initial_.size() != v || trans_.size() != v * v) throw std::invalid_argument("MarkovSequencePolicy: bad shape");
  if (banned_.empty()) banned_.assign(v * v, false);
  if (banned_.size() != v * v) throw std::invalid_argument("MarkovSequencePolicy: bad banned mask shape");
  check_probability_vector(initial_, "MarkovSequencePolicy initial");
  for (std::size_t a = 0; a < v; ++a) {
    check_probability_vector(std::span<const double>(trans_).subspan(a * v, v), "MarkovSequencePolicy row");
    for (std::size_t b = 0; b < v; ++b) {
      if (banned_[a * v + b] && trans_[a * v + b] != 0.0) {
        throw std::invalid_argument("MarkovSequencePolicy: banned transition has positive probability");
      }
    }
  }
  log_initial_.resize(v);
  log_trans_.resize(v * v);
  for (std::size_t a = 0; a < v; ++a) log_initial_[a] = safe_log(initial_[a]);
  for (std::size_t i = 0; i < v * v; ++i) log_trans_[i] = safe_log(trans_[i]);
}

bool MarkovSequencePolicy::banned(int a, int b) const { return banned_[static_cast<std::size_t>(a * vocab_ + b)]; }

double MarkovSequencePolicy::log_density(const Point& x) const {
  if (x.size() != static_cast<std::size_t>(length_)) return kNegInf;
  int prev = -1;
  double acc = 0.0;
  for (double t : x) {
    const int tok = static_cast<int>(t);
    if (tok < 0 || tok >= vocab_ || static_cast<double>(tok) != t) return kNegInf;
    acc += prev < 0 ? log_initial_[static_cast<std::size_t>(tok)] : log_transition(prev, tok);
    if (acc == kNegInf) return kNegInf;
    prev = tok;
  }
  return acc;
}

int MarkovSequencePolicy::draw(std::span<const double> probs, Rng& rng) const {
  const double u = uniform01(rng);
  double acc = 0.0;
  int last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last_positive = static_cast<int>(i);
    if (u < acc) return last_positive;
  }
  return last_positive;
}

Point MarkovSequencePolicy::sample(Rng& rng) const {
  const auto v = static_cast<std::size_t>(vocab_);
  Point x(static_cast<std::size_t>(length_));
  int tok = draw(initial_, rng);
  x[0] = tok;
  for (std::size_t i = 1; i < x.size(); ++i) {
    tok = draw(std::span<const double>(trans_).subspan(static_cast<std::size_t>(tok) * v, v), rng);
    x[i] = tok;
  }
  return x;
}

std::optional<std::vector<Point>> MarkovSequencePolicy::support() const {
  double count = std::pow(static_cast<double>(vocab_), length_);
  if (count > static_cast<double>(1 << 20)) return std::nullopt;
  std::vector<Point> out;
  Point x(static_cast<std::size_t>(length_), 0.0);
  while (true) {
    if (log_density(x) > kNegInf) out.push_back(x);
    std::size_t i = 0;
    while (i < x.size() && x[i] == vocab_ - 1) x[i++] = 0.0;
    if (i == x.size()) break;
    x[i] += 1.0;
  }
  return out;
}

nlohmann::json MarkovSequencePolicy::to_json() const {
  nlohmann::json banned = nlohmann::json::array();
  for (int a = 0; a < vocab_; ++a) {
    for (int b = 0; b < vocab_; ++b) {
      if (this->banned(a, b)) banned.push_back({a, b});
    }
  }
  return {{"kind", "markov"}, {"vocab", vocab_},       {"length", length_},
          {"initial", initial_}, {"transitions", trans_}, {"banned", banned}};
}

// ---------------------------------------------------------------- mixture

MixturePolicy::MixturePolicy(std::vector<PolicyPtr> components, std::vector<double> weights)
    : components_(std::move(components)), weights_(std::move(weights)) {
  if (components_.empty() || components_.size() != weights_.size()) {
    throw std::invalid_argument("MixturePolicy: size mismatch");
  }
  check_probability_vector(weights_, "MixturePolicy");
  for (const auto& c : components_) {
    if (!c) throw std::invalid_argument("MixturePolicy: null component");
  }
  log_weights_.resize(weights_.size());
  for (std::size_t k = 0; k < weights_.size(); ++k) log_weights_[k] = safe_log(weights_[k]);
}

double MixturePolicy::log_density(const Point& x) const {
  std::vector<double> terms(components_.size());
  for (std::size_t k = 0; k < components_.size(); ++k) {
    terms[k] = log_weights_[k] == kNegInf ? kNegInf : log_weights_[k] + components_[k]->log_density(x);
  }
  return logsumexp(terms);
}

Point MixturePolicy::sample(Rng& rng) const {
  const auto cdf = cumulative(weights_);
  std::size_t k = invert_cdf(cdf, uniform01(rng));
  while (weights_[k] <= 0.0 && k > 0) --k;
  return components_[k]->sample(rng);
}

std::optional<std::vector<Point>> MixturePolicy::support() const {
  std::set<Point> merged;
  for (const auto& c : components_) {
    auto s = c->support();
    if (!s) return std::nullopt;
    merged.insert(s->begin(), s->end());
  }
  return std::vector<Point>(merged.begin(), merged.end());
}

nlohmann::json MixturePolicy::to_json() const {
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : components_) comps.push_back(c->to_json());
  return {{"kind", "mixture"}, {"components", comps}, {"weights", weights_}};
}

// ---------------------------------------------------------------- clipped

double clip_log_density(double log_optimized, double log_safe, double log_beta) {
  if (log_beta == kInf) return log_optimized;
  return std::min(log_optimized, log_beta + log_safe);
}

ClippedPolicy::ClippedPolicy(PolicyPtr safe, PolicyPtr optimized, double log_beta, std::optional<double> log_psi,
                             double beta_min)
    : safe_(std::move(safe)),
      optimized_(std::move(optimized)),
      log_beta_(log_beta),
      log_psi_(log_psi),
      beta_min_(beta_min) {
  if (!safe_ || !optimized_) throw std::invalid_argument("ClippedPolicy: null policy");
  if (std::isnan(log_beta_)) throw std::invalid_argument("ClippedPolicy: beta is NaN");
  if (beta_min_ > 0.0 && log_beta_ < std::log(beta_min_)) throw std::invalid_argument("ClippedPolicy: beta < beta_min");
  if (log_psi_ && !(std::isfinite(*log_psi_) && *log_psi_ <= 1e-12)) {
    throw std::invalid_argument("ClippedPolicy: log psi must be finite and <= 0");
  }
}

double ClippedPolicy::unnormalized_log_density(const Point& x) const {
  return clip_log_density(optimized_->log_density(x), safe_->log_density(x), log_beta_);
}

double ClippedPolicy::log_density(const Point& x) const {
  if (!log_psi_) throw std::logic_error("ClippedPolicy: normalizer not set");
  return unnormalized_log_density(x) - *log_psi_;
}

Point ClippedPolicy::sample(Rng& rng) const {
  if (log_beta_ == kInf) return optimized_->sample(rng);
  const bool from_safe = log_beta_ < 0.0;
  constexpr long kMaxAttempts = 100'000'000;
  for (long attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Point x = from_safe ? safe_->sample(rng) : optimized_->sample(rng);
    const double lo = optimized_->log_density(x);
    const double ls = safe_->log_density(x);
    // Safe proposal, envelope β: accept min(LR / β, 1). Optimized proposal, envelope 1: min(β / LR, 1).
    const double log_accept = from_safe ? std::min(lo - ls - log_beta_, 0.0)
                                        : (ls == kNegInf ? kNegInf : std::min(log_beta_ + ls - lo, 0.0));
    if (std::log(uniform01(rng)) < log_accept) return x;
  }
  throw std::runtime_error("ClippedPolicy::sample: no acceptance within attempt budget");
}

ClippedPolicy ClippedPolicy::with_log_psi(double log_psi) const {
  return ClippedPolicy(safe_, optimized_, log_beta_, log_psi, beta_min_);
}

nlohmann::json ClippedPolicy::to_json() const {
  nlohmann::json j{{"kind", "clipped"}, {"safe", safe_->to_json()}, {"optimized", optimized_->to_json()}};
  j["log_beta"] = log_beta_ == kInf ? nlohmann::json(nullptr) : nlohmann::json(log_beta_);
  if (log_psi_) j["log_psi"] = *log_psi_;
  return j;
}

// ---------------------------------------------------------------- free functions

double log_likelihood_ratio(const Policy& optimized, const Policy& safe, const Point& x) {
  const double ls = safe.log_density(x);
  if (ls == kNegInf) throw std::domain_error("log_likelihood_ratio: safe density is zero at the point");
  return optimized.log_density(x) - ls;
}

double clipped_unnorm_log_density(const Policy& optimized, const Policy& safe, double log_beta, const Point& x) {
  const double ls = safe.log_density(x);
  if (ls == kNegInf) throw std::domain_error("clipped_unnorm_log_density: safe density is zero at the point");
  return clip_log_density(optimized.log_density(x), ls, log_beta);
}

ExactClip normalize_exact(const Policy& optimized, const Policy& safe, double beta) {
  auto pts = safe.support();
  if (!pts) throw std::invalid_argument("normalize_exact: safe policy support is not enumerable");
  const double log_beta = std::log(beta);
  std::vector<double> logw(pts->size());
  for (std::size_t i = 0; i < pts->size(); ++i) {
    logw[i] = clip_log_density(optimized.log_density((*pts)[i]), safe.log_density((*pts)[i]), log_beta);
  }
  const double log_psi = logsumexp(logw);
  if (log_psi == kNegInf) throw std::domain_error("normalize_exact: clipped policy has zero mass");
  return {std::exp(log_psi), std::make_shared<const DiscretePolicy>(DiscretePolicy::from_log_weights(*pts, logw))};
}

DiscretePolicy tilted_acquisition(std::span<const double> variances, double temperature) {
  if (variances.empty()) throw std::invalid_argument("tilted_acquisition: no candidates");
  if (temperature < 0.0) throw std::invalid_argument("tilted_acquisition: temperature must be >= 0");
  const auto [lo_it, hi_it] = std::minmax_element(variances.begin(), variances.end());
  const double lo = *lo_it;
  const double range = *hi_it - lo;
  std::vector<Point> pts(variances.size());
  std::vector<double> logw(variances.size(), 0.0);
  for (std::size_t a = 0; a < variances.size(); ++a) {
    pts[a] = {static_cast<double>(a)};
    if (range > 0.0) logw[a] = temperature * (variances[a] - lo) / range;
  }
  return DiscretePolicy::from_log_weights(std::move(pts), logw);
}

BannedMask banned_mask_from_pairs(int vocab, std::span<const std::pair<int, int>> pairs) {
  BannedMask mask(static_cast<std::size_t>(vocab * vocab), false);
  for (auto [a, b] : pairs) {
    if (a < 0 || b < 0 || a >= vocab || b >= vocab) throw std::invalid_argument("banned pair outside vocabulary");
    mask[static_cast<std::size_t>(a * vocab + b)] = true;
  }
  return mask;
}

MarkovSequencePolicy fit_markov(std::span<const std::vector<int>> sequences, int vocab, int length,
                                const BannedMask& banned, double smoothing) {
  if (sequences.empty()) throw std::invalid_argument("fit_markov: empty corpus");
  if (smoothing < 0.0) throw std::invalid_argument("fit_markov: smoothing must be >= 0");
  const auto v = static_cast<std::size_t>(vocab);
  BannedMask mask = banned.empty() ? BannedMask(v * v, false) : banned;
  if (mask.size() != v * v) throw std::invalid_argument("fit_markov: bad banned mask shape");

  std::vector<double> init(v, 0.0);
  std::vector<double> trans(v * v, 0.0);
  for (const auto& s : sequences) {
    if (s.size() != static_cast<std::size_t>(length)) throw std::invalid_argument("fit_markov: wrong sequence length");
    for (int t : s) {
      if (t < 0 || t >= vocab) throw std::invalid_argument("fit_markov: token outside vocabulary");
    }
    init[static_cast<std::size_t>(s[0])] += 1.0;
    for (std::size_t i = 1; i < s.size(); ++i) {
      trans[static_cast<std::size_t>(s[i - 1]) * v + static_cast<std::size_t>(s[i])] += 1.0;
    }
  }

  double init_total = 0.0;
  for (double& c : init) init_total += (c += smoothing);
  for (double& c : init) c /= init_total;

  for (std::size_t a = 0; a < v; ++a) {
    double row_total = 0.0;
    std::size_t allowed = 0;
    for (std::size_t b = 0; b < v; ++b) {
      double& c = trans[a * v + b];
      if (mask[a * v + b]) {
        c = 0.0;
      } else {
        c += smoothing;
        row_total += c;
        ++allowed;
      }
    }
    if (allowed == 0) throw std::invalid_argument("fit_markov: every transition out of a token is banned");
    for (std::size_t b = 0; b < v; ++b) {
      double& c = trans[a * v + b];
      if (mask[a * v + b]) continue;
      c = row_total > 0.0 ? c / row_total : 1.0 / static_cast<double>(allowed);
    }
  }
  return MarkovSequencePolicy(vocab, length, std::move(init), std::move(trans), std::move(mask));
}

}  // namespace cpc
