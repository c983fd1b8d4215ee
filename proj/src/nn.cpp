#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "palyno/classifiers.hpp"
#include "palyno/error.hpp"

namespace palyno::classify {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// Softmax of the affine scores for one input row.
void softmax_row(const std::vector<double>& w, const std::vector<double>& x, int C, std::vector<double>& p) {
  const std::size_t F = x.size();
  p.assign(C, 0.0);
  for (int c = 0; c < C; ++c) {
    double a = w[F * C + c];
    for (std::size_t f = 0; f < F; ++f) a += x[f] * w[f * C + c];
    p[c] = a;
  }
  const double mx = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (double& v : p) sum += (v = std::exp(v - mx));
  for (double& v : p) v /= sum;
}

}  // namespace

double nn_loss_and_gradient(const std::vector<double>& weights, const FeatureMatrix& train, int n_categories,
                            std::vector<double>* gradient) {
  const std::size_t F = train.n_cols();
  const int C = n_categories;
  if (weights.size() != (F + 1) * C) throw Error(Errc::DimensionMismatch, "nn: weight vector has the wrong length");
  if (gradient) gradient->assign(weights.size(), 0.0);
  double loss = 0.0;
  std::size_t n = 0;
  std::vector<double> p;
  for (std::size_t i = 0; i < train.rows.size(); ++i) {
    const int y = train.labels[i];
    if (y < 0) continue;
    ++n;
    const auto& x = train.rows[i];
    softmax_row(weights, x, C, p);
    loss -= std::log(std::max(p[y], 1e-300));
    if (!gradient) continue;
    for (int c = 0; c < C; ++c) {
      const double e = p[c] - (c == y ? 1.0 : 0.0);
      for (std::size_t f = 0; f < F; ++f) (*gradient)[f * C + c] += e * x[f];
      (*gradient)[F * C + c] += e;
    }
  }
  if (n == 0) throw Error(Errc::EmptyMatrix, "nn: no labeled rows");
  if (gradient)
    for (double& g : *gradient) g /= static_cast<double>(n);
  return loss / static_cast<double>(n);
}

PerceptronNet train_nn(const FeatureMatrix& train, const NnParams& params, std::uint64_t /*seed*/,
                       std::vector<double>* loss_trace) {
  train.validate();
  if (train.categories.size() < 2) throw Error(Errc::TooFewCategories, "train_nn: need at least 2 categories");
  if (train.rows.empty()) throw Error(Errc::EmptyMatrix, "train_nn: no rows");

  PerceptronNet net;
  net.n_inputs = static_cast<int>(train.n_cols());
  net.n_categories = static_cast<int>(train.categories.size());
  net.weights.assign(static_cast<std::size_t>(net.n_inputs + 1) * net.n_categories, 0.0);
  net.trained = true;

  const int C = net.n_categories;
  auto eval = [&](const std::vector<double>& w, std::vector<double>* g) { return nn_loss_and_gradient(w, train, C, g); };

  // Moller (1993) scaled conjugate gradient.
  std::vector<double>& w = net.weights;
  const std::size_t N = w.size();
  std::vector<double> grad, grad_new, r(N), p(N), w_try(N), s(N);
  double E = eval(w, &grad);
  for (std::size_t i = 0; i < N; ++i) r[i] = p[i] = -grad[i];
  if (loss_trace) loss_trace->push_back(E);

  const double sigma0 = 1e-4;
  double lambda = 1e-6, lambda_bar = 0.0, delta = 0.0;
  bool success = true;
  int k = 0;
  for (; k < params.epochs; ++k) {
    if (std::sqrt(dot(r, r)) < params.tolerance) {
      net.converged = true;
      break;
    }
    const double p2 = dot(p, p);
    if (p2 <= 0.0) {
      net.converged = true;
      break;
    }
    if (success) {
      const double sigma = sigma0 / std::sqrt(p2);
      for (std::size_t i = 0; i < N; ++i) w_try[i] = w[i] + sigma * p[i];
      eval(w_try, &grad_new);
      for (std::size_t i = 0; i < N; ++i) s[i] = (grad_new[i] - grad[i]) / sigma;
      delta = dot(p, s);
    }
    delta += (lambda - lambda_bar) * p2;
    if (delta <= 0.0) {
      lambda_bar = 2.0 * (lambda - delta / p2);
      delta = -delta + lambda * p2;
      lambda = lambda_bar;
    }
    const double mu = dot(p, r);
    const double alpha = mu / delta;
    for (std::size_t i = 0; i < N; ++i) w_try[i] = w[i] + alpha * p[i];
    const double E_try = eval(w_try, &grad_new);
    const double Delta = 2.0 * delta * (E - E_try) / (mu * mu);
    if (Delta >= 0.0 && E_try <= E) {
      w = w_try;
      E = E_try;
      grad = grad_new;
      std::vector<double> r_new(N);
      for (std::size_t i = 0; i < N; ++i) r_new[i] = -grad[i];
      lambda_bar = 0.0;
      success = true;
      if ((k + 1) % static_cast<int>(N) == 0) {
        p = r_new;
      } else {
        const double beta = (dot(r_new, r_new) - dot(r_new, r)) / mu;
        for (std::size_t i = 0; i < N; ++i) p[i] = r_new[i] + beta * p[i];
      }
      r = std::move(r_new);
      if (Delta >= 0.75) lambda = std::max(lambda / 4.0, 1e-15);
    } else {
      lambda_bar = lambda;
      success = false;
    }
    if (Delta < 0.25) lambda = std::min(lambda + delta * (1.0 - Delta) / p2, 1e100);
    if (loss_trace) loss_trace->push_back(E);
  }
  if (!net.converged && std::sqrt(dot(r, r)) < params.tolerance) net.converged = true;
  net.epochs_run = k;
  net.final_loss = E;
  net.final_grad_norm = std::sqrt(dot(r, r));
  if (!net.converged && params.epochs > 0)
    spdlog::debug("train_nn: NonConvergence after {} epochs (gradient norm {:.3g})", k, net.final_grad_norm);
  return net;
}

std::vector<double> nn_probabilities(const PerceptronNet& net, const std::vector<double>& z) {
  if (!net.trained) throw Error(Errc::UntrainedModel, "network has not been trained");
  if (static_cast<int>(z.size()) != net.n_inputs)
    throw Error(Errc::DimensionMismatch, "nn: input has " + std::to_string(z.size()) + " features, network expects " +
                                             std::to_string(net.n_inputs));
  std::vector<double> p;
  softmax_row(net.weights, z, net.n_categories, p);
  return p;
}

int nn_classify(const PerceptronNet& net, const std::vector<double>& z) {
  const auto p = nn_probabilities(net, z);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

}  // namespace palyno::classify
