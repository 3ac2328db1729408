#include "cacq/connection_dynamics.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cacq {

void ConnectionParams::validate() const {
  if (!(arrival_rate >= 0.0) || !std::isfinite(arrival_rate))
    throw std::invalid_argument("connection arrival rate must be finite and >= 0");
  if (!(mean_duration > 0.0)) throw std::invalid_argument("mean connection duration must be > 0");
  if (!(frame_length > 0.0)) throw std::invalid_argument("frame length must be > 0");
  if (max_arrivals_per_frame < 1)
    throw std::invalid_argument("max connection arrivals per frame must be >= 1");
}

double ConnectionParams::departure_probability() const {
  return -std::expm1(-frame_length / mean_duration);
}

CacPolicy CacPolicy::threshold(int limit) {
  CacPolicy p(ThresholdCac{limit}, "threshold(" + std::to_string(limit) + ")");
  p.validate();
  return p;
}

CacPolicy CacPolicy::queue_aware(int queue_threshold, int queue_cap, int connection_cap) {
  if (queue_cap < 0) throw std::invalid_argument("queue capacity must be >= 0");
  std::vector<double> alpha(static_cast<std::size_t>(queue_cap) + 1);
  for (int x = 0; x <= queue_cap; ++x) alpha[x] = x < queue_threshold ? 1.0 : 0.0;
  CacPolicy p(QueueAwareCac{std::move(alpha), connection_cap},
              "queue_aware(" + std::to_string(queue_threshold) + ")");
  p.validate();
  return p;
}

CacPolicy CacPolicy::queue_aware(std::vector<double> alpha, int connection_cap) {
  CacPolicy p(QueueAwareCac{std::move(alpha), connection_cap}, "queue_aware_vector");
  p.validate();
  return p;
}

CacPolicy CacPolicy::none(int connection_cap) {
  CacPolicy p(NoCac{connection_cap}, "none(" + std::to_string(connection_cap) + ")");
  p.validate();
  return p;
}

int CacPolicy::connection_cap() const {
  return std::visit(
      [](const auto& r) {
        if constexpr (std::is_same_v<std::decay_t<decltype(r)>, ThresholdCac>)
          return r.limit;
        else
          return r.cap;
      },
      rule_);
}

std::string CacPolicy::label() const { return label_; }

void CacPolicy::validate() const {
  if (connection_cap() < 1) throw std::invalid_argument("connection cap must be >= 1");
  if (const auto* qa = std::get_if<QueueAwareCac>(&rule_)) {
    if (qa->alpha.empty()) throw std::invalid_argument("acceptance vector must not be empty");
    for (std::size_t x = 0; x < qa->alpha.size(); ++x) {
      if (!(qa->alpha[x] >= 0.0 && qa->alpha[x] <= 1.0)) {
        std::ostringstream msg;
        msg << "acceptance probability alpha[" << x << "] = " << qa->alpha[x] << " outside [0,1]";
        throw std::invalid_argument(msg.str());
      }
    }
  }
}

double poisson_frame_probability(double rate, double horizon, int count) {
  if (count < 0) return 0.0;
  const double mean = rate * horizon;
  if (mean == 0.0) return count == 0 ? 1.0 : 0.0;
  if (mean < 500.0 && count < 1000) {
    double p = std::exp(-mean);
    for (int k = 1; k <= count; ++k) p *= mean / k;
    return p;
  }
  return std::exp(-mean + count * std::log(mean) - std::lgamma(count + 1.0));
}

Pmf capped_poisson(double mean, int cap) {
  Pmf p(static_cast<std::size_t>(cap) + 1, 0.0);
  double head = 0.0;
  for (int n = 0; n < cap; ++n) {
    p[n] = poisson_frame_probability(mean, 1.0, n);
    head += p[n];
  }
  if (mean < cap) {
    // Sum the tail directly; 1 - head would cancel for small means.
    double term = poisson_frame_probability(mean, 1.0, cap);
    double tail = 0.0;
    for (int n = cap; term > 0.0; ++n) {
      tail += term;
      if (term < 1e-18 * tail) break;
      term *= mean / (n + 1);
    }
    p[cap] = tail;
  } else {
    p[cap] = std::max(0.0, 1.0 - head);
  }
  return p;
}

Pmf departure_distribution(int ongoing, const ConnectionParams& params) {
  if (ongoing < 0) throw std::invalid_argument("ongoing connections must be >= 0");
  const double q = params.departure_probability();
  Pmf p(static_cast<std::size_t>(ongoing) + 1, 0.0);
  if (q <= 0.0) {
    p[0] = 1.0;
    return p;
  }
  if (q >= 1.0) {
    p[ongoing] = 1.0;
    return p;
  }
  const double log_q = std::log(q);
  const double log_stay = std::log1p(-q);
  for (int d = 0; d <= ongoing; ++d) {
    const double log_choose =
        std::lgamma(ongoing + 1.0) - std::lgamma(d + 1.0) - std::lgamma(ongoing - d + 1.0);
    p[d] = std::exp(log_choose + d * log_q + (ongoing - d) * log_stay);
  }
  return p;
}

double acceptance_probability(const CacPolicy& policy, int queue_len, int ongoing) {
  return std::visit(
      [&](const auto& r) -> double {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, ThresholdCac>) {
          return ongoing < r.limit ? 1.0 : 0.0;
        } else if constexpr (std::is_same_v<T, QueueAwareCac>) {
          if (queue_len < 0 || queue_len >= static_cast<int>(r.alpha.size()))
            throw std::out_of_range("queue length " + std::to_string(queue_len) +
                                    " outside the acceptance vector");
          return ongoing < r.cap ? r.alpha[queue_len] : 0.0;
        } else {
          return ongoing < r.cap ? 1.0 : 0.0;
        }
      },
      policy.rule());
}

ConnectionStep connection_step(const CacPolicy& policy, int queue_len, const ConnectionParams& params) {
  params.validate();
  const int cap = policy.connection_cap();
  const int max_arrivals = params.max_arrivals_per_frame;
  const Pmf arrivals = capped_poisson(params.arrival_rate * params.frame_length, max_arrivals);

  ConnectionStep step;
  step.transition = Matrix::Zero(cap + 1, cap + 1);
  step.expected_blocked.assign(static_cast<std::size_t>(cap) + 1, 0.0);
  for (int n = 0; n <= max_arrivals; ++n) step.expected_offered += n * arrivals[n];

  for (int c = 0; c <= cap; ++c) {
    // Arrivals are decided one at a time against the frame-start queue length
    // and the count admitted so far.
    std::vector<double> admitted(static_cast<std::size_t>(max_arrivals) + 1, 0.0);
    std::vector<double> current{1.0};
    double blocked = 0.0;
    for (int n = 0; n <= max_arrivals; ++n) {
      double mean_admitted = 0.0;
      for (std::size_t k = 0; k < current.size(); ++k) {
        admitted[k] += arrivals[n] * current[k];
        mean_admitted += static_cast<double>(k) * current[k];
      }
      blocked += arrivals[n] * (n - mean_admitted);
      if (n == max_arrivals) break;
      std::vector<double> next(current.size() + 1, 0.0);
      for (std::size_t k = 0; k < current.size(); ++k) {
        const double a = acceptance_probability(policy, queue_len, c + static_cast<int>(k));
        next[k + 1] += current[k] * a;
        next[k] += current[k] * (1.0 - a);
      }
      current.swap(next);
    }
    step.expected_blocked[c] = blocked;

    const Pmf departures = departure_distribution(c, params);
    for (int k = 0; k <= max_arrivals; ++k) {
      if (admitted[k] == 0.0) continue;
      for (int d = 0; d <= c; ++d) {
        const int target = std::clamp(c + k - d, 0, cap);
        step.transition(c, target) += admitted[k] * departures[d];
      }
    }
  }
  // Sums of probabilities can round past 1 on near-certain transitions.
  step.transition = step.transition.cwiseMin(1.0);
  return step;
}

}  // namespace cacq
