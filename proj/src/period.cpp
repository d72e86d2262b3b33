// Copyright 2026 The MRAC Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "mrac/period.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace mrac::period {

FrameMatrix instance_features(const FeatureStream& stream, std::uint32_t instance) {
  if (instance >= stream.instances()) {
    throw ValidationError("feature stream has no instance " + std::to_string(instance));
  }
  FrameMatrix out(stream.frames(), stream.channels());
  for (std::uint32_t t = 0; t < stream.frames(); ++t) {
    for (std::uint32_t c = 0; c < stream.channels(); ++c) {
      out(t, c) = stream.at(instance, t, c);
    }
  }
  return out;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double peak = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - peak).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

Eigen::MatrixXd self_similarity(const FrameMatrix& features) {
  if (features.cols() < 1) throw DomainError("self_similarity: embeddings need a channel");
  FrameMatrix unit = features;
  for (Eigen::Index t = 0; t < unit.rows(); ++t) {
    const double norm = unit.row(t).norm();
    if (!(norm > 0.0)) {
      throw DomainError("self_similarity: frame " + std::to_string(t) + " has a zero-norm embedding");
    }
    unit.row(t) /= norm;
  }
  const Eigen::MatrixXd cosine = unit * unit.transpose();
  const double scale = 1.0 / std::sqrt(static_cast<double>(features.cols()));
  return softmax_rows(cosine * scale).cwiseMax(0.0);
}

Eigen::MatrixXd attention_scores(const FrameMatrix& features, const Eigen::MatrixXd& query,
                                 const Eigen::MatrixXd& key) {
  if (query.rows() != features.cols() || key.rows() != features.cols() ||
      query.cols() != key.cols() || query.cols() < 1) {
    throw DomainError("attention_scores: projections must both be (C, C') with C = " +
                      std::to_string(features.cols()));
  }
  const Eigen::MatrixXd q = features * query;
  const Eigen::MatrixXd k = features * key;
  const double scale = 1.0 / std::sqrt(static_cast<double>(query.cols()));
  return softmax_rows(q * k.transpose() * scale);
}

Eigen::MatrixXd attention_scores(const FrameMatrix& features) {
  const auto c = features.cols();
  return attention_scores(features, Eigen::MatrixXd::Identity(c, c),
                          Eigen::MatrixXd::Identity(c, c));
}

namespace {

struct FramePeak {
  int lag = 1;
  bool periodic = false;
};

FramePeak frame_peak(const Eigen::MatrixXd& sim, int t, const EstimatorParams& params) {
  const int frames = static_cast<int>(sim.rows());
  const int max_lag = max_period(frames);
  std::vector<double> curve(max_lag + 1, 0.0);
  for (int l = 1; l <= max_lag; ++l) {
    const bool fwd = t + l < frames;
    const bool bwd = t - l >= 0;
    const double f = fwd ? sim(t, t + l) : 0.0;
    const double b = bwd ? sim(t, t - l) : 0.0;
    if (params.combine == LagCombine::Max) {
      curve[l] = std::max(fwd ? f : b, bwd ? b : f);
    } else {
      curve[l] = (fwd && bwd) ? 0.5 * (f + b) : (fwd ? f : b);
    }
  }
  const double mean = sim.row(t).mean();
  const double diag = sim(t, t);
  const double best = *std::max_element(curve.begin() + 1, curve.end());

  FramePeak peak;
  peak.lag = static_cast<int>(std::max_element(curve.begin() + 1, curve.end()) - curve.begin());
  // A repeat is only sought after the curve has left the neighbourhood of
  // the frame itself, i.e. dipped below the row mean.
  int dip = 1;
  while (dip <= max_lag && curve[dip] >= mean) ++dip;
  if (dip > max_lag) return peak;
  const double floor = mean + (1.0 - params.peak_tolerance) * (best - mean);
  for (int l = dip + 1; l <= max_lag; ++l) {
    const bool right_ok = l == max_lag || curve[l] >= curve[l + 1];
    if (curve[l] >= curve[l - 1] && right_ok && curve[l] >= floor) {
      peak.lag = l;
      break;
    }
  }
  if (peak.lag <= dip) return peak;
  const double range = diag - mean;
  if (!(range > 1e-12 * std::max(1.0, std::abs(diag)))) return peak;
  const double prominence = (curve[peak.lag] - mean) / range;
  peak.periodic = prominence >= params.peak_threshold;
  return peak;
}

template <typename T>
T lower_median(std::vector<T> values) {
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

}  // namespace

PeriodSignal estimate_period(const FrameMatrix& features, const EstimatorParams& params) {
  const int frames = static_cast<int>(features.rows());
  if (frames < 4) {
    throw DomainError("estimate_period needs at least 4 frames, got " + std::to_string(frames));
  }
  const Eigen::MatrixXd sim = self_similarity(features);
  std::vector<FramePeak> raw(frames);
  for (int t = 0; t < frames; ++t) raw[t] = frame_peak(sim, t, params);

  PeriodSignal signal;
  signal.velocity.resize(frames);
  signal.periodicity.resize(frames);
  const int half = std::max(0, params.median_window / 2);
  for (int t = 0; t < frames; ++t) {
    const int lo = std::max(0, t - half);
    const int hi = std::min(frames - 1, t + half);
    std::vector<int> flags;
    std::vector<int> lags;
    for (int k = lo; k <= hi; ++k) {
      flags.push_back(raw[k].periodic ? 1 : 0);
      if (raw[k].periodic) lags.push_back(raw[k].lag);
    }
    // Majority vote; ties keep the frame's own decision.
    const int votes = std::accumulate(flags.begin(), flags.end(), 0);
    const int size = static_cast<int>(flags.size());
    bool periodic = raw[t].periodic;
    if (2 * votes > size) periodic = true;
    if (2 * votes < size) periodic = false;
    signal.periodicity[t] = periodic ? 1.0 : 0.0;
    signal.velocity[t] = lags.empty() ? raw[t].lag : lower_median(lags);
  }
  return signal;
}

std::vector<RepetitionProposal> extract_proposals(const PeriodSignal& signal, double track_score) {
  constexpr double kPhaseSlack = 1e-9;
  std::vector<RepetitionProposal> out;
  const int frames = signal.num_frames();
  auto emit = [&](int start, int end) {
    double phi = 0.0;
    for (int t = start; t < end; ++t) phi += signal.periodicity[t];
    out.push_back({start, end, phi / (end - start) * track_score});
  };
  int t = 0;
  while (t < frames) {
    if (signal.periodicity[t] < kPeriodicityCutoff) {
      ++t;
      continue;
    }
    int start = t;
    double phase = 0.0;
    double next = 1.0;
    while (t < frames && signal.periodicity[t] >= kPeriodicityCutoff) {
      phase += 1.0 / signal.velocity[t];
      ++t;
      if (phase >= next - kPhaseSlack) {
        emit(start, t);
        start = t;
        next += 1.0;
      }
    }
  }
  return out;
}

double derive_count(const PeriodSignal& signal) {
  // Summed per run of equal velocity so that a run of length L at psi = L
  // contributes exactly 1.
  double count = 0.0;
  const int frames = signal.num_frames();
  int t = 0;
  while (t < frames) {
    if (signal.periodicity[t] < kPeriodicityCutoff) {
      ++t;
      continue;
    }
    const double psi = signal.velocity[t];
    int run = 0;
    while (t < frames && signal.periodicity[t] >= kPeriodicityCutoff &&
           signal.velocity[t] == psi) {
      ++run;
      ++t;
    }
    count += run / psi;
  }
  return count;
}

std::vector<double> speed_profile(const FrameMatrix& features) {
  const auto frames = features.rows();
  if (frames < 2) throw DomainError("speed_profile needs at least 2 frames");
  const Eigen::RowVectorXd mean = features.colwise().mean();
  const Eigen::MatrixXd centered = features.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(frames);
  if (!(cov.trace() > 0.0)) throw DomainError("speed_profile: embeddings have zero variance");

  // Start from the frame farthest from the mean; it has a component along
  // the top direction unless every frame is orthogonal to it.
  Eigen::Index far = 0;
  centered.rowwise().squaredNorm().maxCoeff(&far);
  Eigen::VectorXd v = centered.row(far).transpose().normalized();
  double eigenvalue = v.dot(cov * v);
  for (int iter = 0; iter < 100000; ++iter) {
    Eigen::VectorXd w = cov * v;
    const double norm = w.norm();
    if (!(norm > 0.0)) break;
    w /= norm;
    const double next = w.dot(cov * w);
    const double change = std::abs(next - eigenvalue);
    const double step = (w - v).norm();
    v = w;
    eigenvalue = next;
    if (change <= 1e-8 * std::abs(next) && step <= 1e-8) break;
  }
  Eigen::VectorXd proj = centered * v;
  for (Eigen::Index t = 0; t < proj.size(); ++t) {
    if (proj[t] != 0.0) {
      if (proj[t] < 0.0) proj = -proj;
      break;
    }
  }
  return {proj.data(), proj.data() + proj.size()};
}

std::vector<Neighbor> retrieve_nn(const Eigen::VectorXd& query, const Eigen::MatrixXd& gallery,
                                  std::size_t k) {
  if (gallery.rows() == 0) throw DomainError("retrieve_nn: empty gallery");
  if (gallery.cols() != query.size()) {
    throw DomainError("retrieve_nn: query has " + std::to_string(query.size()) +
                      " channels, gallery has " + std::to_string(gallery.cols()));
  }
  std::vector<Neighbor> all(static_cast<std::size_t>(gallery.rows()));
  for (Eigen::Index i = 0; i < gallery.rows(); ++i) {
    all[i] = {static_cast<std::size_t>(i), (gallery.row(i).transpose() - query).norm()};
  }
  const std::size_t keep = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(),
                    [](const Neighbor& a, const Neighbor& b) {
                      return a.distance != b.distance ? a.distance < b.distance
                                                      : a.index < b.index;
                    });
  all.resize(keep);
  return all;
}

std::vector<Neighbor> retrieve_nn(const Eigen::VectorXd& query, const FeatureStream& gallery,
                                  std::size_t k) {
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(gallery.instances()) * gallery.frames(),
                       gallery.channels());
  for (std::uint32_t n = 0; n < gallery.instances(); ++n) {
    for (std::uint32_t t = 0; t < gallery.frames(); ++t) {
      for (std::uint32_t c = 0; c < gallery.channels(); ++c) {
        rows(static_cast<Eigen::Index>(n) * gallery.frames() + t, c) = gallery.at(n, t, c);
      }
    }
  }
  return retrieve_nn(query, rows, k);
}

}  // namespace mrac::period
