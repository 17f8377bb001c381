#include "eventnet/events.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace eventnet {

double iou(const Event& a, const Event& b) {
  const double inter = std::min(a.end(), b.end()) - std::max(a.start(), b.start());
  if (inter <= 0.0) return 0.0;
  const double uni = a.duration + b.duration - inter;
  return inter / uni;
}

DefaultGrid make_default_grid(int64_t window_samples, int rho, double default_duration) {
  if (window_samples <= 0 || rho <= 0 || default_duration <= 0.0) {
    throw std::invalid_argument("make_default_grid: window, rho and duration must be positive");
  }
  const int64_t num = window_samples * static_cast<int64_t>(rho);
  if (num % 256 != 0) {
    throw std::invalid_argument("make_default_grid: window_samples * rho must be divisible by 256");
  }
  DefaultGrid grid;
  grid.rho = rho;
  grid.default_duration = default_duration;
  grid.n_defaults = static_cast<int>(num / 256);
  grid.entries.reserve(static_cast<size_t>(grid.n_defaults));
  for (int i = 1; i <= grid.n_defaults; ++i) {
    Event e;
    e.center = 256.0 * (static_cast<double>(i) - 0.5) / static_cast<double>(rho);
    e.duration = default_duration;
    e.label = 0;
    grid.entries.push_back(e);
  }
  return grid;
}

MatchAssignment match_defaults(const DefaultGrid& grid, const std::vector<Event>& trues,
                               double eta) {
  if (!(eta > 0.0 && eta <= 1.0)) {
    throw std::invalid_argument("match_defaults: eta must be in (0, 1]");
  }
  MatchAssignment out;
  out.eta = eta;
  out.matched.assign(grid.entries.size(), -1);
  for (size_t i = 0; i < grid.entries.size(); ++i) {
    double best = 0.0;
    int best_j = -1;
    for (size_t j = 0; j < trues.size(); ++j) {
      const double v = iou(grid.entries[i], trues[j]);
      if (v >= eta && v > best) {  // strict > keeps the lower index on ties
        best = v;
        best_j = static_cast<int>(j);
      }
    }
    out.matched[i] = best_j;
  }
  return out;
}

EncodedOffset encode(const Event& default_event, const Event& truth) {
  EncodedOffset o;
  o.dc = (truth.center - default_event.center) / default_event.duration;
  o.dd = std::log(truth.duration / default_event.duration);
  return o;
}

std::optional<Event> decode(const Event& default_event, const EncodedOffset& offset, int label) {
  Event e;
  e.center = default_event.center + offset.dc * default_event.duration;
  e.duration = default_event.duration * std::exp(offset.dd);
  e.label = label;
  if (!std::isfinite(e.center) || !std::isfinite(e.duration) || e.duration <= 0.0) {
    return std::nullopt;
  }
  return e;
}

std::vector<ScoredEvent> nms(std::vector<ScoredEvent> candidates, double overlap_threshold) {
  std::sort(candidates.begin(), candidates.end(), [](const ScoredEvent& a, const ScoredEvent& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.event.start() != b.event.start()) return a.event.start() < b.event.start();
    if (a.event.duration != b.event.duration) return a.event.duration < b.event.duration;
    return a.event.label < b.event.label;
  });
  std::vector<ScoredEvent> kept;
  for (const auto& c : candidates) {
    bool suppressed = false;
    for (const auto& k : kept) {
      if (iou(c.event, k.event) >= overlap_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(c);
  }
  std::sort(kept.begin(), kept.end(), [](const ScoredEvent& a, const ScoredEvent& b) {
    return a.event.start() < b.event.start();
  });
  return kept;
}

}  // namespace eventnet
