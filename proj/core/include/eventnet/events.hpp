#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace eventnet {

// An interval event on a 1-D axis. Coordinates are half-open [start, end)
// and may be expressed in samples or seconds depending on context; all
// geometry below is unit-agnostic. Label 0 is reserved for background.
struct Event {
  double center = 0.0;
  double duration = 0.0;
  int label = 0;

  double start() const { return center - duration / 2.0; }
  double end() const { return center + duration / 2.0; }
};

struct ScoredEvent {
  Event event;
  double score = 0.0;
};

// Fixed anchor grid generated over a window of `window_samples` samples:
// entry i (1-based) is centered at 2^8 * (i - 0.5) / rho with a shared
// duration. n_defaults = window_samples * rho / 2^8.
struct DefaultGrid {
  int rho = 1;
  double default_duration = 0.0;  // samples
  int n_defaults = 0;
  std::vector<Event> entries;  // label 0, sample coordinates
};

// Per-default assignment to the best true event with IoU >= eta, or -1.
struct MatchAssignment {
  double eta = 0.5;
  std::vector<int> matched;  // index into the true-event list, -1 if unmatched

  int n_matched() const {
    int n = 0;
    for (int m : matched) n += (m >= 0) ? 1 : 0;
    return n;
  }
};

// Relative offset of a true event against a default event: dc is the center
// shift in units of the default duration, dd the log duration ratio.
struct EncodedOffset {
  double dc = 0.0;
  double dd = 0.0;
};

// Intersection-over-union of the two events' [start, end) intervals.
double iou(const Event& a, const Event& b);

// Builds the anchor grid. window_samples * rho must be divisible by 2^8.
DefaultGrid make_default_grid(int64_t window_samples, int rho, double default_duration);

// For every default, the argmax-IoU true event among those with IoU >= eta.
// Ties on IoU resolve to the lower true-event index.
MatchAssignment match_defaults(const DefaultGrid& grid, const std::vector<Event>& trues,
                               double eta);

EncodedOffset encode(const Event& default_event, const Event& truth);

// Inverse of encode. Returns nullopt when exp(dd) overflows or the result is
// not finite; callers treat that prediction as background.
std::optional<Event> decode(const Event& default_event, const EncodedOffset& offset, int label);

// Greedy non-maximum suppression: repeatedly keep the highest-scored
// candidate and drop the rest with IoU >= overlap_threshold against it.
// Suppression ignores labels. Output is sorted by start time.
std::vector<ScoredEvent> nms(std::vector<ScoredEvent> candidates, double overlap_threshold);

}  // namespace eventnet
