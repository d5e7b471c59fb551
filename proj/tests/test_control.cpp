#include <doctest.h>

#include <stdexcept>

#include "fednam/control.hpp"

using namespace fednam;

TEST_CASE("strictly decreasing losses never stop") {
  EarlyStopState<int> s({20, 1e-4});
  for (int e = 0; e < 500; ++e) CHECK(s.update(10.0 - 0.01 * e, e) == StopDecision::Continue);
  CHECK_FALSE(s.stopped());
}

TEST_CASE("constant loss with patience 20 stops at epoch 21") {
  EarlyStopState<int> s({20, 1e-4});
  int stop_epoch = 0;
  for (int e = 1; e <= 100 && stop_epoch == 0; ++e) {
    if (s.update(1.0, e) == StopDecision::Stop) stop_epoch = e;
  }
  CHECK(stop_epoch == 21);
  CHECK(s.best_epoch() == 1);
  CHECK(*s.best() == 1);
}

TEST_CASE("best snapshot tracks the lowest loss") {
  EarlyStopState<int> s({3, 1e-4});
  const double losses[] = {1.0, 0.5, 0.6, 0.6, 0.6, 0.6};
  int e = 0;
  StopDecision last = StopDecision::Continue;
  for (double l : losses) last = s.update(l, ++e);
  CHECK(last == StopDecision::Stop);
  CHECK(*s.best() == 2);
  CHECK(s.best_loss() == 0.5);
}

TEST_CASE("improvements below min_delta do not count") {
  EarlyStopState<int> s({2, 0.1});
  s.update(1.0, 1);
  CHECK(s.update(0.95, 2) == StopDecision::Continue);
  CHECK(s.update(0.92, 3) == StopDecision::Stop);
  CHECK(*s.best() == 1);
}

TEST_CASE("nan loss stops with failure status") {
  EarlyStopState<int> s;
  s.update(1.0, 1);
  CHECK(s.update(std::nan(""), 2) == StopDecision::Stop);
  CHECK(s.failed());
}

TEST_CASE("ten flat epochs halve the learning rate") {
  LrSchedule sched;
  double lr = 0.01;
  lr = sched.update(lr, 1.0);  // establishes the baseline
  for (int e = 0; e < 9; ++e) {
    lr = sched.update(lr, 1.0);
    CHECK(lr == 0.01);
  }
  lr = sched.update(lr, 1.0);
  CHECK(lr == 0.005);
}

TEST_CASE("learning rate never drops below min_lr") {
  LrSchedule sched;
  double lr = 1e-5;
  for (int e = 0; e < 100; ++e) {
    const double next = sched.update(lr, 1.0);
    CHECK(next <= lr);
    CHECK(next >= 1e-5);
    lr = next;
  }
  CHECK(lr == 1e-5);

  LrSchedule fast({0.5, 2, 1e-3, 1e-4});
  double r = 0.01;
  for (int e = 0; e < 60; ++e) r = fast.update(r, 2.0);
  CHECK(r == 1e-3);
}

TEST_CASE("improving stream leaves the learning rate alone") {
  LrSchedule sched;
  double lr = 0.01;
  for (int e = 0; e < 100; ++e) lr = sched.update(lr, 5.0 - 0.01 * e);
  CHECK(lr == 0.01);
}

namespace {

TrialResult scripted(const HyperParams& p, std::size_t id, double acc, double auc = 0.5) {
  TrialResult r;
  r.trial_id = id;
  r.params = p;
  r.client_val_acc = {acc, acc, acc};
  r.mean_val_acc = acc;
  r.global_val_auc = auc;
  return r;
}

}  // namespace

TEST_CASE("default grid enumerates 24 trials") {
  HyperGrid g;
  CHECK(g.enumerate().size() == 24);
  const auto res = grid_search(g, [](const HyperParams& p, std::size_t id) { return scripted(p, id, 0.5); });
  CHECK(res.trials.size() == 24);
  // All tied: lowest learning rate, then lowest dropout, then lowest trial id.
  CHECK(res.best().learning_rate == 1e-3);
  CHECK(res.best().dropout == 0.0);
  CHECK(*res.best_index == 4);
}

TEST_CASE("single-point grid selects that point") {
  HyperGrid g{{0.1}, {1e-2}, {3}, {32}};
  const auto res = grid_search(g, [](const HyperParams& p, std::size_t id) { return scripted(p, id, 0.1); });
  CHECK(res.best() == HyperParams{0.1, 1e-2, 3, 32});
}

TEST_CASE("selection prefers accuracy, then auc, and skips failures") {
  HyperGrid g;
  auto run = [](const HyperParams& p, std::size_t id) {
    if (id == 0) throw std::runtime_error("boom");
    if (id == 5) return scripted(p, id, 0.9, 0.6);
    if (id == 7) return scripted(p, id, 0.9, 0.8);
    return scripted(p, id, 0.7);
  };
  const auto res = grid_search(g, run, 3);
  CHECK(res.trials[0].failed);
  CHECK(res.trials[0].error == "boom");
  CHECK(*res.best_index == 7);

  const auto again = grid_search(g, run, 1);
  CHECK(*again.best_index == 7);
}

TEST_CASE("all trials failing leaves no winner") {
  HyperGrid g{{0.0}, {1e-2}, {2}, {16, 32}};
  const auto res = grid_search(g, [](const HyperParams&, std::size_t) -> TrialResult { throw std::runtime_error("x"); });
  CHECK_FALSE(res.best_index.has_value());
}
