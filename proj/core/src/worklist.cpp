#include "stlsplit/worklist.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "stlsplit/sliding_window.hpp"

namespace stlsplit {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

WorkList::WorkList(Formula formula, std::shared_ptr<const PredicateTable> preds,
                   int max_timestep)
    : formula_(std::move(formula)),
      preds_(std::move(preds)),
      buffers_(static_cast<size_t>(formula_.size())),
      dirty_(static_cast<size_t>(formula_.size()), 0),
      max_timestep_(max_timestep) {
  for (const std::string& name : formula_.predicate_names()) {
    if (!preds_->contains(name)) {
      throw std::invalid_argument("work-list formula uses unbound predicate " + name);
    }
  }
}

double WorkList::robustness() const {
  if (watermark_ < 0) throw std::logic_error("no data ingested");
  return buffers_[static_cast<size_t>(formula_.root())][0];
}

void WorkList::ingest(std::span<const double> state) {
  if (max_timestep_ >= 0 && watermark_ >= max_timestep_) {
    throw std::logic_error("ingest past final scenario timestep");
  }
  const int t1 = watermark_ + 1;

  // Leaves first: predicate margins for the new sample.
  for (int id = 0; id < formula_.size(); ++id) {
    const FormulaNode& n = formula_.node(id);
    auto& buf = buffers_[static_cast<size_t>(id)];
    if (n.kind == NodeKind::True) {
      buf.push_back(kInf);
      dirty_[static_cast<size_t>(id)] = t1;
    } else if (n.kind == NodeKind::Pred) {
      buf.push_back(preds_->at(n.pred)(state));
      dirty_[static_cast<size_t>(id)] = t1;
    } else {
      update_node(id, t1);
    }
  }
  watermark_ = t1;
}

void WorkList::update_node(int id, int t1) {
  const FormulaNode& n = formula_.node(id);
  auto& out = buffers_[static_cast<size_t>(id)];
  const auto& c0 = buffers_[static_cast<size_t>(std::max(n.child0, 0))];
  const int d0 = n.child0 >= 0 ? dirty_[static_cast<size_t>(n.child0)] : t1;

  switch (n.kind) {
    case NodeKind::True:
    case NodeKind::Pred:
      return;  // handled in ingest()

    case NodeKind::Not: {
      out.resize(static_cast<size_t>(t1) + 1);
      for (int i = d0; i <= t1; ++i) out[static_cast<size_t>(i)] = -c0[static_cast<size_t>(i)];
      dirty_[static_cast<size_t>(id)] = d0;
      return;
    }

    case NodeKind::And:
    case NodeKind::Or:
    case NodeKind::Implies: {
      const auto& c1 = buffers_[static_cast<size_t>(n.child1)];
      const int d = std::min(d0, dirty_[static_cast<size_t>(n.child1)]);
      out.resize(static_cast<size_t>(t1) + 1);
      for (int i = d; i <= t1; ++i) {
        const double a = c0[static_cast<size_t>(i)];
        const double b = c1[static_cast<size_t>(i)];
        double v;
        if (n.kind == NodeKind::And)
          v = std::min(a, b);
        else if (n.kind == NodeKind::Or)
          v = std::max(a, b);
        else
          v = std::max(-a, b);
        out[static_cast<size_t>(i)] = v;
      }
      dirty_[static_cast<size_t>(id)] = d;
      return;
    }

    case NodeKind::Always:
    case NodeKind::Eventually: {
      // out[i] = extremum of c0[j], j in [i+lo, min(i+hi, t1)].
      int begin;
      if (n.interval.unbounded()) {
        begin = 0;  // the right window edge moves with t1, so all entries shift
      } else {
        begin = std::max(0, d0 - n.interval.hi);
      }
      const int hi = n.interval.unbounded() ? -1 : n.interval.hi;
      if (n.kind == NodeKind::Always)
        windowed_min_into(c0, n.interval.lo, hi, begin, t1, out);
      else
        windowed_max_into(c0, n.interval.lo, hi, begin, t1, out);
      dirty_[static_cast<size_t>(id)] = begin;
      return;
    }

    case NodeKind::Historically:
    case NodeKind::Once: {
      // out[i] = extremum of c0[j], j in [max(0, i-hi), i-lo].
      const int begin = std::min(t1, d0 + n.interval.lo);
      const int hi = n.interval.unbounded() ? -1 : n.interval.hi;
      if (n.kind == NodeKind::Historically)
        windowed_min_past_into(c0, n.interval.lo, hi, begin, t1, out);
      else
        windowed_max_past_into(c0, n.interval.lo, hi, begin, t1, out);
      dirty_[static_cast<size_t>(id)] = begin;
      return;
    }

    case NodeKind::Until: {
      const auto& c1 = buffers_[static_cast<size_t>(n.child1)];
      const int d = std::min(d0, dirty_[static_cast<size_t>(n.child1)]);
      out.resize(static_cast<size_t>(t1) + 1);
      const int lo = n.interval.lo;
      if (n.interval.unbounded()) {
        // Backwards induction over the whole buffer:
        //   g[i] = max(min(c1[i], c0[i]), min(c0[i], g[i+1])), g[t1+1] = -inf
        // gives sup_{i2 >= i} min(c1[i2], inf c0[i..i2]); for lo > 0 the
        // inf over the skipped [i, i+lo-1] is folded in afterwards.
        std::vector<double> g(static_cast<size_t>(t1) + 2);
        g[static_cast<size_t>(t1) + 1] = -kInf;
        for (int i = t1; i >= 0; --i) {
          const double a = c0[static_cast<size_t>(i)];
          const double b = c1[static_cast<size_t>(i)];
          g[static_cast<size_t>(i)] =
              std::max(std::min(b, a), std::min(a, g[static_cast<size_t>(i) + 1]));
        }
        for (int i = 0; i <= t1; ++i) {
          if (lo == 0) {
            out[static_cast<size_t>(i)] = g[static_cast<size_t>(i)];
            continue;
          }
          if (i + lo > t1) {
            out[static_cast<size_t>(i)] = -kInf;
            continue;
          }
          double head_inf = kInf;
          for (int j = i; j < i + lo; ++j) head_inf = std::min(head_inf, c0[static_cast<size_t>(j)]);
          out[static_cast<size_t>(i)] = std::min(head_inf, g[static_cast<size_t>(i + lo)]);
        }
        dirty_[static_cast<size_t>(id)] = 0;
      } else {
        // Bounded window: direct evaluation over the affected suffix.
        const int begin = std::max(0, d - n.interval.hi);
        for (int i = begin; i <= t1; ++i) {
          double best = -kInf;
          double left_inf = kInf;
          const int w_hi = std::min(t1, i + n.interval.hi);
          for (int j = i; j <= w_hi; ++j) {
            left_inf = std::min(left_inf, c0[static_cast<size_t>(j)]);
            if (j >= i + lo) {
              best = std::max(best, std::min(c1[static_cast<size_t>(j)], left_inf));
            }
          }
          out[static_cast<size_t>(i)] = best;
        }
        dirty_[static_cast<size_t>(id)] = begin;
      }
      return;
    }
  }
}

}  // namespace stlsplit
