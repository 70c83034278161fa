#include "foresight/continual/regularizers.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>

#include "foresight/errors.hpp"
#include "foresight/log.hpp"

namespace foresight {
namespace {

nd::Tensor& ensure(GradList& grads, std::size_t i, const nd::Tensor& like) {
  if (grads[i].size() != like.size()) grads[i] = nd::Tensor(like.shape());
  return grads[i];
}

}  // namespace

EwcPenalty::EwcPenalty(double lambda) : lambda_(lambda) {
  if (!(lambda >= 0.0)) throw ConfigError("ewc: lambda must be >= 0");
}

void EwcPenalty::add_task(ParamSnapshot anchor, ParamSnapshot fisher) {
  terms_.push_back({std::move(anchor), std::move(fisher)});
}

double EwcPenalty::value(const ParamRefs& params) const {
  double acc = 0.0;
  for (const auto& term : terms_) {
    for (const auto& p : params) {
      auto a = term.anchor.find(p.name);
      if (a == term.anchor.end()) continue;
      const auto& f = term.fisher.at(p.name);
      for (std::size_t i = 0; i < p.tensor->size(); ++i) {
        const double diff = (*p.tensor)[i] - a->second[i];
        acc += f[i] * diff * diff;
      }
    }
  }
  return 0.5 * lambda_ * acc;
}

void EwcPenalty::add_gradient(const ParamRefs& params, GradList& grads) const {
  if (lambda_ == 0.0) return;
  for (const auto& term : terms_) {
    for (std::size_t k = 0; k < params.size(); ++k) {
      const auto& p = params[k];
      auto a = term.anchor.find(p.name);
      if (a == term.anchor.end()) continue;
      const auto& f = term.fisher.at(p.name);
      nd::Tensor& g = ensure(grads, k, *p.tensor);
      for (std::size_t i = 0; i < p.tensor->size(); ++i) g[i] += lambda_ * f[i] * ((*p.tensor)[i] - a->second[i]);
    }
  }
}

SiPenalty::SiPenalty(double lambda, double xi) : lambda_(lambda), xi_(xi) {
  if (!(lambda >= 0.0)) throw ConfigError("si: lambda must be >= 0");
  if (!(xi > 0.0)) throw ConfigError("si: xi must be > 0");
}

void SiPenalty::begin_task(const ParamRefs& params) {
  start_ = snapshot(params);
  omega_.clear();
  for (const auto& p : params) omega_.emplace(p.name, nd::Tensor(p.tensor->shape()));
}

void SiPenalty::observe(const ParamRefs& params, const GradList& data_grads, const std::vector<nd::Tensor>& before) {
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (data_grads[k].empty()) continue;
    auto it = omega_.find(params[k].name);
    if (it == omega_.end()) continue;
    const nd::Tensor& now = *params[k].tensor;
    for (std::size_t i = 0; i < now.size(); ++i) it->second[i] -= data_grads[k][i] * (now[i] - before[k][i]);
  }
}

void SiPenalty::end_task(const ParamRefs& params) {
  for (const auto& p : params) {
    auto s = start_.find(p.name);
    auto w = omega_.find(p.name);
    if (s == start_.end() || w == omega_.end()) continue;
    auto [it, fresh] = importance_.try_emplace(p.name, nd::Tensor(p.tensor->shape()));
    for (std::size_t i = 0; i < p.tensor->size(); ++i) {
      const double delta = (*p.tensor)[i] - s->second[i];
      it->second[i] += w->second[i] / (delta * delta + xi_);
    }
  }
  anchor_ = snapshot(params);
}

double SiPenalty::value(const ParamRefs& params) const {
  double acc = 0.0;
  for (const auto& p : params) {
    auto om = importance_.find(p.name);
    if (om == importance_.end()) continue;
    const auto& a = anchor_.at(p.name);
    for (std::size_t i = 0; i < p.tensor->size(); ++i) {
      const double diff = (*p.tensor)[i] - a[i];
      acc += om->second[i] * diff * diff;
    }
  }
  return lambda_ * acc;
}

void SiPenalty::add_gradient(const ParamRefs& params, GradList& grads) const {
  if (lambda_ == 0.0) return;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& p = params[k];
    auto om = importance_.find(p.name);
    if (om == importance_.end()) continue;
    const auto& a = anchor_.at(p.name);
    nd::Tensor& g = ensure(grads, k, *p.tensor);
    for (std::size_t i = 0; i < p.tensor->size(); ++i) g[i] += 2.0 * lambda_ * om->second[i] * ((*p.tensor)[i] - a[i]);
  }
}

std::vector<double> flatten(const ParamRefs& params, const GradList& grads) {
  std::vector<double> out;
  out.reserve(count_parameters(params));
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (grads[k].empty()) {
      out.insert(out.end(), params[k].tensor->size(), 0.0);
    } else {
      out.insert(out.end(), grads[k].data().begin(), grads[k].data().end());
    }
  }
  return out;
}

void unflatten(std::span<const double> flat, const ParamRefs& params, GradList& grads) {
  if (flat.size() != count_parameters(params)) throw ShapeError("unflatten: length mismatch");
  std::size_t offset = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const std::size_t n = params[k].tensor->size();
    bool any = grads[k].size() == n;
    for (std::size_t i = 0; i < n && !any; ++i) any = flat[offset + i] != 0.0;
    if (any) {
      nd::Tensor& g = ensure(grads, k, *params[k].tensor);
      std::copy_n(flat.data() + offset, n, g.raw());
    }
    offset += n;
  }
}

GemProjection gem_project(std::span<const double> g, const std::vector<std::vector<double>>& memory,
                          std::size_t max_iterations, double tolerance) {
  GemProjection out;
  out.gradient.assign(g.begin(), g.end());
  const Eigen::Map<const Eigen::VectorXd> gv(g.data(), static_cast<Eigen::Index>(g.size()));

  std::vector<Eigen::VectorXd> rows;
  for (const auto& m : memory) {
    if (m.size() != g.size()) throw ShapeError("gem: memory gradient length differs from the gradient");
    Eigen::Map<const Eigen::VectorXd> mv(m.data(), static_cast<Eigen::Index>(m.size()));
    if (mv.squaredNorm() == 0.0) {
      ++out.dropped;
      log::info("gem: dropping an all-zero memory gradient");
      continue;
    }
    rows.push_back(mv);
  }
  bool violated = false;
  for (const auto& r : rows) violated = violated || r.dot(gv) < 0.0;
  if (!violated) return out;

  const auto m = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd G(m, gv.size());
  for (Eigen::Index j = 0; j < m; ++j) G.row(j) = rows[static_cast<std::size_t>(j)];
  const Eigen::MatrixXd Q = G * G.transpose();
  const Eigen::VectorXd p = G * gv;

  // Dual: min_v 0.5 v'Qv + p'v subject to v >= 0, then z = g + G'v.
  Eigen::VectorXd v = Eigen::VectorXd::Zero(m);
  const double step = 1.0 / std::max(Q.trace(), 1e-300);
  for (; out.iterations < max_iterations; ++out.iterations) {
    Eigen::VectorXd next = (v - step * (Q * v + p)).cwiseMax(0.0);
    const double change = (next - v).lpNorm<Eigen::Infinity>();
    v = next;
    if (change < tolerance) break;
  }

  auto kkt_ok = [&](const Eigen::VectorXd& cand) {
    const Eigen::VectorXd slack = Q * cand + p;  // = G z
    const double scale = 1e-9 * (1.0 + Q.diagonal().maxCoeff());
    for (Eigen::Index j = 0; j < m; ++j) {
      if (cand[j] < 0.0 || slack[j] < -scale) return false;
    }
    return true;
  };
  auto solve_active = [&](const std::vector<Eigen::Index>& active) -> std::optional<Eigen::VectorXd> {
    Eigen::VectorXd cand = Eigen::VectorXd::Zero(m);
    if (!active.empty()) {
      const auto a = static_cast<Eigen::Index>(active.size());
      Eigen::MatrixXd Qa(a, a);
      Eigen::VectorXd pa(a);
      for (Eigen::Index r = 0; r < a; ++r) {
        pa[r] = p[active[static_cast<std::size_t>(r)]];
        for (Eigen::Index c = 0; c < a; ++c) Qa(r, c) = Q(active[static_cast<std::size_t>(r)], active[static_cast<std::size_t>(c)]);
      }
      Eigen::VectorXd va = Qa.completeOrthogonalDecomposition().solve(-pa);
      for (Eigen::Index r = 0; r < a; ++r) cand[active[static_cast<std::size_t>(r)]] = va[r];
    }
    if (!kkt_ok(cand)) return std::nullopt;
    return cand;
  };

  std::vector<Eigen::Index> active;
  for (Eigen::Index j = 0; j < m; ++j)
    if (v[j] > 0.0) active.push_back(j);
  std::optional<Eigen::VectorXd> exact = solve_active(active);
  if (!exact && m <= 12) {
    for (std::uint32_t mask = 1; mask < (1u << m) && !exact; ++mask) {
      active.clear();
      for (Eigen::Index j = 0; j < m; ++j)
        if (mask & (1u << j)) active.push_back(j);
      exact = solve_active(active);
    }
  }
  if (exact) v = *exact;

  const Eigen::VectorXd z = gv + G.transpose() * v;
  out.gradient.assign(z.data(), z.data() + z.size());
  out.projected = true;
  return out;
}

}  // namespace foresight
