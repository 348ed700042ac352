#include "fusetrack/assoc.hpp"

#include <limits>

namespace fusetrack::assoc {

Eigen::Vector2d PairStats::mean() const {
  if (samples_.empty()) throw Error(ErrorCode::InsufficientSamples, "no samples accumulated");
  Eigen::Vector2d m = Eigen::Vector2d::Zero();
  for (const auto& s : samples_) m += s;
  return m / static_cast<double>(samples_.size());
}

Eigen::Matrix2d PairStats::covariance() const {
  if (samples_.size() < 2) throw Error(ErrorCode::InsufficientSamples, "covariance needs at least two samples");
  const Eigen::Vector2d m = mean();
  Eigen::Matrix2d c = Eigen::Matrix2d::Zero();
  for (const auto& s : samples_) c += (s - m) * (s - m).transpose();
  return c / static_cast<double>(samples_.size() - 1);
}

double pair_score(const PairStats& stats, double regularization) {
  if (stats.size() < 2) {
    throw Error(ErrorCode::InsufficientSamples, "pair score needs at least two samples, have " +
                                                    std::to_string(stats.size()));
  }
  return mahalanobis(Eigen::Vector2d::Zero(), stats.mean(), stats.covariance(), regularization);
}

double pair_score(const PairStats& stats, const Eigen::Matrix2d& sigma, double regularization) {
  if (stats.size() < 2) {
    throw Error(ErrorCode::InsufficientSamples, "pair score needs at least two samples, have " +
                                                    std::to_string(stats.size()));
  }
  return mahalanobis(Eigen::Vector2d::Zero(), stats.mean(), sigma, regularization);
}

std::string to_string(CovarianceModel m) {
  switch (m) {
    case CovarianceModel::PerPair: return "per_pair";
    case CovarianceModel::PerObject: return "per_object";
    case CovarianceModel::Pooled: return "pooled";
  }
  return "per_object";
}

CovarianceModel covariance_model_from_string(const std::string& s) {
  if (s == "per_pair") return CovarianceModel::PerPair;
  if (s == "per_object") return CovarianceModel::PerObject;
  if (s == "pooled") return CovarianceModel::Pooled;
  throw Error(ErrorCode::SchemaError, "unknown covariance model '" + s + "'");
}

CostMatrix build_cost_matrix(const std::vector<std::vector<PairStats>>& stats, CovarianceModel model,
                             std::vector<std::string> object_ids, std::vector<std::string> tag_ids) {
  const auto n = static_cast<Eigen::Index>(stats.size());
  const auto n_sz = static_cast<std::size_t>(n);
  std::vector<std::vector<Eigen::Matrix2d>> cov(n_sz, std::vector<Eigen::Matrix2d>(n_sz));
  for (std::size_t i = 0; i < n_sz; ++i) {
    if (stats[i].size() != n_sz) throw Error(ErrorCode::ContractViolation, "pair stats must be square");
    for (std::size_t j = 0; j < n_sz; ++j) {
      if (stats[i][j].size() < 2) {
        throw Error(ErrorCode::InsufficientSamples, "pair (" + std::to_string(i) + ", " + std::to_string(j) +
                                                        "): needs at least two samples, have " +
                                                        std::to_string(stats[i][j].size()));
      }
      cov[i][j] = stats[i][j].covariance();
    }
  }
  std::vector<Eigen::Matrix2d> sigma(n_sz, Eigen::Matrix2d::Zero());
  if (model == CovarianceModel::PerObject) {
    for (std::size_t i = 0; i < n_sz; ++i) {
      for (const auto& c : cov[i]) sigma[i] += c;
      sigma[i] /= static_cast<double>(n);
    }
  } else if (model == CovarianceModel::Pooled) {
    Eigen::Matrix2d all = Eigen::Matrix2d::Zero();
    for (const auto& row : cov)
      for (const auto& c : row) all += c;
    all /= static_cast<double>(n * n);
    sigma.assign(n_sz, all);
  }
  CostMatrix m;
  m.entries.resize(n, n);
  for (std::size_t i = 0; i < n_sz; ++i) {
    for (std::size_t j = 0; j < n_sz; ++j) {
      const auto& s = model == CovarianceModel::PerPair ? cov[i][j] : sigma[i];
      try {
        m.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = pair_score(stats[i][j], s);
      } catch (const Error& e) {
        throw Error(e.code(), "pair (" + std::to_string(i) + ", " + std::to_string(j) + "): " + e.what());
      }
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (object_ids.size() < static_cast<std::size_t>(n)) object_ids.push_back("object" + std::to_string(i));
    if (tag_ids.size() < static_cast<std::size_t>(n)) tag_ids.push_back("tag" + std::to_string(i));
  }
  m.object_ids = std::move(object_ids);
  m.tag_ids = std::move(tag_ids);
  return m;
}

std::string to_string(AssignMethod m) { return m == AssignMethod::Greedy ? "greedy" : "optimal"; }

AssignMethod assign_method_from_string(const std::string& s) {
  if (s == "greedy") return AssignMethod::Greedy;
  if (s == "optimal") return AssignMethod::Optimal;
  throw Error(ErrorCode::SchemaError, "unknown assignment method '" + s + "'");
}

double AssociationResult::total() const {
  double t = 0.0;
  for (double c : costs) t += c;
  return t;
}

namespace {

void require_square(const CostMatrix& m) {
  if (m.entries.rows() != m.entries.cols()) throw Error(ErrorCode::ContractViolation, "cost matrix must be square");
  if (!m.entries.allFinite()) throw Error(ErrorCode::ContractViolation, "cost matrix entries must be finite");
}

}  // namespace

AssociationResult greedy_assign(const CostMatrix& m) {
  require_square(m);
  const Eigen::Index n = m.entries.rows();
  std::vector<bool> taken(static_cast<std::size_t>(n), false);
  AssociationResult r;
  r.method = AssignMethod::Greedy;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index best = -1;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (taken[static_cast<std::size_t>(j)]) continue;
      if (best < 0 || m.entries(i, j) < m.entries(i, best)) best = j;
    }
    taken[static_cast<std::size_t>(best)] = true;
    r.tag_of_object.push_back(static_cast<int>(best));
    r.costs.push_back(m.entries(i, best));
  }
  return r;
}

AssociationResult optimal_assign(const CostMatrix& m) {
  require_square(m);
  const int n = static_cast<int>(m.entries.rows());
  // Shortest augmenting path formulation with row/column potentials (1-based).
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> row_of_col(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    row_of_col[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = row_of_col[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = m.entries(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[row_of_col[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of_col[j0] != 0);
    do {
      const int j1 = way[j0];
      row_of_col[j0] = row_of_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  AssociationResult r;
  r.method = AssignMethod::Optimal;
  r.tag_of_object.assign(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j) r.tag_of_object[static_cast<std::size_t>(row_of_col[j] - 1)] = j - 1;
  for (int i = 0; i < n; ++i) r.costs.push_back(m.entries(i, r.tag_of_object[static_cast<std::size_t>(i)]));
  return r;
}

AssociationResult assign(const CostMatrix& m, AssignMethod method) {
  return method == AssignMethod::Greedy ? greedy_assign(m) : optimal_assign(m);
}

}  // namespace fusetrack::assoc
