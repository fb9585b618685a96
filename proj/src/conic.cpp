#include "asmpc/conic.hpp"

#include "asmpc/errors.hpp"

#include <Eigen/QR>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <vector>

namespace asmpc::conic {

namespace {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

constexpr double kUnboundedObjective = -1e13;

// Problem after equality elimination: x = x0 + N z with N an orthonormal
// kernel basis of the (augmented) equality rows.
struct Reduced {
  VectorXd x0;
  MatrixXd N;  // n x nz
  MatrixXd P;
  VectorXd q;
  MatrixXd G;
  VectorXd h;
  std::vector<SocBlock> socs;
};

struct BarrierEval {
  bool interior = false;
  double phi = 0.0;
  VectorXd grad;
  MatrixXd hess;
};

// -log barrier over Gz <= h plus the SOC barriers -log((cz+d)^2 - |Fz+f|^2).
BarrierEval eval_barrier(const Reduced& r, const VectorXd& z, bool with_derivatives) {
  const int nz = static_cast<int>(z.size());
  BarrierEval out;
  out.grad = VectorXd::Zero(nz);
  if (with_derivatives) out.hess = MatrixXd::Zero(nz, nz);

  if (r.G.rows() > 0) {
    VectorXd slack = r.h - r.G * z;
    if (slack.minCoeff() <= 0.0) return out;
    out.phi -= slack.array().log().sum();
    if (with_derivatives) {
      VectorXd inv = slack.cwiseInverse();
      out.grad.noalias() += r.G.transpose() * inv;
      MatrixXd Gw = r.G.array().colwise() * inv.array().square();
      out.hess.noalias() += r.G.transpose() * Gw;
    }
  }
  for (const SocBlock& s : r.socs) {
    const double u = s.c.dot(z) + s.d;
    VectorXd v = s.f;
    if (s.F.rows() > 0) v.noalias() += s.F * z;
    const double res = u * u - v.squaredNorm();
    if (u <= 0.0 || res <= 0.0) return out;
    out.phi -= std::log(res);
    if (with_derivatives) {
      VectorXd dr = 2.0 * u * s.c.transpose();
      if (s.F.rows() > 0) dr.noalias() -= 2.0 * s.F.transpose() * v;
      out.grad.noalias() -= dr / res;
      MatrixXd d2r = 2.0 * s.c.transpose() * s.c;
      if (s.F.rows() > 0) d2r.noalias() -= 2.0 * s.F.transpose() * s.F;
      out.hess.noalias() -= d2r / res;
      out.hess.noalias() += dr * dr.transpose() / (res * res);
    }
  }
  out.interior = true;
  return out;
}

bool strictly_feasible(const Reduced& r, const VectorXd& z) {
  return eval_barrier(r, z, false).interior;
}

struct CenterResult {
  bool converged = false;
  bool hit_iteration_cap = false;
};

// Newton centering of  t*(1/2 z'Pz + q'z) + phi(z); z must enter interior.
// Returns early (as converged) once the objective dives past the unbounded
// sentinel so the caller can classify the ray.
CenterResult center(const Reduced& r, double t, VectorXd& z, int& newton_budget,
                    double newton_eps = 1e-11,
                    double early_exit_linear_threshold = std::numeric_limits<double>::lowest(),
                    const VectorXd* early_exit_direction = nullptr) {
  const int nz = static_cast<int>(z.size());
  CenterResult result;
  for (int it = 0; it < 60; ++it) {
    if (newton_budget <= 0) {
      result.hit_iteration_cap = true;
      return result;
    }
    --newton_budget;

    BarrierEval be = eval_barrier(r, z, true);
    if (!be.interior) throw NumericalBreakdown("centering left the interior");

    VectorXd grad = be.grad;
    grad.noalias() += t * r.q;
    MatrixXd hess = be.hess;
    if (r.P.size() > 0) {
      grad.noalias() += t * (r.P * z);
      hess.noalias() += t * r.P;
    }

    // Regularized factorization; the barrier Hessian can be near-singular
    // close to the analytic center of thin sets.
    VectorXd dz;
    double reg = 0.0;
    const double scale = std::max(1.0, hess.diagonal().cwiseAbs().maxCoeff());
    for (;;) {
      MatrixXd H = hess;
      if (reg > 0.0) H.diagonal().array() += reg;
      Eigen::LDLT<MatrixXd> ldlt(H);
      // Near-zero pivots must escalate the regularization: LDLT would
      // silently zero the corresponding step component and hide unbounded
      // directions.
      if (ldlt.info() == Eigen::Success &&
          (nz == 0 || ldlt.vectorD().minCoeff() > 1e-13 * scale)) {
        dz = ldlt.solve(-grad);
        if (dz.allFinite() && grad.dot(dz) <= 1e-14 * scale * std::max(1.0, dz.squaredNorm())) break;
      }
      reg = (reg == 0.0) ? 1e-12 * scale : reg * 100.0;
      if (reg > 1e2 * scale) throw NumericalBreakdown("Newton system could not be factorized");
    }

    const double decrement = -grad.dot(dz);
    if (decrement / 2.0 <= newton_eps * (1.0 + std::abs(t))) {
      result.converged = true;
      return result;
    }

    const double f_curr = [&] {
      double v = be.phi + t * r.q.dot(z);
      if (r.P.size() > 0) v += 0.5 * t * z.dot(r.P * z);
      return v;
    }();

    double alpha = 1.0;
    bool stepped = false;
    while (alpha > 1e-13) {
      VectorXd zn = z + alpha * dz;
      BarrierEval trial = eval_barrier(r, zn, false);
      if (trial.interior) {
        double f_new = trial.phi + t * r.q.dot(zn);
        if (r.P.size() > 0) f_new += 0.5 * t * zn.dot(r.P * zn);
        if (f_new <= f_curr - 1e-4 * alpha * decrement) {
          z = zn;
          stepped = true;
          break;
        }
      }
      alpha *= 0.5;
    }
    if (!stepped) {
      result.converged = true;  // no further progress possible at this t
      return result;
    }
    {
      double lin = r.q.dot(z);
      if (r.P.size() > 0) lin += 0.5 * z.dot(r.P * z);
      if (lin < kUnboundedObjective) {
        result.converged = true;
        return result;
      }
    }
    if (early_exit_direction != nullptr &&
        early_exit_direction->dot(z) < early_exit_linear_threshold) {
      result.converged = true;
      return result;
    }
  }
  // Exhausting the per-stage iteration cap is not convergence; the caller
  // must not trust the duality-gap estimate at this point.
  return result;
}

}  // namespace

void ConicProgram::validate() const {
  if (n < 0) throw DimensionMismatch("variable count must be nonnegative");
  if (P.size() > 0) {
    if (P.rows() != n || P.cols() != n) throw DimensionMismatch("objective_quadratic must be n x n");
    const double scale = std::max(1.0, P.cwiseAbs().maxCoeff());
    if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw InvalidArgument("objective_quadratic must be symmetric within 1e-12");
  }
  if (q.size() > 0 && q.size() != n) throw DimensionMismatch("objective_linear has wrong length");
  if (G.rows() != h.size()) throw DimensionMismatch("linear inequality rows mismatch offsets");
  if (G.rows() > 0 && G.cols() != n) throw DimensionMismatch("linear inequality column count != n");
  if (A.rows() != b.size()) throw DimensionMismatch("equality rows mismatch offsets");
  if (A.rows() > 0 && A.cols() != n) throw DimensionMismatch("equality column count != n");
  for (const SocBlock& s : soc_blocks) {
    if (s.F.rows() != s.f.size()) throw DimensionMismatch("SOC block F/f mismatch");
    if (s.F.rows() > 0 && s.F.cols() != n) throw DimensionMismatch("SOC block column count != n");
    if (s.c.size() != n) throw DimensionMismatch("SOC block c has wrong length");
  }
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::Unbounded: return "Unbounded";
    case SolveStatus::MaxIterations: return "MaxIterations";
  }
  return "Unknown";
}

double ResidualReport::max_violation() const {
  return std::max({linear_inequality, linear_equality, soc});
}

ResidualReport verify(const ConicProgram& program, const Eigen::VectorXd& candidate) {
  program.validate();
  if (candidate.size() != program.n) throw DimensionMismatch("candidate has wrong length");
  ResidualReport rep;
  if (program.G.rows() > 0)
    rep.linear_inequality = std::max(0.0, (program.G * candidate - program.h).maxCoeff());
  if (program.A.rows() > 0)
    rep.linear_equality = (program.A * candidate - program.b).cwiseAbs().maxCoeff();
  for (const SocBlock& s : program.soc_blocks) {
    VectorXd v = s.f;
    if (s.F.rows() > 0) v.noalias() += s.F * candidate;
    rep.soc = std::max(rep.soc, v.norm() - (s.c.dot(candidate) + s.d));
  }
  rep.soc = std::max(0.0, rep.soc);
  return rep;
}

Solution solve(const ConicProgram& program, const SolverTolerances& tol) {
  program.validate();
  const int n = program.n;

  MatrixXd P;
  if (program.P.size() > 0) P = 0.5 * (program.P + program.P.transpose());
  VectorXd q = program.q.size() > 0 ? program.q : VectorXd::Zero(n);

  auto finish = [&](SolveStatus status, const VectorXd& x, double dual_res, int iters) {
    Solution sol;
    sol.status = status;
    sol.primal = x;
    sol.objective_value = q.dot(x) + (P.size() > 0 ? 0.5 * x.dot(P * x) : 0.0);
    sol.primal_residual = verify(program, x).max_violation();
    sol.dual_residual = dual_res;
    sol.newton_iterations = iters;
    if (status == SolveStatus::Optimal && sol.primal_residual > tol.feas_tol)
      sol.status = SolveStatus::MaxIterations;
    return sol;
  };

  // --- Preprocess linear inequalities: drop vacuous zero rows, promote
  // opposite pairs (g, -g with h = -h') to equalities so degenerate boxes
  // keep a usable interior.
  std::vector<int> keep;
  MatrixXd Aall = program.A;
  VectorXd ball = program.b;
  {
    const int m = static_cast<int>(program.G.rows());
    std::vector<char> removed(m, 0);
    std::vector<std::pair<RowVectorXd, double>> promoted;
    for (int i = 0; i < m; ++i) {
      const double gnorm = program.G.row(i).cwiseAbs().maxCoeff();
      if (gnorm < 1e-14) {
        if (program.h(i) < -tol.feas_tol)
          return finish(SolveStatus::Infeasible, VectorXd::Zero(n), 0.0, 0);
        removed[i] = 1;
      }
    }
    for (int i = 0; i < m; ++i) {
      if (removed[i]) continue;
      const double gi = std::max(1.0, program.G.row(i).cwiseAbs().maxCoeff());
      for (int j = i + 1; j < m; ++j) {
        if (removed[j]) continue;
        if ((program.G.row(i) + program.G.row(j)).cwiseAbs().maxCoeff() <= 1e-13 * gi &&
            std::abs(program.h(i) + program.h(j)) <= 1e-12 * std::max(1.0, std::abs(program.h(i)))) {
          promoted.emplace_back(program.G.row(i), program.h(i));
          removed[i] = removed[j] = 1;
          break;
        }
      }
    }
    for (int i = 0; i < m; ++i)
      if (!removed[i]) keep.push_back(i);
    if (!promoted.empty()) {
      const int base = static_cast<int>(Aall.rows());
      Aall.conservativeResize(base + promoted.size(), n);
      ball.conservativeResize(base + promoted.size());
      for (std::size_t k = 0; k < promoted.size(); ++k) {
        Aall.row(base + k) = promoted[k].first;
        ball(base + k) = promoted[k].second;
      }
    }
  }

  // --- Equality elimination: x = x0 + N z.
  Reduced red;
  red.x0 = VectorXd::Zero(n);
  if (Aall.rows() > 0) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(Aall);
    red.x0 = qr.solve(ball);
    const double eq_res = (Aall * red.x0 - ball).cwiseAbs().maxCoeff();
    if (eq_res > 1e-8 * (1.0 + ball.cwiseAbs().maxCoeff()))
      return finish(SolveStatus::Infeasible, red.x0, 0.0, 0);
    Eigen::FullPivLU<MatrixXd> lu(Aall);
    lu.setThreshold(1e-10);
    MatrixXd kernel = lu.kernel();
    if (lu.rank() == n) {
      red.N = MatrixXd::Zero(n, 0);
    } else {
      Eigen::HouseholderQR<MatrixXd> kqr(kernel);
      red.N = kqr.householderQ() * MatrixXd::Identity(n, kernel.cols());
    }
  } else {
    red.N = MatrixXd::Identity(n, n);
  }
  const int nz = static_cast<int>(red.N.cols());

  if (nz == 0) {
    // Variables fully pinned by equalities.
    ResidualReport rep = verify(program, red.x0);
    return finish(rep.max_violation() <= tol.feas_tol ? SolveStatus::Optimal
                                                      : SolveStatus::Infeasible,
                  red.x0, 0.0, 0);
  }

  if (P.size() > 0) {
    red.P = red.N.transpose() * P * red.N;
    red.P = 0.5 * (red.P + red.P.transpose()).eval();
    red.q = red.N.transpose() * (P * red.x0 + q);
  } else {
    red.q = red.N.transpose() * q;
  }
  red.G.resize(keep.size(), nz);
  red.h.resize(keep.size());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    red.G.row(k) = program.G.row(keep[k]) * red.N;
    red.h(k) = program.h(keep[k]) - program.G.row(keep[k]).dot(red.x0);
  }
  for (const SocBlock& s : program.soc_blocks) {
    SocBlock rs;
    rs.F = s.F.rows() > 0 ? MatrixXd(s.F * red.N) : MatrixXd::Zero(s.f.size(), nz);
    rs.f = s.f;
    if (s.F.rows() > 0) rs.f.noalias() += s.F * red.x0;
    rs.c = s.c * red.N;
    rs.d = s.d + s.c.dot(red.x0);
    red.socs.push_back(std::move(rs));
  }

  int newton_budget = tol.max_iterations;
  int iterations_used = 0;
  auto used = [&] { return tol.max_iterations - newton_budget; };

  // --- Unconstrained shortcut.
  if (red.G.rows() == 0 && red.socs.empty()) {
    VectorXd z;
    if (red.P.size() > 0) {
      Eigen::LDLT<MatrixXd> ldlt(red.P);
      z = ldlt.solve(-red.q);
      if (ldlt.info() != Eigen::Success ||
          (red.P * z + red.q).cwiseAbs().maxCoeff() > 1e-8 * (1.0 + red.q.cwiseAbs().maxCoeff()))
        return finish(SolveStatus::Unbounded, red.x0, 0.0, 0);
    } else {
      if (red.q.cwiseAbs().maxCoeff() > 1e-12 * (1.0 + q.cwiseAbs().maxCoeff()))
        return finish(SolveStatus::Unbounded, red.x0, 0.0, 0);
      z = VectorXd::Zero(nz);
    }
    return finish(SolveStatus::Optimal, red.x0 + red.N * z, 0.0, 1);
  }

  // --- Phase I: find a strictly feasible z.
  VectorXd z = VectorXd::Zero(nz);
  if (!strictly_feasible(red, z) ||
      (red.G.rows() > 0 && (red.h - red.G * z).minCoeff() < 1e-10)) {
    Reduced ph;
    ph.q = VectorXd::Zero(nz + 1);
    ph.q(nz) = 1.0;
    ph.G.resize(red.G.rows(), nz + 1);
    ph.h = red.h;
    if (red.G.rows() > 0) {
      ph.G.leftCols(nz) = red.G;
      ph.G.col(nz) = -VectorXd::Ones(red.G.rows());
    }
    for (const SocBlock& s : red.socs) {
      SocBlock e;
      e.F = MatrixXd::Zero(s.F.rows(), nz + 1);
      e.F.leftCols(nz) = s.F;
      e.f = s.f;
      e.c = RowVectorXd::Zero(nz + 1);
      e.c.leftCols(nz) = s.c;
      e.c(nz) = 1.0;
      e.d = s.d;
      ph.socs.push_back(std::move(e));
    }

    double s0 = 0.0;
    if (red.G.rows() > 0) s0 = std::max(s0, (-red.h).maxCoeff());
    for (const SocBlock& s : red.socs) s0 = std::max(s0, s.f.norm() - s.d);
    s0 += 1.0;

    VectorXd zs = VectorXd::Zero(nz + 1);
    zs(nz) = s0;
    VectorXd exit_dir = VectorXd::Zero(nz + 1);
    exit_dir(nz) = 1.0;

    const int m_ph = static_cast<int>(ph.G.rows()) + 2 * static_cast<int>(ph.socs.size());
    double t = 1.0;
    bool interior_found = false;
    for (int stage = 0; stage < 60; ++stage) {
      CenterResult cr = center(ph, t, zs, newton_budget, 1e-11,
                               /*early_exit_linear_threshold=*/-1e-6, &exit_dir);
      if (zs(nz) < -1e-8) {
        interior_found = true;
        break;
      }
      if (cr.hit_iteration_cap) {
        iterations_used = used();
        return finish(SolveStatus::MaxIterations, red.x0 + red.N * zs.head(nz), 1.0,
                      iterations_used);
      }
      if (m_ph / t <= 0.25 * tol.feas_tol) break;
      t *= 30.0;
    }
    if (!interior_found) {
      // Certified (to tolerance) that no interior point exists.
      return finish(SolveStatus::Infeasible, red.x0 + red.N * zs.head(nz), 0.0, used());
    }
    z = zs.head(nz);
  }

  // --- Phase II: barrier path following.
  const int m_bar = static_cast<int>(red.G.rows()) + 2 * static_cast<int>(red.socs.size());
  double t = 1.0;
  auto objective_of = [&](const VectorXd& zz) {
    double v = red.q.dot(zz);
    if (red.P.size() > 0) v += 0.5 * zz.dot(red.P * zz);
    return v;
  };
  bool capped = false;
  bool gap_ok = false;
  for (int stage = 0; stage < 80; ++stage) {
    CenterResult cr = center(red, t, z, newton_budget);
    if (objective_of(z) < kUnboundedObjective)
      return finish(SolveStatus::Unbounded, red.x0 + red.N * z, 0.0, used());
    if (cr.hit_iteration_cap) {
      capped = true;
      break;
    }
    if (cr.converged && m_bar / t <= tol.gap_tol * (1.0 + std::abs(objective_of(z)))) {
      gap_ok = true;
      break;
    }
    t *= 30.0;
  }
  if (!capped && gap_ok) {
    // Tight final centering so the reported dual residual is trustworthy.
    CenterResult cr = center(red, t, z, newton_budget, 1e-17);
    capped = cr.hit_iteration_cap && !cr.converged;
  }
  iterations_used = used();

  VectorXd x = red.x0 + red.N * z;

  // Dual residual: barrier multipliers plus least-squares equality duals.
  double dual_res = 0.0;
  {
    VectorXd resid = q;
    if (P.size() > 0) resid.noalias() += P * x;
    if (!keep.empty()) {
      VectorXd slack = red.h - red.G * z;
      for (std::size_t k = 0; k < keep.size(); ++k)
        resid += program.G.row(keep[k]).transpose() / (t * std::max(slack(k), 1e-300));
    }
    for (std::size_t j = 0; j < red.socs.size(); ++j) {
      const SocBlock& rs = red.socs[j];
      const SocBlock& os = program.soc_blocks[j];
      const double u = rs.c.dot(z) + rs.d;
      VectorXd v = rs.f;
      if (rs.F.rows() > 0) v.noalias() += rs.F * z;
      const double res = std::max(u * u - v.squaredNorm(), 1e-300);
      VectorXd dr = 2.0 * u * os.c.transpose();
      if (os.F.rows() > 0) dr.noalias() -= 2.0 * os.F.transpose() * v;
      resid -= dr / (t * res);
    }
    if (Aall.rows() > 0) {
      Eigen::ColPivHouseholderQR<MatrixXd> qrT(MatrixXd(Aall.transpose()));
      VectorXd nu = qrT.solve(-resid);
      resid += Aall.transpose() * nu;
    }
    dual_res = resid.cwiseAbs().maxCoeff();
  }

  return finish(!capped && gap_ok ? SolveStatus::Optimal : SolveStatus::MaxIterations, x,
                dual_res, iterations_used);
}

void dump(const ConicProgram& program, std::ostream& os) {
  Eigen::IOFormat fmt(Eigen::FullPrecision, Eigen::DontAlignCols, " ", "\n");
  os << "conic_program n " << program.n << "\n";
  os << "P " << program.P.rows() << " " << program.P.cols() << "\n";
  if (program.P.size() > 0) os << program.P.format(fmt) << "\n";
  os << "q " << program.q.size() << "\n";
  if (program.q.size() > 0) os << program.q.transpose().format(fmt) << "\n";
  os << "G " << program.G.rows() << " " << program.G.cols() << "\n";
  if (program.G.size() > 0) os << program.G.format(fmt) << "\n";
  os << "h " << program.h.size() << "\n";
  if (program.h.size() > 0) os << program.h.transpose().format(fmt) << "\n";
  os << "A " << program.A.rows() << " " << program.A.cols() << "\n";
  if (program.A.size() > 0) os << program.A.format(fmt) << "\n";
  os << "b " << program.b.size() << "\n";
  if (program.b.size() > 0) os << program.b.transpose().format(fmt) << "\n";
  os << "soc_blocks " << program.soc_blocks.size() << "\n";
  for (const SocBlock& s : program.soc_blocks) {
    os << "soc " << s.F.rows() << "\n";
    if (s.F.size() > 0) os << s.F.format(fmt) << "\n";
    if (s.f.size() > 0) os << s.f.transpose().format(fmt) << "\n";
    os << s.c.format(fmt) << "\n";
    os << s.d << "\n";
  }
}

}  // namespace asmpc::conic
