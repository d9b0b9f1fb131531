#include "skinest/optimizer.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "skinest/naive.hpp"
#include "skinest/netlist.hpp"

namespace skinest {

namespace {

// The solver works in log-conductance: positivity comes for free, the
// decision variables live near 1, and the box bounds below are the same
// clamps the rest of the toolkit uses. Voltages are never independent
// unknowns here: each state's node voltages are the forward solve of its
// own conductance grid, so current balance holds everywhere by
// construction and only the two reading-match equations per state remain
// as constraints. Those are handled with an augmented Lagrangian whose
// inner problems are plain least squares.

double cell_log_lo() { return std::log(1.0 / kOpenCircuitMohm); }
double cell_log_hi() { return std::log(1.0 / kMinResistanceMohm); }
double wire_log_hi() { return std::log(1.0 / kWireFloorMohm); }

struct StateWork {
  StateTopology topo;
  Reading data;
  // Caches for the current accepted iterate.
  Eigen::VectorXd g;  // conductances, 3nm
  Eigen::MatrixXd G;  // nodal matrix
  Eigen::VectorXd b;  // injection
  Eigen::LDLT<Eigen::MatrixXd> ldlt;
  Eigen::VectorXd v;  // node voltages
  Eigen::MatrixXd S;  // dv/dg
  Eigen::Vector2d c;  // (v_source - v_s, v_sense - v_r)
};

struct TrialEval {
  Eigen::VectorXd g;
  Eigen::VectorXd v;
  Eigen::Vector2d c;
};

class StageSolver {
 public:
  StageSolver(const StateEnsemble& ensemble, const ObjectiveWeights& weights,
              const SolverOptions& options)
      : grid_(ensemble.grid),
        drive_(ensemble.drive),
        true_weights_(weights),
        weights_(weights),
        options_(options),
        nm_(grid_.cells()),
        nv_(3 * grid_.cells()),
        ns_(grid_.states_per_frame()),
        total_(ns_ * nv_) {
    if (static_cast<int>(ensemble.states.size()) != ns_) {
      throw std::invalid_argument("solver: ensemble state count does not match grid");
    }
    if (weights.alpha < 0.0 || weights.beta < 0.0 || weights.lambda < 0.0) {
      throw std::invalid_argument("solver: negative objective weight");
    }
    // The constraints are driven to feasibility either way, so the solution
    // only depends on the objective weights' ratios. Normalizing the global
    // scale keeps the Gauss-Newton system comparable to the constraint
    // penalty; exit reports use the caller's weights.
    const double scale = std::max({weights.alpha, weights.beta, 1.0});
    weights_.alpha = weights.alpha / scale;
    weights_.beta = weights.beta / scale;
    weights_.lambda = weights.lambda / scale;
    work_.resize(static_cast<std::size_t>(ns_));
    scratch_.resize(static_cast<std::size_t>(ns_));
    const int nodes = 2 * nm_ + 2;
    for (int s = 0; s < ns_; ++s) {
      const CircuitState& state = ensemble.states[static_cast<std::size_t>(s)];
      StateWork& w = work_[static_cast<std::size_t>(s)];
      w.topo = make_state_topology(grid_, state.config, state.cell);
      w.data = state.data;
      w.g.resize(nv_);
      w.G.resize(nodes, nodes);
      w.b = Eigen::VectorXd::Zero(nodes);
      w.b(w.topo.source_node) = drive_.v_dd / drive_.r_ref_source;
      w.v.resize(nodes);
      w.S.resize(nodes, nv_);
      scratch_[static_cast<std::size_t>(s)].g.resize(nv_);
      scratch_[static_cast<std::size_t>(s)].v.resize(nodes);
    }

    lo_.resize(nv_);
    hi_.resize(nv_);
    for (int t = 0; t < nv_; ++t) {
      lo_(t) = cell_log_lo();
      hi_(t) = t < nm_ ? cell_log_hi() : wire_log_hi();
    }

    u_.resize(total_);
    for (int s = 0; s < ns_; ++s) {
      const ResistanceField& f = ensemble.states[static_cast<std::size_t>(s)].field;
      for (int t = 0; t < nm_; ++t) {
        u_(s * nv_ + t) = -std::log(f.cell[static_cast<std::size_t>(t)]);
        u_(s * nv_ + nm_ + t) = -std::log(f.top_wire[static_cast<std::size_t>(t)]);
        u_(s * nv_ + 2 * nm_ + t) = -std::log(f.bottom_wire[static_cast<std::size_t>(t)]);
      }
      u_.segment(s * nv_, nv_) = u_.segment(s * nv_, nv_).cwiseMax(lo_).cwiseMin(hi_);
    }

    y_ = Eigen::VectorXd::Zero(2 * ns_);
    mu_ = options_.mu_initial;
  }

  std::pair<StateEnsemble, SolveReport> run(const StateEnsemble& input) {
    const auto t0 = std::chrono::steady_clock::now();
    evaluate_current(u_);

    double best_obj = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_u;
    bool have_best = false;
    auto note_best = [&]() {
      if (feasibility() <= options_.feasibility_tol) {
        const double obj = objective();
        if (obj < best_obj) {
          best_obj = obj;
          best_u = u_;
          have_best = true;
        }
      }
    };
    note_best();

    int iterations = 0;
    bool converged = false;
    double lm_damping = 1e-3;
    double feas_ref = feasibility();
    double prev_outer_obj = std::numeric_limits<double>::infinity();
    double prev_outer_merit = std::numeric_limits<double>::infinity();
    double prev_violation_feas = std::numeric_limits<double>::infinity();

    constexpr int kInnerCap = 25;
    while (iterations < options_.max_iterations && !converged) {
      // Inner minimization of the augmented least-squares merit for the
      // current multipliers. The cap matters: the multiplier/penalty updates
      // below are what reshape the merit when the inner problem grinds.
      double merit = merit_value();
      int flat_steps = 0;
      int inner = 0;
      bool stalled = false;
      while (iterations < options_.max_iterations && inner < kInnerCap) {
        ++inner;
        assemble_normal_equations();
        const double merit_before = merit;
        bool accepted = false;
        Eigen::VectorXd u_trial(total_);
        for (int attempt = 0; attempt < 14 && !accepted; ++attempt) {
          if (!solve_step(lm_damping, u_trial)) {
            lm_damping = std::min(lm_damping * 10.0, 1e15);
            continue;
          }
          const double merit_trial = merit_at(u_trial);
          if (merit_trial < merit) {
            u_ = u_trial;
            merit = merit_trial;
            lm_damping = std::max(lm_damping / 3.0, 1e-10);
            accepted = true;
          } else {
            lm_damping = std::min(lm_damping * 4.0, 1e15);
          }
        }
        ++iterations;
        if (!accepted) {
          stalled = true;
          break;
        }
        evaluate_current(u_);
        note_best();
        if (options_.trace) {
          std::fprintf(stderr,
                       "  it=%3d merit=%.6e feas=%.3e obj=%.6e mu=%.1e lm=%.1e\n",
                       iterations, merit, feasibility(), objective(), mu_, lm_damping);
        }
        const double drop = merit_before - merit;
        if (drop <= 1e-10 * std::max(1.0, std::abs(merit))) {
          if (++flat_steps >= 2) break;
        } else {
          flat_steps = 0;
        }
      }

      // Outer multiplier / penalty update.
      const double feas = feasibility();
      const double obj = objective();
      if (feas <= options_.feasibility_tol) {
        const double change = std::abs(prev_outer_obj - obj);
        if (change <= options_.stationarity_tol * std::max(1.0, std::abs(obj)) || stalled) {
          converged = true;
          break;
        }
        prev_outer_obj = obj;
        update_multipliers();
      } else if (violation_floor_reached_) {
        // Readings off the achievable set (noise, model mismatch): the
        // residual cannot vanish. Finish as a least-violation fit, judged
        // on the merit actually being minimized and on the residual floor.
        const double merit_now = merit_value();
        const double merit_change = std::abs(prev_outer_merit - merit_now);
        const double feas_change = std::abs(prev_violation_feas - feas);
        if (stalled || merit_change <= 1e-4 * std::max(1.0, std::abs(merit_now)) ||
            feas_change <= 1e-3 * feas) {
          converged = true;
          break;
        }
        prev_outer_merit = merit_now;
        prev_violation_feas = feas;
      } else {
        if (feas <= 0.25 * feas_ref) {
          update_multipliers();
          feas_ref = feas;
        } else if (feas_at_last_bump_ > 0.0 && feas > 0.8 * feas_at_last_bump_ &&
                   mu_ >= 1e8) {
          // Raising the penalty stopped helping; the violation is structural.
          violation_floor_reached_ = true;
        } else if (mu_ < options_.mu_max) {
          mu_ = std::min(mu_ * 10.0, options_.mu_max);
          feas_at_last_bump_ = feas;
        } else {
          violation_floor_reached_ = true;
        }
        lm_damping = 1e-3;
      }
    }

    const bool current_feasible = feasibility() <= options_.feasibility_tol;
    if (have_best && (!current_feasible || best_obj < objective())) {
      u_ = best_u;
      evaluate_current(u_);
    }

    StateEnsemble out = input;
    write_back(out);
    SolveReport report;
    report.cost_f = skinest::cost_f(out);
    report.cost_c = skinest::cost_c(out);
    report.cost_r = skinest::cost_r(out);
    report.objective = true_weights_.alpha * report.cost_f + true_weights_.beta * report.cost_c +
                       true_weights_.lambda * report.cost_r;
    report.max_kcl_residual = ensemble_kcl_residual(out);
    report.max_data_residual = ensemble_data_residual(out);
    report.iterations = iterations;
    report.converged = converged && report.max_kcl_residual <= options_.feasibility_tol;
    report.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(out), report};
  }

 private:
  // --- per-state circuit evaluation ---------------------------------------

  void forward_solve(const StateTopology& topo, const Eigen::VectorXd& g, Eigen::MatrixXd& G,
                     Eigen::VectorXd& v, Eigen::Vector2d& c, const Reading& data,
                     Eigen::LDLT<Eigen::MatrixXd>* ldlt_out, const Eigen::VectorXd& b) const {
    G.setZero();
    for (const SkinEdge& e : topo.edges) {
      const double ge = g(e.var);
      G(e.node_a, e.node_a) += ge;
      G(e.node_b, e.node_b) += ge;
      G(e.node_a, e.node_b) -= ge;
      G(e.node_b, e.node_a) -= ge;
    }
    G(topo.source_node, topo.source_node) += 1.0 / drive_.r_ref_source;
    G(topo.sense_node, topo.sense_node) += 1.0 / drive_.r_ref_ground;
    if (ldlt_out != nullptr) {
      ldlt_out->compute(G);
      v = ldlt_out->solve(b);
    } else {
      v = Eigen::LDLT<Eigen::MatrixXd>(G).solve(b);
    }
    c(0) = v(topo.source_node) - data.v_s;
    c(1) = v(topo.sense_node) - data.v_r;
  }

  /// Recomputes every state's circuit (and sensitivities) at `u` into the
  /// accepted caches.
  void evaluate_current(const Eigen::VectorXd& u) {
    parallel_for(ns_, options_.policy, [&](int s) {
      StateWork& w = work_[static_cast<std::size_t>(s)];
      w.g = u.segment(s * nv_, nv_).array().exp();
      forward_solve(w.topo, w.g, w.G, w.v, w.c, w.data, &w.ldlt, w.b);
      // Sensitivity of every node voltage to every edge conductance:
      // G dv/dg_k = -(dG/dg_k) v, one sparse right-hand side per edge.
      Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(w.v.size(), nv_);
      for (const SkinEdge& e : w.topo.edges) {
        const double dv = w.v(e.node_a) - w.v(e.node_b);
        rhs(e.node_a, e.var) -= dv;
        rhs(e.node_b, e.var) += dv;
      }
      w.S = w.ldlt.solve(rhs);
    });
  }

  /// Circuit-only evaluation at a trial point, into scratch buffers.
  double merit_at(const Eigen::VectorXd& u) {
    parallel_for(ns_, options_.policy, [&](int s) {
      TrialEval& t = scratch_[static_cast<std::size_t>(s)];
      const StateWork& w = work_[static_cast<std::size_t>(s)];
      t.g = u.segment(s * nv_, nv_).array().exp();
      Eigen::MatrixXd G(w.v.size(), w.v.size());
      forward_solve(w.topo, t.g, G, t.v, t.c, w.data, nullptr, w.b);
    });
    return merit_from(
        [&](int s) -> const Eigen::VectorXd& { return scratch_[static_cast<std::size_t>(s)].g; },
        [&](int s) -> const Eigen::VectorXd& { return scratch_[static_cast<std::size_t>(s)].v; },
        [&](int s) -> const Eigen::Vector2d& { return scratch_[static_cast<std::size_t>(s)].c; });
  }

  // --- merit / objective ----------------------------------------------------

  template <typename GetG, typename GetV, typename GetC>
  double merit_from(GetG&& g_of, GetV&& v_of, GetC&& c_of) const {
    double f_sum = 0.0;
    double c_sum = 0.0;
    double r_sum = 0.0;
    const int crossings = 2 * nm_;
    for (int t = 0; t < nm_; ++t) {
      for (int pair = 0; pair < 2; ++pair) {
        const int sa = 4 * t + 2 * pair;
        const int sb = sa + 1;
        f_sum += (g_of(sa) - g_of(sb)).squaredNorm();
        f_sum += (v_of(sa).head(crossings) - v_of(sb).head(crossings)).squaredNorm();
      }
    }
    for (int t = 0; t + 1 < nm_; ++t) {
      for (int k = 0; k < kConfigCount; ++k) {
        c_sum += (g_of(4 * t + k) - g_of(4 * (t + 1) + k)).squaredNorm();
      }
    }
    if (weights_.lambda > 0.0) {
      for (int s = 0; s < ns_; ++s) {
        r_sum += g_of(s).tail(2 * nm_).cwiseInverse().squaredNorm();
      }
    }
    double al = 0.0;
    for (int s = 0; s < ns_; ++s) {
      const Eigen::Vector2d shifted = c_of(s) + y_.segment<2>(2 * s) / mu_;
      al += 0.5 * mu_ * shifted.squaredNorm();
    }
    return 0.5 * (weights_.alpha * f_sum + weights_.beta * c_sum + weights_.lambda * r_sum) + al;
  }

  double merit_value() const {
    return merit_from(
        [&](int s) -> const Eigen::VectorXd& { return work_[static_cast<std::size_t>(s)].g; },
        [&](int s) -> const Eigen::VectorXd& { return work_[static_cast<std::size_t>(s)].v; },
        [&](int s) -> const Eigen::Vector2d& { return work_[static_cast<std::size_t>(s)].c; });
  }

  double objective() const {
    double f_sum = 0.0;
    double c_sum = 0.0;
    double r_sum = 0.0;
    const int crossings = 2 * nm_;
    for (int t = 0; t < nm_; ++t) {
      for (int pair = 0; pair < 2; ++pair) {
        const int sa = 4 * t + 2 * pair;
        const int sb = sa + 1;
        const StateWork& wa = work_[static_cast<std::size_t>(sa)];
        const StateWork& wb = work_[static_cast<std::size_t>(sb)];
        f_sum += (wa.g - wb.g).squaredNorm();
        f_sum += (wa.v.head(crossings) - wb.v.head(crossings)).squaredNorm();
      }
    }
    for (int t = 0; t + 1 < nm_; ++t) {
      for (int k = 0; k < kConfigCount; ++k) {
        c_sum += (work_[static_cast<std::size_t>(4 * t + k)].g -
                  work_[static_cast<std::size_t>(4 * (t + 1) + k)].g)
                     .squaredNorm();
      }
    }
    for (int s = 0; s < ns_; ++s) {
      r_sum += work_[static_cast<std::size_t>(s)].g.tail(2 * nm_).cwiseInverse().squaredNorm();
    }
    return weights_.alpha * f_sum + weights_.beta * c_sum + weights_.lambda * r_sum;
  }

  double feasibility() const {
    double worst = 0.0;
    for (const StateWork& w : work_) {
      worst = std::max(worst, w.c.cwiseAbs().maxCoeff());
    }
    return worst;
  }

  void update_multipliers() {
    for (int s = 0; s < ns_; ++s) {
      y_.segment<2>(2 * s) += mu_ * work_[static_cast<std::size_t>(s)].c;
    }
  }

  // --- Gauss-Newton system ---------------------------------------------------

  void assemble_normal_equations() {
    if (H_.rows() != total_) {
      H_.resize(total_, total_);
      grad_.resize(total_);
    }
    H_.setZero();
    grad_.setZero();
    const int crossings = 2 * nm_;

    // Per-state pieces first (parallel, disjoint slots), combined serially.
    if (cross_jac_.empty()) {
      cross_jac_.resize(static_cast<std::size_t>(ns_));
      constraint_jac_.resize(static_cast<std::size_t>(ns_));
    }
    parallel_for(ns_, options_.policy, [&](int s) {
      const StateWork& w = work_[static_cast<std::size_t>(s)];
      // d(node voltage)/d(log g) for the crossing nodes and electrodes.
      cross_jac_[static_cast<std::size_t>(s)] =
          w.S.topRows(crossings) * w.g.asDiagonal();
      Eigen::MatrixXd jc(2, nv_);
      jc.row(0) = w.S.row(w.topo.source_node);
      jc.row(1) = w.S.row(w.topo.sense_node);
      constraint_jac_[static_cast<std::size_t>(s)] = jc * w.g.asDiagonal();
    });

    auto block = [&](int s) { return s * nv_; };

    for (int t = 0; t < nm_; ++t) {
      for (int pair = 0; pair < 2; ++pair) {
        const int sa = 4 * t + 2 * pair;
        const int sb = sa + 1;
        const StateWork& wa = work_[static_cast<std::size_t>(sa)];
        const StateWork& wb = work_[static_cast<std::size_t>(sb)];
        const Eigen::MatrixXd& Wa = cross_jac_[static_cast<std::size_t>(sa)];
        const Eigen::MatrixXd& Wb = cross_jac_[static_cast<std::size_t>(sb)];
        const double a = weights_.alpha;

        const Eigen::VectorXd gd = wa.g - wb.g;
        const Eigen::VectorXd vd = wa.v.head(crossings) - wb.v.head(crossings);

        H_.block(block(sa), block(sa), nv_, nv_) +=
            a * (Eigen::MatrixXd(wa.g.cwiseProduct(wa.g).asDiagonal()) + Wa.transpose() * Wa);
        H_.block(block(sb), block(sb), nv_, nv_) +=
            a * (Eigen::MatrixXd(wb.g.cwiseProduct(wb.g).asDiagonal()) + Wb.transpose() * Wb);
        const Eigen::MatrixXd cross =
            -a * (Eigen::MatrixXd(wa.g.cwiseProduct(wb.g).asDiagonal()) + Wa.transpose() * Wb);
        H_.block(block(sa), block(sb), nv_, nv_) += cross;
        H_.block(block(sb), block(sa), nv_, nv_) += cross.transpose();

        grad_.segment(block(sa), nv_) +=
            a * (gd.cwiseProduct(wa.g) + Wa.transpose() * vd);
        grad_.segment(block(sb), nv_) -=
            a * (gd.cwiseProduct(wb.g) + Wb.transpose() * vd);
      }
    }

    for (int t = 0; t + 1 < nm_; ++t) {
      for (int k = 0; k < kConfigCount; ++k) {
        const int sa = 4 * t + k;
        const int sb = 4 * (t + 1) + k;
        const StateWork& wa = work_[static_cast<std::size_t>(sa)];
        const StateWork& wb = work_[static_cast<std::size_t>(sb)];
        const double bweight = weights_.beta;
        const Eigen::VectorXd gd = wa.g - wb.g;
        for (int q = 0; q < nv_; ++q) {
          H_(block(sa) + q, block(sa) + q) += bweight * wa.g(q) * wa.g(q);
          H_(block(sb) + q, block(sb) + q) += bweight * wb.g(q) * wb.g(q);
          H_(block(sa) + q, block(sb) + q) -= bweight * wa.g(q) * wb.g(q);
          H_(block(sb) + q, block(sa) + q) -= bweight * wa.g(q) * wb.g(q);
          grad_(block(sa) + q) += bweight * gd(q) * wa.g(q);
          grad_(block(sb) + q) -= bweight * gd(q) * wb.g(q);
        }
      }
    }

    if (weights_.lambda > 0.0) {
      for (int s = 0; s < ns_; ++s) {
        const StateWork& w = work_[static_cast<std::size_t>(s)];
        for (int q = nm_; q < nv_; ++q) {
          const double inv_g = 1.0 / w.g(q);
          H_(block(s) + q, block(s) + q) += weights_.lambda * inv_g * inv_g;
          grad_(block(s) + q) -= weights_.lambda * inv_g * inv_g;
        }
      }
    }

    for (int s = 0; s < ns_; ++s) {
      const StateWork& w = work_[static_cast<std::size_t>(s)];
      const Eigen::MatrixXd& jc = constraint_jac_[static_cast<std::size_t>(s)];
      const Eigen::Vector2d scaled = mu_ * w.c + y_.segment<2>(2 * s);
      H_.block(block(s), block(s), nv_, nv_) += mu_ * jc.transpose() * jc;
      grad_.segment(block(s), nv_) += jc.transpose() * scaled;
    }
  }

  bool solve_step(double damping, Eigen::VectorXd& u_trial) {
    Eigen::VectorXd diag = H_.diagonal().cwiseMax(1e-12);
    Eigen::MatrixXd A = H_;
    A.diagonal() += damping * diag;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    if (ldlt.info() != Eigen::Success) return false;
    const Eigen::VectorXd step = ldlt.solve(-grad_);
    if (!step.allFinite()) return false;
    u_trial = u_ + step;
    for (int s = 0; s < ns_; ++s) {
      u_trial.segment(s * nv_, nv_) =
          u_trial.segment(s * nv_, nv_).cwiseMax(lo_).cwiseMin(hi_);
    }
    return true;
  }

  void write_back(StateEnsemble& out) const {
    const int crossings = 2 * nm_;
    for (int s = 0; s < ns_; ++s) {
      const StateWork& w = work_[static_cast<std::size_t>(s)];
      CircuitState& state = out.states[static_cast<std::size_t>(s)];
      for (int t = 0; t < nm_; ++t) {
        state.field.cell[static_cast<std::size_t>(t)] = 1.0 / w.g(t);
        state.field.top_wire[static_cast<std::size_t>(t)] = 1.0 / w.g(nm_ + t);
        state.field.bottom_wire[static_cast<std::size_t>(t)] = 1.0 / w.g(2 * nm_ + t);
      }
      state.v_top.assign(w.v.data(), w.v.data() + nm_);
      state.v_bottom.assign(w.v.data() + nm_, w.v.data() + crossings);
      state.v_source = w.v(w.topo.source_node);
      state.v_sense = w.v(w.topo.sense_node);
    }
  }

  GridSpec grid_;
  DriveSetup drive_;
  ObjectiveWeights true_weights_;
  ObjectiveWeights weights_;
  SolverOptions options_;
  int nm_;
  int nv_;
  int ns_;
  int total_;
  std::vector<StateWork> work_;
  std::vector<TrialEval> scratch_;
  std::vector<Eigen::MatrixXd> cross_jac_;       // per state, crossings x nv
  std::vector<Eigen::MatrixXd> constraint_jac_;  // per state, 2 x nv
  Eigen::VectorXd u_;
  Eigen::VectorXd lo_, hi_;
  Eigen::VectorXd y_;
  double mu_ = 1e4;
  double feas_at_last_bump_ = -1.0;
  bool violation_floor_reached_ = false;
  Eigen::MatrixXd H_;
  Eigen::VectorXd grad_;
};

double conductance_difference(const CircuitState& a, const CircuitState& b) {
  double sum = 0.0;
  const std::size_t n = a.field.cell.size();
  for (std::size_t t = 0; t < n; ++t) {
    const double dc = 1.0 / a.field.cell[t] - 1.0 / b.field.cell[t];
    const double dt = 1.0 / a.field.top_wire[t] - 1.0 / b.field.top_wire[t];
    const double db = 1.0 / a.field.bottom_wire[t] - 1.0 / b.field.bottom_wire[t];
    sum += dc * dc + dt * dt + db * db;
  }
  return sum;
}

double voltage_difference(const CircuitState& a, const CircuitState& b) {
  double sum = 0.0;
  for (std::size_t t = 0; t < a.v_top.size(); ++t) {
    const double dt = a.v_top[t] - b.v_top[t];
    const double db = a.v_bottom[t] - b.v_bottom[t];
    sum += dt * dt + db * db;
  }
  return sum;
}

}  // namespace

StateEnsemble bootstrap_states(const MeasurementFrame& frame, const DriveSetup& drive,
                               ExecPolicy policy) {
  if (!frame.complete()) throw std::invalid_argument("bootstrap_states: incomplete frame");
  if (!drive.valid()) throw std::invalid_argument("bootstrap_states: invalid drive setup");
  const GridSpec grid = frame.grid();

  const std::vector<double> averaged = naive_resistance(frame, drive);
  std::vector<std::vector<double>> per_config;
  per_config.reserve(kConfigCount);
  for (int k = 0; k < kConfigCount; ++k) {
    per_config.push_back(naive_resistance_for_config(frame, drive, static_cast<ConfigLabel>(k)));
  }

  StateEnsemble ensemble;
  ensemble.grid = grid;
  ensemble.drive = drive;
  ensemble.frame = frame;
  const auto order = frame_ordering(grid);
  ensemble.states.resize(order.size());

  parallel_for(static_cast<int>(order.size()), policy, [&](int s) {
    const MeasurementSlot& slot = order[static_cast<std::size_t>(s)];
    CircuitState& state = ensemble.states[static_cast<std::size_t>(s)];
    state.config = OhmmeterConfig::of(slot.config);
    state.cell = slot.cell;
    state.data = frame.at(slot.cell.i, slot.cell.j, slot.config);

    // Shared naive grid, except each state trusts its own reading for the
    // cell it measures; wires start at the conductance-safe floor.
    state.field = ResistanceField(grid, 1.0, kWireFloorMohm);
    state.field.cell = averaged;
    state.field.cell_at(slot.cell.i, slot.cell.j) =
        per_config[static_cast<std::size_t>(slot.config)]
                  [static_cast<std::size_t>(slot.cell.i) * grid.cols + slot.cell.j];

    const Netlist net = build_netlist(state.field, drive, state.config, state.cell);
    const Eigen::VectorXd v = solve_nodes(net);
    const int nm = grid.cells();
    state.v_top.assign(v.data(), v.data() + nm);
    state.v_bottom.assign(v.data() + nm, v.data() + 2 * nm);
    state.v_source = v(net.topology.source_node);
    state.v_sense = v(net.topology.sense_node);
  });
  return ensemble;
}

double cost_f(const StateEnsemble& ensemble) {
  double sum = 0.0;
  const int nm = ensemble.grid.cells();
  for (int t = 0; t < nm; ++t) {
    for (int pair = 0; pair < 2; ++pair) {
      const CircuitState& a = ensemble.states[static_cast<std::size_t>(4 * t + 2 * pair)];
      const CircuitState& b = ensemble.states[static_cast<std::size_t>(4 * t + 2 * pair + 1)];
      sum += conductance_difference(a, b) + voltage_difference(a, b);
    }
  }
  return sum;
}

double cost_c(const StateEnsemble& ensemble) {
  double sum = 0.0;
  const int nm = ensemble.grid.cells();
  for (int t = 0; t + 1 < nm; ++t) {
    for (int k = 0; k < kConfigCount; ++k) {
      sum += conductance_difference(ensemble.states[static_cast<std::size_t>(4 * t + k)],
                                    ensemble.states[static_cast<std::size_t>(4 * (t + 1) + k)]);
    }
  }
  return sum;
}

double cost_r(const StateEnsemble& ensemble) {
  double sum = 0.0;
  for (const CircuitState& state : ensemble.states) {
    for (std::size_t t = 0; t < state.field.top_wire.size(); ++t) {
      sum += state.field.top_wire[t] * state.field.top_wire[t] +
             state.field.bottom_wire[t] * state.field.bottom_wire[t];
    }
  }
  return sum;
}

double ensemble_kcl_residual(const StateEnsemble& ensemble) {
  double worst = 0.0;
  for (const CircuitState& state : ensemble.states) {
    worst = std::max(worst, state_kcl_residual(state.field, ensemble.drive, state.config,
                                               state.cell, state.v_top, state.v_bottom,
                                               state.v_source, state.v_sense));
  }
  return worst;
}

double ensemble_data_residual(const StateEnsemble& ensemble) {
  double worst = 0.0;
  for (const CircuitState& state : ensemble.states) {
    worst = std::max(worst, std::abs(state.v_source - state.data.v_s));
    worst = std::max(worst, std::abs(state.v_sense - state.data.v_r));
  }
  return worst;
}

std::pair<StateEnsemble, SolveReport> solve_feasible(const StateEnsemble& ensemble,
                                                     const ObjectiveWeights& weights,
                                                     const SolverOptions& options) {
  StageSolver solver(ensemble, weights, options);
  return solver.run(ensemble);
}

std::pair<StateEnsemble, SolveReport> solve_regularized(const StateEnsemble& ensemble,
                                                        const ObjectiveWeights& weights,
                                                        const SolverOptions& options) {
  StageSolver solver(ensemble, weights, options);
  return solver.run(ensemble);
}

std::vector<double> extract_cell_grid(const StateEnsemble& ensemble) {
  const GridSpec grid = ensemble.grid;
  std::vector<double> cells(static_cast<std::size_t>(grid.cells()), 0.0);
  for (int i = 0; i < grid.rows; ++i) {
    for (int j = 0; j < grid.cols; ++j) {
      double sum = 0.0;
      for (int k = 0; k < kConfigCount; ++k) {
        sum += ensemble.state(CellIndex{i, j}, static_cast<ConfigLabel>(k)).field.cell_at(i, j);
      }
      cells[static_cast<std::size_t>(i) * grid.cols + j] = sum / kConfigCount;
    }
  }
  return cells;
}

EstimateResult estimate(const MeasurementFrame& frame, const DriveSetup& drive,
                        const ObjectiveWeights& weights_lsq, const ObjectiveWeights& weights_reg,
                        const SolverOptions& options, const StateEnsemble* warm_start) {
  StateEnsemble start;
  if (warm_start != nullptr && warm_start->grid == frame.grid() &&
      warm_start->states.size() == static_cast<std::size_t>(frame.grid().states_per_frame())) {
    start = *warm_start;
    start.frame = frame;
    start.drive = drive;
    const auto order = frame_ordering(frame.grid());
    for (std::size_t s = 0; s < order.size(); ++s) {
      start.states[s].data = frame.at(order[s].cell.i, order[s].cell.j, order[s].config);
    }
  } else {
    start = bootstrap_states(frame, drive, options.policy);
  }

  EstimateResult result;
  auto [feasible_ensemble, feasible_report] = solve_feasible(start, weights_lsq, options);
  result.cell_mohm_feasible = extract_cell_grid(feasible_ensemble);
  result.feasible = feasible_report;

  auto [regularized_ensemble, regularized_report] =
      solve_regularized(feasible_ensemble, weights_reg, options);
  result.cell_mohm = extract_cell_grid(regularized_ensemble);
  result.regularized = regularized_report;
  result.ensemble = std::move(regularized_ensemble);
  return result;
}

}  // namespace skinest
