//! Box-constrained saliency QP and its primal-dual interior-point solver.
//!
//! The objective over per-region saliency `s` is
//!
//! ```text
//! f0(s) = a * sum -s_i ln d_i + g * sum -s_i ln w_i + a * sum -(1 - s_i) ln t_i
//!       + sum_i sum_j (s_i - s_j)^2 q_ij
//! ```
//!
//! subject to `0 <= s <= 1` and `s_i = 0` on border regions.

use std::io::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::maps::{CueMaps, SimilarityModel};
use crate::superpixel::RegionSet;

pub const DEFAULT_ALPHA: f64 = 4.0;
pub const DEFAULT_GAMMA: f64 = 40.0;
pub const DEFAULT_EPSILON_LOG: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyProblem {
    pub ln_w: Vec<f64>,
    pub ln_d: Vec<f64>,
    pub ln_t: Vec<f64>,
    /// `-a ln d - g ln w + a ln t` per region.
    pub linear: Vec<f64>,
    /// `a * sum -ln t`, the objective at `s = 0`.
    pub constant: f64,
    pub q: SimilarityModel,
    pub border: Vec<bool>,
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_log: f64,
    /// Adds the equality row `sum s = 1` next to the border row.
    pub unit_sum_row: bool,
}

impl SaliencyProblem {
    /// Builds a problem from raw cue vectors; cues are clamped to
    /// `[epsilon_log, 1]` before taking logs.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        w: &[f64],
        d: &[f64],
        t: &[f64],
        q: SimilarityModel,
        border: Vec<bool>,
        alpha: f64,
        gamma: f64,
        epsilon_log: f64,
    ) -> Result<Self> {
        let n = w.len();
        if d.len() != n || t.len() != n || border.len() != n || q.len() != n {
            return Err(Error::Assembly("cue vectors disagree in length".into()));
        }
        if n == 0 {
            return Err(Error::Assembly("no regions".into()));
        }
        if !(alpha.is_finite() && gamma.is_finite() && epsilon_log > 0.0 && epsilon_log < 1.0) {
            return Err(Error::Assembly("invalid alpha, gamma or log floor".into()));
        }
        let ln = |v: &[f64]| -> Vec<f64> {
            v.iter()
                .map(|&x| if x.is_nan() { f64::NAN } else { x.clamp(epsilon_log, 1.0).ln() })
                .collect()
        };
        let (ln_w, ln_d, ln_t) = (ln(w), ln(d), ln(t));
        let linear: Vec<f64> = (0..n)
            .map(|i| -alpha * ln_d[i] - gamma * ln_w[i] + alpha * ln_t[i])
            .collect();
        let constant = -alpha * ln_t.iter().sum::<f64>();
        if let Some(i) = linear.iter().position(|c| !c.is_finite()) {
            return Err(Error::Assembly(format!("non-finite coefficient at region {i}")));
        }
        if q.dense().iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Assembly("smoothness weights must be finite and nonnegative".into()));
        }
        Ok(Self {
            ln_w,
            ln_d,
            ln_t,
            linear,
            constant,
            q,
            border,
            alpha,
            gamma,
            epsilon_log,
            unit_sum_row: false,
        })
    }

    pub fn len(&self) -> usize {
        self.linear.len()
    }

    pub fn is_empty(&self) -> bool {
        self.linear.is_empty()
    }

    /// Smoothness Hessian `4 L(q)`.
    pub fn hessian(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                4.0 * (0..n).filter(|&k| k != i).map(|k| self.q.get(i, k)).sum::<f64>()
            } else {
                -4.0 * self.q.get(i, j)
            }
        })
    }

    /// Analytic gradient of the objective.
    pub fn gradient(&self, s: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                self.linear[i]
                    + 4.0 * (0..n).map(|j| (s[i] - s[j]) * self.q.get(i, j)).sum::<f64>()
            })
            .collect()
    }

    fn equality_rows(&self) -> Vec<(Vec<f64>, f64)> {
        let mut rows = Vec::new();
        if self.unit_sum_row {
            rows.push((vec![1.0; self.len()], 1.0));
        }
        if self.border.iter().any(|&b| b) {
            rows.push((self.border.iter().map(|&b| f64::from(u8::from(b))).collect(), 0.0));
        }
        rows
    }
}

pub fn assemble_problem(
    cues: &CueMaps,
    sim: &SimilarityModel,
    graph: &RegionSet,
    alpha: f64,
    gamma: f64,
) -> Result<SaliencyProblem> {
    assemble_problem_with_floor(cues, sim, graph, alpha, gamma, DEFAULT_EPSILON_LOG)
}

pub fn assemble_problem_with_floor(
    cues: &CueMaps,
    sim: &SimilarityModel,
    graph: &RegionSet,
    alpha: f64,
    gamma: f64,
    epsilon_log: f64,
) -> Result<SaliencyProblem> {
    let border: Vec<bool> = graph.regions().iter().map(|r| r.border).collect();
    if !border.iter().any(|&b| b) {
        return Err(Error::Assembly("no border region".into()));
    }
    SaliencyProblem::new(
        &cues.w,
        &cues.d,
        &cues.t,
        sim.clone(),
        border,
        alpha,
        gamma,
        epsilon_log,
    )
}

/// Exact objective, evaluated from the clamped logs.
pub fn evaluate_objective(p: &SaliencyProblem, s: &[f64]) -> f64 {
    let n = p.len();
    let mut data = 0.0;
    for i in 0..n {
        data += p.alpha * -s[i] * p.ln_d[i] + p.gamma * -s[i] * p.ln_w[i]
            + p.alpha * -(1.0 - s[i]) * p.ln_t[i];
    }
    let mut smooth = 0.0;
    for i in 0..n {
        for j in 0..n {
            smooth += (s[i] - s[j]).powi(2) * p.q.get(i, j);
        }
    }
    data + smooth
}

/// Primal-dual iterate over the full variable set.
#[derive(Debug, Clone, PartialEq)]
pub struct IpmState {
    pub s: Vec<f64>,
    /// Lower-bound multipliers followed by upper-bound multipliers.
    pub lambda: Vec<f64>,
    /// One multiplier per equality row.
    pub nu: Vec<f64>,
    /// Barrier parameter.
    pub g: f64,
    pub iteration: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    pub r_d: Vec<f64>,
    pub r_c: Vec<f64>,
    pub r_p: Vec<f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl Residuals {
    /// `|r_d| + |r_c| + |r_p|`.
    pub fn norm_sum(&self) -> f64 {
        norm(&self.r_d) + norm(&self.r_c) + norm(&self.r_p)
    }

    fn norm2(&self) -> f64 {
        let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        (sq(&self.r_d) + sq(&self.r_c) + sq(&self.r_p)).sqrt()
    }
}

/// QP in standard form: `1/2 s'Hs + c's`, `0 <= s <= 1`, `A s = b`.
#[derive(Debug, Clone)]
struct BoxQp {
    h: DMatrix<f64>,
    c: DVector<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl BoxQp {
    fn full(p: &SaliencyProblem) -> Self {
        let rows = p.equality_rows();
        let n = p.len();
        Self {
            h: p.hessian(),
            c: DVector::from_column_slice(&p.linear),
            a: DMatrix::from_fn(rows.len(), n, |r, j| rows[r].0[j]),
            b: DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1)),
        }
    }

    /// Border variables fixed at zero and removed.
    fn reduced(p: &SaliencyProblem, free: &[usize]) -> Self {
        let full_h = p.hessian();
        let m = usize::from(p.unit_sum_row);
        Self {
            h: DMatrix::from_fn(free.len(), free.len(), |i, j| full_h[(free[i], free[j])]),
            c: DVector::from_iterator(free.len(), free.iter().map(|&i| p.linear[i])),
            a: DMatrix::from_element(m, free.len(), 1.0),
            b: DVector::from_element(m, 1.0),
        }
    }

    fn n(&self) -> usize {
        self.c.len()
    }

    fn m(&self) -> usize {
        self.b.len()
    }

    fn residuals(&self, s: &DVector<f64>, lambda: &DVector<f64>, nu: &DVector<f64>, g: f64) -> Residuals {
        let n = self.n();
        let mut r_d = &self.h * s + &self.c + self.a.transpose() * nu;
        for i in 0..n {
            r_d[i] += -lambda[i] + lambda[n + i];
        }
        let mut r_c = Vec::with_capacity(2 * n);
        for i in 0..n {
            r_c.push(lambda[i] * s[i] - 1.0 / g);
        }
        for i in 0..n {
            r_c.push(lambda[n + i] * (1.0 - s[i]) - 1.0 / g);
        }
        let r_p = &self.a * s - &self.b;
        Residuals {
            r_d: r_d.as_slice().to_vec(),
            r_c,
            r_p: r_p.as_slice().to_vec(),
        }
    }

    /// Full `(3n + m)` Newton system, LU with partial pivoting.
    fn step_full(&self, s: &DVector<f64>, lambda: &DVector<f64>, r: &Residuals) -> Result<NewtonStep> {
        let (n, m) = (self.n(), self.m());
        let dim = 3 * n + m;
        let build = |reg: f64| {
            let mut k = DMatrix::zeros(dim, dim);
            for i in 0..n {
                for j in 0..n {
                    k[(i, j)] = self.h[(i, j)];
                }
                k[(i, i)] += reg;
                k[(i, n + i)] = -1.0;
                k[(i, 2 * n + i)] = 1.0;
                for e in 0..m {
                    k[(i, 3 * n + e)] = self.a[(e, i)];
                    k[(3 * n + e, i)] = self.a[(e, i)];
                }
                // Centrality rows: -diag(lambda) Df and -diag(f).
                k[(n + i, i)] = lambda[i];
                k[(n + i, n + i)] = s[i];
                k[(2 * n + i, i)] = -lambda[n + i];
                k[(2 * n + i, 2 * n + i)] = 1.0 - s[i];
            }
            k
        };
        let rhs = DVector::from_iterator(
            dim,
            r.r_d.iter().chain(&r.r_c).chain(&r.r_p).map(|v| -v),
        );
        let sol = solve_dense(build, rhs)?;
        Ok(NewtonStep {
            ds: sol.rows(0, n).as_slice().to_vec(),
            dlambda: sol.rows(n, 2 * n).as_slice().to_vec(),
            dnu: sol.rows(3 * n, m).as_slice().to_vec(),
        })
    }

    /// Same step with the multipliers eliminated: an `(n + m)` system.
    fn step_reduced(&self, s: &DVector<f64>, lambda: &DVector<f64>, r: &Residuals) -> Result<NewtonStep> {
        let (n, m) = (self.n(), self.m());
        let (lo, hi) = (&r.r_c[..n], &r.r_c[n..]);
        let build = |reg: f64| {
            let mut k = DMatrix::zeros(n + m, n + m);
            for i in 0..n {
                for j in 0..n {
                    k[(i, j)] = self.h[(i, j)];
                }
                k[(i, i)] += reg + lambda[i] / s[i] + lambda[n + i] / (1.0 - s[i]);
                for e in 0..m {
                    k[(i, n + e)] = self.a[(e, i)];
                    k[(n + e, i)] = self.a[(e, i)];
                }
            }
            k
        };
        let rhs = DVector::from_iterator(
            n + m,
            (0..n)
                .map(|i| -r.r_d[i] - lo[i] / s[i] + hi[i] / (1.0 - s[i]))
                .chain(r.r_p.iter().map(|v| -v)),
        );
        let sol = solve_dense(build, rhs)?;
        let ds: Vec<f64> = sol.rows(0, n).as_slice().to_vec();
        let mut dlambda = vec![0.0; 2 * n];
        for i in 0..n {
            dlambda[i] = -(lo[i] + lambda[i] * ds[i]) / s[i];
            dlambda[n + i] = (-hi[i] + lambda[n + i] * ds[i]) / (1.0 - s[i]);
        }
        Ok(NewtonStep {
            ds,
            dlambda,
            dnu: sol.rows(n, m).as_slice().to_vec(),
        })
    }
}

/// LU solve; on failure the Hessian block is regularized once.
fn solve_dense(build: impl Fn(f64) -> DMatrix<f64>, rhs: DVector<f64>) -> Result<DVector<f64>> {
    for reg in [0.0, 1e-10] {
        if let Some(x) = build(reg).lu().solve(&rhs) {
            if x.iter().all(|v| v.is_finite()) {
                return Ok(x);
            }
        }
    }
    Err(Error::Solver("singular Newton system".into()))
}

fn check_interior(p: &SaliencyProblem, state: &IpmState) -> Result<()> {
    let n = p.len();
    if state.s.len() != n || state.lambda.len() != 2 * n || state.nu.len() != p.equality_rows().len() {
        return Err(Error::Contract("state dimensions do not match the problem".into()));
    }
    if state.s.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
        return Err(Error::Contract("saliency iterate is not strictly interior".into()));
    }
    if !(state.g > 0.0) {
        return Err(Error::Contract("barrier parameter must be positive".into()));
    }
    Ok(())
}

/// Dual, centrality and primal residuals of the full problem.
pub fn kkt_residuals(p: &SaliencyProblem, state: &IpmState) -> Result<Residuals> {
    check_interior(p, state)?;
    let qp = BoxQp::full(p);
    Ok(qp.residuals(
        &DVector::from_column_slice(&state.s),
        &DVector::from_column_slice(&state.lambda),
        &DVector::from_column_slice(&state.nu),
        state.g,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonStep {
    pub ds: Vec<f64>,
    pub dlambda: Vec<f64>,
    pub dnu: Vec<f64>,
}

/// Newton direction from the full KKT system of the full problem.
pub fn newton_step(p: &SaliencyProblem, state: &IpmState) -> Result<NewtonStep> {
    check_interior(p, state)?;
    let qp = BoxQp::full(p);
    let (s, l) = (
        DVector::from_column_slice(&state.s),
        DVector::from_column_slice(&state.lambda),
    );
    let r = qp.residuals(&s, &l, &DVector::from_column_slice(&state.nu), state.g);
    qp.step_full(&s, &l, &r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NewtonSystem {
    /// `(3n + m)` system as written.
    Full,
    /// Multipliers eliminated, `(n + m)` system.
    Reduced,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Barrier update factor: `g = mu * 2n / gap`.
    pub barrier_mu: f64,
    pub shrink: f64,
    pub sufficient_decrease: f64,
    pub boundary_safety: f64,
    /// Remove border variables instead of carrying their equality row.
    pub eliminate_border: bool,
    pub system: NewtonSystem,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 200,
            barrier_mu: 10.0,
            shrink: 0.5,
            sufficient_decrease: 0.01,
            boundary_safety: 0.99,
            eliminate_border: true,
            system: NewtonSystem::Reduced,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub r_d: f64,
    pub r_c: f64,
    pub r_p: f64,
    pub objective: f64,
    pub step: f64,
    /// Residual norm at the start of the iteration and after the accepted
    /// step, both at the iteration's barrier parameter.
    pub before: f64,
    pub after: f64,
}

/// Per-region saliency in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyVector {
    pub s: Vec<f64>,
}

impl SaliencyVector {
    pub fn rasterize(&self, graph: &RegionSet) -> Vec<f64> {
        graph.rasterize(&self.s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub saliency: SaliencyVector,
    pub converged: bool,
    pub iterations: usize,
    /// Residual norm sum of the returned iterate.
    pub residual: f64,
    pub objective: f64,
    pub trace: Vec<TraceRow>,
}

impl SolveReport {
    pub fn write_trace_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("iteration,r_d,r_c,r_p,objective,step\n");
        for t in &self.trace {
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{:.12},{:e}\n",
                t.iteration, t.r_d, t.r_c, t.r_p, t.objective, t.step
            ));
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }
}

fn surrogate_gap(s: &DVector<f64>, lambda: &DVector<f64>) -> f64 {
    let n = s.len();
    (0..n).map(|i| lambda[i] * s[i] + lambda[n + i] * (1.0 - s[i])).sum()
}

/// Primal-dual interior-point solve. The returned saliency is clamped to
/// `[0, 1]` with border regions set to exactly zero.
pub fn solve_ipm(p: &SaliencyProblem, cfg: &SolverConfig) -> Result<SolveReport> {
    let n_all = p.len();
    let free: Vec<usize> = if cfg.eliminate_border {
        (0..n_all).filter(|&i| !p.border[i]).collect()
    } else {
        (0..n_all).collect()
    };
    let qp = if cfg.eliminate_border {
        BoxQp::reduced(p, &free)
    } else {
        BoxQp::full(p)
    };
    let scatter = |s: &DVector<f64>| -> Vec<f64> {
        let mut out = vec![0.0; n_all];
        for (k, &i) in free.iter().enumerate() {
            out[i] = if p.border[i] { 0.0 } else { s[k].clamp(0.0, 1.0) };
        }
        out
    };
    let n = qp.n();
    if n == 0 {
        let s = vec![0.0; n_all];
        return Ok(SolveReport {
            objective: evaluate_objective(p, &s),
            saliency: SaliencyVector { s },
            converged: true,
            iterations: 0,
            residual: 0.0,
            trace: Vec::new(),
        });
    }

    let mut s = DVector::from_element(n, start_value(n_all));
    let mut g = 1.0;
    let mut lambda = DVector::from_iterator(
        2 * n,
        (0..n).map(|i| 1.0 / (g * s[i])).chain((0..n).map(|i| 1.0 / (g * (1.0 - s[i])))),
    );
    let mut nu = DVector::zeros(qp.m());
    let mut trace = Vec::new();
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..=cfg.max_iter {
        let gap = surrogate_gap(&s, &lambda);
        if gap > 0.0 {
            g = cfg.barrier_mu * (2 * n) as f64 / gap;
        }
        let r = qp.residuals(&s, &lambda, &nu, g);
        let total = r.norm_sum();
        if best.as_ref().is_none_or(|(b, _)| total < *b) {
            best = Some((total, s.clone()));
        }
        iterations = it;
        if total < cfg.tol {
            converged = true;
            break;
        }
        if it == cfg.max_iter {
            break;
        }
        let step = match cfg.system {
            NewtonSystem::Full => qp.step_full(&s, &lambda, &r)?,
            NewtonSystem::Reduced => qp.step_reduced(&s, &lambda, &r)?,
        };
        let ds = DVector::from_column_slice(&step.ds);
        let dl = DVector::from_column_slice(&step.dlambda);
        let dn = DVector::from_column_slice(&step.dnu);

        // Largest step keeping the multipliers positive.
        let mut len: f64 = 1.0;
        for k in 0..2 * n {
            if dl[k] < 0.0 {
                len = len.min(-lambda[k] / dl[k]);
            }
        }
        len *= cfg.boundary_safety;
        len = len.min(1.0);
        // Then strictly inside the box.
        while (0..n).any(|i| {
            let v = s[i] + len * ds[i];
            !(v > 0.0 && v < 1.0)
        }) {
            len *= cfg.shrink;
            if len < 1e-300 {
                break;
            }
        }
        let before = r.norm2();
        let mut after;
        loop {
            let s_new = &s + len * &ds;
            let l_new = &lambda + len * &dl;
            let nu_new = &nu + len * &dn;
            after = qp.residuals(&s_new, &l_new, &nu_new, g).norm2();
            if after <= (1.0 - cfg.sufficient_decrease * len) * before || len < 1e-16 {
                if after <= before {
                    s = s_new;
                    lambda = l_new;
                    nu = nu_new;
                } else {
                    after = before;
                    len = 0.0;
                }
                break;
            }
            len *= cfg.shrink;
        }
        let full_s = scatter(&s);
        trace.push(TraceRow {
            iteration: it,
            r_d: norm(&r.r_d),
            r_c: norm(&r.r_c),
            r_p: norm(&r.r_p),
            objective: evaluate_objective(p, &full_s),
            step: len,
            before,
            after,
        });
        if len == 0.0 {
            break;
        }
    }

    let (residual, s_best) = best.expect("at least one iterate");
    let out = if converged { scatter(&s) } else { scatter(&s_best) };
    Ok(SolveReport {
        objective: evaluate_objective(p, &out),
        saliency: SaliencyVector { s: out },
        converged,
        iterations,
        residual: if converged {
            qp.residuals(&s, &lambda, &nu, g).norm_sum()
        } else {
            residual
        },
        trace,
    })
}

/// `1/N`, kept off the upper bound when `N = 1`.
fn start_value(n: usize) -> f64 {
    (1.0 / n as f64).min(0.5)
}

/// Centred starting iterate over the full variable set: `s = 1/N`,
/// multipliers zeroing the centrality residual at `g = 1`.
pub fn initial_state(p: &SaliencyProblem) -> IpmState {
    let n = p.len();
    let s = vec![start_value(n); n];
    let lambda = s.iter().map(|&v| 1.0 / v).chain(s.iter().map(|&v| 1.0 / (1.0 - v))).collect();
    IpmState {
        s,
        lambda,
        nu: vec![0.0; p.equality_rows().len()],
        g: 1.0,
        iteration: 0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub s: Vec<f64>,
    pub objective: f64,
}

/// Largest number of free variables the grid oracle accepts.
pub const ORACLE_MAX_FREE: usize = 3;

/// Exhaustive grid search over `{0, 1/k, ..., 1}` for the free variables
/// (border fixed to zero), refined once at step `1/k^2` within one coarse
/// cell of the best point.
pub fn oracle_solve(p: &SaliencyProblem, grid_steps: usize) -> Result<OracleSolution> {
    if p.len() > 6 {
        return Err(Error::Contract(format!("oracle supports at most 6 regions, got {}", p.len())));
    }
    let free: Vec<usize> = (0..p.len()).filter(|&i| !p.border[i]).collect();
    if free.len() > ORACLE_MAX_FREE {
        return Err(Error::Contract(format!(
            "grid oracle supports at most {ORACLE_MAX_FREE} free regions, got {}",
            free.len()
        )));
    }
    if grid_steps == 0 {
        return Err(Error::Contract("grid needs at least one step".into()));
    }
    let k = grid_steps as f64;
    let coarse: Vec<Vec<f64>> = free
        .iter()
        .map(|_| (0..=grid_steps).map(|i| i as f64 / k).collect())
        .collect();
    let mut best = grid_min(p, &free, &coarse, None);
    let fine: Vec<Vec<f64>> = free
        .iter()
        .map(|&i| {
            let center = best.s[i];
            let steps = 2 * grid_steps;
            (0..=steps)
                .map(|j| center - 1.0 / k + j as f64 / (k * k))
                .filter(|v| (0.0..=1.0).contains(v))
                .collect()
        })
        .collect();
    best = grid_min(p, &free, &fine, Some(best));
    Ok(best)
}

fn grid_min(
    p: &SaliencyProblem,
    free: &[usize],
    axes: &[Vec<f64>],
    mut best: Option<OracleSolution>,
) -> OracleSolution {
    let mut s = vec![0.0; p.len()];
    let mut idx = vec![0usize; free.len()];
    loop {
        for (a, &i) in free.iter().enumerate() {
            s[i] = axes[a][idx[a]];
        }
        let f = evaluate_objective(p, &s);
        if best.as_ref().is_none_or(|b| f < b.objective) {
            best = Some(OracleSolution {
                s: s.clone(),
                objective: f,
            });
        }
        // Odometer increment.
        let mut a = 0;
        loop {
            if a == free.len() {
                return best.expect("grid is non-empty");
            }
            idx[a] += 1;
            if idx[a] < axes[a].len() {
                break;
            }
            idx[a] = 0;
            a += 1;
        }
    }
}

/// Exact minimizer by enumerating every face of the box: each free
/// variable sits at 0, at 1, or is solved from the stationarity equations.
pub fn face_oracle(p: &SaliencyProblem) -> Result<OracleSolution> {
    let free: Vec<usize> = (0..p.len()).filter(|&i| !p.border[i]).collect();
    if free.len() > 10 {
        return Err(Error::Contract("face enumeration limited to 10 free regions".into()));
    }
    let h = p.hessian();
    let mut best: Option<OracleSolution> = None;
    let faces = 3usize.pow(free.len() as u32);
    for code in 0..faces {
        let mut state = vec![0u8; free.len()];
        let mut c = code;
        for st in state.iter_mut() {
            *st = (c % 3) as u8;
            c /= 3;
        }
        let mut s = vec![0.0; p.len()];
        let mut inner = Vec::new();
        for (a, &i) in free.iter().enumerate() {
            match state[a] {
                1 => s[i] = 1.0,
                2 => inner.push(i),
                _ => {}
            }
        }
        if !inner.is_empty() {
            let m = inner.len();
            let hm = DMatrix::from_fn(m, m, |a, b| h[(inner[a], inner[b])]);
            let rhs = DVector::from_iterator(
                m,
                inner.iter().map(|&i| {
                    -(p.linear[i] + (0..p.len()).map(|j| h[(i, j)] * s[j]).sum::<f64>())
                }),
            );
            let Some(x) = hm.clone().lu().solve(&rhs) else {
                continue;
            };
            if (&hm * &x - &rhs).amax() > 1e-9 * (1.0 + rhs.amax()) {
                continue;
            }
            if x.iter().any(|&v| !(-1e-12..=1.0 + 1e-12).contains(&v)) {
                continue;
            }
            for (a, &i) in inner.iter().enumerate() {
                s[i] = x[a].clamp(0.0, 1.0);
            }
        }
        let f = evaluate_objective(p, &s);
        if best.as_ref().is_none_or(|b| f < b.objective) {
            best = Some(OracleSolution { s, objective: f });
        }
    }
    best.ok_or_else(|| Error::Internal("no feasible face".into()))
}
