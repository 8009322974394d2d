//! Dense log-barrier interior-point solver for small convex QCQPs:
//!
//! ```text
//!     maximize    c' x + c0
//!     subject to  x' A_i x + b_i' x <= d_i,   A_i PSD
//! ```
//!
//! Problems here have a handful of variables and constraints, so every
//! Newton system is solved densely by Cholesky factorization.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};

/// `x' A x + b' x <= d`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadConstraint {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub d: f64,
}

impl QuadConstraint {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, d: f64) -> Self {
        Self { a, b, d }
    }

    /// A purely linear constraint `b' x <= d`.
    pub fn linear(b: DVector<f64>, d: f64) -> Self {
        let n = b.len();
        Self {
            a: DMatrix::zeros(n, n),
            b,
            d,
        }
    }

    /// `x' A x + b' x - d`; nonpositive when satisfied.
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.a * x)) + self.b.dot(x) - self.d
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x * 2.0 + &self.b
    }

    fn scaled(&self, s: f64) -> Self {
        Self {
            a: &self.a / s,
            b: &self.b / s,
            d: self.d / s,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QcqpProblem {
    pub objective: DVector<f64>,
    pub objective_constant: f64,
    pub constraints: Vec<QuadConstraint>,
}

impl QcqpProblem {
    /// Validates dimensions, symmetrizes every `A_i` and checks that it is
    /// positive semidefinite (smallest eigenvalue at least `-1e-10 trace`).
    pub fn new(objective: DVector<f64>, constraints: Vec<QuadConstraint>) -> Result<Self> {
        let n = objective.len();
        let mut out = Vec::with_capacity(constraints.len());
        for c in constraints {
            check_len("constraint matrix rows", n, c.a.nrows())?;
            check_len("constraint matrix cols", n, c.a.ncols())?;
            check_len("constraint linear term", n, c.b.len())?;
            let a = (&c.a + c.a.transpose()) * 0.5;
            let tr = a.trace();
            if n > 0 && a.amax() > 0.0 {
                let min_eig = a.clone().symmetric_eigenvalues().min();
                if min_eig < -1e-10 * tr.abs().max(a.amax()) {
                    return Err(Error::Domain(format!(
                        "constraint matrix is not PSD (min eigenvalue {min_eig:e})"
                    )));
                }
            }
            if !c.d.is_finite() || c.b.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain("constraint has non-finite data".into()));
            }
            out.push(QuadConstraint { a, b: c.b, d: c.d });
        }
        Ok(Self {
            objective,
            objective_constant: 0.0,
            constraints: out,
        })
    }

    pub fn with_constant(mut self, c0: f64) -> Self {
        self.objective_constant = c0;
        self
    }

    pub fn dim(&self) -> usize {
        self.objective.len()
    }

    pub fn objective_value(&self, x: &DVector<f64>) -> f64 {
        self.objective.dot(x) + self.objective_constant
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::MaxIter => "max_iter",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QcqpSolution {
    pub x_star: DVector<f64>,
    pub objective_value: f64,
    pub status: SolveStatus,
    pub kkt_residual: f64,
    /// Lagrange multipliers of the constraints, in the problem's own units.
    pub multipliers: DVector<f64>,
    /// Objective after each barrier centering.
    pub outer_objectives: Vec<f64>,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Barrier parameter growth factor.
    pub mu: f64,
    /// Stop once `m / t` falls below this.
    pub gap: f64,
    /// Newton decrement threshold `lambda^2 / 2`.
    pub newton: f64,
    /// Allowed primal violation at an optimal point.
    pub feasibility: f64,
    pub max_newton_per_centering: usize,
    pub max_outer: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            mu: 10.0,
            gap: 1e-8,
            newton: 1e-10,
            feasibility: 1e-8,
            max_newton_per_centering: 100,
            max_outer: 60,
        }
    }
}

/// Worst constraint value `max_i (x' A_i x + b_i' x - d_i)`; nonpositive
/// means feasible. Returns `-inf` for an unconstrained problem.
pub fn check_feasible(problem: &QcqpProblem, x: &DVector<f64>) -> Result<f64> {
    check_len("point", problem.dim(), x.len())?;
    Ok(problem
        .constraints
        .iter()
        .map(|c| c.value(x))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Internally every constraint and the objective are rescaled to unit size.
struct Scaled {
    c: DVector<f64>,
    c_norm: f64,
    cons: Vec<QuadConstraint>,
    scales: Vec<f64>,
}

fn constraint_scale(c: &QuadConstraint) -> f64 {
    let s = c.d.abs().max(c.b.amax()).max(c.a.amax());
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

impl Scaled {
    fn new(problem: &QcqpProblem) -> Self {
        let c_norm = problem.objective.norm();
        let c = if c_norm > 0.0 {
            &problem.objective / c_norm
        } else {
            problem.objective.clone()
        };
        let scales: Vec<f64> = problem.constraints.iter().map(constraint_scale).collect();
        let cons = problem
            .constraints
            .iter()
            .zip(&scales)
            .map(|(c, s)| c.scaled(*s))
            .collect();
        Self {
            c,
            c_norm,
            cons,
            scales,
        }
    }

    fn values(&self, x: &DVector<f64>) -> Vec<f64> {
        self.cons.iter().map(|c| c.value(x)).collect()
    }
}

enum Centering {
    Done { iterations: usize },
    Stalled { iterations: usize },
    Diverged,
}

/// Newton's method on `-t c'x - sum log(-f_i(x))`, updating `x` in place.
fn center(sc: &Scaled, x: &mut DVector<f64>, t: f64, tol: &Tolerances) -> Centering {
    let n = x.len();
    // barrier change from `x` to `x + d`, summed term by term so that large
    // t does not swamp small decreases
    let change = |x: &DVector<f64>, d: &DVector<f64>| -> Option<f64> {
        let mut delta = -t * sc.c.dot(d);
        for c in &sc.cons {
            let f0 = c.value(x);
            let f1 = c.value(&(x + d));
            if !(f1 < 0.0) {
                return None;
            }
            delta -= (f1 / f0).ln();
        }
        Some(delta)
    };
    let x_scale = 1.0 + x.amax();
    for it in 0..tol.max_newton_per_centering {
        let mut grad = -&sc.c * t;
        let mut hess = DMatrix::<f64>::zeros(n, n);
        for c in &sc.cons {
            let f = c.value(x);
            let g = c.gradient(x);
            grad.axpy(-1.0 / f, &g, 1.0);
            hess.ger(1.0 / (f * f), &g, &g, 1.0);
            hess += &c.a * (-2.0 / f);
        }
        let step = match solve_spd(&hess, &(-&grad)) {
            Some(s) => s,
            None => return Centering::Diverged,
        };
        let decrement2 = -grad.dot(&step);
        if decrement2 / 2.0 <= tol.newton {
            return Centering::Done { iterations: it };
        }
        let mut s = 1.0;
        let slope = grad.dot(&step);
        loop {
            let d = &step * s;
            if let Some(delta) = change(x, &d) {
                if delta <= 0.01 * s * slope {
                    *x += d;
                    break;
                }
            }
            s *= 0.5;
            if s < 1e-20 {
                // no progress possible at machine precision: accept the
                // current point as centred
                return Centering::Done { iterations: it };
            }
        }
        if x.amax() > 1e12 * x_scale {
            return Centering::Diverged;
        }
    }
    Centering::Stalled {
        iterations: tol.max_newton_per_centering,
    }
}

/// Solves `H s = r` for symmetric PSD `H`, regularizing if it is singular.
fn solve_spd(h: &DMatrix<f64>, r: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = h.clone().cholesky() {
        return Some(ch.solve(r));
    }
    let n = h.nrows();
    let ridge = 1e-12 * h.diagonal().amax().max(1e-300);
    let reg = h + DMatrix::<f64>::identity(n, n) * ridge;
    reg.cholesky().map(|ch| ch.solve(r))
}

/// Stationarity, complementarity and primal residual at `(x, multipliers)`,
/// measured on the unit-scaled problem.
fn scaled_kkt(sc: &Scaled, x: &DVector<f64>, lambda_scaled: &DVector<f64>) -> f64 {
    let mut station = sc.c.clone();
    let mut comp: f64 = 0.0;
    let mut primal: f64 = 0.0;
    for (c, l) in sc.cons.iter().zip(lambda_scaled.iter()) {
        let f = c.value(x);
        station.axpy(-*l, &c.gradient(x), 1.0);
        comp = comp.max((l * f).abs());
        primal = primal.max(f);
    }
    let station = station.norm() / sc.c.norm().max(1.0);
    station.max(comp).max(primal)
}

/// KKT residual of a candidate primal-dual pair, in the same scaled measure
/// the solver reports.
pub fn kkt_residual(problem: &QcqpProblem, x: &DVector<f64>, multipliers: &DVector<f64>) -> Result<f64> {
    check_len("point", problem.dim(), x.len())?;
    check_len("multipliers", problem.constraints.len(), multipliers.len())?;
    let sc = Scaled::new(problem);
    let c_norm = if sc.c_norm > 0.0 { sc.c_norm } else { 1.0 };
    let lambda_scaled =
        DVector::from_iterator(multipliers.len(), multipliers.iter().zip(&sc.scales).map(|(m, s)| m * s / c_norm));
    Ok(scaled_kkt(&sc, x, &lambda_scaled))
}

/// Lagrangian dual bound `sup_x c'x - sum mu_i f_i(x)` for multipliers
/// `mu >= 0`. `None` when the Lagrangian is unbounded above.
pub fn dual_bound(problem: &QcqpProblem, multipliers: &DVector<f64>) -> Result<Option<f64>> {
    check_len("multipliers", problem.constraints.len(), multipliers.len())?;
    let n = problem.dim();
    let mut q = DMatrix::<f64>::zeros(n, n);
    let mut lin = problem.objective.clone();
    let mut constant = problem.objective_constant;
    for (c, mu) in problem.constraints.iter().zip(multipliers.iter()) {
        if *mu < 0.0 {
            return Err(Error::Domain(format!("negative multiplier {mu}")));
        }
        q += &c.a * *mu;
        lin.axpy(-*mu, &c.b, 1.0);
        constant += mu * c.d;
    }
    // sup_x -x'Qx + lin'x = lin' Q^-1 lin / 4
    match q.cholesky() {
        Some(ch) => Ok(Some(constant + lin.dot(&ch.solve(&lin)) / 4.0)),
        None => Ok(None),
    }
}

/// Barrier method from a strictly feasible `start`.
pub fn solve(problem: &QcqpProblem, start: &DVector<f64>, tol: &Tolerances) -> Result<QcqpSolution> {
    let worst = check_feasible(problem, start)?;
    if !(worst < 0.0) {
        return Err(Error::NotStrictlyFeasible { violation: worst });
    }
    let sc = Scaled::new(problem);
    let m = sc.cons.len();
    let mut x = start.clone();
    let mut outer = Vec::new();
    let mut newton_total = 0;

    if m == 0 {
        let status = if sc.c_norm > 0.0 {
            SolveStatus::Unbounded
        } else {
            SolveStatus::Optimal
        };
        return Ok(QcqpSolution {
            objective_value: problem.objective_value(&x),
            x_star: x,
            status,
            kkt_residual: if sc.c_norm > 0.0 { f64::INFINITY } else { 0.0 },
            multipliers: DVector::zeros(0),
            outer_objectives: outer,
            newton_iterations: 0,
        });
    }

    let mut t = 1.0;
    let mut status = SolveStatus::MaxIter;
    for _ in 0..tol.max_outer {
        match center(&sc, &mut x, t, tol) {
            Centering::Done { iterations } => newton_total += iterations,
            Centering::Stalled { iterations } => {
                newton_total += iterations;
                status = SolveStatus::MaxIter;
                break;
            }
            Centering::Diverged => {
                status = SolveStatus::Unbounded;
                break;
            }
        }
        outer.push(problem.objective_value(&x));
        if m as f64 / t <= tol.gap {
            status = SolveStatus::Optimal;
            break;
        }
        t *= tol.mu;
    }

    let fvals = sc.values(&x);
    let mut lambda_scaled = DVector::from_iterator(m, fvals.iter().map(|f| 1.0 / (t * -f)));
    let mut kkt = scaled_kkt(&sc, &x, &lambda_scaled);
    if status != SolveStatus::Unbounded {
        if let Some((xp, lp, kp)) = polish(&sc, &x, &lambda_scaled) {
            if kp < kkt {
                x = xp;
                lambda_scaled = lp;
                kkt = kp;
                if kkt <= tol.gap {
                    status = SolveStatus::Optimal;
                }
            }
        }
    }
    let c_norm = if sc.c_norm > 0.0 { sc.c_norm } else { 1.0 };
    let multipliers = DVector::from_iterator(
        m,
        lambda_scaled.iter().zip(&sc.scales).map(|(l, s)| l * c_norm / s),
    );
    let violation = check_feasible(problem, &x)?;
    if status == SolveStatus::Optimal && (kkt > 1e-6 || violation > tol.feasibility) {
        status = SolveStatus::MaxIter;
    }
    Ok(QcqpSolution {
        objective_value: problem.objective_value(&x),
        x_star: x,
        status,
        kkt_residual: kkt,
        multipliers,
        outer_objectives: outer,
        newton_iterations: newton_total,
    })
}

/// Newton refinement of the KKT system restricted to the constraints the
/// barrier iterate identifies as active. Returns `None` when the active set
/// is ambiguous or the refined pair is not dual feasible.
fn polish(
    sc: &Scaled,
    x0: &DVector<f64>,
    lambda0: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>, f64)> {
    let n = x0.len();
    let lmax = lambda0.amax();
    if !(lmax > 0.0) {
        return None;
    }
    let active: Vec<usize> = (0..lambda0.len()).filter(|&i| lambda0[i] > 1e-6 * lmax).collect();
    let k = active.len();
    if k == 0 || k > n {
        return None;
    }
    let mut x = x0.clone();
    let mut lam: Vec<f64> = active.iter().map(|&i| lambda0[i]).collect();
    for _ in 0..8 {
        let mut jac = DMatrix::<f64>::zeros(n + k, n + k);
        let mut res = DVector::<f64>::zeros(n + k);
        res.rows_mut(0, n).copy_from(&sc.c);
        for (j, &i) in active.iter().enumerate() {
            let c = &sc.cons[i];
            let g = c.gradient(&x);
            res.rows_mut(0, n).axpy(-lam[j], &g, 1.0);
            res[n + j] = c.value(&x);
            let mut block = jac.view_mut((0, 0), (n, n));
            block -= &c.a * (2.0 * lam[j]);
            jac.view_mut((0, n + j), (n, 1)).copy_from(&(-&g));
            jac.view_mut((n + j, 0), (1, n)).copy_from(&g.transpose());
        }
        if res.amax() < 1e-15 {
            break;
        }
        let step = jac.lu().solve(&(-res))?;
        if !step.iter().all(|v| v.is_finite()) {
            return None;
        }
        x += step.rows(0, n);
        for (j, l) in lam.iter_mut().enumerate() {
            *l += step[n + j];
        }
    }
    if lam.iter().any(|&l| l < 0.0) {
        return None;
    }
    let mut lambda = DVector::zeros(lambda0.len());
    for (j, &i) in active.iter().enumerate() {
        lambda[i] = lam[j];
    }
    // step back toward the barrier iterate until strictly feasible
    let d = &x - x0;
    for back in [0.0, 1e-9, 1e-6, 1e-3] {
        let xb = &x - &d * back;
        let worst = sc.values(&xb).into_iter().fold(f64::NEG_INFINITY, f64::max);
        if worst < 0.0 {
            let kkt = scaled_kkt(sc, &xb, &lambda);
            return Some((xb, lambda, kkt));
        }
    }
    None
}

/// Finds a strictly feasible point by minimizing a common slack `s` subject
/// to `f_i(x) <= s` on the unit-scaled constraints, starting from `hint`.
pub fn phase_one(problem: &QcqpProblem, hint: Option<&DVector<f64>>, tol: &Tolerances) -> Result<DVector<f64>> {
    let n = problem.dim();
    let x0 = match hint {
        Some(h) => {
            check_len("hint", n, h.len())?;
            h.clone()
        }
        None => DVector::zeros(n),
    };
    if check_feasible(problem, &x0)? < 0.0 {
        return Ok(x0);
    }
    let sc = Scaled::new(problem);
    let worst = sc.values(&x0).into_iter().fold(f64::NEG_INFINITY, f64::max);

    // variables (x, s): maximize -s subject to f_i(x) - s <= 0 and s >= -1
    let mut c = DVector::zeros(n + 1);
    c[n] = -1.0;
    let mut cons: Vec<QuadConstraint> = sc
        .cons
        .iter()
        .map(|q| {
            let mut a = DMatrix::zeros(n + 1, n + 1);
            a.view_mut((0, 0), (n, n)).copy_from(&q.a);
            let mut b = DVector::zeros(n + 1);
            b.rows_mut(0, n).copy_from(&q.b);
            b[n] = -1.0;
            QuadConstraint::new(a, b, q.d)
        })
        .collect();
    let mut floor = DVector::zeros(n + 1);
    floor[n] = -1.0;
    cons.push(QuadConstraint::linear(floor, 1.0));
    let aux = QcqpProblem::new(c, cons)?;

    let mut z0 = DVector::zeros(n + 1);
    z0.rows_mut(0, n).copy_from(&x0);
    z0[n] = (worst + 1.0).max(-0.5);
    let aux_tol = Tolerances {
        gap: 1e-6,
        ..*tol
    };
    let sol = solve(&aux, &z0, &aux_tol)?;
    let x = sol.x_star.rows(0, n).into_owned();
    let achieved = check_feasible(problem, &x)?;
    if achieved < 0.0 {
        Ok(x)
    } else {
        Err(Error::Infeasible {
            slack: sol.x_star[n],
        })
    }
}

/// Runs phase I when `hint` is absent or not strictly feasible, then solves.
pub fn solve_from(problem: &QcqpProblem, hint: Option<&DVector<f64>>, tol: &Tolerances) -> Result<QcqpSolution> {
    let start = phase_one(problem, hint, tol)?;
    solve(problem, &start, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ball(n: usize, r2: f64) -> QuadConstraint {
        QuadConstraint::new(DMatrix::identity(n, n), DVector::zeros(n), r2)
    }

    #[test]
    fn feasibility_of_origin_and_outside_point() {
        let p = QcqpProblem::new(DVector::from_element(2, 1.0), vec![ball(2, 1.0)]).unwrap();
        assert!(check_feasible(&p, &DVector::zeros(2)).unwrap() <= 0.0);
        let x = DVector::from_column_slice(&[2.0, 0.0]);
        assert_relative_eq!(check_feasible(&p, &x).unwrap(), 3.0);
        assert!(check_feasible(&p, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn check_feasible_matches_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 4;
        let cons: Vec<_> = (0..5)
            .map(|_| {
                let l = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
                QuadConstraint::new(
                    &l * l.transpose(),
                    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)),
                    rng.random_range(0.0..2.0),
                )
            })
            .collect();
        let p = QcqpProblem::new(DVector::zeros(n), cons.clone()).unwrap();
        let x = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let mut worst = f64::NEG_INFINITY;
        for c in &cons {
            let mut v = -c.d;
            for i in 0..n {
                v += c.b[i] * x[i];
                for j in 0..n {
                    v += x[i] * c.a[(i, j)] * x[j];
                }
            }
            worst = worst.max(v);
        }
        assert_relative_eq!(check_feasible(&p, &x).unwrap(), worst, max_relative = 1e-12);
    }

    #[test]
    fn maximize_coordinate_on_unit_ball() {
        let p = QcqpProblem::new(DVector::from_column_slice(&[1.0, 0.0, 0.0]), vec![ball(3, 1.0)]).unwrap();
        let s = solve(&p, &DVector::zeros(3), &Tolerances::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective_value - 1.0).abs() < 1e-7);
        assert!((s.x_star[0] - 1.0).abs() < 1e-7);
        assert!(s.kkt_residual <= 1e-6);
    }

    #[test]
    fn ellipsoid_closed_form() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 2.0]);
        let c = DVector::from_column_slice(&[1.0, -3.0]);
        let p = QcqpProblem::new(c.clone(), vec![QuadConstraint::new(a.clone(), DVector::zeros(2), 1.0)]).unwrap();
        let s = solve(&p, &DVector::zeros(2), &Tolerances::default()).unwrap();
        let exact = c.dot(&a.clone().lu().solve(&c).unwrap()).sqrt();
        assert_relative_eq!(s.objective_value, exact, max_relative = 1e-6);
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let p = QcqpProblem::new(DVector::from_element(2, 1.0), vec![ball(2, 1.0)]).unwrap();
        let r = solve(&p, &DVector::from_element(2, 1.0), &Tolerances::default());
        assert!(matches!(r, Err(Error::NotStrictlyFeasible { .. })));
    }

    #[test]
    fn phase_one_finds_interior_point() {
        // two offset balls intersect in a lens away from the origin
        let mk = |cx: f64| {
            QuadConstraint::new(
                DMatrix::identity(2, 2),
                DVector::from_column_slice(&[-2.0 * cx, 0.0]),
                1.0 - cx * cx,
            )
        };
        let p = QcqpProblem::new(DVector::from_column_slice(&[0.0, 1.0]), vec![mk(2.0), mk(3.5)]).unwrap();
        let x = phase_one(&p, None, &Tolerances::default()).unwrap();
        assert!(check_feasible(&p, &x).unwrap() < 0.0);
        let s = solve_from(&p, None, &Tolerances::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        // lens top: circles centred at 2 and 3.5 with unit radius meet at x = 2.75
        assert_relative_eq!(s.objective_value, (1.0f64 - 0.75 * 0.75).sqrt(), max_relative = 1e-6);
    }

    #[test]
    fn phase_one_detects_infeasibility() {
        let mk = |cx: f64| {
            QuadConstraint::new(
                DMatrix::identity(2, 2),
                DVector::from_column_slice(&[-2.0 * cx, 0.0]),
                1.0 - cx * cx,
            )
        };
        let p = QcqpProblem::new(DVector::from_column_slice(&[0.0, 1.0]), vec![mk(0.0), mk(3.0)]).unwrap();
        assert!(matches!(phase_one(&p, None, &Tolerances::default()), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn unbounded_direction_is_reported() {
        // only x0 is constrained
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let p = QcqpProblem::new(
            DVector::from_column_slice(&[0.0, 1.0]),
            vec![QuadConstraint::new(a, DVector::zeros(2), 1.0)],
        )
        .unwrap();
        let s = solve(&p, &DVector::zeros(2), &Tolerances::default()).unwrap();
        assert_ne!(s.status, SolveStatus::Optimal);
    }

    #[test]
    fn non_psd_constraint_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let r = QcqpProblem::new(DVector::zeros(2), vec![QuadConstraint::new(a, DVector::zeros(2), 1.0)]);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn asymmetric_input_is_symmetrized() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        let p = QcqpProblem::new(DVector::zeros(2), vec![QuadConstraint::new(a, DVector::zeros(2), 1.0)]).unwrap();
        assert_eq!(p.constraints[0].a, DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]));
    }

    #[test]
    fn outer_objectives_nondecreasing_and_weak_duality() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 5;
        let mut cons = vec![ball(n, 4.0)];
        for _ in 0..3 {
            let l = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            cons.push(QuadConstraint::new(
                &l * l.transpose(),
                DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)),
                rng.random_range(0.5..2.0),
            ));
        }
        let c = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let p = QcqpProblem::new(c, cons).unwrap();
        let s = solve(&p, &DVector::zeros(n), &Tolerances::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        for w in s.outer_objectives.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
        let bound = dual_bound(&p, &s.multipliers).unwrap().unwrap();
        assert!(s.objective_value <= bound + 1e-9);
        assert!(bound - s.objective_value < 1e-6);
        let again = solve(&p, &DVector::zeros(n), &Tolerances::default()).unwrap();
        assert_eq!(s, again);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]
        #[test]
        fn shifted_ball_optimum_is_closed_form(
            c in proptest::collection::vec(-3.0..3.0f64, 3),
            centre in proptest::collection::vec(-2.0..2.0f64, 3),
            r in 0.1..5.0f64,
        ) {
            let c = DVector::from_vec(c);
            proptest::prop_assume!(c.norm() > 1e-3);
            let x0 = DVector::from_vec(centre);
            // |x - x0|^2 <= r^2
            let con = QuadConstraint::new(DMatrix::identity(3, 3), &x0 * -2.0, r * r - x0.dot(&x0));
            let p = QcqpProblem::new(c.clone(), vec![con]).unwrap();
            let s = solve(&p, &x0, &Tolerances::default()).unwrap();
            let exact = c.dot(&x0) + r * c.norm();
            proptest::prop_assert_eq!(s.status, SolveStatus::Optimal);
            proptest::prop_assert!((s.objective_value - exact).abs() <= 1e-8 * exact.abs().max(1.0));
            proptest::prop_assert!(check_feasible(&p, &s.x_star).unwrap() <= 1e-8);
        }
    }
}
