//! Sequential minimal optimisation for the soft-margin SVM dual.
//!
//! Solves
//!
//! ```text
//! max  Σ α_i − ½ Σ_ij α_i α_j y_i y_j K(x_i, x_j)
//! s.t. 0 ≤ α_i ≤ C,  Σ α_i y_i = 0
//! ```
//!
//! by repeatedly optimising one pair of multipliers analytically. The pair
//! is the maximal-violating index `i` plus the `j` that gives the largest
//! second-order objective gain. Iteration stops once the gap between the
//! largest `-y_t ∇_t` over the "up" set and the smallest over the "low" set
//! falls below the KKT tolerance.
//!
//! A converged SMO iterate is only within the tolerance of optimal. When the
//! free set is small it is then refined by a few primal active-set steps,
//! kept only if the objective does not drop, after which SMO resumes in
//! case any multiplier now violates.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest free set for the exact face solve.
const POLISH_MAX_FREE: usize = 300;
const POLISH_ROUNDS: usize = 3;
const POLISH_MAX_STEPS: usize = 50;

/// Curvature floor for non positive-definite pairs.
const TAU: f64 = 1e-12;

#[derive(Debug, Clone)]
pub(crate) struct Solution {
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub violation: f64,
    pub objective: f64,
}

pub(crate) struct Problem<'a> {
    /// Row-major `n × n` kernel matrix.
    pub gram: &'a [f64],
    pub y: &'a [f64],
    pub c: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Problem<'_> {
    fn n(&self) -> usize {
        self.y.len()
    }

    fn k(&self, i: usize, j: usize) -> f64 {
        self.gram[i * self.n() + j]
    }

    /// `Q_ij = y_i y_j K_ij`.
    fn q(&self, i: usize, j: usize) -> f64 {
        self.y[i] * self.y[j] * self.k(i, j)
    }
}

struct State<'p, 'a> {
    p: &'p Problem<'a>,
    alpha: Vec<f64>,
    /// Gradient of the minimisation form `½ αᵀQα − eᵀα`.
    grad: Vec<f64>,
}

impl State<'_, '_> {
    fn is_upper(&self, t: usize) -> bool {
        self.alpha[t] >= self.p.c
    }

    fn is_lower(&self, t: usize) -> bool {
        self.alpha[t] <= 0.0
    }

    fn in_up(&self, t: usize) -> bool {
        if self.p.y[t] > 0.0 {
            !self.is_upper(t)
        } else {
            !self.is_lower(t)
        }
    }

    fn in_low(&self, t: usize) -> bool {
        if self.p.y[t] > 0.0 {
            !self.is_lower(t)
        } else {
            !self.is_upper(t)
        }
    }

    /// Returns the working pair, or `None` once optimal, together with the
    /// current maximal violation.
    fn select_pair(&self) -> (Option<(usize, usize)>, f64) {
        let p = self.p;
        let n = p.n();

        let mut g_max = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            if self.in_up(t) {
                let v = -p.y[t] * self.grad[t];
                if v >= g_max {
                    g_max = v;
                    i_sel = Some(t);
                }
            }
        }
        let Some(i) = i_sel else {
            return (None, 0.0);
        };

        let mut g_min = f64::INFINITY;
        let mut best_gain = f64::INFINITY;
        let mut j_sel = None;
        for t in 0..n {
            if !self.in_low(t) {
                continue;
            }
            let v = -p.y[t] * self.grad[t];
            g_min = g_min.min(v);
            let b = g_max - v;
            if b > 0.0 {
                let mut a = p.k(i, i) + p.k(t, t) - 2.0 * p.k(i, t);
                if a <= 0.0 {
                    a = TAU;
                }
                let gain = -(b * b) / a;
                if gain <= best_gain {
                    best_gain = gain;
                    j_sel = Some(t);
                }
            }
        }

        let violation = if g_min.is_finite() { g_max - g_min } else { 0.0 };
        if violation < p.tolerance {
            return (None, violation.max(0.0));
        }
        (j_sel.map(|j| (i, j)), violation)
    }

    fn update_pair(&mut self, i: usize, j: usize) {
        let p = self.p;
        let c = p.c;
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);

        if p.y[i] != p.y[j] {
            let mut quad = p.k(i, i) + p.k(j, j) - 2.0 * p.k(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let mut quad = p.k(i, i) + p.k(j, j) - 2.0 * p.k(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }

        self.alpha[i] = ai;
        self.alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        for t in 0..p.n() {
            self.grad[t] += p.q(i, t) * di + p.q(j, t) * dj;
        }
    }

    /// Primal active-set refinement from the current iterate. Each round
    /// solves the stationarity system on the free set, steps toward that
    /// solution until a multiplier hits a bound, and once stationary frees
    /// the bound multiplier whose KKT sign is most violated. Returns whether
    /// the objective improved.
    fn polish(&mut self) -> bool {
        let p = self.p;
        let n = p.n();
        let before = self.objective();
        let start = self.alpha.clone();
        let mut free: Vec<bool> = (0..n).map(|t| !self.is_lower(t) && !self.is_upper(t)).collect();

        for _ in 0..POLISH_MAX_STEPS {
            let idx: Vec<usize> = (0..n).filter(|&t| free[t]).collect();
            let f = idx.len();
            if f == 0 || f > POLISH_MAX_FREE {
                break;
            }
            let Some((target, nu)) = self.face_solution(&idx) else {
                break;
            };

            // Largest step toward the face solution that stays in the box.
            let mut step = 1.0;
            let mut blocking = None;
            for (r, &i) in idx.iter().enumerate() {
                let (from, to) = (self.alpha[i], target[r]);
                let limit = if to < 0.0 {
                    from / (from - to)
                } else if to > p.c {
                    (p.c - from) / (to - from)
                } else {
                    continue;
                };
                if limit < step {
                    step = limit;
                    blocking = Some((i, if to < 0.0 { 0.0 } else { p.c }));
                }
            }
            for (r, &i) in idx.iter().enumerate() {
                self.alpha[i] += step * (target[r] - self.alpha[i]);
            }
            if let Some((i, bound)) = blocking {
                self.alpha[i] = bound;
                free[i] = false;
                self.refresh_gradient();
                continue;
            }
            self.refresh_gradient();

            let mut worst = (0.0, None);
            for t in (0..n).filter(|&t| !free[t]) {
                let m = self.grad[t] + nu * p.y[t];
                let violation = if self.is_lower(t) { -m } else { m };
                if violation > worst.0 {
                    worst = (violation, Some(t));
                }
            }
            match worst {
                (v, Some(t)) if v > 1e-10 => free[t] = true,
                _ => break,
            }
        }

        if self.objective() < before {
            self.alpha = start;
            self.refresh_gradient();
            return false;
        }
        self.objective() > before
    }

    /// Free multipliers and the equality-constraint multiplier that make
    /// the gradient vanish on the face with every other multiplier fixed.
    fn face_solution(&self, free: &[usize]) -> Option<(Vec<f64>, f64)> {
        let p = self.p;
        let f = free.len();
        let mut in_free = vec![false; p.n()];
        for &i in free {
            in_free[i] = true;
        }
        let bound: Vec<usize> = (0..p.n()).filter(|&t| !in_free[t]).collect();

        let mut a = DMatrix::zeros(f + 1, f + 1);
        let mut b = DVector::zeros(f + 1);
        for (r, &i) in free.iter().enumerate() {
            for (s, &j) in free.iter().enumerate() {
                a[(r, s)] = p.q(i, j);
            }
            a[(r, f)] = p.y[i];
            a[(f, r)] = p.y[i];
            b[r] = 1.0 - bound.iter().map(|&j| p.q(i, j) * self.alpha[j]).sum::<f64>();
        }
        b[f] = -bound.iter().map(|&j| p.y[j] * self.alpha[j]).sum::<f64>();

        let sol = a.clone().svd(true, true).solve(&b, 1e-12).ok()?;
        if (&a * &sol - &b).amax() > 1e-9 * b.amax().max(1.0) {
            return None;
        }
        Some((sol.iter().take(f).copied().collect(), sol[f]))
    }

    fn refresh_gradient(&mut self) {
        let p = self.p;
        for t in 0..p.n() {
            self.grad[t] = -1.0 + (0..p.n()).map(|s| p.q(t, s) * self.alpha[s]).sum::<f64>();
        }
    }

    /// Dual objective in maximisation form.
    fn objective(&self) -> f64 {
        self.alpha
            .iter()
            .zip(&self.grad)
            .map(|(a, g)| 0.5 * a * (1.0 - g))
            .sum()
    }

    /// Bias averaged over free multipliers, or the midpoint of the feasible
    /// interval when every multiplier sits at a bound.
    fn bias(&self) -> f64 {
        let p = self.p;
        let mut upper = f64::INFINITY;
        let mut lower = f64::NEG_INFINITY;
        let mut free_sum = 0.0;
        let mut free = 0usize;
        for t in 0..p.n() {
            let yg = p.y[t] * self.grad[t];
            if self.is_upper(t) {
                if p.y[t] < 0.0 {
                    upper = upper.min(yg);
                } else {
                    lower = lower.max(yg);
                }
            } else if self.is_lower(t) {
                if p.y[t] > 0.0 {
                    upper = upper.min(yg);
                } else {
                    lower = lower.max(yg);
                }
            } else {
                free += 1;
                free_sum += yg;
            }
        }
        let rho = if free > 0 {
            free_sum / free as f64
        } else {
            (upper + lower) / 2.0
        };
        -rho
    }
}

pub(crate) fn solve(problem: &Problem<'_>) -> Result<Solution> {
    let n = problem.n();
    let mut state = State {
        p: problem,
        alpha: vec![0.0; n],
        grad: vec![-1.0; n],
    };
    let mut iterations = 0usize;
    let mut polish_rounds = 0usize;
    loop {
        let (pair, violation) = state.select_pair();
        let Some((i, j)) = pair else {
            if polish_rounds < POLISH_ROUNDS {
                polish_rounds += 1;
                if state.polish() {
                    continue;
                }
            }
            return Ok(Solution {
                bias: state.bias(),
                objective: state.objective(),
                alphas: state.alpha,
                iterations,
                violation,
            });
        };
        if iterations >= problem.max_iterations {
            return Err(Error::NotConverged {
                iterations,
                violation,
                objective: state.objective(),
            });
        }
        state.update_pair(i, j);
        iterations += 1;
    }
}
