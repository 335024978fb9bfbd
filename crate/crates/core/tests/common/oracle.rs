//! Reference implementations used to check the production code. They share
//! no code with the library beyond its public data types.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use syndromic_core::svm::KernelConfig;
use syndromic_core::text::BinaryVector;
use syndromic_core::Label;

/// Kernel value from dense 0/1 vectors.
pub fn kernel(k: &KernelConfig, a: &[u8], b: &[u8]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| f64::from(x * y)).sum();
    match *k {
        KernelConfig::Polynomial { degree, coef0 } => (dot + coef0).powi(degree as i32),
        KernelConfig::Rbf { gamma } => {
            let d2: f64 = a.iter().zip(b).map(|(x, y)| f64::from(x.abs_diff(*y))).sum();
            (-gamma * d2).exp()
        }
    }
}

pub fn dense(x: &BinaryVector) -> Vec<u8> {
    (0..x.dimension()).map(|i| u8::from(x.contains(i))).collect()
}

pub fn random_vector<R: Rng>(rng: &mut R, dim: usize, density: f64) -> BinaryVector {
    BinaryVector::new(dim, (0..dim).filter(|_| rng.random_bool(density))).unwrap()
}

/// Random labelled set with at least one example of each class.
pub fn random_examples<R: Rng>(rng: &mut R, n: usize, dim: usize) -> Vec<(BinaryVector, Label)> {
    loop {
        let ex: Vec<_> = (0..n)
            .map(|_| (random_vector(rng, dim, 0.4), Label::from_bool(rng.random_bool(0.5))))
            .collect();
        let pos = ex.iter().filter(|e| e.1.is_positive()).count();
        if pos > 0 && pos < n {
            return ex;
        }
    }
}

/// Naive Bayes posterior numerators `ln(P(c) Π P(f_i | c))`, evaluated as a
/// plain product of probabilities from raw document counts.
pub fn nb_log_numerators(train: &[(BinaryVector, Label)], alpha: f64, x: &BinaryVector) -> (f64, f64) {
    let m = x.dimension();
    let numerator = |label: Label| {
        let docs: Vec<Vec<u8>> = train
            .iter()
            .filter(|(_, l)| *l == label)
            .map(|(v, _)| dense(v))
            .collect();
        let n_c = docs.len() as f64;
        let mut p = n_c / train.len() as f64;
        let xd = dense(x);
        for i in 0..m {
            let with = docs.iter().filter(|d| d[i] == 1).count() as f64;
            let p1 = (with + alpha) / (n_c + 2.0 * alpha);
            p *= if xd[i] == 1 { p1 } else { 1.0 - p1 };
        }
        p.ln()
    };
    (numerator(Label::Positive), numerator(Label::Negative))
}

pub struct QpSolution {
    pub alphas: Vec<f64>,
    pub objective: f64,
}

pub fn dual_objective(q: &DMatrix<f64>, alphas: &[f64]) -> f64 {
    let a = DVector::from_column_slice(alphas);
    a.sum() - 0.5 * (a.transpose() * q * &a)[(0, 0)]
}

/// Exact maximiser of the soft-margin SVM dual
/// `Σα − ½ αᵀQα` subject to `0 ≤ α ≤ C`, `Σ α_i y_i = 0`.
///
/// Every assignment of each multiplier to {at 0, at C, free} is tried. For
/// each, the free multipliers solve the stationarity system
/// `Q_FF α_F + ν y_F = 1 − Q_FU C`, `y_Fᵀ α_F = −C Σ_U y`. The best feasible
/// candidate is the optimum, since the true optimum is stationary on its
/// own face. Intended for n ≤ 8.
pub fn svm_dual_oracle(xs: &[Vec<u8>], ys: &[f64], k: &KernelConfig, c: f64) -> QpSolution {
    let n = xs.len();
    assert!(n <= 8, "oracle is exponential in n");
    let q = DMatrix::from_fn(n, n, |i, j| ys[i] * ys[j] * kernel(k, &xs[i], &xs[j]));
    let mut best = QpSolution {
        alphas: vec![0.0; n],
        objective: 0.0,
    };
    let patterns = 3usize.pow(n as u32);
    for code in 0..patterns {
        // 0 = lower bound, 1 = upper bound, 2 = free
        let state: Vec<usize> = (0..n).map(|i| code / 3usize.pow(i as u32) % 3).collect();
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut alphas: Vec<f64> = state.iter().map(|&s| if s == 1 { c } else { 0.0 }).collect();

        if !free.is_empty() {
            let f = free.len();
            let mut a = DMatrix::zeros(f + 1, f + 1);
            let mut b = DVector::zeros(f + 1);
            for (r, &i) in free.iter().enumerate() {
                for (s, &j) in free.iter().enumerate() {
                    a[(r, s)] = q[(i, j)];
                }
                a[(r, f)] = ys[i];
                a[(f, r)] = ys[i];
                let bounded: f64 = (0..n).filter(|&j| state[j] == 1).map(|j| q[(i, j)] * c).sum();
                b[r] = 1.0 - bounded;
            }
            b[f] = -(0..n).filter(|&j| state[j] == 1).map(|j| ys[j] * c).sum::<f64>();
            let svd = a.clone().svd(true, true);
            let Ok(sol) = svd.solve(&b, 1e-12) else { continue };
            if (&a * &sol - &b).amax() > 1e-9 {
                continue;
            }
            for (r, &i) in free.iter().enumerate() {
                alphas[i] = sol[r];
            }
        }

        let feasible = alphas.iter().all(|&a| (-1e-12..=c + 1e-12).contains(&a))
            && alphas.iter().zip(ys).map(|(a, y)| a * y).sum::<f64>().abs() < 1e-9;
        if !feasible {
            continue;
        }
        let alphas: Vec<f64> = alphas.iter().map(|a| a.clamp(0.0, c)).collect();
        let objective = dual_objective(&q, &alphas);
        if objective > best.objective {
            best = QpSolution { alphas, objective };
        }
    }
    best
}

/// `Σ_j α_j y_j K(x_j, x)` without the bias term.
pub fn kernel_expansion(xs: &[Vec<u8>], ys: &[f64], alphas: &[f64], k: &KernelConfig, x: &[u8]) -> f64 {
    xs.iter()
        .zip(ys)
        .zip(alphas)
        .map(|((xj, y), a)| a * y * kernel(k, xj, x))
        .sum()
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: DMatrix<f64>) -> f64 {
    m.symmetric_eigenvalues().min()
}

/// Bias consistent with the KKT conditions at `alphas`: the mean of
/// `y_i − g_i` over free multipliers, or the midpoint of the feasible
/// interval when every multiplier is at a bound.
pub fn kkt_bias(xs: &[Vec<u8>], ys: &[f64], alphas: &[f64], k: &KernelConfig, c: f64) -> f64 {
    let eps = 1e-9 * c.max(1.0);
    let g: Vec<f64> = xs.iter().map(|x| kernel_expansion(xs, ys, alphas, k, x)).collect();
    let free: Vec<f64> = (0..xs.len())
        .filter(|&i| alphas[i] > eps && alphas[i] < c - eps)
        .map(|i| ys[i] - g[i])
        .collect();
    if !free.is_empty() {
        return free.iter().sum::<f64>() / free.len() as f64;
    }
    // y_i (g_i + b) >= 1 at α = 0, <= 1 at α = C.
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..xs.len() {
        let edge = ys[i] - g[i];
        let at_zero = alphas[i] <= eps;
        if (ys[i] > 0.0) == at_zero {
            lo = lo.max(edge);
        } else {
            hi = hi.min(edge);
        }
    }
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo,
        (false, true) => hi,
        (false, false) => 0.0,
    }
}
