//! Soft-margin binary SVM over binary bag-of-words vectors.

mod kernel;
mod smo;

use std::io::{BufRead, Write};

pub use kernel::{gram_matrix, KernelChoice, KernelConfig};

use crate::classifier::BinaryClassifier;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::syndrome::Label;
use crate::text::BinaryVector;

const HEADER: &str = "svm-model v1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Soft-margin penalty.
    pub c: f64,
    pub kkt_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            c: 1.0,
            kkt_tolerance: 1e-3,
            max_iterations: 1_000_000,
        }
    }
}

impl SolverSettings {
    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidArgument(format!("C must be positive, got {}", self.c)));
        }
        if !(self.kkt_tolerance > 0.0) {
            return Err(Error::InvalidArgument("KKT tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// Full solver output, including multipliers for every training point.
#[derive(Debug, Clone)]
pub struct SvmFit {
    pub model: SvmModel,
    /// One multiplier per training example, in input order.
    pub alphas: Vec<f64>,
    pub iterations: usize,
    /// Maximal KKT violation at termination.
    pub violation: f64,
    pub dual_objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    kernel: KernelConfig,
    c: f64,
    bias: f64,
    dimension: usize,
    support_vectors: Vec<BinaryVector>,
    alphas: Vec<f64>,
    labels: Vec<Label>,
}

impl SvmModel {
    pub fn train(examples: &[(BinaryVector, Label)], kernel: KernelConfig, settings: SolverSettings) -> Result<Self> {
        Ok(Self::fit(examples, kernel, settings, Execution::default())?.model)
    }

    /// Trains and returns the solver diagnostics alongside the model. The
    /// Gram matrix is filled according to `exec`.
    pub fn fit(
        examples: &[(BinaryVector, Label)],
        kernel: KernelConfig,
        settings: SolverSettings,
        exec: Execution,
    ) -> Result<SvmFit> {
        kernel.validate()?;
        settings.validate()?;
        let first = examples
            .first()
            .ok_or_else(|| Error::UnusableTrainingSet("no training examples".into()))?;
        let dimension = first.0.dimension();
        for (x, _) in examples {
            x.check_dimension(dimension)?;
        }
        let has = |l: Label| examples.iter().any(|(_, y)| *y == l);
        if !has(Label::Positive) || !has(Label::Negative) {
            return Err(Error::UnusableTrainingSet(
                "both positive and negative examples are required".into(),
            ));
        }

        let xs: Vec<BinaryVector> = examples.iter().map(|(x, _)| x.clone()).collect();
        let y: Vec<f64> = examples.iter().map(|(_, l)| l.sign()).collect();
        let gram = gram_matrix(&kernel, &xs, exec);
        let solution = smo::solve(&smo::Problem {
            gram: &gram,
            y: &y,
            c: settings.c,
            tolerance: settings.kkt_tolerance,
            max_iterations: settings.max_iterations,
        })?;

        let mut support_vectors = Vec::new();
        let mut alphas = Vec::new();
        let mut labels = Vec::new();
        for ((x, label), &a) in examples.iter().zip(&solution.alphas) {
            if a > 0.0 {
                support_vectors.push(x.clone());
                alphas.push(a);
                labels.push(*label);
            }
        }
        log::debug!(
            "smo: {} iterations, {} support vectors of {}, violation {:.2e}",
            solution.iterations,
            support_vectors.len(),
            examples.len(),
            solution.violation
        );

        Ok(SvmFit {
            model: SvmModel {
                kernel,
                c: settings.c,
                bias: solution.bias,
                dimension,
                support_vectors,
                alphas,
                labels,
            },
            alphas: solution.alphas,
            iterations: solution.iterations,
            violation: solution.violation,
            dual_objective: solution.objective,
        })
    }

    pub fn kernel(&self) -> KernelConfig {
        self.kernel
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn support_vectors(&self) -> &[BinaryVector] {
        &self.support_vectors
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    /// `Σ α_i y_i K(x_i, x) + b` over the support vectors.
    pub fn decision_value(&self, x: &BinaryVector) -> Result<f64> {
        if self.support_vectors.is_empty() {
            return Err(Error::EmptyModel);
        }
        x.check_dimension(self.dimension)?;
        let sum: f64 = self
            .support_vectors
            .iter()
            .zip(&self.alphas)
            .zip(&self.labels)
            .map(|((sv, a), l)| a * l.sign() * self.kernel.eval_unchecked(sv, x))
            .sum();
        Ok(sum + self.bias)
    }

    /// Positive iff the decision value is strictly positive.
    pub fn classify(&self, x: &BinaryVector) -> Result<Label> {
        Ok(Label::from_bool(self.decision_value(x)? > 0.0))
    }

    /// Dual objective evaluated on the stored support vectors.
    pub fn dual_objective(&self) -> f64 {
        let n = self.support_vectors.len();
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += self.alphas[i]
                    * self.alphas[j]
                    * self.labels[i].sign()
                    * self.labels[j].sign()
                    * self
                        .kernel
                        .eval_unchecked(&self.support_vectors[i], &self.support_vectors[j]);
            }
        }
        self.alphas.iter().sum::<f64>() - 0.5 * quad
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{HEADER}")?;
        writeln!(out, "kernel {}", self.kernel)?;
        writeln!(out, "c {:?}", self.c)?;
        writeln!(out, "bias {:?}", self.bias)?;
        writeln!(out, "dimension {}", self.dimension)?;
        writeln!(out, "support_vectors {}", self.support_vectors.len())?;
        for ((sv, a), l) in self.support_vectors.iter().zip(&self.alphas).zip(&self.labels) {
            let sign = if l.is_positive() { "+1" } else { "-1" };
            write!(out, "{a:?} {sign}")?;
            for i in sv.active() {
                write!(out, " {i}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate().map(|(n, l)| (n + 1, l));
        let mut next = || -> Result<(usize, String)> {
            match lines.next() {
                Some((n, l)) => Ok((n, l?)),
                None => Err(Error::parse(0, "unexpected end of model file")),
            }
        };

        let (n, header) = next()?;
        if header.trim() != HEADER {
            return Err(Error::parse(n, format!("expected `{HEADER}`, found {header:?}")));
        }
        let (n, line) = next()?;
        let kernel = parse_kernel(n, &line)?;
        let (n, line) = next()?;
        let c = parse_num::<f64>(n, field(n, &line, "c")?)?;
        let (n, line) = next()?;
        let bias = parse_num::<f64>(n, field(n, &line, "bias")?)?;
        let (n, line) = next()?;
        let dimension = parse_num::<usize>(n, field(n, &line, "dimension")?)?;
        let (n, line) = next()?;
        let count = parse_num::<usize>(n, field(n, &line, "support_vectors")?)?;

        let mut support_vectors = Vec::with_capacity(count);
        let mut alphas = Vec::with_capacity(count);
        let mut labels = Vec::with_capacity(count);
        for _ in 0..count {
            let (n, line) = next()?;
            let mut fields = line.split_whitespace();
            let alpha = parse_num::<f64>(n, fields.next().unwrap_or(""))?;
            let label = match fields.next() {
                Some("+1") => Label::Positive,
                Some("-1") => Label::Negative,
                other => return Err(Error::parse(n, format!("bad label {other:?}"))),
            };
            let indices = fields.map(|f| parse_num::<usize>(n, f)).collect::<Result<Vec<_>>>()?;
            let sv = BinaryVector::new(dimension, indices).map_err(|e| Error::parse(n, e.to_string()))?;
            support_vectors.push(sv);
            alphas.push(alpha);
            labels.push(label);
        }
        Ok(SvmModel {
            kernel,
            c,
            bias,
            dimension,
            support_vectors,
            alphas,
            labels,
        })
    }
}

fn field<'a>(n: usize, line: &'a str, key: &str) -> Result<&'a str> {
    line.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix(' '))
        .map(str::trim)
        .ok_or_else(|| Error::parse(n, format!("expected `{key} ...`, found {line:?}")))
}

fn parse_num<T: std::str::FromStr>(n: usize, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::parse(n, format!("bad number {value:?}: {e}")))
}

fn parse_kernel(n: usize, line: &str) -> Result<KernelConfig> {
    let words: Vec<&str> = field(n, line, "kernel")?.split_whitespace().collect();
    let kernel = match words.as_slice() {
        ["polynomial", "degree", d, "coef0", c] => KernelConfig::Polynomial {
            degree: parse_num(n, d)?,
            coef0: parse_num(n, c)?,
        },
        ["rbf", "gamma", g] => KernelConfig::Rbf {
            gamma: parse_num(n, g)?,
        },
        _ => return Err(Error::parse(n, format!("bad kernel line {line:?}"))),
    };
    kernel.validate().map_err(|e| Error::parse(n, e.to_string()))?;
    Ok(kernel)
}

impl BinaryClassifier for SvmModel {
    fn predict(&self, x: &BinaryVector) -> Result<Label> {
        self.classify(x)
    }
}
