//! Monte Carlo check that ε-greedy mixing scales the partial-data gradient
//! bias by `1 − ε`.

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::training::egreedy::{epsilon_greedy_choice, BatchKind};

/// Synthetic estimation problem with a known full-data gradient.
///
/// A full-data draw returns `full_gradient + noise`; a partial-data draw
/// returns `full_gradient + bias + noise`, noise i.i.d. `N(0, noise_sd²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasProblem {
    pub full_gradient: Vec<f64>,
    pub bias: Vec<f64>,
    pub noise_sd: f64,
}

impl BiasProblem {
    pub fn new(full_gradient: Vec<f64>, bias: Vec<f64>, noise_sd: f64) -> Result<Self> {
        if full_gradient.len() != bias.len() {
            return Err(Error::DimensionMismatch {
                what: "bias vector",
                expected: full_gradient.len(),
                actual: bias.len(),
            });
        }
        if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise_sd must be non-negative, got {noise_sd}")));
        }
        Ok(Self {
            full_gradient,
            bias,
            noise_sd,
        })
    }

    pub fn bias_norm(&self) -> f64 {
        norm(&self.bias)
    }

    /// One stochastic gradient of the given kind.
    pub fn draw(&self, kind: BatchKind, rng: &mut SimRng) -> Vec<f64> {
        let noise = Normal::new(0.0, self.noise_sd).expect("validated noise_sd");
        self.full_gradient
            .iter()
            .zip(&self.bias)
            .map(|(&g, &b)| {
                let shift = if kind == BatchKind::Partial { b } else { 0.0 };
                g + shift + noise.sample(rng)
            })
            .collect()
    }
}

/// Running mean and variance per coordinate.
#[derive(Debug, Clone)]
pub struct GradientStats {
    n: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl GradientStats {
    pub fn new(dim: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let d = v - *m;
            *m += d / n;
            *s += d * (v - *m);
        }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Standard error of each coordinate of the mean.
    pub fn standard_errors(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.m2
            .iter()
            .map(|&s| if self.n > 1 { (s / (n - 1.0) / n).sqrt() } else { f64::INFINITY })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasRow {
    pub epsilon: f64,
    pub measured_bias_norm: f64,
    pub predicted: f64,
    /// `sqrt(Σ se_i²)` over coordinates of the mean gradient.
    pub standard_error: f64,
}

impl BiasRow {
    pub fn within(&self, sigmas: f64) -> bool {
        (self.measured_bias_norm - self.predicted).abs() <= sigmas * self.standard_error
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// For each ε, averages `trials` ε-greedy gradient draws and compares the
/// bias of the mean against `(1 − ε)·‖b‖`.
pub fn proposition1_test(problem: &BiasProblem, epsilons: &[f64], trials: usize, rng: &mut SimRng) -> Result<Vec<BiasRow>> {
    if trials < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 trials, got {trials}")));
    }
    epsilons
        .iter()
        .map(|&eps| {
            let mut stats = GradientStats::new(problem.full_gradient.len());
            for _ in 0..trials {
                let kind = epsilon_greedy_choice(rng, eps)?;
                stats.push(&problem.draw(kind, rng));
            }
            let bias: Vec<f64> = stats.mean().iter().zip(&problem.full_gradient).map(|(m, g)| m - g).collect();
            Ok(BiasRow {
                epsilon: eps,
                measured_bias_norm: norm(&bias),
                predicted: (1.0 - eps) * problem.bias_norm(),
                standard_error: norm(&stats.standard_errors()),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem() -> BiasProblem {
        BiasProblem::new(vec![0.5, -1.0, 2.0, 0.0], vec![0.3, 0.4, 0.0, -1.2], 0.5).unwrap()
    }

    #[test]
    fn scaling_holds_across_epsilons() {
        let mut rng = SimRng::new(11);
        let rows = proposition1_test(&problem(), &[0.0, 0.5, 1.0], 100_000, &mut rng).unwrap();
        assert_eq!(rows[0].predicted, problem().bias_norm());
        assert_eq!(rows[2].predicted, 0.0);
        for row in &rows {
            assert!(row.within(3.0), "{row:?}");
        }
    }

    #[test]
    fn mixture_mean_matches_decomposition() {
        // mean gradient = ε·g_full + (1 − ε)·mean g_partial
        let p = problem();
        let eps = 0.3;
        let mut rng = SimRng::new(5);
        let mut mixed = GradientStats::new(4);
        let mut full = GradientStats::new(4);
        let mut partial = GradientStats::new(4);
        for _ in 0..50_000 {
            let kind = epsilon_greedy_choice(&mut rng, eps).unwrap();
            let g = p.draw(kind, &mut rng);
            mixed.push(&g);
            match kind {
                BatchKind::Full => full.push(&g),
                BatchKind::Partial => partial.push(&g),
            }
        }
        let se = mixed.standard_errors();
        for i in 0..4 {
            let predicted = eps * p.full_gradient[i] + (1.0 - eps) * partial.mean()[i];
            assert!((mixed.mean()[i] - predicted).abs() <= 4.0 * se[i], "coord {i}");
        }
        assert!(full.count() > 0 && partial.count() > 0);
    }

    #[test]
    fn stats_match_two_pass() {
        let xs = [[1.0], [2.0], [4.0], [7.0]];
        let mut s = GradientStats::new(1);
        xs.iter().for_each(|x| s.push(x));
        assert!((s.mean()[0] - 3.5).abs() < 1e-15);
        let var = xs.iter().map(|x| (x[0] - 3.5f64).powi(2)).sum::<f64>() / 3.0;
        assert!((s.standard_errors()[0] - (var / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(BiasProblem::new(vec![0.0], vec![], 1.0).is_err());
        assert!(BiasProblem::new(vec![0.0], vec![0.0], -1.0).is_err());
        assert!(proposition1_test(&problem(), &[0.5], 1, &mut SimRng::new(0)).is_err());
    }
}
