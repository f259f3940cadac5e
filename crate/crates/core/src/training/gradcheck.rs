use crate::error::{Error, Result};
use crate::grid::FeatureGrid;
use crate::protocol::Validity;
use crate::rng::SimRng;
use crate::training::egreedy::BatchKind;
use crate::training::lagrange::PenaltyMode;
use crate::training::model::{forward_backward, Model, Neighbor, Objective, PassSettings, Relaxation, Sample};

/// Central-difference check of `analytic` against `f` at `params`.
///
/// Returns `max_i |analytic_i − numeric_i| / max(1, |numeric_i|)`.
pub fn grad_check<F>(mut f: F, params: &[f64], analytic: &[f64], step: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    if params.len() != analytic.len() {
        return Err(Error::DimensionMismatch {
            what: "analytic gradient",
            expected: params.len(),
            actual: analytic.len(),
        });
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {step}")));
    }
    let mut p = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + step;
        let plus = f(&p);
        p[i] = orig - step;
        let minus = f(&p);
        p[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFiniteEvaluation(i));
        }
        let numeric = (plus - minus) / (2.0 * step);
        worst = worst.max((analytic[i] - numeric).abs() / numeric.abs().max(1.0));
    }
    Ok(worst)
}

/// Random ego, reference, two partially valid responders and truth masks.
#[derive(Debug, Clone)]
pub struct PipelineInstance {
    pub model: Model,
    pub ego: FeatureGrid,
    pub reference: FeatureGrid,
    pub neighbors: Vec<Neighbor>,
    pub truth_dynamic: Vec<bool>,
    pub truth_static: Vec<bool>,
}

impl PipelineInstance {
    pub fn random(seed: u64, channels: usize, height: usize, width: usize) -> Result<Self> {
        let mut rng = SimRng::new(seed);
        let plane = height * width;
        let mut model = Model::init(channels, plane, 3, 3, &mut rng);
        model.gate.raw_level = rng.uniform_in(-1.0, 1.0);
        model.threshold.raw_tau = rng.uniform_in(-0.3, 0.3);
        let grid = |rng: &mut SimRng| FeatureGrid::from_fn(channels, height, width, |_, _, _| rng.uniform_in(0.0, 1.0));
        let ego = grid(&mut rng)?;
        let reference = grid(&mut rng)?;
        let mut neighbors = Vec::new();
        for _ in 0..2 {
            let g = grid(&mut rng)?;
            let cells = (0..plane).map(|_| rng.bernoulli(0.7)).collect();
            neighbors.push(Neighbor {
                grid: g,
                validity: Validity::from_cells(height, width, cells)?,
            });
        }
        let truth_dynamic = (0..plane).map(|_| rng.bernoulli(0.3)).collect();
        let truth_static = (0..plane).map(|_| rng.bernoulli(0.5)).collect();
        Ok(Self {
            model,
            ego,
            reference,
            neighbors,
            truth_dynamic,
            truth_static,
        })
    }

    pub fn sample(&self) -> Sample<'_> {
        Sample {
            ego: &self.ego,
            reference: &self.reference,
            neighbors: &self.neighbors,
            truth_dynamic: &self.truth_dynamic,
            truth_static: &self.truth_static,
        }
    }

    /// Worst relative error of the hand-written gradient of the relaxed
    /// Lagrangian objective over every parameter.
    pub fn check(&self, settings: &PassSettings, step: f64) -> Result<f64> {
        let (_, grads) = forward_backward(&self.model, &self.sample(), settings)?;
        let analytic = grads
            .ok_or_else(|| Error::InvalidParameter("pass settings produce no gradient".into()))?
            .to_vec();
        let mut probe = self.model.clone();
        grad_check(
            |p: &[f64]| match probe.set_from_slice(p) {
                Ok(()) => forward_backward(&probe, &self.sample(), settings).map_or(f64::NAN, |(o, _)| o.total),
                Err(_) => f64::NAN,
            },
            &self.model.to_vec(),
            &analytic,
            step,
        )
    }
}

/// Full pipeline check at `C = 4, H = W = 3`: worst error over FULL and
/// PARTIAL batches with a positive multiplier.
pub fn pipeline_grad_check(seed: u64, step: f64) -> Result<f64> {
    let inst = PipelineInstance::random(seed, 4, 3, 3)?;
    let mut worst = 0.0f64;
    for batch in [BatchKind::Partial, BatchKind::Full] {
        let settings = PassSettings {
            relaxation: Relaxation::Relaxed { temperature: 0.1 },
            batch,
            objective: Objective::Task {
                lambda: 0.7,
                c_target: 0.04,
                penalty: PenaltyMode::Absolute,
                slope_at: None,
            },
        };
        worst = worst.max(inst.check(&settings, step)?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pipeline_passes_on_several_seeds() {
        for seed in 0..3 {
            let err = pipeline_grad_check(seed, 1e-5).unwrap();
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn quadratic() {
        let err = grad_check(|p| p[0] * p[0], &[3.0], &[6.0], 1e-5).unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn constant() {
        assert_eq!(grad_check(|_| 4.2, &[1.0, -2.0], &[0.0, 0.0], 1e-5).unwrap(), 0.0);
    }

    #[test]
    fn detects_wrong_gradient() {
        let err = grad_check(|p| p[0] * p[1], &[2.0, 3.0], &[3.0, 1.0], 1e-5).unwrap();
        assert!((err - 0.5).abs() < 1e-6);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            grad_check(|p| 1.0 / p[0], &[0.0], &[0.0], 1e-3),
            Ok(_) | Err(Error::NonFiniteEvaluation(0))
        ));
        assert!(matches!(
            grad_check(|p| p[0].ln(), &[0.0], &[0.0], 1e-3),
            Err(Error::NonFiniteEvaluation(0))
        ));
    }
}
