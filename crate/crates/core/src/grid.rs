//! Dense C×H×W feature grids.
//!
//! Layout is row-major by (channel, row, column): element `(c, r, col)` lives at
//! `c·H·W + r·W + col`. The wire format in [`crate::protocol`] relies on this order.

use crate::error::{Error, Result};
use crate::uncertainty::NonconformityMap;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    channels: usize,
    height: usize,
    width: usize,
    values: Vec<f64>,
}

pub(crate) fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}

impl FeatureGrid {
    pub fn new(channels: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::InvalidParameter(format!(
                "grid dimensions must be positive, got {channels}x{height}x{width}"
            )));
        }
        let expected = channels * height * width;
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "feature grid values",
                expected,
                actual: values.len(),
            });
        }
        check_finite(&values)?;
        Ok(Self {
            channels,
            height,
            width,
            values,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        assert!(channels > 0 && height > 0 && width > 0);
        Self {
            channels,
            height,
            width,
            values: vec![0.0; channels * height * width],
        }
    }

    /// Builds a grid from `f(c, r, col)`; non-finite outputs are rejected.
    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for r in 0..height {
                for col in 0..width {
                    values.push(f(c, r, col));
                }
            }
        }
        Self::new(channels, height, width, values)
    }

    /// Callers guarantee length and finiteness.
    pub(crate) fn from_parts(dims: (usize, usize, usize), values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), dims.0 * dims.1 * dims.2);
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self {
            channels: dims.0,
            height: dims.1,
            width: dims.2,
            values,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    /// Cells per channel (H·W).
    pub fn plane(&self) -> usize {
        self.height * self.width
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn index(&self, c: usize, r: usize, col: usize) -> usize {
        debug_assert!(c < self.channels && r < self.height && col < self.width);
        (c * self.height + r) * self.width + col
    }

    #[inline]
    pub fn get(&self, c: usize, r: usize, col: usize) -> f64 {
        self.values[self.index(c, r, col)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// The H·W block of channel `c`, row-major.
    pub fn channel(&self, c: usize) -> &[f64] {
        let plane = self.plane();
        &self.values[c * plane..(c + 1) * plane]
    }

    pub fn same_shape(&self, other: &FeatureGrid) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::ShapeMismatch {
                left: self.dims(),
                right: other.dims(),
            });
        }
        Ok(())
    }
}

/// Elementwise `|current − previous_fused|`.
pub fn l1_deviation(current: &FeatureGrid, previous_fused: &FeatureGrid) -> Result<NonconformityMap> {
    current.same_shape(previous_fused)?;
    let values = current
        .values
        .iter()
        .zip(&previous_fused.values)
        .map(|(a, b)| (a - b).abs())
        .collect();
    Ok(NonconformityMap::from_parts(current.dims(), values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;

    fn random_grid(rng: &mut SimRng, dims: (usize, usize, usize)) -> FeatureGrid {
        FeatureGrid::from_fn(dims.0, dims.1, dims.2, |_, _, _| rng.uniform_in(-2.0, 2.0)).unwrap()
    }

    #[test]
    fn single_element() {
        let g = FeatureGrid::new(1, 1, 1, vec![0.5]).unwrap();
        assert_eq!(g.get(0, 0, 0), 0.5);
    }

    #[test]
    fn index_oracle() {
        let values: Vec<f64> = (0..8).map(|v| v as f64).collect();
        let g = FeatureGrid::new(2, 2, 2, values.clone()).unwrap();
        assert_eq!(g.get(1, 0, 1), values[5]);
        for c in 0..2 {
            for r in 0..2 {
                for col in 0..2 {
                    assert_eq!(g.get(c, r, col), values[c * 4 + r * 2 + col]);
                }
            }
        }
    }

    #[test]
    fn length_mismatch_names_both_lengths() {
        let err = FeatureGrid::new(1, 2, 2, vec![0.0; 3]).unwrap_err();
        assert!(err.to_string().contains("expected 4, got 3"), "{err}");
    }

    #[test]
    fn non_finite_rejected_with_index() {
        let err = FeatureGrid::new(1, 1, 3, vec![0.0, f64::NAN, 1.0]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 1, .. }));
        assert!(FeatureGrid::new(1, 1, 1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn l1_identical_is_zero() {
        let mut rng = SimRng::new(3);
        let g = random_grid(&mut rng, (3, 4, 5));
        let s = l1_deviation(&g, &g).unwrap();
        assert!(s.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn l1_zero_to_one() {
        let prev = FeatureGrid::zeros(2, 3, 3);
        let cur = FeatureGrid::new(2, 3, 3, vec![1.0; 18]).unwrap();
        let s = l1_deviation(&cur, &prev).unwrap();
        assert!(s.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn l1_matches_naive_loop() {
        let mut rng = SimRng::new(11);
        let a = random_grid(&mut rng, (3, 4, 2));
        let b = random_grid(&mut rng, (3, 4, 2));
        let s = l1_deviation(&a, &b).unwrap();
        for c in 0..3 {
            for r in 0..4 {
                for col in 0..2 {
                    let want = (a.get(c, r, col) - b.get(c, r, col)).abs();
                    assert_eq!(s.get(c, r, col), want);
                }
            }
        }
    }

    #[test]
    fn l1_shape_mismatch() {
        let a = FeatureGrid::zeros(1, 2, 2);
        let b = FeatureGrid::zeros(2, 2, 2);
        assert!(matches!(l1_deviation(&a, &b), Err(Error::ShapeMismatch { .. })));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn grids(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
            prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 12), n)
        }

        proptest! {
            #[test]
            fn l1_symmetric_and_triangle(vs in grids(3)) {
                let g: Vec<FeatureGrid> = vs.into_iter().map(|v| FeatureGrid::new(3, 2, 2, v).unwrap()).collect();
                let ab = l1_deviation(&g[0], &g[1]).unwrap();
                let ba = l1_deviation(&g[1], &g[0]).unwrap();
                prop_assert_eq!(ab.values(), ba.values());
                let bc = l1_deviation(&g[1], &g[2]).unwrap();
                let ac = l1_deviation(&g[0], &g[2]).unwrap();
                for i in 0..12 {
                    prop_assert!(ac.values()[i] <= ab.values()[i] + bc.values()[i] + 1e-9);
                }
            }

            #[test]
            fn indexing_is_a_bijection(c in 1usize..4, h in 1usize..5, w in 1usize..5) {
                let src: Vec<f64> = (0..c * h * w).map(|i| i as f64 * 0.5).collect();
                let g = FeatureGrid::new(c, h, w, src.clone()).unwrap();
                let mut seen = vec![false; src.len()];
                let mut out = vec![0.0; src.len()];
                for ci in 0..c {
                    for r in 0..h {
                        for col in 0..w {
                            let i = g.index(ci, r, col);
                            prop_assert!(!seen[i]);
                            seen[i] = true;
                            out[i] = g.get(ci, r, col);
                        }
                    }
                }
                prop_assert_eq!(out, src);
            }
        }
    }
}
