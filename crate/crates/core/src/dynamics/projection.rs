use crate::gmm::{ThetaLayout, ThetaVector};
use crate::Result;

/// Orthogonal projector onto the directions that keep `sum(alpha)` fixed.
///
/// It is the identity on the mean and covariance blocks and the centering
/// operator `I_K - (1/K) 1 1^T` on the weight block, which equals `E E^T`
/// for any orthonormal basis `E` of the zero-sum subspace; no basis is ever
/// formed.
///
/// A weight block whose sum is already at round-off level relative to its
/// magnitude is returned untouched, which makes the operator idempotent in
/// floating point and leaves exact EM differences bit-for-bit unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Projection {
    layout: ThetaLayout,
}

impl Projection {
    pub fn new(layout: ThetaLayout) -> Self {
        Self { layout }
    }

    pub fn layout(&self) -> ThetaLayout {
        self.layout
    }

    pub fn apply(&self, v: &ThetaVector) -> Result<ThetaVector> {
        self.layout.check(v.len())?;
        let mut out = v.clone();
        self.apply_in_place(&mut out);
        Ok(out)
    }

    pub(crate) fn apply_in_place(&self, v: &mut ThetaVector) {
        center_in_place(&mut v.values_mut().as_mut_slice()[self.layout.alpha_range()]);
    }
}

fn center_in_place(block: &mut [f64]) {
    let k = block.len() as f64;
    // A single pass can leave a residual sum well above round-off relative to
    // the (smaller) centered entries; repeat until the block passes its own test.
    for _ in 0..8 {
        let sum: f64 = block.iter().sum();
        let magnitude: f64 = block.iter().map(|v| v.abs()).sum();
        if sum.abs() <= 4.0 * k * f64::EPSILON * magnitude {
            return;
        }
        let mean = sum / k;
        for v in block.iter_mut() {
            *v -= mean;
        }
    }
}
