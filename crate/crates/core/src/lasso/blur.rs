use crate::linalg::{self, LinearOperator};
use crate::rng::SeededRng;

use super::{LassoError, LassoInstance, LassoOperator};

/// Largest image side accepted by [`blur_instance`].
pub const MAX_BLUR_SIDE: usize = 64;

/// Normalised 1-d Gaussian weights on `−radius..=radius`.
pub fn gaussian_kernel(radius: usize, sigma: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let t = i as f64 - radius as f64;
            (-t * t / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Index into `0..len` after half-sample symmetric reflection.
fn reflect(mut j: isize, len: usize) -> usize {
    let len = len as isize;
    loop {
        if j < 0 {
            j = -j - 1;
        } else if j >= len {
            j = 2 * len - j - 1;
        } else {
            return j as usize;
        }
    }
}

/// Separable 2-d convolution of a `side×side` row-major image with reflexive
/// boundary conditions.
#[derive(Debug, Clone)]
pub struct BlurOperator {
    side: usize,
    kernel: Vec<f64>,
}

impl BlurOperator {
    pub fn new(side: usize, kernel: Vec<f64>) -> Self {
        assert!(kernel.len() % 2 == 1, "kernel length must be odd");
        BlurOperator { side, kernel }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    fn radius(&self) -> isize {
        (self.kernel.len() / 2) as isize
    }

    /// Convolves along rows (`stride = 1`) or columns (`stride = side`).
    fn pass(&self, src: &[f64], dst: &mut [f64], along_rows: bool) {
        let n = self.side;
        let r = self.radius();
        for a in 0..n {
            for i in 0..n {
                let mut s = 0.0;
                for (t, w) in self.kernel.iter().enumerate() {
                    let j = reflect(i as isize + t as isize - r, n);
                    let idx = if along_rows { a * n + j } else { j * n + a };
                    s += w * src[idx];
                }
                let out = if along_rows { a * n + i } else { i * n + a };
                dst[out] = s;
            }
        }
    }

    fn pass_adjoint(&self, src: &[f64], dst: &mut [f64], along_rows: bool) {
        let n = self.side;
        let r = self.radius();
        dst.iter_mut().for_each(|v| *v = 0.0);
        for a in 0..n {
            for i in 0..n {
                let v = src[if along_rows { a * n + i } else { i * n + a }];
                for (t, w) in self.kernel.iter().enumerate() {
                    let j = reflect(i as isize + t as isize - r, n);
                    dst[if along_rows { a * n + j } else { j * n + a }] += w * v;
                }
            }
        }
    }
}

impl LinearOperator for BlurOperator {
    fn rows(&self) -> usize {
        self.side * self.side
    }
    fn cols(&self) -> usize {
        self.side * self.side
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let mut tmp = vec![0.0; x.len()];
        self.pass(x, &mut tmp, true);
        self.pass(&tmp, out, false);
    }
    fn apply_adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        let mut tmp = vec![0.0; y.len()];
        self.pass_adjoint(y, &mut tmp, false);
        self.pass_adjoint(&tmp, out, true);
    }
}

/// Seeded piecewise-constant test image with values in `[0, 1]`.
fn synthetic_image(side: usize, rng: &mut SeededRng) -> Vec<f64> {
    let mut img = vec![0.0; side * side];
    for _ in 0..6 {
        let x0 = (rng.uniform() * side as f64) as usize;
        let y0 = (rng.uniform() * side as f64) as usize;
        let w = 1 + (rng.uniform() * side as f64 / 2.0) as usize;
        let h = 1 + (rng.uniform() * side as f64 / 2.0) as usize;
        let v = rng.uniform();
        for r in y0..(y0 + h).min(side) {
            for c in x0..(x0 + w).min(side) {
                img[r * side + c] = v;
            }
        }
    }
    img
}

/// Deblurring instance: `b = blur(truth) + noise` on a `side×side` synthetic
/// image, with `γ = 10⁻⁴` and `λ = 5`.
pub fn blur_instance(
    side: usize,
    kernel_radius: usize,
    kernel_sigma: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<LassoInstance, LassoError> {
    if side == 0 {
        return Err(LassoError::Invalid("side must be positive".into()));
    }
    if side > MAX_BLUR_SIDE {
        return Err(LassoError::Invalid(format!(
            "side {side} exceeds the desk-scale limit of {MAX_BLUR_SIDE}; larger images are not supported"
        )));
    }
    if kernel_radius > 0 && !(kernel_sigma > 0.0) {
        return Err(LassoError::Invalid("kernel sigma must be positive".into()));
    }
    let mut rng = SeededRng::new(seed);
    let truth = synthetic_image(side, &mut rng);
    let op = BlurOperator::new(side, gaussian_kernel(kernel_radius, kernel_sigma.max(f64::MIN_POSITIVE)));
    let mut b = op.apply(&truth);
    let noise = rng.gaussian_vec(b.len());
    linalg::axpy(noise_sigma, &noise, &mut b);
    let mut inst = LassoInstance::new(LassoOperator::Blur(op), b, 1e-4, 5.0)?;
    inst.truth = Some(truth);
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflection() {
        assert_eq!(reflect(-1, 4), 0);
        assert_eq!(reflect(-2, 4), 1);
        assert_eq!(reflect(4, 4), 3);
        assert_eq!(reflect(5, 4), 2);
        assert_eq!(reflect(-9, 2), 0);
    }

    #[test]
    fn zero_radius_is_identity() {
        let inst = blur_instance(8, 0, 1.0, 0.0, 3).unwrap();
        let truth = inst.truth.clone().unwrap();
        assert_eq!(inst.a.apply(&truth), truth);
        assert_eq!(inst.b, truth);
    }

    #[test]
    fn constant_image_preserved() {
        let op = BlurOperator::new(10, gaussian_kernel(4, 4.0));
        let out = op.apply(&vec![0.7; 100]);
        assert!(out.iter().all(|v| (v - 0.7).abs() < 1e-14));
    }

    #[test]
    fn adjoint_consistent() {
        let op = BlurOperator::new(7, gaussian_kernel(3, 1.5));
        let mut rng = SeededRng::new(2);
        for _ in 0..10 {
            let x = rng.gaussian_vec(49);
            let y = rng.gaussian_vec(49);
            let lhs = linalg::dot(&op.apply(&x), &y);
            let rhs = linalg::dot(&x, &op.apply_adjoint(&y));
            assert!((lhs - rhs).abs() <= 1e-10);
        }
    }

    #[test]
    fn oversized_side_refused() {
        let err = blur_instance(65, 4, 4.0, 1e-3, 0).unwrap_err();
        assert!(err.to_string().contains("desk-scale"));
    }
}
