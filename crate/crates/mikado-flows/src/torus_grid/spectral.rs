//! Fourier-side representation of grid fields and the FFT plumbing.
//!
//! Coefficients are stored in the same row-major layout as node values,
//! normalized so that the zero mode equals the grid mean:
//!
//! ```text
//!     c_k = n^{−d} Σ_i f(i/n)·e^{−2πik·i/n},    f(i/n) = Σ_k c_k·e^{2πik·i/n}.
//! ```
//!
//! Wave numbers per axis are the standard signed FFT ordering
//! k(i) = i for i ≤ n/2, i − n otherwise, so the Nyquist index n/2 reports
//! the wave +n/2. Odd spectral derivative factors send the Nyquist mode to
//! zero (the only choice that keeps derivatives of real fields real); even
//! powers use it symmetrically.

use super::{neumaier_sum, GridSpec, ScalarField};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = PLANNER
        .get_or_init(|| Mutex::new(FftPlanner::new()))
        .lock()
        .expect("FFT planner lock poisoned");
    if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    }
}

/// Signed wave number of index `i` on an n-point axis (Nyquist → +n/2).
pub(crate) fn wave(n: usize, i: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// In-place d-dimensional FFT, axis by axis (unnormalized).
fn fft_nd(grid: GridSpec, data: &mut [Complex64], inverse: bool) {
    let n = grid.points_per_axis();
    let fft = plan(n, inverse);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    let mut line = vec![Complex64::default(); n];
    for axis in 0..grid.dim() {
        let stride = grid.stride(axis);
        if stride == 1 {
            // the contiguous axis: every chunk of n elements is one line
            fft.process_with_scratch(data, &mut scratch);
            continue;
        }
        let block = stride * n;
        let blocks = data.len() / block;
        for b in 0..blocks {
            for inner in 0..stride {
                let base = b * block + inner;
                for (j, l) in line.iter_mut().enumerate() {
                    *l = data[base + j * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (j, l) in line.iter().enumerate() {
                    data[base + j * stride] = *l;
                }
            }
        }
    }
}

/// Visit every mode in flat order with its signed wave vector.
pub(crate) fn for_each_mode(grid: GridSpec, mut f: impl FnMut(usize, &[i64])) {
    let d = grid.dim();
    let n = grid.points_per_axis();
    let mut idx = [0usize; 4];
    let mut waves = [0i64; 4];
    let len = grid.node_count();
    for flat in 0..len {
        f(flat, &waves[..d]);
        for a in (0..d).rev() {
            idx[a] += 1;
            if idx[a] == n {
                idx[a] = 0;
                waves[a] = 0;
            } else {
                waves[a] = wave(n, idx[a]);
                break;
            }
        }
    }
}

/// Fourier coefficients of a scalar field.
#[derive(Clone)]
pub struct Spectrum {
    grid: GridSpec,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    /// Forward transform of raw node values.
    pub(crate) fn of_values(grid: GridSpec, values: &[f64]) -> Spectrum {
        let mut data: Vec<Complex64> =
            values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_nd(grid, &mut data, false);
        let scale = 1.0 / grid.node_count() as f64;
        for c in data.iter_mut() {
            *c *= scale;
        }
        Spectrum { grid, coeffs: data }
    }

    /// Grid of the underlying field.
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// Coefficients in row-major mode order.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Coefficient of the mode with the given signed wave vector.
    pub fn mode(&self, waves: &[i64]) -> Complex64 {
        let n = self.grid.points_per_axis() as i64;
        let mut flat = 0usize;
        for &k in waves {
            debug_assert!(-n / 2 <= k && k <= n / 2);
            let i = k.rem_euclid(n) as usize;
            flat = flat * n as usize + i;
        }
        self.coeffs[flat]
    }

    /// Inverse transform; imaginary parts (rounding noise for Hermitian
    /// spectra) are discarded.
    pub fn to_field(&self) -> ScalarField {
        let mut data = self.coeffs.clone();
        fft_nd(self.grid, &mut data, true);
        let values: Vec<f64> = data.iter().map(|c| c.re).collect();
        ScalarField::from_values_unchecked(self.grid, values)
    }

    /// Apply a diagonal multiplier m(k).
    pub fn apply(&self, m: impl Fn(&[i64]) -> Complex64) -> Spectrum {
        let mut coeffs = self.coeffs.clone();
        for_each_mode(self.grid, |flat, waves| {
            coeffs[flat] *= m(waves);
        });
        Spectrum {
            grid: self.grid,
            coeffs,
        }
    }

    /// Multiplier of the mixed derivative ∂^α: Π_a (2πi·k_a)^{α_a}, with
    /// odd powers sending the Nyquist wave to zero.
    pub fn derivative(&self, alpha: &[usize]) -> Spectrum {
        debug_assert_eq!(alpha.len(), self.grid.dim());
        let ny = (self.grid.points_per_axis() / 2) as i64;
        self.apply(|k| {
            let mut m = Complex64::new(1.0, 0.0);
            for (a, &ord) in alpha.iter().enumerate() {
                if ord == 0 {
                    continue;
                }
                if ord % 2 == 1 && k[a] == ny {
                    return Complex64::new(0.0, 0.0);
                }
                m *= Complex64::new(0.0, 2.0 * PI * k[a] as f64).powu(ord as u32);
            }
            m
        })
    }

    /// Largest |k_a| per axis among modes whose magnitude exceeds
    /// `floor_rel` times the peak coefficient magnitude. An axis the field
    /// is constant along reports 0; the zero spectrum reports all zeros.
    pub fn per_axis_bandwidth(&self, floor_rel: f64) -> Vec<i64> {
        let d = self.grid.dim();
        let mut bw = vec![0i64; d];
        let peak = self
            .coeffs
            .iter()
            .map(|c| c.norm_sqr())
            .fold(0.0f64, f64::max);
        if peak == 0.0 {
            return bw;
        }
        let floor = floor_rel * floor_rel * peak;
        for_each_mode(self.grid, |flat, waves| {
            if self.coeffs[flat].norm_sqr() > floor {
                for (b, &k) in bw.iter_mut().zip(waves) {
                    *b = (*b).max(k.abs());
                }
            }
        });
        bw
    }

    /// Fraction of the spectral energy Σ|c_k|² in modes with |k|_∞ > n/4.
    pub fn tail_fraction(&self) -> f64 {
        let cut = (self.grid.points_per_axis() / 4) as i64;
        let mut tail = Vec::new();
        let mut total = Vec::new();
        for_each_mode(self.grid, |flat, waves| {
            let e = self.coeffs[flat].norm_sqr();
            total.push(e);
            if waves.iter().any(|&k| k.abs() > cut) {
                tail.push(e);
            }
        });
        let total = neumaier_sum(total);
        if total == 0.0 {
            return 0.0;
        }
        neumaier_sum(tail) / total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus_grid::sample;
    use std::f64::consts::PI;

    #[test]
    fn forward_transform_isolates_single_mode() {
        let g = GridSpec::new(2, 16).unwrap();
        let f = sample(g, |x| (2.0 * PI * (3.0 * x[0] + x[1])).cos()).unwrap();
        let s = f.spectrum();
        // cos splits into ±(3,1) with weight 1/2 each.
        let c = s.mode(&[3, 1]);
        assert!(
            (c.re - 0.5).abs() < 1e-13 && c.im.abs() < 1e-13,
            "mode (3,1) should be 1/2, got {c}"
        );
        let c = s.mode(&[-3, -1]);
        assert!((c.re - 0.5).abs() < 1e-13 && c.im.abs() < 1e-13);
        assert!(s.mode(&[0, 0]).norm() < 1e-14, "zero mode must vanish");
    }

    #[test]
    fn round_trip_is_identity() {
        let g = GridSpec::new(3, 8).unwrap();
        let f = sample(g, |x| {
            (2.0 * PI * x[0]).sin() + 0.3 * (4.0 * PI * (x[1] + x[2])).cos() + 0.7
        })
        .unwrap();
        let back = f.spectrum().to_field();
        for (a, b) in f.values().iter().zip(back.values()) {
            assert!((a - b).abs() < 1e-13, "round trip: {a} vs {b}");
        }
    }

    #[test]
    fn spectral_derivative_of_sine_is_scaled_cosine() {
        let g = GridSpec::new(2, 32).unwrap();
        let f = sample(g, |x| (2.0 * PI * x[0]).sin()).unwrap();
        let df = f.partial_deriv(0);
        let expect = sample(g, |x| 2.0 * PI * (2.0 * PI * x[0]).cos()).unwrap();
        for (a, b) in df.values().iter().zip(expect.values()) {
            assert!((a - b).abs() < 1e-11, "∂₁ sin(2πx₁) = 2π cos(2πx₁): {a} vs {b}");
        }
    }

    #[test]
    fn derivative_along_transverse_axis_vanishes() {
        let g = GridSpec::new(2, 16).unwrap();
        let f = sample(g, |x| (2.0 * PI * x[0]).sin()).unwrap();
        assert!(f.partial_deriv(1).max_abs() < 1e-12);
    }

    #[test]
    fn nyquist_mode_survives_even_but_not_odd_derivatives() {
        let g = GridSpec::new(2, 8).unwrap();
        // cos(2π·4·x₁) is exactly the Nyquist mode on n = 8.
        let f = sample(g, |x| (8.0 * PI * x[0]).cos()).unwrap();
        assert!(
            f.partial_deriv(0).max_abs() < 1e-12,
            "odd derivative of the Nyquist mode must be dropped"
        );
        let lap = f.multi_deriv(&[2, 0]);
        assert!(
            lap.max_abs() > 1.0,
            "even derivative keeps the Nyquist mode (|k|² factor)"
        );
    }

    #[test]
    fn tail_fraction_detects_unresolved_content() {
        let g = GridSpec::new(2, 16).unwrap();
        let smooth = sample(g, |x| (2.0 * PI * x[0]).cos()).unwrap();
        assert!(smooth.spectrum().tail_fraction() < 1e-28);
        let fast = sample(g, |x| (2.0 * PI * 5.0 * x[0]).cos()).unwrap();
        assert!(
            fast.spectrum().tail_fraction() > 0.99,
            "a |k| = 5 > n/4 = 4 mode is pure tail"
        );
    }
}
