//! Phase singularities, oscillation periods and local phase coherence.

use std::f64::consts::PI;

use num_complex::Complex64 as C;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Fft2, Field2D, FieldState};

/// A plaquette whose discrete phase circulation is `±2π`, located at its centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Core {
    pub x: f64,
    pub y: f64,
    pub winding: i8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpiralDiagnostics {
    pub t: f64,
    pub cores: Vec<Core>,
    pub period_estimate: Option<f64>,
    pub coherence: Field2D,
}

/// `φ = atan2(v − v_ref, u − u_ref)` on the grid.
pub fn phase_field(state: &FieldState, u_ref: f64, v_ref: f64) -> Vec<f64> {
    state
        .u
        .data
        .par_iter()
        .zip(&state.v.data)
        // `+ 0.0` folds signed zeros so ties resolve the same way everywhere.
        .map(|(u, v)| (v.re - v_ref + 0.0).atan2(u.re - u_ref + 0.0))
        .collect()
}

fn wrap(d: f64) -> f64 {
    let mut d = d % (2.0 * PI);
    if d > PI {
        d -= 2.0 * PI;
    } else if d <= -PI {
        d += 2.0 * PI;
    }
    d
}

/// Cores of the phase field, counter-clockwise circulation positive. Edge
/// increments are wrapped once per edge, so neighbouring plaquettes share
/// them exactly and windings add up even at `±π` ties. The periodic seam is
/// skipped so every plaquette lies inside the square.
pub fn detect_spiral(state: &FieldState, u_ref: f64, v_ref: f64) -> Vec<Core> {
    let n = state.n();
    let phi = phase_field(state, u_ref, v_ref);
    let (l, h) = (state.half_width(), state.u.spacing());
    let dx = |ix: usize, iy: usize| wrap(phi[iy * n + ix + 1] - phi[iy * n + ix]);
    let dy = |ix: usize, iy: usize| wrap(phi[(iy + 1) * n + ix] - phi[iy * n + ix]);
    (0..n - 1)
        .into_par_iter()
        .flat_map_iter(|iy| {
            (0..n - 1).filter_map(move |ix| {
                let circ = dx(ix, iy) + dy(ix + 1, iy) - dx(ix, iy + 1) - dy(ix, iy);
                let w = (circ / (2.0 * PI)).round() as i8;
                (w != 0).then(|| Core {
                    x: -l + (ix as f64 + 0.5) * h,
                    y: -l + (iy as f64 + 0.5) * h,
                    winding: w,
                })
            })
        })
        .collect()
}

/// Cores within `radius` of the origin.
pub fn mask_cores(cores: &[Core], radius: f64) -> Vec<Core> {
    cores.iter().copied().filter(|c| c.x.hypot(c.y) <= radius).collect()
}

/// Times of upward crossings of `level`, linearly interpolated.
pub fn upward_crossings(times: &[f64], values: &[f64], level: f64) -> Vec<f64> {
    times
        .windows(2)
        .zip(values.windows(2))
        .filter_map(|(t, v)| {
            let (a, b) = (v[0] - level, v[1] - level);
            (a < 0.0 && b >= 0.0).then(|| t[0] + (t[1] - t[0]) * a / (a - b))
        })
        .collect()
}

/// Mean spacing of the upward crossings; `None` with fewer than two.
pub fn period_from_series(times: &[f64], values: &[f64], level: f64) -> Option<f64> {
    let x = upward_crossings(times, values, level);
    (x.len() >= 2).then(|| (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64)
}

/// `|⟨e^{iφ}⟩|` over the disk of the given radius around each point,
/// periodically wrapped; values lie in `[0, 1]`.
pub fn local_coherence(state: &FieldState, u_ref: f64, v_ref: f64, radius: f64) -> Result<Field2D> {
    let n = state.n();
    let h = state.u.spacing();
    if !(radius >= 2.0 * h) {
        return Err(Error::Param(format!("coherence radius {radius} below two grid cells ({})", 2.0 * h)));
    }
    let phi = phase_field(state, u_ref, v_ref);
    let mut z: Vec<C> = phi.iter().map(|&p| C::from_polar(1.0, p)).collect();
    let mut disk = vec![C::new(0.0, 0.0); n * n];
    let mut count = 0.0;
    let reach = (radius / h).floor() as isize;
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            if ((dx * dx + dy * dy) as f64).sqrt() * h <= radius {
                let ix = dx.rem_euclid(n as isize) as usize;
                let iy = dy.rem_euclid(n as isize) as usize;
                disk[iy * n + ix] += 1.0;
                count += 1.0;
            }
        }
    }
    let fft = Fft2::new(n);
    fft.forward(&mut z);
    fft.forward(&mut disk);
    z.par_iter_mut().zip(&disk).for_each(|(a, b)| *a *= b / count);
    fft.inverse(&mut z);
    let mut out = Field2D::zeros(n, state.half_width())?;
    out.data
        .par_iter_mut()
        .zip(&z)
        .for_each(|(o, m)| *o = C::new(m.norm().min(1.0), 0.0));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn state_from(n: usize, l: f64, f: impl Fn(f64, f64) -> C + Sync) -> FieldState {
        let z = Field2D::from_fn(n, l, f).unwrap();
        let u = z.map(|w| C::new(w.re, 0.0));
        let v = z.map(|w| C::new(w.im, 0.0));
        FieldState::new(0.0, u, v).unwrap()
    }

    #[test]
    fn single_vortex() {
        let (ur, vr) = (0.3, -0.2);
        let s = state_from(64, 10.0, |x, y| C::new(ur + x, vr + y) * (-(x * x + y * y) / 50.0).exp());
        let cores = detect_spiral(&s, ur, vr);
        assert_eq!(cores.len(), 1, "{cores:?}");
        let c = cores[0];
        assert_eq!(c.winding, 1);
        assert!(c.x.hypot(c.y) <= s.u.spacing());
        let anti = state_from(64, 10.0, |x, y| C::new(ur + x, vr - y));
        let cores = detect_spiral(&anti, ur, vr);
        assert_eq!(cores.len(), 1, "{cores:?}");
        assert_eq!(cores[0].winding, -1);
    }

    #[test]
    fn off_grid_vortex_pair() {
        let s = state_from(64, 10.0, |x, y| C::new(x - 3.1, y - 1.3) * C::new(x + 2.9, -(y + 4.1)));
        let mut cores = detect_spiral(&s, 0.0, 0.0);
        cores.sort_by(|a, b| a.x.total_cmp(&b.x));
        assert_eq!(cores.len(), 2);
        assert_eq!((cores[0].winding, cores[1].winding), (-1, 1));
        assert!((cores[1].x - 3.1).abs() < 0.32 && (cores[1].y - 1.3).abs() < 0.32);
        assert_eq!(mask_cores(&cores, 3.0).len(), 0);
    }

    #[test]
    fn uniform_state_has_no_cores() {
        let s = state_from(32, 5.0, |_, _| C::new(0.7, -0.1));
        assert!(detect_spiral(&s, 0.0, 0.0).is_empty());
        let c = local_coherence(&s, 0.0, 0.0, 1.0).unwrap();
        assert!(c.data.iter().all(|z| (z.re - 1.0).abs() < 1e-12));
    }

    #[test]
    fn period_of_sine() {
        let t: Vec<f64> = (0..2000).map(|k| k as f64 * 0.01).collect();
        let v: Vec<f64> = t.iter().map(|t| (2.0 * PI * t / 3.7 + 0.4).sin()).collect();
        let p = period_from_series(&t, &v, 0.0).unwrap();
        assert!((p - 3.7).abs() < 1e-4);
        assert_eq!(period_from_series(&t[..200], &v[..200], 0.0), None);
    }

    #[test]
    fn coherence_of_locked_rotation() {
        let s = state_from(128, 20.0, |x, y| C::new(x, y) * (x * x + y * y + 1.0).sqrt().recip() * 0.5 + 0.1);
        let c = local_coherence(&s, 0.1, 0.0, 1.0).unwrap();
        for iy in 0..128 {
            for ix in 0..128 {
                let (x, y) = (c.coord(ix), c.coord(iy));
                let r = x.hypot(y);
                // Away from the core and from the periodic seam.
                if r > 6.0 && x.abs() < 18.0 && y.abs() < 18.0 {
                    assert!(c.get(ix, iy).re >= 0.9, "{x} {y}");
                }
            }
        }
        assert!(c.get(64, 64).re < 0.5);
    }

    #[test]
    fn coherence_of_random_phases() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 128;
        let vals: Vec<(f64, f64)> = (0..n * n)
            .map(|_| {
                let p: f64 = rng.gen_range(-PI..PI);
                (p.cos(), p.sin())
            })
            .collect();
        let u = Field2D::from_real(n, 16.0, &vals.iter().map(|v| v.0).collect::<Vec<_>>()).unwrap();
        let v = Field2D::from_real(n, 16.0, &vals.iter().map(|v| v.1).collect::<Vec<_>>()).unwrap();
        let s = FieldState::new(0.0, u, v).unwrap();
        // Radius of 4 cells: about 50 phasors per disk.
        let c = local_coherence(&s, 0.0, 0.0, 4.0 * s.u.spacing()).unwrap();
        let mean = c.data.iter().map(|z| z.re).sum::<f64>() / (n * n) as f64;
        assert!(mean <= 0.2, "{mean}");
        assert!(c.data.iter().all(|z| (0.0..=1.0).contains(&z.re)));
        assert!(local_coherence(&s, 0.0, 0.0, s.u.spacing()).is_err());
    }
}
