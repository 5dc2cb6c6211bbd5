//! Angular Fourier decomposition of grid fields and weighted norms.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{apply_derivative, Fft2, Field2D, SpectralInterpolator};

/// Profiles `f_n(r)` for `|n| ≤ n_max` on a shared radial grid.
#[derive(Debug, Clone)]
pub struct AngularDecomposition {
    n_max: u32,
    radial_grid: Vec<f64>,
    profiles: Vec<Vec<Complex64>>,
}

impl AngularDecomposition {
    /// Builds a decomposition from explicit profiles, ordered `n = -n_max..=n_max`.
    pub fn new(n_max: u32, radial_grid: Vec<f64>, profiles: Vec<Vec<Complex64>>) -> Result<Self> {
        check_radial_grid(&radial_grid, f64::INFINITY)?;
        let count = 2 * n_max as usize + 1;
        if profiles.len() != count {
            return Err(Error::Shape {
                expected: count,
                got: profiles.len(),
            });
        }
        for p in &profiles {
            if p.len() != radial_grid.len() {
                return Err(Error::Shape {
                    expected: radial_grid.len(),
                    got: p.len(),
                });
            }
        }
        Ok(Self {
            n_max,
            radial_grid,
            profiles,
        })
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn radial_grid(&self) -> &[f64] {
        &self.radial_grid
    }

    /// `f_n` on the radial grid, if `|n| ≤ n_max`.
    pub fn profile(&self, n: i32) -> Option<&[Complex64]> {
        if n.unsigned_abs() > self.n_max {
            return None;
        }
        Some(&self.profiles[(n + self.n_max as i32) as usize])
    }

    /// `Σ f_n(r) e^{inθ}` with linear interpolation in `r`.
    pub fn reconstruct(&self, r: f64, theta: f64) -> Result<Complex64> {
        let g = &self.radial_grid;
        let (lo, hi) = (g[0], g[g.len() - 1]);
        if !(lo..=hi).contains(&r) {
            return Err(Error::Range {
                what: "r",
                value: r,
                lo,
                hi,
            });
        }
        let i = match g.partition_point(|&x| x <= r) {
            0 => 0,
            k if k >= g.len() => g.len().saturating_sub(2),
            k => k - 1,
        };
        let (j, t) = if g.len() == 1 {
            (0, 0.0)
        } else {
            (i + 1, (r - g[i]) / (g[i + 1] - g[i]))
        };
        let n_max = self.n_max as i32;
        Ok((-n_max..=n_max)
            .zip(&self.profiles)
            .map(|(n, p)| {
                let v = p[i] * (1.0 - t) + p[j] * t;
                v * Complex64::from_polar(1.0, n as f64 * theta)
            })
            .sum())
    }

    /// Writes `mode_<n>.csv` (columns `r,re,im`) per mode into `dir`.
    pub fn write_csv(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let n_max = self.n_max as i32;
        let mut out = Vec::new();
        for (n, p) in (-n_max..=n_max).zip(&self.profiles) {
            let path = dir.join(format!("mode_{n}.csv"));
            let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Format(e.to_string()))?;
            w.write_record(["r", "re", "im"]).map_err(|e| Error::Format(e.to_string()))?;
            for (r, v) in self.radial_grid.iter().zip(p) {
                w.serialize((r, v.re, v.im)).map_err(|e| Error::Format(e.to_string()))?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
            out.push(path);
        }
        Ok(out)
    }
}

fn check_radial_grid(grid: &[f64], limit: f64) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Size("empty radial grid".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Param("radial grid must be strictly increasing".into()));
    }
    for &r in grid {
        if !(r >= 0.0 && r < limit) {
            return Err(Error::Range {
                what: "radius",
                value: r,
                lo: 0.0,
                hi: limit,
            });
        }
    }
    Ok(())
}

/// Number of quadrature angles used for modes up to `n_max`.
pub fn angle_count(n_max: u32) -> usize {
    (8 * n_max as usize).max(64)
}

/// `f_n(r) = (1/2π) ∫ f(r e^{iθ}) e^{-inθ} dθ` by the trapezoid rule, with the
/// field sampled on circles through its trigonometric interpolant.
pub fn decompose_angular(field: &Field2D, n_max: u32, radial_grid: &[f64]) -> Result<AngularDecomposition> {
    check_radial_grid(radial_grid, field.half_width())?;
    let interp = SpectralInterpolator::new(&Fft2::new(field.n()), field);
    let m = angle_count(n_max);
    let n_max_i = n_max as i32;
    let per_radius: Vec<Vec<Complex64>> = radial_grid
        .par_iter()
        .map(|&r| {
            let samples: Vec<Complex64> = (0..m)
                .map(|j| {
                    let th = 2.0 * PI * j as f64 / m as f64;
                    interp.eval(r * th.cos(), r * th.sin())
                })
                .collect();
            (-n_max_i..=n_max_i)
                .map(|n| {
                    samples
                        .iter()
                        .enumerate()
                        .map(|(j, &f)| f * Complex64::from_polar(1.0, -2.0 * PI * (n as f64) * j as f64 / m as f64))
                        .sum::<Complex64>()
                        / m as f64
                })
                .collect()
        })
        .collect();
    let profiles = (0..per_radius.first().map_or(0, Vec::len))
        .map(|k| per_radius.iter().map(|row| row[k]).collect())
        .collect();
    AngularDecomposition::new(n_max, radial_grid.to_vec(), profiles)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NormKind {
    /// Weight `⟨x⟩^{γ+|α|}` on `D^α u`.
    Kondratiev,
    /// Weight `⟨x⟩^γ` on every derivative.
    WeightedSobolev,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedNormSpec {
    pub s: u32,
    pub gamma: f64,
    pub kind: NormKind,
}

/// `⟨x⟩ = (1 + |x|²)^{1/2}`.
pub fn japanese_bracket(x: f64, y: f64) -> f64 {
    (1.0 + x * x + y * y).sqrt()
}

/// `(Σ_{|α|≤s} ‖w_α D^α u‖²_{L²})^{1/2}` with spectral derivatives and
/// cell-area quadrature.
pub fn weighted_norm(field: &Field2D, spec: WeightedNormSpec) -> Result<f64> {
    if spec.s > 2 {
        return Err(Error::Param(format!("derivative order {} > 2", spec.s)));
    }
    let n = field.n();
    let l = field.half_width();
    let h = field.spacing();
    let fft = Fft2::new(n);
    let mut hat = field.data.clone();
    fft.forward(&mut hat);
    let mut total = 0.0;
    for order in 0..=spec.s {
        let exponent = match spec.kind {
            NormKind::Kondratiev => spec.gamma + order as f64,
            NormKind::WeightedSobolev => spec.gamma,
        };
        for a in 0..=order {
            let mut d = hat.clone();
            apply_derivative(n, l, &mut d, a, order - a);
            fft.inverse(&mut d);
            total += d
                .par_chunks(n)
                .enumerate()
                .map(|(iy, row)| {
                    let y = -l + iy as f64 * h;
                    row.iter()
                        .enumerate()
                        .map(|(ix, z)| {
                            let w = japanese_bracket(-l + ix as f64 * h, y).powf(exponent);
                            (w * z.norm()).powi(2)
                        })
                        .sum::<f64>()
                })
                .sum::<f64>();
        }
    }
    Ok((h * h * total).sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthBound {
    /// `max_{|x|=r_i} |f| r_i^{γ+1} / ‖f‖_{M^{2,2}_γ}`.
    pub c_estimates: Vec<f64>,
    pub monotone_tail: bool,
    /// The field's norm vanished; estimates are meaningless.
    pub degenerate: bool,
    pub norm: f64,
}

/// Pointwise decay diagnostic against the Kondratiev `M^{2,2}_γ` norm in two
/// dimensions.
pub fn growth_bound_check(field: &Field2D, gamma: f64, radii: &[f64]) -> Result<GrowthBound> {
    check_radial_grid(radii, field.half_width())?;
    let norm = weighted_norm(
        field,
        WeightedNormSpec {
            s: 2,
            gamma,
            kind: NormKind::Kondratiev,
        },
    )?;
    if norm == 0.0 {
        return Ok(GrowthBound {
            c_estimates: vec![0.0; radii.len()],
            monotone_tail: true,
            degenerate: true,
            norm,
        });
    }
    let interp = SpectralInterpolator::new(&Fft2::new(field.n()), field);
    let m = 128;
    let c_estimates: Vec<f64> = radii
        .par_iter()
        .map(|&r| {
            let sup = (0..m)
                .map(|j| {
                    let th = 2.0 * PI * j as f64 / m as f64;
                    interp.eval(r * th.cos(), r * th.sin()).norm()
                })
                .fold(0.0, f64::max);
            sup * r.powf(gamma + 1.0) / norm
        })
        .collect();
    let start = radii.len() / 3;
    let monotone_tail = c_estimates[start..]
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + 1e-3) + 1e-12);
    Ok(GrowthBound {
        c_estimates,
        monotone_tail,
        degenerate: false,
        norm,
    })
}
