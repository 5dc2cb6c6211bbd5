//! Radially symmetric convolution-kernel symbols.
//!
//! A kernel is carried only by its Fourier symbol `K̂(ρ)`, ρ = |ξ| ≥ 0. The
//! convolution `K ∗ u` is defined as the Fourier multiplier with `K̂`, using
//! the unitary convention `F[f](ξ) = (1/2π) ∫ f(x) e^{-iξ·x} dx` on ℝ².
//!
//! Admissible symbols are even, uniformly bounded, and have a double zero at
//! the origin, `K̂(ρ) = -αρ² + O(ρ⁴)` with `α > 0`. Such symbols factor as
//! `K̂ = M · L_NF` with `L_NF(ρ) = -ρ²/(1+ρ²)` and `M` bounded away from zero.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this radius `M(ρ)` is taken from its series rather than the quotient.
const SERIES_CUTOFF: f64 = 1e-4;

/// Fit window for the Taylor coefficient.
const FIT_LO: f64 = 1e-4;
const FIT_HI: f64 = 1e-2;
const FIT_SAMPLES: usize = 41;

#[derive(Debug, Clone, PartialEq)]
pub enum SymbolFamily {
    /// `-Dρ²/(1 + dρ²)`.
    RationalDiffusive { diffusion: f64, range: f64 },
    /// Samples joined by a monotone cubic.
    Tabulated(Table),
    /// `-αρ²`, the ε → 0 limit of a rescaled symbol.
    LaplacianLimit { alpha: f64 },
    /// `P ↦ K̂_base(εP)/ε²`.
    Rescaled { base: Box<SymbolFamily>, eps: f64 },
    /// Identically zero.
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    rho: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl Table {
    pub fn new(rho: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if rho.len() != values.len() {
            return Err(Error::Shape {
                expected: rho.len(),
                got: values.len(),
            });
        }
        if rho.len() < 2 {
            return Err(Error::Size("tabulated symbol needs at least two samples".into()));
        }
        if rho[0] < 0.0 || rho.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Param(
                "tabulated rho samples must be nonnegative and strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Param("tabulated symbol has non-finite values".into()));
        }
        let slopes = monotone_slopes(&rho, &values);
        Ok(Table { rho, values, slopes })
    }

    /// Reads a two-column `rho,value` CSV with a header line.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        let mut rho = Vec::new();
        let mut values = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| csv_error(path, e))?;
            if record.len() != 2 {
                return Err(Error::Format(format!(
                    "{}: expected 2 columns, found {}",
                    path.display(),
                    record.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Format(format!("{}: bad number {s:?}", path.display())))
            };
            rho.push(parse(&record[0])?);
            values.push(parse(&record[1])?);
        }
        Table::new(rho, values)
    }

    pub fn rho_max(&self) -> f64 {
        *self.rho.last().unwrap()
    }

    fn eval(&self, x: f64) -> Result<f64> {
        let (lo, hi) = (self.rho[0], self.rho_max());
        if !(lo..=hi).contains(&x) {
            return Err(Error::Range {
                what: "rho",
                value: x,
                lo,
                hi,
            });
        }
        let k = match self.rho.partition_point(|&r| r <= x) {
            0 => 0,
            i if i >= self.rho.len() => self.rho.len() - 2,
            i => i - 1,
        };
        let h = self.rho[k + 1] - self.rho[k];
        let t = (x - self.rho[k]) / h;
        let (t2, t3) = (t * t, t * t * t);
        Ok((2.0 * t3 - 3.0 * t2 + 1.0) * self.values[k]
            + (t3 - 2.0 * t2 + t) * h * self.slopes[k]
            + (-2.0 * t3 + 3.0 * t2) * self.values[k + 1]
            + (t3 - t2) * h * self.slopes[k + 1])
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Format(format!("{}: {e}", path.display()))
}

/// Fritsch–Butland slopes; a sample at ρ = 0 gets slope 0 (the symbol is even).
fn monotone_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    let mut m = vec![0.0; n];
    for k in 1..n - 1 {
        let (d0, d1) = (delta[k - 1], delta[k]);
        if d0 * d1 > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            m[k] = (w1 + w2) / (w1 / d0 + w2 / d1);
        }
    }
    m[0] = if x[0] == 0.0 { 0.0 } else { delta[0] };
    m[n - 1] = delta[n - 2];
    m
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSymbol {
    family: SymbolFamily,
    alpha: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub alpha_estimate: f64,
    pub zero_order_ok: bool,
    pub bounded_ok: bool,
    pub symbol_sup: f64,
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.zero_order_ok && self.bounded_ok
    }
}

impl KernelSymbol {
    pub fn rational(diffusion: f64, range: f64) -> Result<Self> {
        if !(diffusion > 0.0 && range > 0.0) || !diffusion.is_finite() || !range.is_finite() {
            return Err(Error::Param(format!(
                "rational symbol needs D > 0 and d > 0 (got D = {diffusion}, d = {range})"
            )));
        }
        Ok(Self::from_family(SymbolFamily::RationalDiffusive { diffusion, range }))
    }

    pub fn tabulated(table: Table) -> Self {
        Self::from_family(SymbolFamily::Tabulated(table))
    }

    pub fn laplacian(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::Param(format!("Laplacian prefactor must be positive, got {alpha}")));
        }
        Ok(KernelSymbol {
            family: SymbolFamily::LaplacianLimit { alpha },
            alpha: Some(alpha),
        })
    }

    /// The zero symbol. Useful as a degenerate operator; it never validates.
    pub fn zero() -> Self {
        Self::from_family(SymbolFamily::Zero)
    }

    fn from_family(family: SymbolFamily) -> Self {
        KernelSymbol { family, alpha: None }
    }

    pub fn family(&self) -> &SymbolFamily {
        &self.family
    }

    /// Cached Taylor coefficient; `None` until validated.
    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn is_validated(&self) -> bool {
        self.alpha.is_some()
    }

    pub fn is_laplacian_limit(&self) -> bool {
        matches!(self.family, SymbolFamily::LaplacianLimit { .. })
    }

    /// `K̂(ρ)`.
    pub fn eval(&self, rho: f64) -> Result<f64> {
        if !(rho >= 0.0) {
            return Err(Error::Range {
                what: "rho",
                value: rho,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        eval_family(&self.family, rho)
    }

    /// Largest ρ at which the symbol can be evaluated.
    pub fn rho_limit(&self) -> f64 {
        family_rho_limit(&self.family)
    }

    pub fn validate_hypotheses(&self, rho_max: f64, tol: f64) -> ValidationReport {
        let mut notes = Vec::new();

        let origin = self.eval(0.0);
        let fit = fit_taylor(&self.family);
        let alpha_estimate = fit.as_ref().map(|c| -c[0]).unwrap_or(f64::NAN);

        let mut zero_order_ok = match origin {
            Ok(v) if v.abs() <= 1e-14 => true,
            Ok(v) => {
                notes.push(format!("symbol does not vanish at the origin (K(0) = {v:e})"));
                false
            }
            Err(e) => {
                notes.push(format!("symbol not defined at the origin: {e}"));
                false
            }
        };
        if zero_order_ok {
            if !(alpha_estimate > 0.0) {
                notes.push(format!(
                    "Taylor coefficient alpha = {alpha_estimate:e} is not positive"
                ));
                zero_order_ok = false;
            } else {
                for rho in fit_grid() {
                    let k = eval_family(&self.family, rho).unwrap_or(f64::NAN);
                    let excess = (k + alpha_estimate * rho * rho).abs();
                    if !(excess <= tol * rho.powi(4)) {
                        notes.push(format!(
                            "quartic remainder bound fails at rho = {rho:e}: |K + alpha rho^2| = {excess:e}"
                        ));
                        zero_order_ok = false;
                        break;
                    }
                }
            }
        }

        let mut hi = rho_max.max(0.0);
        let limit = self.rho_limit();
        if hi > limit {
            notes.push(format!(
                "bound check clipped to tabulated range [0, {limit}] (requested {rho_max})"
            ));
            hi = limit;
        }
        const SAMPLES: usize = 4001;
        let mut sup: f64 = 0.0;
        let mut finite = true;
        for i in 0..SAMPLES {
            let rho = hi * i as f64 / (SAMPLES - 1) as f64;
            match self.eval(rho) {
                Ok(v) if v.is_finite() => sup = sup.max(v.abs()),
                _ => finite = false,
            }
        }
        let bounded_ok = finite && hi > 0.0;
        if hi > 0.0 {
            let end = self.eval(hi).unwrap_or(f64::NAN);
            let mid = self.eval(0.5 * hi).unwrap_or(f64::NAN);
            if !((end - mid).abs() <= 0.05 * end.abs().max(f64::MIN_POSITIVE)) {
                notes.push(format!(
                    "no horizontal asymptote detected on [0, {hi}]: K({hi}) = {end:e}, K({}) = {mid:e}",
                    0.5 * hi
                ));
            }
        }
        let symbol_sup = match self.family {
            SymbolFamily::RationalDiffusive { diffusion, range } => diffusion / range,
            _ => sup,
        };

        ValidationReport {
            alpha_estimate,
            zero_order_ok,
            bounded_ok,
            symbol_sup,
            notes,
        }
    }

    /// Validates and caches `α`; fails with a state error listing the notes.
    pub fn validated(mut self, rho_max: f64, tol: f64) -> Result<Self> {
        let report = self.validate_hypotheses(rho_max, tol);
        if !report.ok() {
            return Err(Error::State(format!(
                "kernel symbol fails hypotheses: {}",
                report.notes.join("; ")
            )));
        }
        self.alpha = Some(match self.family {
            SymbolFamily::RationalDiffusive { diffusion, .. } => diffusion,
            SymbolFamily::LaplacianLimit { alpha } => alpha,
            _ => report.alpha_estimate,
        });
        Ok(self)
    }

    /// Validation with the default window: `[0, 100]` (or the table range) and
    /// a quartic remainder constant of `10⁴`.
    pub fn validate(self) -> Result<Self> {
        self.validated(100.0, 1e4)
    }

    /// `(M(ρ), L_NF(ρ))` with `M · L_NF = K̂`.
    pub fn decompose(&self, rho: f64) -> Result<(f64, f64)> {
        let alpha = self
            .alpha
            .ok_or_else(|| Error::State("decompose requires a validated symbol".into()))?;
        let k = self.eval(rho)?;
        let lnf = -rho * rho / (1.0 + rho * rho);
        let m = match &self.family {
            SymbolFamily::RationalDiffusive { diffusion, range } => {
                diffusion * (1.0 + rho * rho) / (1.0 + range * rho * rho)
            }
            SymbolFamily::LaplacianLimit { alpha } => alpha * (1.0 + rho * rho),
            _ if rho < SERIES_CUTOFF => alpha,
            _ => k / lnf,
        };
        Ok((m, lnf))
    }

    /// `P ↦ K̂(εP)/ε²`; `ε = 0` gives the Laplacian limit `-αP²`.
    pub fn rescale(&self, eps: f64) -> KernelSymbol {
        let eps = eps.abs();
        if eps == 0.0 {
            let alpha = self.alpha.unwrap_or_else(|| {
                fit_taylor(&self.family).map(|c| -c[0]).unwrap_or(0.0)
            });
            return KernelSymbol {
                family: SymbolFamily::LaplacianLimit { alpha },
                alpha: Some(alpha),
            };
        }
        let family = match &self.family {
            SymbolFamily::RationalDiffusive { diffusion, range } => SymbolFamily::RationalDiffusive {
                diffusion: *diffusion,
                range: range * eps * eps,
            },
            SymbolFamily::LaplacianLimit { alpha } => SymbolFamily::LaplacianLimit { alpha: *alpha },
            SymbolFamily::Zero => SymbolFamily::Zero,
            SymbolFamily::Rescaled { base, eps: inner } => SymbolFamily::Rescaled {
                base: base.clone(),
                eps: inner * eps,
            },
            SymbolFamily::Tabulated(_) => SymbolFamily::Rescaled {
                base: Box::new(self.family.clone()),
                eps,
            },
        };
        KernelSymbol {
            family,
            alpha: self.alpha,
        }
    }
}

fn eval_family(family: &SymbolFamily, rho: f64) -> Result<f64> {
    match family {
        SymbolFamily::RationalDiffusive { diffusion, range } => {
            let r2 = rho * rho;
            Ok(-diffusion * r2 / (1.0 + range * r2))
        }
        SymbolFamily::Tabulated(t) => t.eval(rho),
        SymbolFamily::LaplacianLimit { alpha } => Ok(-alpha * rho * rho),
        SymbolFamily::Rescaled { base, eps } => Ok(eval_family(base, eps * rho)? / (eps * eps)),
        SymbolFamily::Zero => Ok(0.0),
    }
}

fn family_rho_limit(family: &SymbolFamily) -> f64 {
    match family {
        SymbolFamily::Tabulated(t) => t.rho_max(),
        SymbolFamily::Rescaled { base, eps } => family_rho_limit(base) / eps,
        _ => f64::INFINITY,
    }
}

fn fit_grid() -> impl Iterator<Item = f64> {
    let ratio = (FIT_HI / FIT_LO).ln();
    (0..FIT_SAMPLES).map(move |k| FIT_LO * (ratio * k as f64 / (FIT_SAMPLES - 1) as f64).exp())
}

/// Least-squares fit of `K̂(ρ)/ρ² ≈ c₀ + c₁ρ² + c₂ρ⁴` on the fit window.
fn fit_taylor(family: &SymbolFamily) -> Option<[f64; 3]> {
    // Work in s = (ρ/FIT_HI)² ∈ (0, 1] to keep the normal equations tame.
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for rho in fit_grid() {
        let y = eval_family(family, rho).ok()? / (rho * rho);
        if !y.is_finite() {
            return None;
        }
        let s = (rho / FIT_HI).powi(2);
        let row = [1.0, s, s * s];
        for i in 0..3 {
            atb[i] += row[i] * y;
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let c = solve3(ata, atb)?;
    let scale = FIT_HI * FIT_HI;
    Some([c[0], c[1] / scale, c[2] / (scale * scale)])
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Symbol specification as it appears in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum KernelSpec {
    Rational {
        #[serde(rename = "D")]
        diffusion: f64,
        #[serde(rename = "d")]
        range: f64,
    },
    Tabulated {
        path: std::path::PathBuf,
    },
}

impl KernelSpec {
    /// Builds the symbol; relative table paths resolve against `base_dir`.
    pub fn build(&self, base_dir: Option<&Path>) -> Result<KernelSymbol> {
        match self {
            KernelSpec::Rational { diffusion, range } => KernelSymbol::rational(*diffusion, *range),
            KernelSpec::Tabulated { path } => {
                let resolved = match base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                Ok(KernelSymbol::tabulated(Table::from_csv(resolved)?))
            }
        }
    }
}
