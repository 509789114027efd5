//! Decay-rate fits, resonance scans and coupled/decoupled spectral comparisons.

use std::io::Write;

use serde::Serialize;

use crate::dynamics::Trajectory;
use crate::error::{AclError, Result};
use crate::fem::{assemble_decoupled, assemble_electrostatic, Mesh};
use crate::linalg::C64;
use crate::params::{wave_slowness, BeamConfig, LayerParams};
use crate::spectral::generator_spectrum;

/// Minimum samples a decay fit needs inside its window.
pub const MIN_FIT_SAMPLES: usize = 10;

/// Relative floor below which energy samples are ignored.
pub const ENERGY_FLOOR: f64 = 1e-14;

/// Exact-resonance flag tolerance.
pub const RESONANCE_TOL: f64 = 1e-6;
/// Exploratory near-resonance tolerance.
pub const NEAR_RESONANCE_TOL: f64 = 1e-2;

/// Least-squares fit `E(t) ~ C exp(-2 omega t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub omega: f64,
    pub log_c: f64,
    pub t0: f64,
    pub t1: f64,
    /// Root-mean-square residual of the log-linear fit.
    pub residual: f64,
    pub samples: usize,
}

/// The default window `[0.2 T, 0.9 T]` for a trajectory ending at `T`.
pub fn default_window(horizon: f64) -> (f64, f64) {
    (0.2 * horizon, 0.9 * horizon)
}

/// Fits `log E(t)` linearly over the samples of `times`/`energies` that fall in `window`.
pub fn fit_decay_series(times: &[f64], energies: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    let (t0, t1) = window;
    if !(t1 > t0) {
        return Err(AclError::InvalidArgument(format!(
            "empty decay window [{t0}, {t1}]"
        )));
    }
    let e0 = *energies.first().ok_or(AclError::InsufficientSamples {
        needed: MIN_FIT_SAMPLES,
        found: 0,
    })?;
    if !(e0 > 0.0) {
        return Err(AclError::NonpositiveEnergy(times[0]));
    }
    let mut pts = Vec::new();
    for (&t, &e) in times.iter().zip(energies) {
        if t < t0 || t > t1 {
            continue;
        }
        if !(e.is_finite() && e >= 0.0) {
            return Err(AclError::NonpositiveEnergy(t));
        }
        if e > ENERGY_FLOOR * e0 {
            pts.push((t, e.ln()));
        }
    }
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(AclError::InsufficientSamples {
            needed: MIN_FIT_SAMPLES,
            found: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    let rms = (pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(DecayFit {
        omega: -0.5 * slope,
        log_c: intercept,
        t0,
        t1,
        residual: rms,
        samples: pts.len(),
    })
}

pub fn fit_decay_rate(traj: &Trajectory, window: (f64, f64)) -> Result<DecayFit> {
    fit_decay_series(&traj.times(), &traj.energies(), window)
}

/// Odd ratio `(2n-1)/(2m-1)`, `n, m <= n_max`, nearest to `ratio`, with its distance.
/// Ties go to the smallest `n`.
pub fn nearest_odd_ratio(ratio: f64, n_max: u32) -> Option<(u32, u32, f64)> {
    let mut best: Option<(u32, u32, f64)> = None;
    for n in 1..=n_max {
        for m in 1..=n_max {
            let r = (2.0 * n as f64 - 1.0) / (2.0 * m as f64 - 1.0);
            let d = (ratio - r).abs();
            if best.is_none_or(|b| d < b.2) {
                best = Some((n, m, d));
            }
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanPoint {
    pub gamma: f64,
    pub zeta_plus: f64,
    pub zeta_minus: f64,
    pub ratio: f64,
    /// `(n, m)` when the ratio is within the exact tolerance of an odd ratio.
    pub flagged: Option<(u32, u32)>,
    /// `(n, m)` when within the exploratory tolerance.
    pub near: Option<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResonanceScanResult {
    pub n_max: u32,
    pub tol: f64,
    pub near_tol: f64,
    pub points: Vec<ScanPoint>,
}

impl ResonanceScanResult {
    pub fn flagged(&self) -> impl Iterator<Item = &ScanPoint> {
        self.points.iter().filter(|p| p.flagged.is_some())
    }

    /// `gamma,zeta_plus,zeta_minus,ratio,flagged,n,m`; `n`, `m` are empty when not flagged.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "gamma,zeta_plus,zeta_minus,ratio,flagged,n,m")?;
        for p in &self.points {
            let (flag, n, m) = match p.flagged {
                Some((n, m)) => ("true", n.to_string(), m.to_string()),
                None => ("false", String::new(), String::new()),
            };
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{flag},{n},{m}",
                p.gamma, p.zeta_plus, p.zeta_minus, p.ratio
            )?;
        }
        Ok(())
    }
}

/// Evaluates `zeta+/zeta-` on a grid of piezoelectric coefficients and flags odd ratios.
pub fn resonance_scan(
    base: &LayerParams,
    gammas: &[f64],
    n_max: u32,
    tol: f64,
) -> Result<ResonanceScanResult> {
    if gammas.is_empty() {
        return Err(AclError::InvalidArgument(
            "resonance scan grid is empty".into(),
        ));
    }
    if base.mu.is_none() {
        return Err(AclError::MissingMagneticParams("scan base layer"));
    }
    let points = gammas
        .iter()
        .map(|&gamma| {
            let (zeta_plus, zeta_minus) = wave_slowness(&base.with_gamma(gamma));
            let ratio = zeta_plus / zeta_minus;
            let best = nearest_odd_ratio(ratio, n_max);
            let within = |t: f64| best.filter(|b| b.2 <= t).map(|b| (b.0, b.1));
            ScanPoint {
                gamma,
                zeta_plus,
                zeta_minus,
                ratio,
                flagged: within(tol),
                near: within(NEAR_RESONANCE_TOL.max(tol)),
            }
        })
        .collect();
    Ok(ResonanceScanResult {
        n_max,
        tol,
        near_tol: NEAR_RESONANCE_TOL.max(tol),
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModePair {
    pub decoupled: C64,
    pub coupled: C64,
    pub abs_diff: f64,
}

/// Matched eigenvalues of the decoupled and coupled electrostatic closed loops.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeComparison {
    /// Sorted by `|lambda_decoupled|`.
    pub pairs: Vec<ModePair>,
    pub abscissa_coupled: f64,
    pub abscissa_decoupled: f64,
}

impl ModeComparison {
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(
            out,
            "idx,im_decoupled,re_decoupled,im_coupled,re_coupled,abs_diff"
        )?;
        for (i, p) in self.pairs.iter().enumerate() {
            writeln!(
                out,
                "{i},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                p.decoupled.im, p.decoupled.re, p.coupled.im, p.coupled.re, p.abs_diff
            )?;
        }
        Ok(())
    }

    /// Mean difference over the `k` lowest and `k` highest frequency pairs.
    pub fn low_high_means(&self, k: usize) -> (f64, f64) {
        let k = k.min(self.pairs.len());
        let mean = |s: &[ModePair]| s.iter().map(|p| p.abs_diff).sum::<f64>() / s.len() as f64;
        (
            mean(&self.pairs[..k]),
            mean(&self.pairs[self.pairs.len() - k..]),
        )
    }
}

/// Oscillatory eigenvalues (`Im > 0`) of smallest modulus, at most `k`.
fn lowest_oscillatory(values: &[C64], k: usize) -> Vec<C64> {
    let mut v: Vec<C64> = values.iter().copied().filter(|l| l.im > 0.0).collect();
    v.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    v.truncate(k);
    v
}

/// Compares the `k_modes` lowest oscillatory modes of the coupled electrostatic closed loop
/// with those of its decoupled part. Each decoupled eigenvalue is greedily matched, in order
/// of increasing modulus, to the unused coupled eigenvalue with the nearest imaginary part.
pub fn compare_coupled_decoupled(
    config: &BeamConfig,
    mesh: &Mesh,
    k_modes: usize,
) -> Result<ModeComparison> {
    let coupled = generator_spectrum(&assemble_electrostatic(config, mesh)?)?;
    let decoupled = generator_spectrum(&assemble_decoupled(config, mesh)?)?;
    let dec = lowest_oscillatory(&decoupled.eigenvalues(), k_modes);
    // Matching candidates: twice as many coupled modes so greedy choices near the cutoff
    // still find their partner.
    let mut pool = lowest_oscillatory(&coupled.eigenvalues(), k_modes.saturating_mul(2));
    let mut pairs = Vec::with_capacity(dec.len());
    for d in dec {
        let Some((idx, _)) = pool
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1.im - d.im).abs().total_cmp(&(b.1.im - d.im).abs()))
        else {
            break;
        };
        let c = pool.swap_remove(idx);
        pairs.push(ModePair {
            decoupled: d,
            coupled: c,
            abs_diff: (c - d).norm(),
        });
    }
    Ok(ModeComparison {
        pairs,
        abscissa_coupled: coupled.abscissa(),
        abscissa_decoupled: decoupled.abscissa(),
    })
}
