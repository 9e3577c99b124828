//! Field sweeps: DC zero clouds per f, AC Floquet eigenvalues per f,
//! trajectory linking and the instability-slope fit.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floquet::{eigen_near, resonance_pair, EigenSettings, FloquetProblem};
use crate::formfactor::{DilationParameter, FormFactor};
use crate::resolvent::{MethodRegistry, ResolventEvaluator, ResolventSettings};
use crate::rootfind::{find_zeros, Resonance, RootSettings, Window};

/// Gating radius as a multiple of the median nearest-neighbour spacing.
pub const GATING_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Dc,
    Ac,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub f: f64,
    pub z: Complex64,
    pub residual: f64,
    pub winding: Option<u32>,
    pub trajectory: Option<usize>,
    pub sensitivity: Option<f64>,
}

impl From<&Resonance> for SweepPoint {
    fn from(r: &Resonance) -> Self {
        Self {
            f: r.f,
            z: r.z,
            residual: r.residual,
            winding: Some(r.winding),
            trajectory: r.trajectory,
            sensitivity: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepLevel {
    pub f: f64,
    pub points: Vec<SweepPoint>,
    pub total_winding: Option<i64>,
    pub failures: Vec<String>,
}

impl SweepLevel {
    pub fn max_abs_im(&self) -> Option<f64> {
        self.points.iter().map(|p| p.z.im.abs()).reduce(f64::max)
    }

    pub fn min_distance(&self, to: Complex64) -> Option<f64> {
        self.points.iter().map(|p| (p.z - to).norm()).reduce(f64::min)
    }

    pub fn mean_re(&self) -> Option<f64> {
        if self.points.is_empty() {
            return None;
        }
        Some(self.points.iter().map(|p| p.z.re).sum::<f64>() / self.points.len() as f64)
    }

    /// Sample standard deviation of the real parts; zero for a single point.
    pub fn std_re(&self) -> Option<f64> {
        let mean = self.mean_re()?;
        let n = self.points.len();
        if n < 2 {
            return Some(0.0);
        }
        let ss: f64 = self.points.iter().map(|p| (p.z.re - mean).powi(2)).sum();
        Some((ss / (n - 1) as f64).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: usize,
    pub points: Vec<(f64, Complex64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    /// Envelope constant `max |Im z| / f`.
    pub c0: f64,
    /// Least-squares slope of `ln |Im z|` against `ln f`.
    pub slope: f64,
    pub intercept: f64,
    /// RMS deviation of the log-log fit.
    pub residual: f64,
    pub points: usize,
    pub axis_ambiguous: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepFlags {
    /// DC: the per-f maximum `|Im z|` shrinks strictly as f decreases.
    pub axis_approach: Option<bool>,
    /// DC: every zero at the smallest f stays farther than `|Im r0| / 2` from r0.
    pub r0_avoidance: Option<bool>,
    /// AC: distance to r0 decreasing over the last three grid points and
    /// below ten times the truncation sensitivity at the end.
    pub converged: Option<bool>,
}

impl SweepFlags {
    pub fn verdict(&self) -> &'static str {
        match (self.axis_approach, self.r0_avoidance, self.converged) {
            (Some(true), Some(true), _) => "unstable",
            (_, _, Some(true)) => "stable",
            _ => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub f_grid: Vec<f64>,
    pub reference: Complex64,
    pub levels: Vec<SweepLevel>,
    pub trajectories: Vec<Trajectory>,
    /// Envelope fit of the per-f extreme `|Im z|` (DC) or of the eigenvalue trajectory (AC).
    pub fit: Option<SlopeFit>,
    pub flags: SweepFlags,
    /// AC: eigenvalue of the same truncation at f = 0.
    pub origin: Option<Complex64>,
}

impl SweepResult {
    /// `max |Im z| / f` at the largest f of the grid.
    pub fn c0_largest_f(&self) -> Option<f64> {
        let level = self.levels.first()?;
        Some(level.max_abs_im()? / level.f)
    }

    pub fn points(&self) -> impl Iterator<Item = &SweepPoint> {
        self.levels.iter().flat_map(|l| l.points.iter())
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty f-grid".into()));
    }
    if grid.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
        return Err(Error::InvalidParameter("f-grid entries must be positive".into()));
    }
    if grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("f-grid must be strictly descending".into()));
    }
    Ok(())
}

fn canonical_order(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

fn median_spacing(zs: &[Complex64]) -> Option<f64> {
    if zs.len() < 2 {
        return None;
    }
    let nearest = zs
        .iter()
        .enumerate()
        .map(|(i, a)| {
            zs.iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, b)| (a - b).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    median(nearest)
}

/// Links per-level positions into trajectories, levels in descending-f order.
/// Returns the trajectory id of every input point.
pub fn link_trajectories(levels: &[(f64, Vec<Complex64>)]) -> (Vec<Vec<usize>>, Vec<Trajectory>) {
    let mut trajectories: Vec<Trajectory> = Vec::new();
    let mut assignment: Vec<Vec<usize>> = Vec::with_capacity(levels.len());
    // open trajectory ends from the previous level: (id, position)
    let mut ends: Vec<(usize, Complex64)> = Vec::new();
    let mut prev_positions: Vec<Complex64> = Vec::new();
    for (f, zs) in levels {
        let mut order: Vec<usize> = (0..zs.len()).collect();
        order.sort_by(|&a, &b| canonical_order(&zs[a], &zs[b]));
        let radius = median_spacing(&prev_positions)
            .or_else(|| median_spacing(zs))
            .map(|s| GATING_FACTOR * s)
            .unwrap_or(f64::INFINITY);
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for (ei, (_, end)) in ends.iter().enumerate() {
            for &k in &order {
                let d = (zs[k] - end).norm();
                if d <= radius {
                    candidates.push((d, ei, k));
                }
            }
        }
        candidates.sort_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(canonical_order(&ends[a.1].1, &ends[b.1].1))
                .then(canonical_order(&zs[a.2], &zs[b.2]))
        });
        let mut ids = vec![usize::MAX; zs.len()];
        let mut end_used = vec![false; ends.len()];
        for (_, ei, k) in candidates {
            if end_used[ei] || ids[k] != usize::MAX {
                continue;
            }
            end_used[ei] = true;
            ids[k] = ends[ei].0;
        }
        for &k in &order {
            if ids[k] == usize::MAX {
                ids[k] = trajectories.len();
                trajectories.push(Trajectory {
                    id: ids[k],
                    points: Vec::new(),
                });
            }
            trajectories[ids[k]].points.push((*f, zs[k]));
        }
        ends = order.iter().map(|&k| (ids[k], zs[k])).collect();
        prev_positions = zs.clone();
        assignment.push(ids);
    }
    (assignment, trajectories)
}

/// Envelope constant and log-log slope of `|Im z|` against `f`.
pub fn fit_slope(points: &[(f64, Complex64)]) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "slope fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|(f, _)| !(*f > 0.0)) {
        return Err(Error::InvalidParameter("slope fit needs f > 0".into()));
    }
    let c0 = points.iter().map(|(f, z)| z.im.abs() / f).fold(0.0, f64::max);
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, z)| z.im != 0.0)
        .map(|(f, z)| (f.ln(), z.im.abs().ln()))
        .collect();
    let n = logs.len() as f64;
    let distinct = logs.iter().any(|(x, _)| *x != logs[0].0);
    if logs.len() < 2 || !distinct {
        return Ok(SlopeFit {
            c0,
            slope: f64::NAN,
            intercept: f64::NAN,
            residual: f64::NAN,
            points: points.len(),
            axis_ambiguous: true,
        });
    }
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (logs
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(SlopeFit {
        c0,
        slope,
        intercept,
        residual,
        points: points.len(),
        axis_ambiguous: logs.len() < points.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcSettings {
    pub root: RootSettings,
    pub resolvent: ResolventSettings,
    pub method: String,
}

impl Default for DcSettings {
    fn default() -> Self {
        Self {
            root: RootSettings::default(),
            resolvent: ResolventSettings::default(),
            method: "auto".into(),
        }
    }
}

fn evaluator(phi: &FormFactor, f: f64, settings: &DcSettings, registry: &MethodRegistry) -> Result<ResolventEvaluator> {
    ResolventEvaluator::new(phi, f, settings.resolvent)?.with_method(registry.get(&settings.method)?)
}

/// The single f = 0 zero in `window` closest to 1.
pub fn reference_resonance(phi: &FormFactor, window: &Window, settings: &DcSettings) -> Result<Resonance> {
    let registry = MethodRegistry::standard();
    let e = evaluator(phi, 0.0, settings, &registry)?;
    let search = find_zeros(&e, window, &settings.root)?;
    search
        .zeros
        .iter()
        .min_by(|a, b| (a.z - 1.0).norm().total_cmp(&(b.z - 1.0).norm()))
        .copied()
        .ok_or_else(|| Error::InvalidParameter("no field-free resonance in the reference window".into()))
}

pub fn dc_sweep(
    phi: &FormFactor,
    grid: &[f64],
    window: &Window,
    reference: Complex64,
    settings: &DcSettings,
) -> Result<SweepResult> {
    dc_sweep_with(&MethodRegistry::standard(), phi, grid, window, reference, settings)
}

pub fn dc_sweep_with(
    registry: &MethodRegistry,
    phi: &FormFactor,
    grid: &[f64],
    window: &Window,
    reference: Complex64,
    settings: &DcSettings,
) -> Result<SweepResult> {
    check_grid(grid)?;
    window.validate()?;
    if window.im_max >= 0.0 {
        return Err(Error::InvalidParameter("sweep window must lie in the lower half-plane".into()));
    }
    // fail fast on configuration errors before fanning out
    evaluator(phi, grid[0], settings, registry)?;
    let mut levels: Vec<SweepLevel> = grid
        .par_iter()
        .map(|&f| {
            let run = evaluator(phi, f, settings, registry).and_then(|e| find_zeros(&e, window, &settings.root));
            match run {
                Ok(search) => SweepLevel {
                    f,
                    points: search.zeros.iter().map(SweepPoint::from).collect(),
                    total_winding: Some(search.total_winding),
                    failures: search
                        .failures
                        .iter()
                        .map(|b| format!("winding {} box {:?}: {}", b.winding, b.window, b.reason))
                        .collect(),
                },
                Err(e) => SweepLevel {
                    f,
                    points: Vec::new(),
                    total_winding: None,
                    failures: vec![e.to_string()],
                },
            }
        })
        .collect();
    for level in levels.iter_mut() {
        if level.points.is_empty() && level.failures.is_empty() {
            level.failures.push("no zeros found".into());
        }
    }
    let trajectories = assign(&mut levels);
    let envelope: Vec<(f64, Complex64)> = levels
        .iter()
        .filter_map(|l| {
            l.points
                .iter()
                .max_by(|a, b| a.z.im.abs().total_cmp(&b.z.im.abs()))
                .map(|p| (l.f, p.z))
        })
        .collect();
    let fit = fit_slope(&envelope).ok();
    let maxima: Vec<Option<f64>> = levels.iter().map(|l| l.max_abs_im()).collect();
    let axis_approach = maxima.len() >= 2
        && maxima.iter().all(|m| m.is_some())
        && maxima.windows(2).all(|w| w[1] < w[0]);
    let r0_avoidance = levels
        .last()
        .and_then(|l| l.min_distance(reference))
        .map(|d| d > reference.im.abs() / 2.0);
    Ok(SweepResult {
        kind: SweepKind::Dc,
        f_grid: grid.to_vec(),
        reference,
        levels,
        trajectories,
        fit,
        flags: SweepFlags {
            axis_approach: Some(axis_approach),
            r0_avoidance: Some(r0_avoidance.unwrap_or(false)),
            converged: None,
        },
        origin: None,
    })
}

fn assign(levels: &mut [SweepLevel]) -> Vec<Trajectory> {
    let positions: Vec<(f64, Vec<Complex64>)> = levels
        .iter()
        .map(|l| (l.f, l.points.iter().map(|p| p.z).collect()))
        .collect();
    let (ids, trajectories) = link_trajectories(&positions);
    for (level, ids) in levels.iter_mut().zip(ids) {
        for (p, id) in level.points.iter_mut().zip(ids) {
            p.trajectory = Some(id);
        }
    }
    trajectories
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcSettings {
    pub omega: f64,
    pub im_theta: f64,
    pub n_fourier: usize,
    pub n_hermite: usize,
    pub length: f64,
    pub eigen: EigenSettings,
}

impl Default for AcSettings {
    fn default() -> Self {
        Self {
            omega: 1.0,
            im_theta: 0.3,
            n_fourier: 16,
            n_hermite: 80,
            length: 1.0,
            eigen: EigenSettings::default(),
        }
    }
}

impl AcSettings {
    pub fn problem(&self, phi: &FormFactor, f: f64) -> Result<FloquetProblem> {
        let mut p = FloquetProblem::new(
            phi.clone(),
            f,
            self.omega,
            DilationParameter::imaginary(self.im_theta)?,
            self.n_fourier,
            self.n_hermite,
        );
        p.length = self.length;
        p.validate()?;
        Ok(p)
    }
}

fn ac_level(phi: &FormFactor, f: f64, target: Complex64, settings: &AcSettings) -> SweepLevel {
    let run = settings
        .problem(phi, f)
        .and_then(|p| eigen_near(&p, target, &settings.eigen));
    match run.map(|pairs| resonance_pair(&pairs)) {
        Ok(Some(pair)) => SweepLevel {
            f,
            points: vec![SweepPoint {
                f,
                z: pair.eigenvalue,
                residual: pair.residual,
                winding: None,
                trajectory: None,
                sensitivity: pair.sensitivity,
            }],
            total_winding: None,
            failures: Vec::new(),
        },
        Ok(None) => SweepLevel {
            f,
            points: Vec::new(),
            total_winding: None,
            failures: vec!["no eigenvalue in the target disk".into()],
        },
        Err(e) => SweepLevel {
            f,
            points: Vec::new(),
            total_winding: None,
            failures: vec![e.to_string()],
        },
    }
}

/// Floquet resonance nearest `target` for each f, plus the f = 0 origin.
pub fn ac_sweep(phi: &FormFactor, grid: &[f64], target: Complex64, settings: &AcSettings) -> Result<SweepResult> {
    check_grid(grid)?;
    settings.problem(phi, grid[0])?;
    let origin_level = ac_level(phi, 0.0, target, settings);
    let origin = origin_level.points.first().map(|p| p.z);
    let mut levels: Vec<SweepLevel> = grid.par_iter().map(|&f| ac_level(phi, f, target, settings)).collect();
    let trajectories = assign(&mut levels);
    let dists: Vec<Option<f64>> = levels.iter().map(|l| l.min_distance(target)).collect();
    let converged = if dists.len() >= 3 && dists.iter().all(|d| d.is_some()) {
        let d: Vec<f64> = dists.iter().map(|d| d.unwrap()).collect();
        let n = d.len();
        let decreasing = d[n - 3] > d[n - 2] && d[n - 2] > d[n - 1];
        let sensitivity = levels[n - 1].points[0].sensitivity;
        decreasing && sensitivity.map(|s| d[n - 1] < 10.0 * s).unwrap_or(false)
    } else {
        false
    };
    let path: Vec<(f64, Complex64)> = levels
        .iter()
        .filter_map(|l| l.points.first().map(|p| (l.f, p.z)))
        .collect();
    Ok(SweepResult {
        kind: SweepKind::Ac,
        f_grid: grid.to_vec(),
        reference: target,
        levels,
        trajectories,
        fit: fit_slope(&path).ok(),
        flags: SweepFlags {
            axis_approach: None,
            r0_avoidance: None,
            converged: Some(converged),
        },
        origin,
    })
}
