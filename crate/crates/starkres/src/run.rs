//! Mode dispatch, worker pool and artifact writing.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde_json::{json, Value};
use starkres_core::floquet::{assemble, write_matrix};
use starkres_core::resolvent::MethodRegistry;
use starkres_core::sweep::{
    ac_sweep, dc_sweep_with, reference_resonance, AcSettings, DcSettings, SweepPoint, SweepResult,
};
use starkres_core::{find_zeros, ResolventEvaluator};

use crate::config::{ConfigError, Mode, Parameters};
use crate::output::{complex_json, fmt_float, read_points, write_eigenvalues, write_json, write_points};
use crate::plot::Scatter;
use crate::verify::{run_checks, standard_checks, Context};

pub const THREADS_ENV: &str = "STARKRES_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e.0)
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numeric(_) | RunError::Io(_) => 3,
        }
    }
}

/// Paths written by a successful run.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub files: Vec<PathBuf>,
}

fn threads_from_env() -> Result<usize, RunError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map_err(|_| RunError::Config(format!("{THREADS_ENV} must be a non-negative integer, got '{v}'"))),
        _ => Ok(0),
    }
}

/// Runs `mode` inside a dedicated worker pool sized by `STARKRES_THREADS` (0 or unset: all cores).
pub fn run(mode: Mode, params: &Parameters) -> Result<Artifacts, RunError> {
    let threads = threads_from_env()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| RunError::Config(e.to_string()))?;
    pool.install(|| dispatch(mode, params))
}

fn dispatch(mode: Mode, params: &Parameters) -> Result<Artifacts, RunError> {
    let out = params.out_dir();
    fs::create_dir_all(&out)?;
    let mut job = Job {
        mode,
        params,
        out,
        artifacts: Artifacts::default(),
        failures: Vec::new(),
    };
    let outcome = match mode {
        Mode::Dc => job.dc(),
        Mode::Sweep => job.sweep(),
        Mode::Ac => job.ac(),
        Mode::Plot => job.plot(),
        Mode::Verify => job.verify(),
    };
    match outcome {
        Ok(()) if job.failures.is_empty() => Ok(job.artifacts),
        Ok(()) => Err(job.fail_log()),
        Err(RunError::Numeric(msg)) => {
            job.failures.push(msg);
            let err = job.fail_log();
            job.manifest(json!({}), json!({}))?;
            Err(err)
        }
        Err(e) => Err(e),
    }
}

struct Job<'a> {
    mode: Mode,
    params: &'a Parameters,
    out: PathBuf,
    artifacts: Artifacts,
    failures: Vec<String>,
}

fn numeric(e: starkres_core::Error) -> RunError {
    RunError::Numeric(e.to_string())
}

fn level_summary(res: &SweepResult) -> Value {
    Value::Array(
        res.levels
            .iter()
            .map(|l| {
                json!({
                    "f": l.f,
                    "count": l.points.len(),
                    "total_winding": l.total_winding,
                    "max_abs_im": l.max_abs_im(),
                    "min_distance_to_reference": l.min_distance(res.reference),
                    "mean_re": l.mean_re(),
                    "std_re": l.std_re(),
                    "failures": l.failures,
                })
            })
            .collect(),
    )
}

impl Job<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.out.join(name);
        self.artifacts.files.push(p.clone());
        p
    }

    fn fail_log(&mut self) -> RunError {
        let path = self.path("failures.log");
        let mut text = self.failures.join("\n");
        text.push('\n');
        if let Err(e) = fs::write(&path, text) {
            return RunError::Io(e);
        }
        RunError::Numeric(self.failures.join("; "))
    }

    fn manifest(&mut self, results: Value, flags: Value) -> Result<(), RunError> {
        let m = json!({
            "tool": "starkres",
            "version": env!("CARGO_PKG_VERSION"),
            "mode": self.mode.name(),
            "status": if self.failures.is_empty() { "ok" } else { "failed" },
            "parameters": self.params.effective(),
            "results": results,
            "flags": flags,
            "failures": self.failures,
        });
        let path = self.path("manifest.json");
        write_json(&path, &m)?;
        Ok(())
    }

    fn dc_settings(&self) -> DcSettings {
        DcSettings {
            root: self.params.root,
            resolvent: self.params.resolvent,
            method: self.params.dc.method.clone(),
        }
    }

    fn check_method(&self, f: f64) -> Result<(), RunError> {
        let method = MethodRegistry::standard()
            .get(&self.params.dc.method)
            .map_err(|e| RunError::Config(e.to_string()))?;
        if !method.supports(f) {
            return Err(RunError::Config(format!(
                "method '{}' does not support f = {f}",
                method.name()
            )));
        }
        Ok(())
    }

    fn reference(&self) -> Result<Complex64, RunError> {
        let mut s = self.dc_settings();
        s.method = "auto".into();
        Ok(reference_resonance(&self.params.form_factor()?, &self.params.dc.window, &s)
            .map_err(numeric)?
            .z)
    }

    fn dc(&mut self) -> Result<(), RunError> {
        let p = self.params;
        let f = p.dc.f;
        self.check_method(f)?;
        let phi = p.form_factor()?;
        let method = MethodRegistry::standard().get(&p.dc.method).map_err(numeric)?;
        let e = ResolventEvaluator::new(&phi, f, p.resolvent)
            .and_then(|e| e.with_method(method))
            .map_err(|e| RunError::Config(e.to_string()))?;
        let search = find_zeros(&e, &p.dc.window, &p.root).map_err(numeric)?;
        let points: Vec<SweepPoint> = search.zeros.iter().map(SweepPoint::from).collect();
        let csv = self.path("resonances.csv");
        write_points(&csv, &points)?;
        for b in &search.failures {
            self.failures.push(format!("box {:?} winding {}: {}", b.window, b.winding, b.reason));
        }
        if p.output.integrand_samples > 0 {
            let z = p.dc.window.center();
            let samples = e
                .integrand_samples(z, p.output.integrand_samples as usize)
                .map_err(numeric)?;
            let path = self.path("integrand.csv");
            let mut w = csv::Writer::from_path(&path).map_err(std::io::Error::from)?;
            w.write_record(["re_t", "im_t", "re_value", "im_value"])
                .map_err(std::io::Error::from)?;
            for (t, v) in samples {
                w.write_record([fmt_float(t.re), fmt_float(t.im), fmt_float(v.re), fmt_float(v.im)])
                    .map_err(std::io::Error::from)?;
            }
            w.flush()?;
        }
        let zeros: Vec<Value> = search
            .zeros
            .iter()
            .map(|r| {
                json!({
                    "z": complex_json(r.z),
                    "residual": r.residual,
                    "winding": r.winding,
                    "iterations": r.iterations,
                    "axis_ambiguous": r.axis_ambiguous,
                })
            })
            .collect();
        let results = json!({
            "method": e.method_name(),
            "searched_window": search.window,
            "total_winding": search.total_winding,
            "zeros": zeros,
        });
        self.manifest(results, json!({}))
    }

    fn sweep(&mut self) -> Result<(), RunError> {
        let p = self.params;
        self.check_method(p.sweep.f_grid[0])?;
        let phi = p.form_factor()?;
        let reference = self.reference()?;
        let res = dc_sweep_with(
            &MethodRegistry::standard(),
            &phi,
            &p.sweep.f_grid,
            &p.sweep.window,
            reference,
            &self.dc_settings(),
        )
        .map_err(numeric)?;
        let points: Vec<SweepPoint> = res.points().copied().collect();
        let csv = self.path("sweep.csv");
        write_points(&csv, &points)?;
        self.figures(&points, &p.sweep.f_grid)?;
        for l in &res.levels {
            for msg in &l.failures {
                if msg != "no zeros found" {
                    self.failures.push(format!("f={}: {msg}", l.f));
                }
            }
        }
        let results = json!({
            "reference": complex_json(reference),
            "c0": res.fit.map(|fit| fit.c0),
            "c0_largest_f": res.c0_largest_f(),
            "fit": res.fit,
            "levels": level_summary(&res),
            "trajectories": res.trajectories.len(),
        });
        let flags = json!({
            "axis_approach": res.flags.axis_approach,
            "r0_avoidance": res.flags.r0_avoidance,
            "dc": res.flags.verdict(),
        });
        self.manifest(results, flags)
    }

    fn figures(&mut self, points: &[SweepPoint], grid: &[f64]) -> Result<(), RunError> {
        let all: Vec<(f64, f64, f64)> = points.iter().map(|p| (p.f, p.z.re, p.z.im)).collect();
        let mut sorted = grid.to_vec();
        sorted.sort_by(f64::total_cmp);
        let fine_cut = sorted[(sorted.len() - 1) / 2];
        let fine: Vec<(f64, f64, f64)> = all.iter().copied().filter(|p| p.0 <= fine_cut).collect();
        self.scatter_pair(&all, "", "")?;
        self.scatter_pair(&fine, "_fine", " (small f)")
    }

    fn scatter_pair(&mut self, pts: &[(f64, f64, f64)], suffix: &str, note: &str) -> Result<(), RunError> {
        let re = Scatter {
            title: &format!("Real part of resonances{note}"),
            x_label: "f",
            y_label: "Re z",
            points: pts.iter().map(|p| (p.0, p.1)).collect(),
        };
        let im = Scatter {
            title: &format!("Imaginary part of resonances{note}"),
            x_label: "f",
            y_label: "Im z",
            points: pts.iter().map(|p| (p.0, p.2)).collect(),
        };
        let a = self.path(&format!("re_vs_f{suffix}.svg"));
        fs::write(&a, re.to_svg())?;
        let b = self.path(&format!("im_vs_f{suffix}.svg"));
        fs::write(&b, im.to_svg())?;
        Ok(())
    }

    fn ac_settings(&self) -> AcSettings {
        let a = &self.params.ac;
        AcSettings {
            omega: a.omega,
            im_theta: a.im_theta,
            n_fourier: a.n_fourier as usize,
            n_hermite: a.n_hermite as usize,
            length: a.length,
            eigen: self.params.eigen,
        }
    }

    fn ac(&mut self) -> Result<(), RunError> {
        let p = self.params;
        let phi = p.form_factor()?;
        let settings = self.ac_settings();
        settings
            .problem(&phi, p.ac.f_grid[0])
            .map_err(|e| RunError::Config(e.to_string()))?;
        let target = match p.target()? {
            Some(t) => t,
            None => self.reference()?,
        };
        if !p.ac.dump_matrix.is_empty() {
            let problem = settings.problem(&phi, p.ac.f_grid[0]).map_err(numeric)?;
            let k = assemble(&problem).map_err(numeric)?;
            let path = PathBuf::from(&p.ac.dump_matrix);
            write_matrix(BufWriter::new(fs::File::create(&path)?), &k)?;
            self.artifacts.files.push(path);
        }
        let res = ac_sweep(&phi, &p.ac.f_grid, target, &settings).map_err(numeric)?;
        let points: Vec<SweepPoint> = res.points().copied().collect();
        let csv = self.path("ac.csv");
        write_points(&csv, &points)?;
        let eig = self.path("eigenvalues.csv");
        write_eigenvalues(&eig, &points, target)?;
        for l in &res.levels {
            for msg in &l.failures {
                self.failures.push(format!("f={}: {msg}", l.f));
            }
        }
        let results = json!({
            "target": complex_json(target),
            "origin": res.origin.map(complex_json),
            "origin_distance_to_target": res.origin.map(|o| (o - target).norm()),
            "dimension": settings.problem(&phi, 0.0).map(|q| q.dimension()).ok(),
            "levels": level_summary(&res),
        });
        let flags = json!({
            "converged": res.flags.converged,
            "ac": res.flags.verdict(),
        });
        self.manifest(results, flags)
    }

    fn plot(&mut self) -> Result<(), RunError> {
        let input = &self.params.plot.input;
        if input.is_empty() {
            return Err(RunError::Config("plot needs plot.input (--input)".into()));
        }
        let rows = read_points(Path::new(input)).map_err(RunError::Config)?;
        let pts: Vec<(f64, f64, f64)> = rows.iter().map(|r| (r.f, r.re, r.im)).collect();
        self.scatter_pair(&pts, "", "")?;
        let results = json!({ "input": input, "points": rows.len() });
        self.manifest(results, json!({}))
    }

    fn verify(&mut self) -> Result<(), RunError> {
        let ctx = Context {
            params: self.params.clone(),
            phi: self.params.form_factor()?,
        };
        let reports = run_checks(&standard_checks(), &ctx);
        for r in reports.iter().filter(|r| !r.passed) {
            self.failures.push(format!(
                "{}: deviation {:e} vs tolerance {:e}{}",
                r.name,
                r.max_deviation,
                r.tolerance,
                r.skipped.as_ref().map(|s| format!(" ({s})")).unwrap_or_default()
            ));
        }
        let path = self.path("verify.json");
        write_json(&path, &serde_json::to_value(&reports).expect("reports serialize"))?;
        let passed = reports.iter().filter(|r| r.passed).count();
        self.manifest(json!({ "checks": reports.len(), "passed": passed }), json!({}))
    }
}
