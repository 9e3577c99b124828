use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use starkres::config::{parse_config_text, Mode, Parameters};

/// Resonances of a Friedrichs model under static (DC) and periodic (AC) fields.
#[derive(Parser)]
#[command(name = "starkres", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Zeros of the continued function at a single field strength.
    Dc(DcArgs),
    /// Zero clouds over a descending f-grid, with slope fit and figures.
    Sweep(SweepArgs),
    /// Floquet eigenvalues near the field-free resonance over an f-grid.
    Ac(AcArgs),
    /// SVG scatter plots from a results CSV.
    Plot(PlotArgs),
    /// Oracle cross-checks.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// key=value configuration file, applied before flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Form factor amplitude.
    #[arg(long)]
    amp: Option<f64>,
    /// Form factor Gaussian width.
    #[arg(long)]
    width: Option<f64>,
    /// Continuation method (auto, free-pole, free-contour, stark-propagator).
    #[arg(long)]
    method: Option<String>,
    /// Extra configuration override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct WindowArgs {
    #[arg(long, allow_hyphen_values = true)]
    re_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    re_max: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    im_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    im_max: Option<f64>,
}

#[derive(Args)]
struct DcArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    window: WindowArgs,
    /// Field strength.
    #[arg(long, allow_hyphen_values = true)]
    f: Option<f64>,
    /// Newton tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Write this many integrand samples at the window centre.
    #[arg(long)]
    integrand_samples: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    window: WindowArgs,
    /// Comma-separated descending grid.
    #[arg(long)]
    f_grid: Option<String>,
    /// Newton tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct AcArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated descending grid.
    #[arg(long)]
    f_grid: Option<String>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    im_theta: Option<f64>,
    #[arg(long)]
    n_fourier: Option<u64>,
    #[arg(long)]
    n_hermite: Option<u64>,
    /// Hermite basis length scale.
    #[arg(long)]
    length: Option<f64>,
    /// `re,im`, or `auto` for the field-free zero.
    #[arg(long, allow_hyphen_values = true)]
    target: Option<String>,
    /// Eigenpair residual tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Write the matrix at the largest f to this file.
    #[arg(long)]
    dump_matrix: Option<String>,
}

#[derive(Args)]
struct PlotArgs {
    #[command(flatten)]
    common: Common,
    /// Results CSV with f, re_z, im_z columns.
    #[arg(long)]
    input: Option<String>,
}

struct Overrides(Vec<(String, String)>);

impl Overrides {
    fn put<T: ToString>(&mut self, key: &str, v: Option<T>) {
        if let Some(v) = v {
            self.0.push((key.to_string(), v.to_string()));
        }
    }

    fn window(&mut self, prefix: &str, w: &WindowArgs) {
        self.put(&format!("{prefix}.re_min"), w.re_min);
        self.put(&format!("{prefix}.re_max"), w.re_max);
        self.put(&format!("{prefix}.im_min"), w.im_min);
        self.put(&format!("{prefix}.im_max"), w.im_max);
    }
}

fn common(c: &Common) -> Result<Overrides, String> {
    let mut o = Overrides(Vec::new());
    if let Some(path) = &c.config {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        o.0 = parse_config_text(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    o.put("output.dir", c.out.as_ref());
    o.put("phi.amp", c.amp);
    o.put("phi.width", c.width);
    o.put("dc.method", c.method.as_ref());
    for kv in &c.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| format!("--set expects KEY=VALUE, got '{kv}'"))?;
        o.0.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(o)
}

fn overrides(cmd: &Command) -> Result<(Mode, Vec<(String, String)>), String> {
    Ok(match cmd {
        Command::Dc(a) => {
            let mut o = common(&a.common)?;
            o.window("dc.window", &a.window);
            o.put("dc.f", a.f);
            o.put("root.tol", a.tol);
            o.put("output.integrand_samples", a.integrand_samples);
            (Mode::Dc, o.0)
        }
        Command::Sweep(a) => {
            let mut o = common(&a.common)?;
            o.window("sweep.window", &a.window);
            o.put("sweep.f_grid", a.f_grid.as_ref());
            o.put("root.tol", a.tol);
            (Mode::Sweep, o.0)
        }
        Command::Ac(a) => {
            let mut o = common(&a.common)?;
            o.put("ac.f_grid", a.f_grid.as_ref());
            o.put("ac.omega", a.omega);
            o.put("ac.im_theta", a.im_theta);
            o.put("ac.n_fourier", a.n_fourier);
            o.put("ac.n_hermite", a.n_hermite);
            o.put("ac.length", a.length);
            o.put("ac.target", a.target.as_ref());
            o.put("eigen.tol", a.tol);
            o.put("ac.dump_matrix", a.dump_matrix.as_ref());
            (Mode::Ac, o.0)
        }
        Command::Plot(a) => {
            let mut o = common(&a.common)?;
            o.put("plot.input", a.input.as_ref());
            (Mode::Plot, o.0)
        }
        Command::Verify(c) => (Mode::Verify, common(c)?.0),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let params = overrides(&cli.command).and_then(|(mode, kv)| {
        Parameters::from_overrides(&kv)
            .map(|p| (mode, p))
            .map_err(|e| e.to_string())
    });
    let (mode, params) = match params {
        Ok(v) => v,
        Err(msg) => {
            eprintln!("starkres: configuration error: {msg}");
            return ExitCode::from(2);
        }
    };
    match starkres::run(mode, &params) {
        Ok(artifacts) => {
            for f in artifacts.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("starkres: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
