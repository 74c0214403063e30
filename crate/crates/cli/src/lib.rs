//! `cptsim` command line: argument parsing, orchestration of the simulation
//! crate and all file output. [`run_command`] is the whole program minus
//! process setup, so it can be driven in-process by tests.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use cptsim::cpt::{calibrate_laser_dephasing, cpt_scan_1d, cpt_scan_2d, dip_width_vs_field, measure_dip_width};
use cptsim::fitting::{
    bootstrap_std, fit_bloch_model, fit_lorentzian_dip, fit_width_model, BlochFitOptions, FitResult, PairSchedule,
    Trace,
};
use cptsim::io::{
    inject_noise, inject_noise_values, load_config, read_trace, trace_table, write_bytes, Cell, RunConfig, RunManifest,
    Table,
};
use cptsim::model::{calibrate_lambda_ground, find_avoided_crossing, level_sweep};
use cptsim::transitions::{driven_partner, identify_d_transitions, synthesize_spectrum_map, table_at_with};
use cptsim::Error;

/// Exit status for usage and configuration problems.
pub const EXIT_INVALID: i32 = 1;
/// Exit status for numeric failures on valid input.
pub const EXIT_NUMERIC: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "cptsim", version, about = "Color-center CPT simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone)]
struct Common {
    /// JSON run configuration; built-in defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Operating field, T (overrides `field`).
    #[arg(long)]
    b: Option<f64>,
    /// Field angle to the center axis, degrees.
    #[arg(long = "angle-deg")]
    angle_deg: Option<f64>,
    /// Primary output file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
    /// Trace CSV: header row, then x,y or x,y,sigma.
    #[arg(long)]
    input: PathBuf,
    /// Weight residuals by the sigma column when present.
    #[arg(long)]
    use_sigma: bool,
    /// Residual-bootstrap sample count (seeded by `noise.seed`).
    #[arg(long)]
    bootstrap: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Manifold {
    Ground,
    Excited,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Calibration {
    Lambda,
    Laser,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Energies, gaps and overlaps over `grids.field`.
    Levels {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "ground")]
        manifold: Manifold,
    },
    /// Minimum of a ground-level gap within `calibration.crossing_range`.
    Crossing {
        #[command(flatten)]
        common: Common,
        /// Sorted level pair, 1-based.
        #[arg(long, num_args = 2, value_names = ["I", "J"], default_values_t = [2, 3])]
        pair: Vec<usize>,
    },
    /// Pin λ_g to the crossing target, or tune the laser dephasing to the dip width.
    Calibrate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        what: Calibration,
        /// Also write the configuration with the calibrated value filled in.
        #[arg(long)]
        write_config: Option<PathBuf>,
    },
    /// Rendered optical spectrum over `grids.field` × `grids.frequency`.
    SpectrumMap {
        #[command(flatten)]
        common: Common,
    },
    /// Transition table at the operating field.
    Transitions {
        #[command(flatten)]
        common: Common,
    },
    /// CPT scans and dip-width sweeps.
    Cpt {
        #[command(subcommand)]
        command: CptCommand,
    },
    /// Fits on trace CSVs.
    Fit {
        #[command(subcommand)]
        command: FitCommand,
    },
    /// Seeded multiplicative Gaussian noise on a trace CSV.
    Noise {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        /// Relative sigma (overrides `noise.sigma_rel`).
        #[arg(long)]
        sigma: Option<f64>,
        /// Seed (overrides `noise.seed`).
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Subcommand)]
enum CptCommand {
    /// Laser-2 detuning scan at the operating field.
    Scan1d {
        #[command(flatten)]
        common: Common,
    },
    /// Both detunings over `grids.detuning`.
    Scan2d {
        #[command(flatten)]
        common: Common,
    },
    /// Dip FWHM over `grids.field` at `width_sweep.powers`.
    WidthSweep {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Subcommand)]
enum FitCommand {
    Lorentzian(FitArgs),
    /// γ_g with the Λ system fixed by the configuration at the operating field.
    Bloch(FitArgs),
    /// Overlap × Boltzmann model on a width-versus-field CSV.
    WidthModel(FitArgs),
}

type CmdResult = cptsim::Result<()>;
type Refit = Box<dyn Fn(&Trace) -> cptsim::Result<FitResult>>;

/// Parses `argv` (program name first), runs the command and returns the
/// exit status. Reports go to `out`, diagnostics to `err`.
pub fn run_command<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    0
                }
                _ => {
                    let _ = writeln!(err, "error[usage]: {}", e.render().to_string().trim_end());
                    EXIT_INVALID
                }
            };
        }
    };
    let words = std::iter::once("cptsim".to_string())
        .chain(argv.iter().skip(1).map(|s| s.to_string_lossy().into_owned()))
        .collect();
    match dispatch(cli.command, words, out) {
        Ok(()) => 0,
        Err(e) => {
            let tag = match &e {
                Error::Io { .. } => "io",
                e if e.is_numeric() => "numeric",
                _ => "config",
            };
            let _ = writeln!(err, "error[{tag}]: {e}");
            if e.is_numeric() {
                EXIT_NUMERIC
            } else {
                EXIT_INVALID
            }
        }
    }
}

/// Sizes the global rayon pool from the value of `CPTSIM_THREADS`.
pub fn configure_threads(value: Option<&str>) -> std::result::Result<(), String> {
    let Some(v) = value else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| format!("CPTSIM_THREADS must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| format!("CPTSIM_THREADS: {e}"))
}

/// Loads the configuration and applies the sparse overrides.
fn resolve(common: &Common) -> cptsim::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(b) = common.b {
        cfg.field = b;
    }
    if let Some(a) = common.angle_deg {
        cfg.geometry.field_angle_deg = a;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Collects written files and finishes with the manifest beside the
/// primary output.
struct Run<'a> {
    manifest: RunManifest,
    primary: PathBuf,
    out: &'a mut dyn Write,
}

impl<'a> Run<'a> {
    fn new(words: Vec<String>, cfg: &RunConfig, common: &Common, default_name: &str, out: &'a mut dyn Write) -> Self {
        let primary = common
            .out
            .clone()
            .unwrap_or_else(|| Path::new(&cfg.output.dir).join(default_name));
        Self {
            manifest: RunManifest::new(words, cfg.clone()),
            primary,
            out,
        }
    }

    fn write(&mut self, path: &Path, bytes: &[u8]) -> CmdResult {
        let sum = write_bytes(path, bytes)?;
        self.manifest.record(path, sum);
        Ok(())
    }

    fn write_primary(&mut self, table: &Table) -> CmdResult {
        let p = self.primary.clone();
        self.write(&p, &table.to_csv())
    }

    fn report(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.out, "{key} = {value}");
    }

    fn finish(self) -> CmdResult {
        let dir = self.primary.parent().unwrap_or(Path::new(""));
        let path = dir.join("manifest.json");
        self.manifest.write(&path)?;
        let _ = writeln!(self.out, "wrote {}", self.primary.display());
        Ok(())
    }
}

fn dispatch(cmd: Command, words: Vec<String>, out: &mut dyn Write) -> CmdResult {
    match cmd {
        Command::Levels { common, manifold } => levels(&common, manifold, words, out),
        Command::Crossing { common, pair } => crossing(&common, (pair[0], pair[1]), words, out),
        Command::Calibrate {
            common,
            what,
            write_config,
        } => calibrate(&common, what, write_config, words, out),
        Command::SpectrumMap { common } => spectrum_map(&common, words, out),
        Command::Transitions { common } => transitions(&common, words, out),
        Command::Cpt { command } => match command {
            CptCommand::Scan1d { common } => scan1d(&common, words, out),
            CptCommand::Scan2d { common } => scan2d(&common, words, out),
            CptCommand::WidthSweep { common } => width_sweep(&common, words, out),
        },
        Command::Fit { command } => match command {
            FitCommand::Lorentzian(a) => fit(&a, FitKind::Lorentzian, words, out),
            FitCommand::Bloch(a) => fit(&a, FitKind::Bloch, words, out),
            FitCommand::WidthModel(a) => fit(&a, FitKind::WidthModel, words, out),
        },
        Command::Noise {
            common,
            input,
            sigma,
            seed,
        } => noise(&common, &input, sigma, seed, words, out),
    }
}

fn levels(common: &Common, manifold: Manifold, words: Vec<String>, out: &mut dyn Write) -> CmdResult {
    let cfg = resolve(common)?;
    let params = match manifold {
        Manifold::Ground => cfg.ground,
        Manifold::Excited => cfg.excited,
    };
    let d = level_sweep(&params, &cfg.geometry, &cfg.grids.field.values())?;
    let mut t = Table::new(&[
        "B_T",
        "E1_GHz",
        "E2_GHz",
        "E3_GHz",
        "E4_GHz",
        "gap23_GHz",
        "gap12_GHz",
        "gap13_GHz",
        "overlap12",
        "overlap13",
        "overlap23",
    ]);
    for (k, sys) in d.systems.iter().enumerate() {
        let mut row: Vec<Cell> = vec![d.field_values[k].into()];
        row.extend(sys.energies.iter().map(|&e| Cell::Num(e)));
        row.extend([
            sys.gap(1, 2).into(),
            sys.gap(0, 1).into(),
            sys.gap(0, 2).into(),
            sys.overlap(0, 1).into(),
            sys.overlap(0, 2).into(),
            sys.overlap(1, 2).into(),
        ]);
        t.push(row);
    }
    let mut run = Run::new(words, &cfg, common, "levels.csv", out);
    run.write_primary(&t)?;
    run.report("points", d.len());
    run.finish()
}

fn crossing(common: &Common, pair: (usize, usize), words: Vec<String>, out: &mut dyn Write) -> CmdResult {
    let cfg = resolve(common)?;
    let [lo, hi] = cfg.calibration.crossing_range;
    let c = find_avoided_crossing(&cfg.ground, &cfg.geometry, pair, (lo, hi))?;
    let mut t = Table::new(&["level_i", "level_j", "B_star_T", "gap_GHz"]);
    t.push(vec![pair.0.into(), pair.1.into(), c.field.into(), c.gap.into()]);
    let mut run = Run::new(words, &cfg, common, "crossing.csv", out);
    run.write_primary(&t)?;
    run.report("B_star_T", c.field);
    run.report("gap_GHz", c.gap);
    run.finish()
}

fn calibrate(
    common: &Common,
    what: Calibration,
    write_config: Option<PathBuf>,
    words: Vec<String>,
    out: &mut dyn Write,
) -> CmdResult {
    let mut cfg = resolve(common)?;
    let mut t = Table::new(&["quantity", "value"]);
    let (name, value, check_name, check) = match what {
        Calibration::Lambda => {
            let target = cfg.calibration.crossing_target;
            let p = calibrate_lambda_ground(target, &cfg.geometry, &cfg.ground)?;
            cfg.ground = p;
            let [lo, hi] = cfg.calibration.crossing_range;
            let c = find_avoided_crossing(&p, &cfg.geometry, (2, 3), (lo.min(0.25 * target), hi.max(4.0 * target)))?;
            ("lambda_so_GHz", p.lambda_so, "B_star_T", c.field)
        }
        Calibration::Laser => {
            let setup = cfg.lambda_setup()?;
            let gl = calibrate_laser_dephasing(&setup, cfg.field, cfg.calibration.dip_width)?;
            cfg.rates.gamma_laser_rel = gl;
            let sys = cfg.lambda_setup()?.lambda_at(cfg.field)?;
            let (fit, _) = measure_dip_width(&sys)?;
            (
                "gamma_laser_rel_per_s",
                gl,
                "fwhm_MHz",
                fit.fwhm.map_or(f64::NAN, |f| f.0),
            )
        }
    };
    t.push(vec![name.into(), value.into()]);
    t.push(vec![check_name.into(), check.into()]);
    let mut run = Run::new(words, &cfg, common, "calibrate.csv", out);
    run.write_primary(&t)?;
    if let Some(p) = write_config {
        run.write(&p, cfg.to_json().as_bytes())?;
    }
    run.report(name, value);
    run.report(check_name, check);
    run.finish()
}

fn spectrum_map(common: &Common, words: Vec<String>, out: &mut dyn Write) -> CmdResult {
    let cfg = resolve(common)?;
    let m = synthesize_spectrum_map(
        &cfg.ground,
        &cfg.excited,
        &cfg.geometry,
        &cfg.grids.field.values(),
        &cfg.grids.frequency.values(),
        cfg.transitions.line_fwhm,
        cfg.transitions.dipole_model,
    )?;
    let mut t = Table::new(&["B_T", "frequency_GHz", "intensity"]);
    for (i, b) in m.field_values.iter().enumerate() {
        for (j, f) in m.frequencies.iter().enumerate() {
            t.push(vec![(*b).into(), (*f).into(), m.intensity[i][j].into()]);
        }
    }
    let mut run = Run::new(words, &cfg, common, "spectrum_map.csv", out);
    run.write_primary(&t)?;
    run.report("fields", m.field_values.len());
    run.report("frequencies", m.frequencies.len());
    run.finish()
}

fn transitions(common: &Common, words: Vec<String>, out: &mut dyn Write) -> CmdResult {
    let cfg = resolve(common)?;
    let (_, _, table) = table_at_with(
        &cfg.ground,
        &cfg.excited,
        &cfg.geometry,
        cfg.field,
        cfg.transitions.dipole_model,
    )?;
    let b_star = cfg.lambda_setup()?.b_star;
    let partner = driven_partner(cfg.field, b_star);
    let d = identify_d_transitions(&table, partner, cfg.transitions.min_intensity).ok();
    let mut t = Table::new(&[
        "excited",
        "ground",
        "frequency_GHz",
        "intensity",
        "raw_intensity",
        "spin_character",
        "role",
    ]);
    for tr in &table.entries {
        let role = match d {
            Some(d) if (tr.excited, tr.ground) == (d.d1.excited, d.d1.ground) => "D1",
            Some(d) if (tr.excited, tr.ground) == (d.d2.excited, d.d2.ground) => "D2",
            _ => "",
        };
        let character = match tr.spin_character {
            cptsim::transitions::SpinCharacter::Conserving => "conserving",
            cptsim::transitions::SpinCharacter::Flipping => "flipping",
        };
        t.push(vec![
            tr.excited.into(),
            tr.ground.into(),
            tr.frequency.into(),
            tr.intensity.into(),
            tr.raw_intensity.into(),
            character.into(),
            role.into(),
        ]);
    }
    let mut run = Run::new(words, &cfg, common, "transitions.csv", out);
    run.write_primary(&t)?;
    run.report("B_T", cfg.field);
    run.report("B_star_T", b_star);
    run.report("lambda", if d.is_some() { "yes" } else { "no" });
    run.finish()
}

fn scan1d(common: &Common, words: Vec<String>, out: &mut dyn Write) -> CmdResult {
    let cfg = resolve(common)?;
    let sys = cfg.lambda_setup()?.lambda_at(cfg.field)?;
    let scan = cpt_scan_1d(&sys, &cfg.grids.detuning.values())?;
    let mut trace = Trace::series(scan.delta2.clone(), scan.signal[0].clone(), None)?;
    if cfg.noise.enabled {
        trace = inject_noise(&trace, cfg.noise.sigma_rel, cfg.noise.seed)?;
    }
    let mut run = Run::new(words, &cfg, common, "scan1d.csv", out);
    run.write_primary(&trace_table(&trace, "delta2_MHz", "rho_ee"))?;
    run.report("B_T", sys.field);
    run.report("partner", sys.partner);
    run.report("rabi_MHz", format!("{} {}", sys.rabi[0], sys.rabi[1]));
    run.finish()
}

fn scan2d(common: &Common, words: Vec<String>, out: &mut dyn Write) -> CmdResult {
    let cfg = resolve(common)?;
    let sys = cfg.lambda_setup()?.lambda_at(cfg.field)?;
    let axis = cfg.grids.detuning.values();
    let scan = cpt_scan_2d(&sys, &axis, &axis)?;
    let mut flat: Vec<f64> = scan.signal.iter().flatten().copied().collect();
    if cfg.noise.enabled {
        flat = inject_noise_values(&flat, cfg.noise.sigma_rel, cfg.noise.seed)?;
    }
    let mut t = Table::new(&["delta1_MHz", "delta2_MHz", "rho_ee"]);
    let n2 = scan.delta2.len();
    for (i, d1) in scan.delta1.iter().enumerate() {
        for (j, d2) in scan.delta2.iter().enumerate() {
            t.push(vec![(*d1).into(), (*d2).into(), flat[i * n2 + j].into()]);
        }
    }
    let mut run = Run::new(words, &cfg, common, "scan2d.csv", out);
    run.write_primary(&t)?;
    run.report("B_T", sys.field);
    run.report("points", flat.len());
    run.finish()
}

fn width_sweep(common: &Common, words: Vec<String>, out: &mut dyn Write) -> CmdResult {
    let cfg = resolve(common)?;
    let setup = cfg.lambda_setup()?;
    let sweep = dip_width_vs_field(&setup, &cfg.grids.field.values(), cfg.width_sweep.powers)?;
    let mut t = Table::new(&["B_T", "fwhm_MHz", "fwhm_err_MHz"]);
    for p in &sweep.points {
        t.push(vec![p.field.into(), p.fwhm.into(), p.fwhm_err.into()]);
    }
    let mut run = Run::new(words, &cfg, common, "width_sweep.csv", out);
    run.write_primary(&t)?;
    run.report("B_star_T", setup.b_star);
    run.report("points", sweep.points.len());
    run.report("skipped", sweep.skipped.len());
    if let Some(peak) = sweep.points.iter().max_by(|a, b| a.fwhm.total_cmp(&b.fwhm)) {
        run.report("peak_B_T", peak.field);
        run.report("peak_fwhm_MHz", peak.fwhm);
    }
    run.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FitKind {
    Lorentzian,
    Bloch,
    WidthModel,
}

fn fit(args: &FitArgs, kind: FitKind, words: Vec<String>, out: &mut dyn Write) -> CmdResult {
    let cfg = resolve(&args.common)?;
    let mut trace = read_trace(&args.input)?;
    if !args.use_sigma {
        trace.sigma = None;
    }
    let refit: Refit = match kind {
        FitKind::Lorentzian => Box::new(fit_lorentzian_dip),
        FitKind::Bloch => {
            let sys = cfg.lambda_setup()?.lambda_at(cfg.field)?;
            Box::new(move |t: &Trace| fit_bloch_model(t, &sys, &BlochFitOptions::default()))
        }
        FitKind::WidthModel => {
            let levels = level_sweep(&cfg.ground, &cfg.geometry, &trace.x)?;
            let schedule = PairSchedule::Crossing {
                b_star: cfg.lambda_setup()?.b_star,
            };
            let temperature = cfg.rates.temperature;
            Box::new(move |t: &Trace| fit_width_model(t, &levels, schedule, temperature))
        }
    };
    let result = refit(&trace)?;
    let spread = match args.bootstrap {
        Some(n) => Some(bootstrap_std(&trace, &result.fitted, n, cfg.noise.seed, &refit)?),
        None => None,
    };

    let mut header: Vec<String> = Vec::new();
    let mut row: Vec<Cell> = Vec::new();
    for (k, name) in result.names.iter().enumerate() {
        header.push(name.clone());
        row.push(result.params[k].into());
        header.push(format!("{name}_err"));
        row.push(result.uncertainties[k].into());
        if let Some(s) = &spread {
            header.push(format!("{name}_bootstrap_sd"));
            row.push(s[k].into());
        }
    }
    let mut extra = |key: &str, v: Cell| {
        header.push(key.to_string());
        row.push(v);
    };
    if let Some((w, e)) = result.fwhm {
        extra("fwhm_MHz", w.into());
        extra("fwhm_err_MHz", e.into());
    }
    if let Some((g, e)) = result.gamma_g {
        extra("gamma_g_per_s", g.into());
        extra("gamma_g_err_per_s", e.into());
        extra("t2_star_s", result.t2_star.unwrap_or(f64::NAN).into());
    }
    if let Some(r2) = result.r_squared {
        extra("r_squared", r2.into());
    }
    extra("residual_norm", result.residual_norm.into());
    extra("converged", Cell::Int(result.converged as i64));
    extra("iterations", result.iterations.into());
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = Table::new(&header_refs);
    t.push(row);

    let default_name = match kind {
        FitKind::Lorentzian => "fit_lorentzian.csv",
        FitKind::Bloch => "fit_bloch.csv",
        FitKind::WidthModel => "fit_width_model.csv",
    };
    let mut run = Run::new(words, &cfg, &args.common, default_name, out);
    run.write_primary(&t)?;
    let _ = write!(run.out, "{}", result.report());
    if let Some(s) = &spread {
        for (name, sd) in result.names.iter().zip(s) {
            run.report(&format!("{name}_bootstrap_sd"), format!("{sd:.3e}"));
        }
    }
    run.finish()
}

fn noise(
    common: &Common,
    input: &Path,
    sigma: Option<f64>,
    seed: Option<u64>,
    words: Vec<String>,
    out: &mut dyn Write,
) -> CmdResult {
    let mut cfg = resolve(common)?;
    if let Some(s) = sigma {
        cfg.noise.sigma_rel = s;
    }
    if let Some(s) = seed {
        cfg.noise.seed = s;
    }
    cfg.validate()?;
    let trace = read_trace(input)?;
    let noisy = inject_noise(&trace, cfg.noise.sigma_rel, cfg.noise.seed)?;
    let mut run = Run::new(words, &cfg, common, "noisy.csv", out);
    run.write_primary(&trace_table(&noisy, "x", "y"))?;
    run.report("sigma_rel", cfg.noise.sigma_rel);
    run.report("seed", cfg.noise.seed);
    run.finish()
}
