//! Command-line front end: `run`, `validate` and `info`.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::experiments::{
    build_exp1, build_exp1_from_image, build_exp2, build_exp2_from_image, build_exp3, check_side,
    image, run_comparison, ExperimentError, ExperimentInstance,
};
use crate::validate::{prox_catalog, run_validation};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Random instances per prox in `validate`.
pub const VALIDATION_INSTANCES: usize = 100;

#[derive(Debug, Parser)]
#[command(name = "proxmix", version, about = "Proximal comixture experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an experiment, compare its two formulations, write CSV and images.
    Run(ExperimentArgs),
    /// Check every closed-form prox and operator against independent oracles.
    Validate(ValidateArgs),
    /// Describe an experiment instance without solving it.
    Info(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Exp1,
    Exp2,
    Exp3,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Experiment::Exp1 => "exp1",
            Experiment::Exp2 => "exp2",
            Experiment::Exp3 => "exp3",
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    /// Experiment to build (alternatively `--experiment`).
    #[arg(value_enum)]
    pub name: Option<Experiment>,
    #[arg(long, value_enum)]
    pub experiment: Option<Experiment>,
    /// Image side for exp1/exp2 (power of two, at least 32).
    #[arg(long, default_value_t = 64)]
    pub side: usize,
    /// Signal length for exp3.
    #[arg(long, default_value_t = 2255)]
    pub n: usize,
    /// Number of measurements for exp3.
    #[arg(long, default_value_t = 2000)]
    pub m: usize,
    /// Number of groups for exp3.
    #[arg(long, default_value_t = 50)]
    pub p: usize,
    /// Plotted iteration budget [default: 200 for exp1/exp2, 1000 for exp3].
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub record_every: usize,
    /// Ground-truth image (binary PGM) for exp1/exp2.
    #[arg(long)]
    pub image: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::InvalidSide(_)
            | ExperimentError::InconsistentGeometry { .. }
            | ExperimentError::InvalidImage(_)
            | ExperimentError::MethodMismatch { .. }
            | ExperimentError::InvalidIterations => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl ExperimentArgs {
    fn experiment(&self) -> Result<Experiment, Failure> {
        match (self.name, self.experiment) {
            (Some(a), Some(b)) if a != b => Err(Failure::Config(format!(
                "conflicting experiments `{a}` and `{b}`"
            ))),
            (Some(e), _) | (None, Some(e)) => Ok(e),
            (None, None) => Err(Failure::Config(
                "an experiment is required (exp1, exp2 or exp3)".into(),
            )),
        }
    }

    fn iters(&self, exp: Experiment) -> usize {
        self.iters.unwrap_or(match exp {
            Experiment::Exp3 => 1000,
            _ => 200,
        })
    }

    fn check(&self, exp: Experiment) -> Result<(), Failure> {
        if self.iters(exp) == 0 {
            return Err(Failure::Config("--iters must be at least 1".into()));
        }
        if self.record_every == 0 {
            return Err(Failure::Config("--record-every must be at least 1".into()));
        }
        match exp {
            Experiment::Exp3 if self.image.is_some() => Err(Failure::Config(
                "--image applies to exp1 and exp2 only".into(),
            )),
            Experiment::Exp3 => Ok(()),
            _ if self.image.is_some() => Ok(()),
            _ => check_side(self.side).map_err(Failure::from),
        }
    }

    fn build(&self, exp: Experiment) -> Result<ExperimentInstance, Failure> {
        let loaded = match &self.image {
            Some(path) => Some(image::read_pgm(path).map_err(|e| {
                Failure::Config(format!("cannot read image {}: {e}", path.display()))
            })?),
            None => None,
        };
        let inst = match (exp, loaded) {
            (Experiment::Exp1, Some((dims, img))) => build_exp1_from_image(dims, img, self.seed),
            (Experiment::Exp1, None) => build_exp1(self.side, self.seed),
            (Experiment::Exp2, Some((dims, img))) => build_exp2_from_image(dims, img, self.seed),
            (Experiment::Exp2, None) => build_exp2(self.side, self.seed),
            (Experiment::Exp3, _) => build_exp3(self.n, self.m, self.p, self.seed),
        };
        Ok(inst?)
    }
}

fn ensure_writable(dir: &Path) -> Result<(), Failure> {
    let fail = |e: std::io::Error| {
        Failure::Config(format!("output directory {} is not writable: {e}", dir.display()))
    };
    fs::create_dir_all(dir).map_err(fail)?;
    let probe = dir.join(".proxmix-write-probe");
    fs::write(&probe, b"").map_err(fail)?;
    fs::remove_file(&probe).map_err(fail)
}

fn cmd_run(args: &ExperimentArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let exp = args.experiment()?;
    args.check(exp)?;
    ensure_writable(&args.out)?;
    let inst = args.build(exp)?;
    let (a, b) = inst.default_methods();
    let cmp = run_comparison(&inst, a, b, args.iters(exp), args.record_every)?;

    let io = |e: std::io::Error| Failure::Runtime(e.to_string());
    let csv_path = args.out.join(format!("{exp}_dist.csv"));
    fs::write(&csv_path, cmp.csv()).map_err(io)?;
    for mr in &cmp.runs {
        let last = mr.run.history.last().expect("at least one row");
        writeln!(
            out,
            "{}: {} iterations, final err_db {:.2} dB, residual {:.3e}",
            mr.method,
            mr.run.iterations_used,
            last.error_db.unwrap_or(f64::NAN),
            last.residual
        )
        .map_err(io)?;
        if let Some(dims) = inst.dims() {
            let path = args.out.join(format!("{exp}_{}.pgm", mr.method));
            image::write_pgm(&path, dims, &mr.run.final_iterate).map_err(io)?;
        }
    }
    writeln!(out, "wrote {}", csv_path.display()).map_err(io)?;
    Ok(())
}

fn cmd_info(args: &ExperimentArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let exp = args.experiment()?;
    args.check(exp)?;
    let inst = args.build(exp)?;
    let io = |e: std::io::Error| Failure::Runtime(e.to_string());
    let (a, b) = inst.default_methods();
    let (tau, sigma) = inst.condat_vu_steps();
    let mut text = format!(
        "{} (seed {})\nscale: {:?}\nambient dimension: {}\nf: {}\nterms:\n",
        inst.name,
        inst.seed,
        inst.scale,
        inst.ambient_dim(),
        inst.f.label()
    );
    for t in inst.comixture.terms() {
        text.push_str(&format!(
            "  {:.4} * {} o {}\n",
            t.weight,
            t.func.label(),
            t.op.label()
        ));
    }
    text.push_str(&format!(
        "sum ||L_k||^2: {:.4}\ncondat_vu steps: tau = {tau:.4e}, sigma = {sigma:.4e}\nmethods: {a} vs {b}\n",
        inst.comixture.squared_norm_sum()
    ));
    if let Some(s) = &inst.smooth {
        text.push_str(&format!("gradient Lipschitz constant: {:.6}\n", s.beta));
    }
    out.write_all(text.as_bytes()).map_err(io)
}

fn cmd_validate(args: &ValidateArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Runtime(e.to_string());
    let checks = run_validation(&prox_catalog(), VALIDATION_INSTANCES, args.seed);
    let mut failed = 0;
    for c in &checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        failed += usize::from(!c.passed);
        writeln!(out, "{tag} {}: {}", c.name, c.detail).map_err(io)?;
    }
    writeln!(out, "{}/{} checks passed", checks.len() - failed, checks.len()).map_err(io)?;
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Runtime(format!("{failed} check(s) failed")))
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.exit_code() == 0 {
                let _ = write!(out, "{}", e.render());
                return EXIT_OK;
            }
            let _ = write!(err, "{}", e.render());
            return EXIT_CONFIG;
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, out),
        Command::Info(a) => cmd_info(a, out),
        Command::Validate(a) => cmd_validate(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Config(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_CONFIG
        }
        Err(Failure::Runtime(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_RUNTIME
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn invoke(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("proxmix").chain(args.iter().copied());
        let code = run(argv, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn config_errors_exit_with_two() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        for args in [
            vec!["run", "exp1", "--side", "63", "--out", out],
            vec!["run", "exp2", "--side", "16", "--out", out],
            vec!["run", "exp3", "--n", "100", "--out", out],
            vec!["run", "--out", out],
            vec!["run", "exp1", "--experiment", "exp2", "--out", out],
            vec!["run", "exp1", "--iters", "0", "--out", out],
            vec!["run", "exp1", "--bogus"],
            vec!["frobnicate"],
        ] {
            let (code, _, err) = invoke(&args);
            assert_eq!(code, EXIT_CONFIG, "{args:?}: {err}");
        }
    }

    #[test]
    fn unwritable_output_is_rejected_before_work() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain-file");
        fs::write(&file, b"x").unwrap();
        let target = file.join("sub");
        let (code, out, _) = invoke(&["run", "exp1", "--side", "32", "--out", target.to_str().unwrap()]);
        assert_eq!(code, EXIT_CONFIG);
        assert!(out.is_empty());
    }

    #[test]
    fn run_writes_csv_and_images() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let (code, stdout, err) = invoke(&[
            "run", "--experiment", "exp1", "--side", "32", "--iters", "5", "--out", out,
        ]);
        assert_eq!(code, EXIT_OK, "{err}");
        assert!(stdout.contains("condat_vu: 5 iterations"));
        assert!(stdout.contains("douglas_rachford: 5 iterations"));
        let csv = fs::read_to_string(dir.path().join("exp1_dist.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 2 * 6);
        for m in ["condat_vu", "douglas_rachford"] {
            let (dims, img) = image::read_pgm(&dir.path().join(format!("exp1_{m}.pgm"))).unwrap();
            assert_eq!((dims.rows, dims.cols), (32, 32));
            assert!(img.iter().all(|v| (0.0..=255.0).contains(v)));
        }
    }

    #[test]
    fn run_accepts_a_pgm_ground_truth() {
        let dir = tempfile::tempdir().unwrap();
        let truth = dir.path().join("truth.pgm");
        let dims = crate::linops::ImageDims::square(32);
        image::write_pgm(&truth, dims, &image::phantom(32)).unwrap();
        let out = dir.path().join("out");
        let (code, _, err) = invoke(&[
            "run", "exp2", "--image", truth.to_str().unwrap(), "--iters", "3",
            "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_OK, "{err}");
        assert!(out.join("exp2_douglas_rachford.pgm").exists());

        let bad = dir.path().join("bad.pgm");
        fs::write(&bad, b"not an image").unwrap();
        let (code, _, _) = invoke(&["run", "exp1", "--image", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code, EXIT_CONFIG);
    }

    #[test]
    fn info_describes_the_instance() {
        let (code, out, _) = invoke(&["info", "exp1", "--side", "32"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("0.3750 * huber["), "{out}");
        assert!(out.contains("condat_vu vs douglas_rachford"));
        let (code, out, _) = invoke(&["info", "exp3", "--n", "95", "--m", "40", "--p", "2"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("condat_vu vs forward_backward"));
    }

    #[test]
    fn help_exits_cleanly() {
        let (code, out, _) = invoke(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("validate"));
    }
}
