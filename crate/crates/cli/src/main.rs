use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use drcn_cli::figure::{self, FigureOptions};
use drcn_cli::format::sig15;
use drcn_cli::reference::{FigureName, ReferenceDataset};
use drcn_cli::sweep::{self, Schemes, Spacing, SweepSpec, SweepVar, DEFAULT_TOL_SEP, DEFAULT_TOL_SIM};
use drcn_cli::CliError;
use drcn_core::model::RawConfig;
use drcn_core::{
    baseline_no_cooperation, optimize_sep, optimize_sim, sim_components, validate_config, CfExponent,
    NetworkConfig, SearchResult, SepSolution, TimeShare,
};

#[derive(Parser)]
#[command(name = "drcn", version, about = "Symmetric rates for a two-user device-relaying cellular network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize the selected schemes at one operating point.
    Rate(RateArgs),
    /// Sweep h3 or SNR2 and write a CSV.
    Sweep(SweepArgs),
    /// Recompute a reference figure and compare against the shipped data.
    Figure(FigureArgs),
    /// Recommend switching device relaying on when its gain reaches a threshold.
    Threshold(ThresholdArgs),
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Gain between user 2 (the weaker user) and the BS.
    #[arg(long, allow_negative_numbers = true)]
    h1: f64,
    /// Gain between user 1 (the stronger, relaying user) and the BS.
    #[arg(long, allow_negative_numbers = true)]
    h2: f64,
    /// D2D gain between the users.
    #[arg(long, allow_negative_numbers = true)]
    h3: Option<f64>,
    /// Common power for both users and the base station (linear).
    #[arg(long, allow_negative_numbers = true, conflicts_with_all = ["p1", "p2", "p3"])]
    p: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    p1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    p2: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    p3: Option<f64>,
}

impl ConfigArgs {
    fn raw(&self, default_h3: Option<f64>, default_p: Option<f64>) -> anyhow::Result<RawConfig> {
        let h3 = self.h3.or(default_h3).ok_or_else(|| usage("--h3 is required"))?;
        let (p1, p2, p3) = match (self.p, self.p1, self.p2, self.p3) {
            (Some(p), ..) => (p, p, p),
            (None, Some(a), Some(b), Some(c)) => (a, b, c),
            (None, None, None, None) if default_p.is_some() => {
                let p = default_p.unwrap_or_default();
                (p, p, p)
            }
            _ => return Err(usage("give either --p or all of --p1 --p2 --p3")),
        };
        Ok(RawConfig { h1: self.h1, h2: self.h2, h3, p1, p2, p3 })
    }

    fn config(&self) -> anyhow::Result<NetworkConfig> {
        Ok(validate_config(self.raw(None, None)?).map_err(CliError::from)?)
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum SchemeArg {
    Sim,
    Sep,
    Baseline,
    All,
}

fn schemes(args: &[SchemeArg]) -> Schemes {
    let mut s = Schemes::default();
    for a in args {
        match a {
            SchemeArg::Sim => s.sim = true,
            SchemeArg::Sep => s.sep = true,
            SchemeArg::Baseline => s.baseline = true,
            SchemeArg::All => s = Schemes::ALL,
        }
    }
    s
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Rate tolerance for every scheme [default: 1e-3 sim, 5e-3 sep/baseline].
    #[arg(long)]
    tol: Option<f64>,
    /// Exponent of |h3| in the compress-forward term (2 or 3).
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(2..=3))]
    cf_exponent: u8,
}

impl SolverArgs {
    fn tolerances(&self) -> anyhow::Result<(f64, f64)> {
        match self.tol {
            Some(t) if !(t > 0.0 && t.is_finite()) => Err(usage("--tol must be positive")),
            Some(t) => Ok((t, t)),
            None => Ok((DEFAULT_TOL_SIM, DEFAULT_TOL_SEP)),
        }
    }

    fn exponent(&self) -> CfExponent {
        CfExponent::try_from(self.cf_exponent).expect("range-checked by clap")
    }
}

#[derive(Args)]
struct RateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Schemes to evaluate, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "all")]
    scheme: Vec<SchemeArg>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Copy, Clone, ValueEnum)]
enum VarArg {
    H3,
    Snr2,
}

#[derive(Args)]
struct SweepArgs {
    /// Fixed fields; the swept ones (h3, or the powers for snr2) may be omitted.
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, value_enum)]
    var: VarArg,
    /// First abscissa (h3, or SNR2 in dB).
    #[arg(long, allow_negative_numbers = true)]
    from: f64,
    #[arg(long, allow_negative_numbers = true)]
    to: f64,
    #[arg(long)]
    points: usize,
    /// Logarithmic spacing of the abscissas.
    #[arg(long)]
    log: bool,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "all")]
    scheme: Vec<SchemeArg>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FigureArgs {
    #[arg(value_parser = parse_figure)]
    name: FigureName,
    /// Compute only this compress-forward exponent; both when omitted.
    #[arg(long, value_parser = clap::value_parser!(u8).range(2..=3))]
    cf_exponent: Option<u8>,
    #[arg(long)]
    tol: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ThresholdArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Minimum rate gain (bits/channel use) that justifies relaying.
    #[arg(long, allow_negative_numbers = true)]
    gain: f64,
    #[command(flatten)]
    solver: SolverArgs,
}

fn parse_figure(s: &str) -> Result<FigureName, String> {
    s.parse::<FigureName>().map_err(|e| e.to_string())
}

/// Marker for errors that should exit with the usage code.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct Usage(String);

fn usage(msg: &str) -> anyhow::Error {
    Usage(msg.to_string()).into()
}

/// A figure whose checks did not all pass.
#[derive(Debug, thiserror::Error)]
#[error("figure regression failed")]
struct Regression;

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Regression>().is_some() {
        return 2;
    }
    if err.downcast_ref::<Usage>().is_some() {
        return 1;
    }
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CliError>() {
            return e.exit_code() as u8;
        }
        if cause.downcast_ref::<drcn_core::Error>().is_some() {
            return 1;
        }
        if cause.downcast_ref::<io::Error>().is_some() {
            return 3;
        }
    }
    1
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                1
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    let result = match cli.command {
        Command::Rate(a) => cmd_rate(a, out),
        Command::Sweep(a) => cmd_sweep(a, out, err),
        Command::Figure(a) => cmd_figure(a, out),
        Command::Threshold(a) => cmd_threshold(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            exit_code(&e)
        }
    }
}

fn main() -> ExitCode {
    let code = run(std::env::args_os(), &mut io::stdout().lock(), &mut io::stderr().lock());
    ExitCode::from(code)
}

fn print_sim(out: &mut dyn Write, cfg: &NetworkConfig, r: &SearchResult<TimeShare>) -> io::Result<()> {
    let ts = &r.argmax;
    let c = sim_components(cfg, ts);
    writeln!(out, "simultaneous uplink/downlink")?;
    writeln!(out, "  rate       {} bits/channel use", sig15(r.value))?;
    writeln!(out, "  time share alpha {:.6} beta {:.6} gamma {:.6}", ts.alpha(), ts.beta(), ts.gamma())?;
    writeln!(
        out,
        "  components r13 {:.6} r31 {:.6} ru2 {:.6} ru3 {:.6} rb {:.6}",
        c.r13_bar, c.r31_bar, c.ru2_bar, c.ru3_bar, c.rb_bar
    )?;
    writeln!(out, "  search     {} evaluations, converged {}", r.evaluations, r.converged)?;
    writeln!(
        out,
        "RESULT scheme=sim rate={} alpha={} beta={} gamma={} evaluations={} converged={}",
        sig15(r.value),
        sig15(ts.alpha()),
        sig15(ts.beta()),
        sig15(ts.gamma()),
        r.evaluations,
        r.converged
    )
}

fn print_sep(out: &mut dyn Write, scheme: &str, r: &SearchResult<SepSolution>) -> io::Result<()> {
    let s = &r.argmax;
    let title = if scheme == "sep" { "separated uplink/downlink" } else { "no cooperation (baseline)" };
    writeln!(out, "{title}")?;
    writeln!(out, "  rate       {} bits/channel use", sig15(r.value))?;
    writeln!(
        out,
        "  outer      tau {:.6} p1u {:.6} p2u {:.6}  (uplink {:.6}, downlink {:.6})",
        s.point.tau, s.point.p1u, s.point.p2u, s.uplink_rate, s.downlink_rate
    )?;
    if let Some(m) = &s.mac {
        writeln!(
            out,
            "  mac split  p21 {:.6} p31 {:.6} pc1 {:.6} | p12 {:.6} p32 {:.6} pc2 {:.6}",
            m.p21, m.p31, m.pc1, m.p12, m.p32, m.pc2
        )?;
    }
    if let Some(b) = &s.bc {
        writeln!(out, "  bc split   pc3 {:.6} p23 {:.6} p13 {:.6} p2 {:.6}", b.pc3, b.p23, b.p13, b.p2)?;
    }
    writeln!(out, "  search     {} evaluations, converged {}", r.evaluations, r.converged)?;
    writeln!(
        out,
        "RESULT scheme={scheme} rate={} tau={} p1u={} p2u={} uplink={} downlink={} evaluations={} converged={}",
        sig15(r.value),
        sig15(s.point.tau),
        sig15(s.point.p1u),
        sig15(s.point.p2u),
        sig15(s.uplink_rate),
        sig15(s.downlink_rate),
        r.evaluations,
        r.converged
    )
}

fn cmd_rate(a: RateArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let cfg = a.config.config()?;
    let (tol_sim, tol_sep) = a.solver.tolerances()?;
    let schemes = schemes(&a.scheme);
    if schemes.sim {
        let r = optimize_sim(&cfg, tol_sim).map_err(CliError::from)?;
        print_sim(out, &cfg, &r)?;
    }
    if schemes.sep {
        let r = optimize_sep(&cfg, tol_sep, a.solver.exponent()).map_err(CliError::from)?;
        print_sep(out, "sep", &r)?;
    }
    if schemes.baseline {
        let r = baseline_no_cooperation(&cfg, tol_sep).map_err(CliError::from)?;
        print_sep(out, "baseline", &r)?;
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> anyhow::Result<()> {
    let (tol_sim, tol_sep) = a.solver.tolerances()?;
    let var = match a.var {
        VarArg::H3 => SweepVar::H3,
        VarArg::Snr2 => SweepVar::Snr2Db,
    };
    // Swept fields get placeholders; they are overwritten per row.
    let base = match var {
        SweepVar::H3 => a.config.raw(Some(0.0), None)?,
        SweepVar::Snr2Db => a.config.raw(None, Some(1.0))?,
    };
    let spec = SweepSpec {
        var,
        from: a.from,
        to: a.to,
        points: a.points,
        spacing: if a.log { Spacing::Log } else { Spacing::Linear },
        base,
        schemes: schemes(&a.scheme),
        cf_exponent: a.solver.exponent(),
        tol_sim,
        tol_sep,
    };
    let rows = sweep::run_sweep(&spec)?;
    match &a.out {
        Some(path) => {
            let f = File::create(path).map_err(|e| CliError::io(path, e))?;
            sweep::write_sweep_csv(&rows, &spec.schemes, BufWriter::new(f))?;
            writeln!(err, "wrote {} rows to {}", rows.len(), path.display())?;
        }
        None => sweep::write_sweep_csv(&rows, &spec.schemes, out)?,
    }
    Ok(())
}

fn cmd_figure(a: FigureArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let mut opts = FigureOptions::default();
    if let Some(e) = a.cf_exponent {
        opts.exponents = vec![CfExponent::try_from(e).map_err(CliError::from)?];
    }
    if let Some(t) = a.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(usage("--tol must be positive"));
        }
        opts.tol_sim = t;
        opts.tol_sep = t;
    }
    // fail on an unusable output directory before the long computation
    fs::create_dir_all(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    let reference = ReferenceDataset::load(a.name)?;
    let computed = figure::compute_figure(&reference, &opts)?;
    let report = figure::evaluate(&computed, &reference);
    let paths = figure::write_outputs(&a.out, &computed, &reference, &report)?;
    write!(out, "{}", report.summary_text())?;
    for p in [&paths.computed, &paths.deviations, &paths.reference, &paths.summary, &paths.script] {
        writeln!(out, "wrote {}", p.display())?;
    }
    writeln!(
        out,
        "FIGURE name={} status={} best_cf_exponent={}",
        a.name,
        if report.passed() { "PASS" } else { "FAIL" },
        report.best_exponent.map_or("-".to_string(), |e| e.to_string())
    )?;
    if report.passed() {
        Ok(())
    } else {
        Err(Regression.into())
    }
}

fn cmd_threshold(a: ThresholdArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    if !(a.gain >= 0.0 && a.gain.is_finite()) {
        return Err(usage("--gain must be a finite value >= 0"));
    }
    let cfg = a.config.config()?;
    let (tol_sim, tol_sep) = a.solver.tolerances()?;
    let sim = optimize_sim(&cfg, tol_sim).map_err(CliError::from)?.value;
    let base = baseline_no_cooperation(&cfg, tol_sep).map_err(CliError::from)?.value;
    let gain = sim - base;
    let decision = if gain >= a.gain { "ON" } else { "OFF" };
    writeln!(out, "relaying rate     {} bits/channel use", sig15(sim))?;
    writeln!(out, "no-cooperation    {} bits/channel use", sig15(base))?;
    writeln!(out, "gain              {} (threshold {})", sig15(gain), sig15(a.gain))?;
    writeln!(out, "relay {decision}")?;
    writeln!(
        out,
        "THRESHOLD decision={decision} gain={} r_sim={} r_nocoop={} threshold={}",
        sig15(gain),
        sig15(sim),
        sig15(base),
        sig15(a.gain)
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    struct Outcome {
        code: u8,
        stdout: String,
        stderr: String,
    }

    fn drcn(args: &str) -> Outcome {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("drcn").chain(args.split_whitespace()), &mut out, &mut err);
        Outcome {
            code,
            stdout: String::from_utf8(out).unwrap(),
            stderr: String::from_utf8(err).unwrap(),
        }
    }

    /// `key=value` pairs of the first line starting with `tag`.
    fn fields(stdout: &str, tag: &str) -> HashMap<String, String> {
        let line = stdout.lines().find(|l| l.starts_with(tag)).expect("tagged line");
        line.split_whitespace()
            .filter_map(|kv| kv.split_once('='))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    fn num(map: &HashMap<String, String>, key: &str) -> f64 {
        map[key].parse().unwrap()
    }

    fn csv_rows(text: &str) -> Vec<Vec<String>> {
        text.lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
    }

    #[test]
    fn rate_sim_at_fig3_plateau() {
        let o = drcn("rate --h1 0.15 --h2 1 --h3 1 --p 100 --scheme sim");
        assert_eq!(o.code, 0, "{}", o.stderr);
        let r = num(&fields(&o.stdout, "RESULT scheme=sim"), "rate");
        assert!((1.66276..=1.66476).contains(&r), "{r}");
        assert!(o.stdout.contains("time share alpha"));
    }

    #[test]
    fn rate_baseline_at_fig4_20db() {
        let o = drcn("rate --h1 0.5 --h2 1 --h3 2 --p 100 --scheme baseline");
        assert_eq!(o.code, 0, "{}", o.stderr);
        let r = num(&fields(&o.stdout, "RESULT scheme=baseline"), "rate");
        assert!((r - 0.8491).abs() <= 0.03, "{r}");
        assert!(!o.stdout.contains("scheme=sim"));
    }

    #[test]
    fn invalid_configs_exit_with_usage_code() {
        let o = drcn("rate --h1 1 --h2 0.5 --h3 1 --p 100");
        assert_eq!(o.code, 1);
        assert!(o.stderr.contains("ordering"), "{}", o.stderr);
        let o = drcn("rate --h1 0.1 --h2 0.5 --h3 1 --p1 -1 --p2 1 --p3 1");
        assert_eq!(o.code, 1);
        assert!(o.stderr.contains("p1"), "{}", o.stderr);
        for bad in [
            "rate --h1 0.1",
            "rate --h1 0.1 --h2 1 --p 1",
            "rate --h1 0.1 --h2 1 --h3 1 --p 1 --p1 2",
            "rate --h1 0.1 --h2 1 --h3 1 --p1 2",
            "rate --h1 0.1 --h2 1 --h3 1 --p 1 --cf-exponent 4",
            "rate --h1 0.1 --h2 1 --h3 1 --p 1 --scheme fast",
            "rate --h1 0.1 --h2 1 --h3 1 --p 1 --tol 0",
            "figure fig5",
            "threshold --h1 0.1 --h2 1 --h3 1 --p 1 --gain -1",
            "sweep --h1 0.1 --h2 1 --p 1 --var h3 --from 1 --to 0.5 --points 3",
            "sweep --h1 0.1 --h2 1 --p 1 --var h3 --from 0 --to 1 --points 3 --log",
            "launch",
        ] {
            assert_eq!(drcn(bad).code, 1, "{bad}");
        }
    }

    #[test]
    fn help_and_version_succeed() {
        for args in ["--help", "rate --help", "--version"] {
            let o = drcn(args);
            assert_eq!(o.code, 0, "{args}");
            assert!(!o.stdout.is_empty());
        }
    }

    #[test]
    fn two_point_sweep_has_exact_endpoints() {
        let o = drcn("sweep --h1 0.15 --h2 1 --p 100 --var h3 --from 0.3 --to 0.7 --points 2 --scheme sim");
        assert_eq!(o.code, 0, "{}", o.stderr);
        let rows = csv_rows(&o.stdout);
        assert_eq!(rows[0], ["abscissa", "r_sim"]);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1][0], "0.3");
        assert_eq!(rows[2][0], "0.7");
        assert!(o.stdout.ends_with('\n') && !o.stdout.contains('\r'));
    }

    #[test]
    fn fig3_shaped_sweep_has_flat_baseline_and_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let path = |n: &str| dir.path().join(n).display().to_string();
        let args = "sweep --h1 0.15 --h2 1 --p 100 --var h3 --from 0.01 --to 10 --points 31 --log --scheme sim,baseline";
        for name in ["a.csv", "b.csv"] {
            let o = drcn(&format!("{args} --out {}", path(name)));
            assert_eq!(o.code, 0, "{}", o.stderr);
        }
        let a = std::fs::read(path("a.csv")).unwrap();
        assert_eq!(a, std::fs::read(path("b.csv")).unwrap());
        let rows = csv_rows(std::str::from_utf8(&a).unwrap());
        assert_eq!(rows[0], ["abscissa", "r_sim", "r_nocoop"]);
        assert_eq!(rows.len(), 32);
        assert_eq!(rows[1][0], "0.01");
        assert_eq!(rows[31][0], "10");
        assert!(rows[1..].iter().all(|r| r[2] == rows[1][2]));
        // fifteen significant digits
        let sig: usize = rows[1][1].chars().filter(char::is_ascii_digit).count();
        assert!(sig <= 16, "{}", rows[1][1]);
    }

    #[test]
    fn fig4_shaped_sweep_hits_plateau_at_20db() {
        let o = drcn("sweep --h1 0.5 --h2 1 --h3 2 --var snr2 --from -10 --to 30 --points 5 --scheme sim");
        assert_eq!(o.code, 0, "{}", o.stderr);
        let rows = csv_rows(&o.stdout);
        let row = rows.iter().find(|r| r[0] == "20").expect("20 dB row");
        let v: f64 = row[1].parse().unwrap();
        assert!((v - 1.6628).abs() <= 2e-3, "{v}");
    }

    #[test]
    fn unwritable_outputs_exit_with_io_code() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("no/such/dir/out.csv");
        let o = drcn(&format!(
            "sweep --h1 0.15 --h2 1 --p 100 --var h3 --from 0.1 --to 1 --points 2 --scheme sim --out {}",
            missing.display()
        ));
        assert_eq!(o.code, 3, "{}", o.stderr);
        let file = dir.path().join("plain");
        std::fs::write(&file, "x").unwrap();
        let o = drcn(&format!("figure fig3 --out {}", file.join("sub").display()));
        assert_eq!(o.code, 3, "{}", o.stderr);
    }

    #[test]
    fn threshold_decisions() {
        let o = drcn("threshold --h1 0.15 --h2 1 --h3 10 --p 100 --gain 0.5");
        assert_eq!(o.code, 0, "{}", o.stderr);
        let f = fields(&o.stdout, "THRESHOLD");
        assert_eq!(f["decision"], "ON");
        assert!(o.stdout.contains("relay ON"));
        let (gain, sim, base) = (num(&f, "gain"), num(&f, "r_sim"), num(&f, "r_nocoop"));
        assert!((gain - (sim - base)).abs() <= 1e-12);

        let o = drcn("threshold --h1 0.15 --h2 1 --h3 0 --p 100 --gain 0.5");
        let f = fields(&o.stdout, "THRESHOLD");
        assert_eq!(f["decision"], "OFF");
        assert!(num(&f, "gain") < 0.5);

        for h3 in ["0.01", "0.2512", "10"] {
            let o = drcn(&format!("threshold --h1 0.15 --h2 1 --h3 {h3} --p 100 --gain 0"));
            assert_eq!(fields(&o.stdout, "THRESHOLD")["decision"], "ON", "{h3}");
        }
    }
}
