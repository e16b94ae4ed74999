//! Recomputes the comparison figures and checks them against the reference
//! curves.

use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use drcn_core::{baseline_no_cooperation, optimize_sep, optimize_sim, CfExponent};
use rayon::prelude::*;

use crate::error::{CliError, Result};
use crate::format::sig15;
use crate::reference::{Curve, FigureName, ReferenceDataset};
use crate::sweep::{DEFAULT_TOL_SEP, DEFAULT_TOL_SIM};

/// Threshold below which a computed point counts as under the reference value.
pub const BELOW_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct FigureOptions {
    pub exponents: Vec<CfExponent>,
    pub tol_sim: f64,
    pub tol_sep: f64,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self {
            exponents: vec![CfExponent::Squared, CfExponent::Cubed],
            tol_sim: DEFAULT_TOL_SIM,
            tol_sep: DEFAULT_TOL_SEP,
        }
    }
}

fn exp_index(e: CfExponent) -> usize {
    match e {
        CfExponent::Squared => 0,
        CfExponent::Cubed => 1,
    }
}

fn sep_label(e: CfExponent) -> String {
    format!("r_sep_cf{}", e.value())
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ComputedRow {
    pub abscissa: f64,
    pub r_sim: Option<f64>,
    /// Indexed by exponent: `[cf2, cf3]`.
    pub r_sep: [Option<f64>; 2],
    pub r_nocoop: Option<f64>,
}

impl ComputedRow {
    pub fn sep(&self, e: CfExponent) -> Option<f64> {
        self.r_sep[exp_index(e)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComputedFigure {
    pub figure: FigureName,
    pub exponents: Vec<CfExponent>,
    pub rows: Vec<ComputedRow>,
}

impl ComputedFigure {
    pub fn row_at(&self, abscissa: f64) -> Option<&ComputedRow> {
        self.rows.iter().find(|r| r.abscissa == abscissa)
    }
}

/// Evaluates every computable curve at the reference abscissas. The
/// baseline is recomputed at each point even where it cannot depend on it.
pub fn compute_figure(reference: &ReferenceDataset, opts: &FigureOptions) -> Result<ComputedFigure> {
    let fig = reference.figure;
    let rows = reference
        .abscissas()
        .into_par_iter()
        .map(|x| -> Result<ComputedRow> {
            let cfg = fig.config_at(x)?;
            let mut row = ComputedRow { abscissa: x, ..Default::default() };
            if reference.value_at(Curve::Sim, x).is_some() {
                row.r_sim = Some(optimize_sim(&cfg, opts.tol_sim)?.value);
            }
            if reference.value_at(Curve::Sep, x).is_some() {
                for &e in &opts.exponents {
                    row.r_sep[exp_index(e)] = Some(optimize_sep(&cfg, opts.tol_sep, e)?.value);
                }
            }
            if reference.value_at(Curve::NoCoop, x).is_some() {
                row.r_nocoop = Some(baseline_no_cooperation(&cfg, opts.tol_sep)?.value);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ComputedFigure { figure: fig, exponents: opts.exponents.clone(), rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deviation {
    pub curve: String,
    pub abscissa: f64,
    pub computed: f64,
    pub reference: f64,
    /// computed − reference
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveSummary {
    pub curve: String,
    pub points: usize,
    pub max_abs_dev: f64,
    pub min_dev: f64,
    pub max_dev: f64,
    /// Points with computed < reference − [`BELOW_MARGIN`].
    pub below: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureReport {
    pub figure: FigureName,
    pub deviations: Vec<Deviation>,
    pub summaries: Vec<CurveSummary>,
    pub checks: Vec<Check>,
    /// Compress-forward exponent whose separated-scheme curve is closest to
    /// the reference (smallest max abs deviation).
    pub best_exponent: Option<CfExponent>,
}

impl FigureReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn summary(&self, curve: &str) -> Option<&CurveSummary> {
        self.summaries.iter().find(|s| s.curve == curve)
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "figure {}", self.figure);
        for c in &self.summaries {
            let _ = writeln!(
                s,
                "curve {:<10} points {:>2}  max|dev| {:.6e}  dev range [{:+.6e}, {:+.6e}]  below reference-{:.0e}: {}",
                c.curve, c.points, c.max_abs_dev, c.min_dev, c.max_dev, BELOW_MARGIN, c.below
            );
        }
        if let Some(e) = self.best_exponent {
            let _ = writeln!(s, "best-matching cf exponent: {e}");
        }
        for c in &self.checks {
            let _ = writeln!(s, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        let _ = writeln!(s, "overall: {}", if self.passed() { "PASS" } else { "FAIL" });
        s
    }
}

/// Label, reference curve and `(abscissa, value)` points.
type Series = (String, Curve, Vec<(f64, f64)>);

fn computed_series(computed: &ComputedFigure) -> Vec<Series> {
    let pick = |f: &dyn Fn(&ComputedRow) -> Option<f64>| -> Vec<(f64, f64)> {
        computed.rows.iter().filter_map(|r| f(r).map(|v| (r.abscissa, v))).collect()
    };
    let mut out = vec![("r_sim".to_string(), Curve::Sim, pick(&|r| r.r_sim))];
    for &e in &computed.exponents {
        out.push((sep_label(e), Curve::Sep, pick(&move |r: &ComputedRow| r.sep(e))));
    }
    out.push(("r_nocoop".to_string(), Curve::NoCoop, pick(&|r| r.r_nocoop)));
    out
}

pub fn evaluate(computed: &ComputedFigure, reference: &ReferenceDataset) -> FigureReport {
    let mut deviations = Vec::new();
    let mut summaries = Vec::new();
    for (label, curve, series) in computed_series(computed) {
        let devs: Vec<Deviation> = series
            .iter()
            .filter_map(|&(x, v)| {
                reference.value_at(curve, x).map(|reference_value| Deviation {
                    curve: label.clone(),
                    abscissa: x,
                    computed: v,
                    reference: reference_value,
                    deviation: v - reference_value,
                })
            })
            .collect();
        if devs.is_empty() {
            continue;
        }
        let d: Vec<f64> = devs.iter().map(|d| d.deviation).collect();
        summaries.push(CurveSummary {
            curve: label,
            points: devs.len(),
            max_abs_dev: d.iter().fold(0.0, |m, v| m.max(v.abs())),
            min_dev: d.iter().copied().fold(f64::INFINITY, f64::min),
            max_dev: d.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            below: devs.iter().filter(|d| d.computed < d.reference - BELOW_MARGIN).count(),
        });
        deviations.extend(devs);
    }

    let best_exponent = computed
        .exponents
        .iter()
        .copied()
        .filter_map(|e| summaries.iter().find(|s| s.curve == sep_label(e)).map(|s| (e, s.max_abs_dev)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(e, _)| e);

    let checks = match computed.figure {
        FigureName::Fig3 => fig3_checks(computed, reference, &summaries, best_exponent),
        FigureName::Fig4 => fig4_checks(computed, reference),
    };
    FigureReport { figure: computed.figure, deviations, summaries, checks, best_exponent }
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check { name: name.to_string(), passed, detail }
}

fn upper_bound_check(computed: &ComputedFigure, reference: &ReferenceDataset) -> Check {
    let mut worst = f64::NEG_INFINITY;
    let mut n = 0;
    for (x, ub) in reference.curve(Curve::UpperBound) {
        if let Some(sim) = computed.row_at(x).and_then(|r| r.r_sim) {
            worst = worst.max(sim - ub);
            n += 1;
        }
    }
    check(
        "r_sim <= upper_bound + 1e-3",
        n > 0 && worst <= 1e-3,
        format!("{n} points, max(r_sim - bound) = {worst:+.6e}"),
    )
}

fn fig3_checks(
    computed: &ComputedFigure,
    reference: &ReferenceDataset,
    summaries: &[CurveSummary],
    best: Option<CfExponent>,
) -> Vec<Check> {
    let mut checks = Vec::new();
    if let Some(s) = summaries.iter().find(|s| s.curve == "r_sim") {
        checks.push(check(
            "r_sim within [reference-1e-3, reference+1e-2]",
            s.min_dev >= -1e-3 && s.max_dev <= 1e-2,
            format!("dev range [{:+.6e}, {:+.6e}] over {} points", s.min_dev, s.max_dev, s.points),
        ));
    }
    if let Some(s) = summaries.iter().find(|s| s.curve == "r_nocoop") {
        checks.push(check(
            "r_nocoop |dev| <= 5e-3",
            s.max_abs_dev <= 5e-3,
            format!("max|dev| = {:.6e}", s.max_abs_dev),
        ));
        let values: Vec<f64> = computed.rows.iter().filter_map(|r| r.r_nocoop).collect();
        let constant = values.windows(2).all(|w| w[0].to_bits() == w[1].to_bits());
        checks.push(check(
            "r_nocoop constant in h3",
            constant,
            format!("{} values, first {}", values.len(), values.first().map_or("-".into(), |v| sig15(*v))),
        ));
    }
    if let Some(e) = best {
        let s = summaries.iter().find(|s| s.curve == sep_label(e)).expect("best exponent has summary");
        checks.push(check(
            "r_sep max|dev| <= 5e-2 (best cf exponent)",
            s.max_abs_dev <= 5e-2,
            format!("cf exponent {e}: max|dev| = {:.6e}", s.max_abs_dev),
        ));
    }
    checks.push(upper_bound_check(computed, reference));
    checks
}

fn spot(
    name: &str,
    computed: Option<f64>,
    target: f64,
    lo: f64,
    hi: f64,
) -> Check {
    match computed {
        Some(v) => check(name, v >= lo && v <= hi, format!("{} vs {} (allowed [{}, {}])", sig15(v), sig15(target), sig15(lo), sig15(hi))),
        None => check(name, false, "not computed".into()),
    }
}

fn fig4_checks(computed: &ComputedFigure, reference: &ReferenceDataset) -> Vec<Check> {
    let at = |x: f64| computed.row_at(x).copied().unwrap_or_default();
    let expected = |c: Curve, x: f64| reference.value_at(c, x).unwrap_or(f64::NAN);
    let (db0, db20) = (1.0, 100.0);
    let mut checks = Vec::new();

    let sim20 = expected(Curve::Sim, db20);
    checks.push(spot("r_sim at 20dB", at(db20).r_sim, sim20, sim20 - 1e-3, sim20 + 1e-2));
    let sim0 = expected(Curve::Sim, db0);
    checks.push(spot("r_sim at 0dB", at(db0).r_sim, sim0, sim0 - 5e-3, sim0 + 5e-3));

    // separated scheme: at least one exponent must match
    let best_sep = |x: f64, target: f64| -> Option<f64> {
        computed
            .exponents
            .iter()
            .filter_map(|&e| at(x).sep(e))
            .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
    };
    let sep0 = expected(Curve::Sep, db0);
    checks.push(spot("r_sep at 0dB", best_sep(db0, sep0), sep0, sep0 - 3e-2, sep0 + 3e-2));
    let sep20 = expected(Curve::Sep, db20);
    checks.push(spot("r_sep at 20dB", best_sep(db20, sep20), sep20, sep20 - 5e-2, sep20 + 5e-2));
    let nc20 = expected(Curve::NoCoop, db20);
    checks.push(spot("r_nocoop at 20dB", at(db20).r_nocoop, nc20, nc20 - 3e-2, nc20 + 3e-2));

    let row0 = at(db0);
    let crossover = match (row0.r_sim, best_sep(db0, sep0)) {
        (Some(sim), Some(sep)) => check("low-SNR crossover r_sep >= r_sim at 0dB", sep >= sim, format!("r_sep {} vs r_sim {}", sig15(sep), sig15(sim))),
        _ => check("low-SNR crossover r_sep >= r_sim at 0dB", false, "not computed".into()),
    };
    checks.push(crossover);
    checks.push(upper_bound_check(computed, reference));
    checks
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(sig15).unwrap_or_default()
}

pub fn computed_header(computed: &ComputedFigure) -> Vec<String> {
    let mut h = vec!["abscissa".to_string(), "r_sim".to_string()];
    h.extend(computed.exponents.iter().map(|&e| sep_label(e)));
    h.push("r_nocoop".to_string());
    h
}

pub fn write_computed_csv<W: std::io::Write>(computed: &ComputedFigure, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(computed_header(computed))?;
    for r in &computed.rows {
        let mut rec = vec![sig15(r.abscissa), opt_cell(r.r_sim)];
        rec.extend(computed.exponents.iter().map(|&e| opt_cell(r.sep(e))));
        rec.push(opt_cell(r.r_nocoop));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| CliError::io("<csv output>", e))?;
    Ok(())
}

pub fn read_computed_csv<R: Read>(figure: FigureName, input: R) -> Result<ComputedFigure> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(input);
    let headers = rdr.headers()?.clone();
    let mut exponents = Vec::new();
    for h in headers.iter() {
        if let Some(e) = h.strip_prefix("r_sep_cf") {
            let e: u8 = e.parse().map_err(|_| CliError::Reference(format!("bad column {h}")))?;
            exponents.push(CfExponent::try_from(e)?);
        }
    }
    let parse = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| CliError::Reference(format!("bad number `{s}`")))
        }
    };
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let mut row = ComputedRow::default();
        for (h, cell) in headers.iter().zip(rec.iter()) {
            let v = parse(cell)?;
            match h {
                "abscissa" => row.abscissa = v.ok_or_else(|| CliError::Reference("missing abscissa".into()))?,
                "r_sim" => row.r_sim = v,
                "r_nocoop" => row.r_nocoop = v,
                other => {
                    if let Some(e) = other.strip_prefix("r_sep_cf") {
                        let e = CfExponent::try_from(e.parse::<u8>().unwrap_or(0))?;
                        row.r_sep[exp_index(e)] = v;
                    }
                }
            }
        }
        rows.push(row);
    }
    Ok(ComputedFigure { figure, exponents, rows })
}

pub fn write_deviations_csv<W: std::io::Write>(report: &FigureReport, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["curve", "abscissa", "computed", "reference", "deviation"])?;
    for d in &report.deviations {
        w.write_record([d.curve.clone(), sig15(d.abscissa), sig15(d.computed), sig15(d.reference), sig15(d.deviation)])?;
    }
    w.flush().map_err(|e| CliError::io("<csv output>", e))?;
    Ok(())
}

/// Reference curves as comma-separated gnuplot index blocks, in
/// [`Curve::ALL`] order.
pub fn reference_blocks(reference: &ReferenceDataset) -> String {
    let mut s = String::new();
    for c in Curve::ALL {
        let _ = writeln!(s, "# {}", c.column());
        for (x, v) in reference.curve(c) {
            let _ = writeln!(s, "{},{}", sig15(x), sig15(v));
        }
        s.push_str("\n\n");
    }
    s
}

pub fn gnuplot_script(computed: &ComputedFigure, name: &str) -> String {
    let fig = computed.figure;
    let (xlabel, xrange, yrange) = match fig {
        FigureName::Fig3 => ("h_3", "[0.01:10]", "[0.4:2]"),
        FigureName::Fig4 => ("SNR_2 (linear scale; 0.1 = -10 dB, 1000 = 30 dB)", "[0.1:1000]", "[0:3]"),
    };
    let mut s = String::new();
    let _ = writeln!(s, "# gnuplot {name}.gp");
    let _ = writeln!(s, "set terminal pngcairo size 900,600");
    let _ = writeln!(s, "set output '{name}.png'");
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set logscale x");
    let _ = writeln!(s, "set xrange {xrange}");
    let _ = writeln!(s, "set yrange {yrange}");
    let _ = writeln!(s, "set xlabel '{xlabel}'");
    let _ = writeln!(s, "set ylabel 'Symmetric rate (bit per channel use)'");
    let _ = writeln!(s, "set grid");
    let _ = writeln!(s, "set key top left");
    let _ = writeln!(s, "set datafile missing ''");

    let header = computed_header(computed);
    let mut plots = Vec::new();
    let colors = ["#007f00", "#0000ff", "#4040ff", "#ff0000"];
    for (col, label) in header.iter().enumerate().skip(1) {
        plots.push(format!(
            "'{name}_computed.csv' every ::1 using 1:{} with lines lw 2 lc rgb '{}' title '{} (computed)'",
            col + 1,
            colors[(col - 1) % colors.len()],
            label.replace('_', "\\_")
        ));
    }
    let markers = [("r_sim", 7, "#007f00"), ("r_sep", 5, "#0000ff"), ("r_nocoop", 9, "#ff0000"), ("upper_bound", 1, "#000000")];
    for (idx, (label, pt, color)) in markers.iter().enumerate() {
        let style = if *label == "upper_bound" { "linespoints" } else { "points" };
        plots.push(format!(
            "'{name}_reference.csv' index {idx} using 1:2 with {style} pt {pt} lc rgb '{color}' title '{} (reference)'",
            label.replace('_', "\\_")
        ));
    }
    let _ = writeln!(s, "plot \\\n    {}", plots.join(", \\\n    "));
    s
}

/// Paths written by [`write_outputs`].
#[derive(Debug, Clone)]
pub struct FigureOutputs {
    pub computed: PathBuf,
    pub deviations: PathBuf,
    pub reference: PathBuf,
    pub summary: PathBuf,
    pub script: PathBuf,
}

pub fn write_outputs(
    dir: &Path,
    computed: &ComputedFigure,
    reference: &ReferenceDataset,
    report: &FigureReport,
) -> Result<FigureOutputs> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let name = computed.figure.as_str();
    let paths = FigureOutputs {
        computed: dir.join(format!("{name}_computed.csv")),
        deviations: dir.join(format!("{name}_deviations.csv")),
        reference: dir.join(format!("{name}_reference.csv")),
        summary: dir.join(format!("{name}_summary.txt")),
        script: dir.join(format!("{name}.gp")),
    };
    let create = |p: &Path| fs::File::create(p).map_err(|e| CliError::io(p, e));
    write_computed_csv(computed, create(&paths.computed)?)?;
    write_deviations_csv(report, create(&paths.deviations)?)?;
    let put = |p: &Path, text: String| fs::write(p, text).map_err(|e| CliError::io(p, e));
    put(&paths.reference, reference_blocks(reference))?;
    put(&paths.summary, report.summary_text())?;
    put(&paths.script, gnuplot_script(computed, name))?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(reference: &ReferenceDataset, bump: f64) -> ComputedFigure {
        let rows = reference
            .abscissas()
            .into_iter()
            .map(|x| ComputedRow {
                abscissa: x,
                r_sim: reference.value_at(Curve::Sim, x).map(|v| v + bump),
                r_sep: [reference.value_at(Curve::Sep, x), reference.value_at(Curve::Sep, x).map(|v| v + 0.2)],
                r_nocoop: Some(0.425960149394344),
            })
            .collect();
        ComputedFigure { figure: reference.figure, exponents: vec![CfExponent::Squared, CfExponent::Cubed], rows }
    }

    #[test]
    fn exact_reference_passes_fig3() {
        let reference = ReferenceDataset::load(FigureName::Fig3).unwrap();
        let report = evaluate(&synthetic(&reference, 0.0), &reference);
        assert!(report.passed(), "{}", report.summary_text());
        assert_eq!(report.best_exponent, Some(CfExponent::Squared));
        assert!((report.summary("r_sep_cf3").unwrap().max_abs_dev - 0.2).abs() < 1e-12);
    }

    #[test]
    fn exact_reference_passes_fig4() {
        let reference = ReferenceDataset::load(FigureName::Fig4).unwrap();
        let mut computed = synthetic(&reference, 0.0);
        for r in &mut computed.rows {
            r.r_nocoop = reference.value_at(Curve::NoCoop, r.abscissa);
        }
        let report = evaluate(&computed, &reference);
        assert!(report.passed(), "{}", report.summary_text());
        assert_eq!(report.checks.len(), 7);
    }

    #[test]
    fn low_sim_fails_band() {
        let reference = ReferenceDataset::load(FigureName::Fig3).unwrap();
        let report = evaluate(&synthetic(&reference, -2e-3), &reference);
        assert!(!report.passed());
        assert_eq!(report.summary("r_sim").unwrap().below, 31);
    }

    #[test]
    fn csv_round_trip_preserves_summary() {
        let reference = ReferenceDataset::load(FigureName::Fig4).unwrap();
        let computed = synthetic(&reference, 1e-4);
        let mut buf = Vec::new();
        write_computed_csv(&computed, &mut buf).unwrap();
        let back = read_computed_csv(FigureName::Fig4, buf.as_slice()).unwrap();
        assert_eq!(back.rows.len(), computed.rows.len());
        assert_eq!(evaluate(&back, &reference).summary_text(), evaluate(&computed, &reference).summary_text());
    }

    #[test]
    fn script_mentions_every_series() {
        let reference = ReferenceDataset::load(FigureName::Fig3).unwrap();
        let script = gnuplot_script(&synthetic(&reference, 0.0), "fig3");
        assert!(script.contains("fig3_computed.csv"));
        assert!(script.contains("index 3"));
        assert!(script.contains("upper\\_bound (reference)"));
        assert_eq!(reference_blocks(&reference).matches("# ").count(), 4);
    }
}
