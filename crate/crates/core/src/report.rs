//! Serialization of sweep results: a fixed-schema CSV plus plot-ready
//! two-column series files for each figure.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiment::{self, Figure, Metric, SchemeR, SweepRecord, SweepSpec};
use crate::frame::DrId;
use crate::scheme::SchemeKind;

/// Fixed CSV column order. Optional fields serialize as empty strings.
pub const CSV_HEADER: &str =
    "dr,scheme,r,n_nodes,lambda_per_hour,mdp_analytic,mdp_sim,ci_low,ci_high,ee_analytic,toa_m_s,runs,seed";

/// Render a float with six significant digits. Plain decimal inside a sane
/// magnitude range, scientific outside it; always parses back to within one
/// ulp of the rounded value, and re-rendering the parsed value reproduces
/// the same bytes.
pub fn format_sig6(value: f64) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    if !value.is_finite() {
        return value.to_string();
    }
    let first = render_sig6(value);
    let rounded: f64 = first.parse().unwrap_or(value);
    if rounded == value {
        first
    } else {
        // Rounding may have pushed the value into the next decade
        // (0.9999996 -> 1.0); rendering the rounded value is idempotent.
        render_sig6(rounded)
    }
}

fn render_sig6(value: f64) -> String {
    let magnitude = value.abs().log10().floor() as i32;
    if !(-9..=15).contains(&magnitude) {
        return format!("{value:.5e}");
    }
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{value:.decimals$}")
}

fn format_opt(value: Option<f64>) -> String {
    value.map(format_sig6).unwrap_or_default()
}

fn csv_row(record: &SweepRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        record.dr.number(),
        record.scheme.name(),
        record.r,
        record.n_nodes,
        format_sig6(record.lambda_per_hour),
        format_sig6(record.mdp_analytic),
        format_opt(record.mdp_sim),
        format_opt(record.ci_low),
        format_opt(record.ci_high),
        format_sig6(record.ee_analytic),
        format_sig6(record.toa_m_s),
        record.runs,
        record.seed,
    )
}

/// Write header plus one row per record; returns the number of data rows
/// written. A mid-stream failure reports how many rows made it out.
pub fn write_csv<W: Write>(records: &[SweepRecord], mut sink: W) -> Result<usize> {
    let mut rows_written = 0usize;
    let mut step = || -> std::io::Result<()> {
        writeln!(sink, "{CSV_HEADER}")?;
        for record in records {
            writeln!(sink, "{}", csv_row(record))?;
            rows_written += 1;
        }
        sink.flush()
    };
    match step() {
        Ok(()) => Ok(rows_written),
        Err(source) => Err(Error::CsvWrite {
            source,
            rows_written,
        }),
    }
}

fn parse_field<T: std::str::FromStr>(field: &str, name: &str, line: usize) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::invalid(format!("line {line}: bad {name} value '{field}'")))
}

fn parse_opt(field: &str, name: &str, line: usize) -> Result<Option<f64>> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse_field(field, name, line).map(Some)
    }
}

/// Parse CSV produced by [`write_csv`].
pub fn read_csv(text: &str) -> Result<Vec<SweepRecord>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::invalid("empty CSV input"))?;
    if header.trim_end() != CSV_HEADER {
        return Err(Error::invalid(format!("unexpected CSV header '{header}'")));
    }
    let mut records = Vec::new();
    for (index, line) in lines.enumerate() {
        let line_no = index + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 13 {
            return Err(Error::invalid(format!(
                "line {line_no}: expected 13 fields, found {}",
                fields.len()
            )));
        }
        let dr = DrId::try_from(parse_field::<u8>(fields[0], "dr", line_no)?)?;
        let scheme: SchemeKind = fields[1].parse()?;
        records.push(SweepRecord {
            dr,
            scheme,
            r: parse_field(fields[2], "r", line_no)?,
            n_nodes: parse_field(fields[3], "n_nodes", line_no)?,
            lambda_per_hour: parse_field(fields[4], "lambda_per_hour", line_no)?,
            mdp_analytic: parse_field(fields[5], "mdp_analytic", line_no)?,
            mdp_sim: parse_opt(fields[6], "mdp_sim", line_no)?,
            ci_low: parse_opt(fields[7], "ci_low", line_no)?,
            ci_high: parse_opt(fields[8], "ci_high", line_no)?,
            ee_analytic: parse_field(fields[9], "ee_analytic", line_no)?,
            toa_m_s: parse_field(fields[10], "toa_m_s", line_no)?,
            runs: parse_field(fields[11], "runs", line_no)?,
            seed: parse_field(fields[12], "seed", line_no)?,
        });
    }
    Ok(records)
}

fn series_file_name(dr: DrId, combo: SchemeR, metric: Metric, sim: bool) -> String {
    let metric_tag = match metric {
        Metric::Mdp => "mdp",
        Metric::Ee => "ee",
    };
    let sim_tag = if sim { "_sim" } else { "" };
    format!(
        "dr{}_{}_r{}_{}{}.dat",
        dr.number(),
        combo.scheme.name(),
        combo.r,
        metric_tag,
        sim_tag
    )
}

fn write_series(path: &Path, points: &[(u64, f64)]) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for (n, value) in points {
        writeln!(out, "{} {}", n, format_sig6(*value))?;
    }
    out.flush()?;
    Ok(())
}

/// Emit one `(N, value)` series file per curve of the figure into `dir`.
///
/// Files are named `dr<d>_<scheme>_r<r>_<metric>.dat`. For the two
/// single-data-rate delivery figures, simulated points (when present in the
/// records) are emitted alongside as `..._mdp_sim.dat`. Returns the created
/// paths in deterministic order.
pub fn emit_figure_dataset(
    records: &[SweepRecord],
    figure: Figure,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    let lambda = figure.lambda_per_hour();
    let relevant: Vec<&SweepRecord> = records
        .iter()
        .filter(|r| (r.lambda_per_hour - lambda).abs() < 1e-9)
        .collect();
    let metric = figure.metric();

    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for dr in figure.dr_list() {
        for combo in experiment::default_scheme_r_list() {
            let mut points: Vec<(u64, f64)> = relevant
                .iter()
                .filter(|r| r.dr == dr && r.scheme == combo.scheme && r.r == combo.r)
                .map(|r| {
                    let value = match metric {
                        Metric::Mdp => r.mdp_analytic,
                        Metric::Ee => r.ee_analytic,
                    };
                    (r.n_nodes, value)
                })
                .collect();
            if points.is_empty() {
                return Err(Error::IncompleteData(format!(
                    "{figure} needs ({dr}, {scheme}, r={r}) at lambda={lambda}/h but the records have no such rows",
                    scheme = combo.scheme,
                    r = combo.r
                )));
            }
            points.sort_unstable_by_key(|(n, _)| *n);
            let path = dir.join(series_file_name(dr, combo, metric, false));
            write_series(&path, &points)?;
            written.push(path);

            if matches!(figure, Figure::Fig2a | Figure::Fig2b) {
                let mut sim_points: Vec<(u64, f64)> = relevant
                    .iter()
                    .filter(|r| r.dr == dr && r.scheme == combo.scheme && r.r == combo.r)
                    .filter_map(|r| r.mdp_sim.map(|v| (r.n_nodes, v)))
                    .collect();
                if !sim_points.is_empty() {
                    sim_points.sort_unstable_by_key(|(n, _)| *n);
                    let path = dir.join(series_file_name(dr, combo, metric, true));
                    write_series(&path, &sim_points)?;
                    written.push(path);
                }
            }
        }
    }
    Ok(written)
}

/// Everything `reproduce` leaves on disk.
#[derive(Debug, Clone)]
pub struct FigureOutput {
    /// Full sweep records behind the figure.
    pub csv: PathBuf,
    /// One file per plotted curve.
    pub series: Vec<PathBuf>,
}

/// Run the built-in comparison sweep for a figure and write its dataset.
/// `runs = 0` stays analytic; a positive count adds Monte Carlo estimates.
pub fn reproduce(figure: Figure, dir: &Path, runs: u64, seed: u64) -> Result<FigureOutput> {
    let spec = experiment::paper_sweep_spec(figure, runs, seed);
    reproduce_with_spec(figure, &spec, dir)
}

/// [`reproduce`] with a caller-supplied sweep spec.
pub fn reproduce_with_spec(figure: Figure, spec: &SweepSpec, dir: &Path) -> Result<FigureOutput> {
    let records = experiment::run_sweep(spec)?;
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{figure}_records.csv"));
    let file = fs::File::create(&csv_path)?;
    write_csv(&records, BufWriter::new(file))?;
    let series = emit_figure_dataset(&records, figure, dir)?;
    Ok(FigureOutput {
        csv: csv_path,
        series,
    })
}
