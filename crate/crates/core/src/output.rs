//! Result files. Every file starts with the configuration echo and seed; numbers are written
//! with 17 significant digits and LF line endings.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::amplitude::{AmplitudeSet, ProbabilityTable};
use crate::analysis::Summary;
use crate::config::RunConfig;
use crate::error::Result;
use crate::monte_carlo::ExperimentRecord;
use crate::paths::{PathConfiguration, PathLabel};
use crate::statistics::{BinStatus, PowerLawFit, ScalingPoint};

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const HISTOGRAMS_CSV: &str = "histograms.csv";
pub const RECORDS_JSONL: &str = "records.jsonl";
pub const BINS_CSV: &str = "bins.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const META_JSON: &str = "meta.json";
pub const IDEAL_CSV: &str = "ideal.csv";
pub const SWEEP_CSV: &str = "sweep.csv";

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "nan".into()
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".into(), fmt_f64)
}

fn status_name(s: BinStatus) -> &'static str {
    match s {
        BinStatus::Defined => "defined",
        BinStatus::NearZero => "near-zero",
        BinStatus::Undefined => "undefined",
    }
}

/// `# `-prefixed header: tool, seed and the configuration echo.
pub fn header_lines(config: &RunConfig) -> Result<Vec<String>> {
    let mut lines = vec![format!("# {TOOL_NAME} {TOOL_VERSION}"), format!("# seed = {}", config.seed)];
    for l in config.echo().to_toml_string()?.lines() {
        lines.push(if l.is_empty() { "#".into() } else { format!("# {l}") });
    }
    Ok(lines)
}

pub struct CsvWriter {
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: &Path, config: &RunConfig, columns: &[&str]) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        for l in header_lines(config)? {
            out.write_all(l.as_bytes())?;
            out.write_all(b"\n")?;
        }
        let mut w = Self { out };
        w.row(columns.iter().map(|c| c.to_string()))?;
        Ok(w)
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, fields: I) -> Result<()> {
        let line: Vec<String> = fields.into_iter().collect();
        self.out.write_all(line.join(",").as_bytes())?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Appends the histograms of each record as it arrives.
pub struct HistogramStream {
    csv: CsvWriter,
    records: Option<BufWriter<File>>,
}

impl HistogramStream {
    pub fn create(dir: &Path, config: &RunConfig, with_records: bool) -> Result<Self> {
        let csv = CsvWriter::create(
            &dir.join(HISTOGRAMS_CSV),
            config,
            &["run", "configuration", "bin", "energy_ev", "counts", "n_pulses"],
        )?;
        let records = if with_records {
            let mut f = BufWriter::new(File::create(dir.join(RECORDS_JSONL))?);
            serde_json::to_writer(&mut f, &Envelope::new(config, &NoBody {}))?;
            f.write_all(b"\n")?;
            Some(f)
        } else {
            None
        };
        Ok(Self { csv, records })
    }

    pub fn push(&mut self, rec: &ExperimentRecord) -> Result<()> {
        for h in &rec.histograms {
            for (f, c) in h.counts.iter().enumerate() {
                self.csv.row([
                    rec.seed.run.to_string(),
                    h.configuration.name().to_string(),
                    f.to_string(),
                    fmt_f64(rec.bin_energies_ev[f]),
                    c.to_string(),
                    h.n_pulses.to_string(),
                ])?;
            }
        }
        if let Some(out) = self.records.as_mut() {
            serde_json::to_writer(&mut *out, rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn finish(self) -> Result<()> {
        self.csv.finish()?;
        if let Some(mut r) = self.records {
            r.flush()?;
        }
        Ok(())
    }
}

/// Reads back a records file written by [`HistogramStream`].
pub fn read_records(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let text = std::fs::read_to_string(path)?;
    text.lines().skip(1).filter(|l| !l.is_empty()).map(|l| Ok(serde_json::from_str(l)?)).collect()
}

#[derive(Debug, Serialize)]
struct NoBody {}

/// JSON wrapper carrying the configuration echo and seed.
#[derive(Debug, Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub config: RunConfig,
    #[serde(flatten)]
    pub body: &'a T,
}

impl<'a, T: Serialize> Envelope<'a, T> {
    pub fn new(config: &RunConfig, body: &'a T) -> Self {
        Self { tool: TOOL_NAME, version: TOOL_VERSION, seed: config.seed, config: config.echo(), body }
    }
}

pub fn write_json<T: Serialize>(path: &Path, config: &RunConfig, body: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(&Envelope::new(config, body))?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct SummaryBody<'a> {
    summary: &'a Summary,
}

pub fn write_summary(dir: &Path, config: &RunConfig, summary: &Summary) -> Result<PathBuf> {
    let path = dir.join(SUMMARY_JSON);
    write_json(&path, config, &SummaryBody { summary })?;
    Ok(path)
}

/// Non-reproducible run facts, kept out of the summary.
#[derive(Debug, Serialize)]
pub struct Meta {
    pub workers: usize,
    pub output_dir: String,
    pub wall_clock_seconds: f64,
    pub unix_time_seconds: u64,
}

pub fn write_meta(dir: &Path, config: &RunConfig, wall_clock_seconds: f64) -> Result<()> {
    let meta = Meta {
        workers: config.workers,
        output_dir: dir.display().to_string(),
        wall_clock_seconds,
        unix_time_seconds: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
    };
    write_json(&dir.join(META_JSON), config, &meta)
}

pub fn write_bins(dir: &Path, config: &RunConfig, summary: &Summary) -> Result<()> {
    let mut w = CsvWriter::create(
        &dir.join(BINS_CSV),
        config,
        &[
            "bin", "energy_ev", "kappa", "sigma_kappa", "near_zero_runs", "undefined_runs", "alpha", "beta", "gamma",
            "peres_f", "sigma_peres_f", "peres_status",
        ],
    )?;
    for (f, b) in summary.bins.iter().enumerate() {
        let p = &b.peres;
        w.row([
            f.to_string(),
            fmt_f64(b.energy_ev),
            fmt_opt(b.kappa),
            fmt_opt(b.sigma_kappa),
            b.near_zero_runs.to_string(),
            b.undefined_runs.to_string(),
            fmt_f64(p.alpha),
            fmt_f64(p.beta),
            fmt_f64(p.gamma),
            fmt_f64(p.f),
            fmt_f64(p.sigma_f),
            status_name(p.status).to_string(),
        ])?;
    }
    w.finish()
}

pub fn write_ideal(path: &Path, config: &RunConfig, table: &ProbabilityTable<f64>, amps: &AmplitudeSet<f64>) -> Result<()> {
    let mut cols = vec!["bin".to_string(), "energy_ev".to_string()];
    cols.extend(PathConfiguration::ALL.iter().map(|s| format!("p_{}", s.name())));
    cols.extend(PathLabel::ALL.iter().map(|l| format!("abs2_amplitude_{}", l.name())));
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut w = CsvWriter::create(path, config, &col_refs)?;
    for f in 0..table.n_bins() {
        let mut row = vec![f.to_string(), fmt_f64(table.energies[f])];
        row.extend(PathConfiguration::ALL.iter().map(|s| fmt_f64(table.row(*s)[f])));
        row.extend(PathLabel::ALL.iter().map(|l| fmt_f64(amps.get(*l, f).norm_sqr())));
        w.row(row)?;
    }
    w.finish()
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub n_pulses: u64,
    pub efficiency: f64,
    pub background_per_pulse: f64,
    pub kappa: f64,
    pub point: ScalingPoint<f64>,
}

pub fn write_sweep(
    dir: &Path,
    config: &RunConfig,
    axis: &str,
    rows: &[SweepRow],
    fit: &PowerLawFit<f64>,
) -> Result<()> {
    let mut w = CsvWriter::create(
        &dir.join(SWEEP_CSV),
        config,
        &["axis", "value", "n_runs", "n_pulses", "efficiency", "background_per_pulse", "abscissa", "kappa", "std_error"],
    )?;
    for r in rows {
        w.row([
            axis.to_string(),
            fmt_f64(r.value),
            config.n_runs.to_string(),
            r.n_pulses.to_string(),
            fmt_f64(r.efficiency),
            fmt_f64(r.background_per_pulse),
            fmt_f64(r.point.abscissa),
            fmt_f64(r.kappa),
            fmt_f64(r.point.std_error),
        ])?;
    }
    w.finish()?;
    #[derive(Serialize)]
    struct Body<'a> {
        axis: &'a str,
        points: &'a [SweepRow],
        fit: &'a PowerLawFit<f64>,
    }
    write_json(&dir.join(SUMMARY_JSON), config, &Body { axis, points: rows, fit })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.5), "-2.5000000000000000e0");
        assert_eq!(fmt_f64(f64::NAN), "nan");
        let x = 0.1 + 0.2;
        assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn csv_has_header_and_lf() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let cfg = RunConfig::default();
        let mut w = CsvWriter::create(&p, &cfg, &["a", "b"]).unwrap();
        w.row(["1".to_string(), fmt_f64(2.0)]).unwrap();
        w.finish().unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("# sorkin "));
        assert!(text.contains("# seed = 1\n"));
        assert!(text.contains("\na,b\n1,2.0000000000000000e0\n"));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn records_round_trip_through_jsonl() {
        use crate::monte_carlo::{run_experiment, ExperimentPlan};
        let dir = tempfile::tempdir().unwrap();
        let recs = run_experiment(&ExperimentPlan::reference(300, 2, 4)).unwrap();
        let mut s = HistogramStream::create(dir.path(), &RunConfig::default(), true).unwrap();
        for r in &recs {
            s.push(r).unwrap();
        }
        s.finish().unwrap();
        assert_eq!(read_records(&dir.path().join(RECORDS_JSONL)).unwrap(), recs);
        let csv = std::fs::read_to_string(dir.path().join(HISTOGRAMS_CSV)).unwrap();
        let data_rows = csv.lines().filter(|l| !l.starts_with('#')).count();
        assert_eq!(data_rows, 1 + 2 * 8 * 40);
    }
}
