use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use first_photon::cc::CoordConvention;
use first_photon::confusion;
use first_photon::dataset;
use first_photon::harness::{self, Classifier, ExperimentConfig, IndexPixelSource, Weighting};
use first_photon::{Error, Result};

#[derive(Parser)]
#[command(name = "first-photon", version, about = "Single-photon MNIST classification simulator")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Binarize the first N images per digit and write a dataset manifest.
    Ingest {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = 100)]
        per_label: usize,
        #[arg(long, default_value_t = dataset::DEFAULT_THRESHOLD)]
        threshold: u8,
        /// Require gzip input instead of detecting it.
        #[arg(long)]
        gunzip: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Analytic mode-projection classifier.
    QcRun(RunArgs),
    /// Index-pixel classical classifier.
    CcRun(RunArgs),
    /// First-photon Monte Carlo of the mode-projection classifier.
    McRun(RunArgs),
    /// Search the mode family for a better assignment, then evaluate it.
    ModeSearch(RunArgs),
    /// Analytic fidelity over a list of waists.
    WaistScan {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated waists; defaults to the config's list.
        #[arg(long, value_delimiter = ',')]
        waists: Option<Vec<f64>>,
    },
    /// Render a confusion JSON or CSV file as SVG (or PGM by extension).
    Heatmap {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-pixel MAP classifier ceiling.
    Threshold(RunArgs),
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    images: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    gunzip: bool,
    #[arg(long)]
    per_label: Option<usize>,
    #[arg(long)]
    threshold: Option<u8>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sets both beam and mode waist.
    #[arg(long)]
    waist: Option<f64>,
    #[arg(long)]
    beam_waist: Option<f64>,
    #[arg(long)]
    mode_waist: Option<f64>,
    #[arg(long)]
    supersample: Option<usize>,
    #[arg(long)]
    pixels_per_side: Option<usize>,
    /// reference, reference-alt-a, reference-alt-b, search, or a mode-set JSON path.
    #[arg(long)]
    modeset: Option<String>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    pulses_per_mask: Option<u64>,
    #[arg(long)]
    events: Option<u64>,
    /// Display cycles before an event counts as no detection.
    #[arg(long)]
    max_cycles: Option<u64>,
    /// reference, select, or an index-pixel JSON path.
    #[arg(long)]
    index_pixels: Option<String>,
    /// row-col0, col-row0, row-col1 or col-row1.
    #[arg(long)]
    convention: Option<String>,
    /// Weight index-pixel evidence by the beam intensity.
    #[arg(long)]
    beam_weighting: bool,
}

impl RunArgs {
    fn resolve(&self, classifier: Classifier) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        c.classifier = classifier;
        if self.images.is_some() || self.labels.is_some() {
            c.images = self.images.clone().or(c.images);
            c.labels = self.labels.clone().or(c.labels);
            c.dataset = None;
        }
        if let Some(d) = &self.dataset {
            c.dataset = Some(d.clone());
        }
        c.gunzip |= self.gunzip;
        macro_rules! set {
            ($field:ident, $value:expr) => {
                if let Some(v) = $value {
                    c.$field = v;
                }
            };
        }
        set!(per_label_count, self.per_label);
        set!(threshold, self.threshold);
        set!(output_dir, self.out.clone());
        set!(seed, self.seed);
        if let Some(w) = self.waist {
            c = c.with_waist(w);
        }
        set!(beam_waist, self.beam_waist);
        set!(mode_waist, self.mode_waist);
        set!(supersample, self.supersample);
        if self.pixels_per_side.is_some() {
            c.pixels_per_side = self.pixels_per_side;
        }
        if let Some(m) = &self.modeset {
            match m.as_str() {
                "reference" | "reference-alt-a" | "reference-alt-b" | "search" => c.modeset = m.clone(),
                path => {
                    c.modeset = "file".into();
                    c.modeset_file = Some(path.into());
                }
            }
        }
        set!(mean_detected_per_pulse, self.rate);
        set!(pulses_per_mask, self.pulses_per_mask);
        set!(events_per_pattern, self.events);
        set!(max_cycles, self.max_cycles);
        if let Some(p) = &self.index_pixels {
            match p.as_str() {
                "reference" => c.index_pixels = IndexPixelSource::Reference,
                "select" => c.index_pixels = IndexPixelSource::Select,
                path => {
                    c.index_pixels = IndexPixelSource::File;
                    c.index_pixel_file = Some(path.into());
                }
            }
        }
        if let Some(conv) = &self.convention {
            c.coord_convention = conv.parse::<CoordConvention>()?;
        }
        if self.beam_weighting {
            c.cc_weighting = Weighting::Beam;
        }
        c.validate()?;
        Ok(c)
    }
}

fn print_bundle(b: &harness::ReportBundle) {
    println!("classifier      {}", b.classifier);
    println!("fidelity        {:.4} ± {:.4}", b.fidelity, b.fidelity_sigma);
    let acc: Vec<String> = b.per_label_accuracy.iter().map(|a| format!("{a:.3}")).collect();
    println!("per-label       {}", acc.join(" "));
    if b.total_events > 0 {
        println!("events          {} (no detection: {})", b.total_events, b.no_detection_total);
    }
    if !b.excluded.is_empty() {
        println!("excluded        {} patterns", b.excluded.len());
    }
    println!("report          {}", b.report.display());
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Ingest {
            images,
            labels,
            per_label,
            threshold,
            gunzip,
            out,
        } => {
            let raw = dataset::load_idx(&images, &labels, gunzip)?;
            let ds = dataset::select_subset(&raw, per_label, threshold)?;
            let text = dataset::dataset_to_json(&ds, threshold)?;
            std::fs::write(&out, text).map_err(|e| Error::Io { path: out.clone(), source: e })?;
            println!("wrote {} patterns to {}", ds.len(), out.display());
        }
        Command::QcRun(a) => print_bundle(&harness::run_experiment(&a.resolve(Classifier::QcAnalytic)?)?),
        Command::CcRun(a) => {
            let b = harness::run_experiment(&a.resolve(Classifier::CcIndex)?)?;
            print_bundle(&b);
            if let Some(rows) = b.details["reference_conventions"].as_array() {
                for r in rows {
                    println!(
                        "convention      {:<9} agreement {}/10  fidelity {:.4}",
                        r["convention"].as_str().unwrap_or("?"),
                        r["agreement_with_selected"],
                        r["fidelity"].as_f64().unwrap_or(f64::NAN)
                    );
                }
            }
        }
        Command::McRun(a) => print_bundle(&harness::run_experiment(&a.resolve(Classifier::QcMontecarlo)?)?),
        Command::ModeSearch(a) => {
            let mut c = a.resolve(Classifier::QcAnalytic)?;
            c.modeset = "search".into();
            let b = harness::run_experiment(&c)?;
            print_bundle(&b);
            println!("orders          {}", b.details["orders"]);
        }
        Command::WaistScan { run, waists } => {
            let c = run.resolve(Classifier::QcAnalytic)?;
            let waists = waists.unwrap_or_else(|| c.waists.clone());
            let ds = c.load_dataset()?;
            let rows = harness::waist_scan(&c, &ds, &waists)?;
            std::fs::create_dir_all(&c.output_dir).map_err(|e| Error::Io {
                path: c.output_dir.clone(),
                source: e,
            })?;
            let path = c.output_dir.join("waist_scan.csv");
            let csv = harness::scan_to_csv(&rows);
            std::fs::write(&path, &csv).map_err(|e| Error::Io { path: path.clone(), source: e })?;
            print!("{csv}");
            if let Some(best) = harness::best_waist(&rows) {
                println!("best waist {} fidelity {:.4}", best.waist, best.fidelity);
            }
        }
        Command::Heatmap { input, out } => {
            let text = std::fs::read_to_string(&input).map_err(|e| Error::Io {
                path: input.clone(),
                source: e,
            })?;
            let m = if input.extension().and_then(|e| e.to_str()) == Some("csv") {
                let t = confusion::from_csv(&text)?;
                let mut m = confusion::ConfusionMatrix::analytic(t.probabilities);
                m.counts = t.counts;
                m.sigma = t.sigma;
                m
            } else {
                confusion::from_json(&text)?.0
            };
            let title = input.file_stem().and_then(|s| s.to_str()).unwrap_or("confusion");
            harness::emit_heatmap(&m, &out, title)?;
            println!("wrote {}", out.display());
        }
        Command::Threshold(a) => print_bundle(&harness::run_experiment(&a.resolve(Classifier::CcMap)?)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 3 })
        }
    }
}
