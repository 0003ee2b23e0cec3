//! `cartoprompt` command line.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use cartoprompt_core::curate::PrepromptRecord;
use cartoprompt_core::embed::ProjectionMethod;
use cartoprompt_core::LatLon;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use crate::config::PipelineConfig;
use crate::curation::{run_curation, split_file, CurationPaths};
use crate::embed_io::{emit_geojson, load_word_vectors, read_preprompts, run_embedding, write_projection_cache};
use crate::error::{Error, Result};
use crate::osm_io::{parse_osm_auto, write_rejects, ParsedOsm};
use crate::overpass::{area_query, fetch_overpass, Bbox};
use crate::service::{serve, AppState};
use crate::store::{effective_radius, write_atomic, FeatureStore};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "cartoprompt", version, about = "Verbal descriptions of circular urban areas from OpenStreetMap data", arg_required_else_help = true)]
pub struct Cli {
    /// Pipeline configuration file.
    #[arg(long, global = true, default_value = "cartoprompt.toml")]
    pub config: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse the configured OSM sources into the feature store snapshot.
    Ingest,
    /// Print the descriptor JSON and the preprompt for one circle.
    Describe {
        #[arg(long, allow_hyphen_values = true)]
        lat: f64,
        #[arg(long, allow_hyphen_values = true)]
        lon: f64,
        /// Metres; defaults to the configured radius, clamped to [50, 2000].
        #[arg(long)]
        radius: Option<f64>,
    },
    /// Render a preprompt for every centre in a CSV or JSON-lines file.
    Preprompts {
        /// `lat,lon[,id]` rows (optional header) or `{"lat", "lon", "id"?}` lines.
        #[arg(long)]
        centers: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        radius: Option<f64>,
    },
    /// Generate question-answer datapoints from a teacher model.
    Curate {
        #[arg(long)]
        preprompts: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to `<out stem>.report.json`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Split a JSON-lines dataset into `<stem>.train.jsonl` and `<stem>.val.jsonl`.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.99)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Embed preprompts, project them to 2D and write the coloured GeoJSON layer.
    Embed {
        #[arg(long)]
        preprompts: PathBuf,
        /// Word vectors, `token v1 … vd` per line.
        #[arg(long)]
        vectors: PathBuf,
        /// Defaults to `service.embeddings_path`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        method: Option<Method>,
        #[arg(long)]
        seed: Option<u64>,
        /// Projection cache; defaults to `<out stem>.projection.jsonl`.
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Include the full vectors in the projection cache.
        #[arg(long)]
        cache_vectors: bool,
    },
    /// Run the HTTP service.
    Serve {
        /// Overrides `service.bind`.
        #[arg(long)]
        bind: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Method {
    Pca,
    Umap,
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().ansi().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    crate::logging::init();
    match execute(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            tracing::error!(error = %e, "command failed");
            let _ = writeln!(err, "error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::Config(format!("cannot start async runtime: {e}")))
}

fn io_out(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    if let Command::Split { input, fraction, seed } = &cli.command {
        let (tp, nt, vp, nv) = split_file(input, *fraction, *seed)?;
        writeln!(out, "{}", json!({ "train": tp, "train_lines": nt, "val": vp, "val_lines": nv }))
            .map_err(io_out)?;
        return Ok(());
    }
    let cfg = PipelineConfig::load(&cli.config)?;
    match cli.command {
        Command::Ingest => ingest(&cfg, out),
        Command::Describe { lat, lon, radius } => {
            let store = FeatureStore::load(&cfg.data.store)?;
            let center = LatLon::new(lat, lon);
            check_center(&store, center)?;
            let r = effective_radius(radius, cfg.descriptor.radius_m);
            let d = store.describe(center, r, &cfg.descriptor, &cfg.verbalizer)?;
            writeln!(out, "{}", d.to_json()).map_err(io_out)?;
            writeln!(out, "{}", d.preprompt).map_err(io_out)
        }
        Command::Preprompts { centers, out: path, radius } => {
            let store = FeatureStore::load(&cfg.data.store)?;
            let centers = read_centers(&centers)?;
            let r = effective_radius(radius, cfg.descriptor.radius_m);
            let mut lines = Vec::new();
            let mut skipped = 0;
            for c in &centers {
                let at = LatLon::new(c.lat, c.lon);
                if let Err(e) = check_center(&store, at) {
                    tracing::warn!(id = %c.id, error = %e, "skipping centre");
                    skipped += 1;
                    continue;
                }
                let d = store.describe(at, r, &cfg.descriptor, &cfg.verbalizer)?;
                let rec = PrepromptRecord {
                    preprompt_id: c.id.clone(),
                    lat: c.lat,
                    lon: c.lon,
                    preprompt: d.preprompt,
                };
                serde_json::to_writer(&mut lines, &rec)?;
                lines.push(b'\n');
            }
            write_atomic(&path, &lines)?;
            writeln!(out, "{}", json!({ "written": centers.len() - skipped, "skipped": skipped, "out": path }))
                .map_err(io_out)
        }
        Command::Curate { preprompts, out: dataset, report } => {
            let records = read_preprompts(&preprompts)?;
            let report = report.unwrap_or_else(|| dataset.with_extension("report.json"));
            let paths = CurationPaths::new(&dataset, &report);
            let timeout = Duration::from_secs_f64(cfg.curation.request_timeout_s);
            let rep = runtime()?.block_on(run_curation(&cfg.curation.job, &records, &paths, timeout))?;
            let failed = rep
                .preprompts
                .iter()
                .filter(|p| p.status != cartoprompt_core::curate::PrepromptStatus::Ok)
                .count();
            writeln!(out, "{}", json!({ "kept": rep.total_kept(), "preprompts": rep.preprompts.len(), "failed": failed, "report": report }))
                .map_err(io_out)
        }
        Command::Embed { preprompts, vectors, out: path, method, seed, cache, cache_vectors } => {
            let records = read_preprompts(&preprompts)?;
            let lexicon = load_word_vectors(&vectors)?;
            let mut pcfg = cfg.projection.clone();
            if let Some(m) = method {
                pcfg.method = match m {
                    Method::Pca => ProjectionMethod::Pca,
                    Method::Umap => ProjectionMethod::Umap,
                };
            }
            if let Some(s) = seed {
                pcfg.seed = s;
            }
            pcfg.validate()?;
            let run = run_embedding(&records, &lexicon, &pcfg)?;
            for w in &run.warnings {
                tracing::warn!(warning = %w, "embedding");
            }
            let path = path.unwrap_or_else(|| cfg.service.embeddings_path.clone());
            write_atomic(&path, emit_geojson(&run.points).as_bytes())?;
            let cache = cache.unwrap_or_else(|| path.with_extension("projection.jsonl"));
            let mut buf = Vec::new();
            write_projection_cache(&mut buf, &run.points, cache_vectors).map_err(|e| Error::io(&cache, e))?;
            write_atomic(&cache, &buf)?;
            writeln!(out, "{}", json!({ "features": run.points.len(), "out": path, "cache": cache, "warnings": run.warnings.len() }))
                .map_err(io_out)
        }
        Command::Serve { bind } => {
            let store = FeatureStore::load(&cfg.data.store)?;
            let addr = bind.unwrap_or_else(|| cfg.service.bind.clone());
            let state = Arc::new(AppState::new(store, &cfg)?);
            runtime()?.block_on(serve(state, &addr))
        }
        Command::Split { .. } => unreachable!("handled above"),
    }
}

fn check_center(store: &FeatureStore, c: LatLon) -> Result<()> {
    if !c.is_valid() {
        return Err(Error::Config(format!("({}, {}) is not a valid latitude/longitude", c.lat, c.lon)));
    }
    if !store.covers(c) {
        return Err(Error::Config(format!("({}, {}) lies outside the loaded data", c.lat, c.lon)));
    }
    Ok(())
}

fn ingest(cfg: &PipelineConfig, out: &mut dyn Write) -> Result<()> {
    let mut sources: Vec<String> = Vec::new();
    let mut parsed: Vec<ParsedOsm> = Vec::new();
    for p in &cfg.data.osm_files {
        let bytes = fs::read(p).map_err(|e| Error::io(p, e))?;
        parsed.push(parse_osm_auto(&bytes).map_err(|e| match e {
            Error::Xml { offset, message } => Error::Xml {
                offset,
                message: format!("{}: {message}", p.display()),
            },
            other => other,
        })?);
        sources.push(p.display().to_string());
    }
    if let Some(o) = &cfg.data.overpass {
        let rt = runtime()?;
        for a in &o.areas {
            let center = LatLon::new(a.lat, a.lon);
            let query = area_query(center, Bbox::around(center, a.half_side_m)?, o.timeout_s);
            let timeout = Duration::from_secs(u64::from(o.timeout_s) + 30);
            tracing::info!(endpoint = %o.endpoint, lat = a.lat, lon = a.lon, "fetching from overpass");
            let body = rt.block_on(fetch_overpass(&query, &o.endpoint, timeout))?;
            parsed.push(parse_osm_auto(&body)?);
            sources.push(format!("{}#{},{},{}", o.endpoint, a.lat, a.lon, a.half_side_m));
        }
    }
    let store = FeatureStore::from_parsed(sources, parsed);
    store.save(&cfg.data.store)?;
    let rejects_path = cfg.data.store.with_extension("rejects.jsonl");
    let mut buf = Vec::new();
    write_rejects(&mut buf, &store.rejects).map_err(|e| Error::io(&rejects_path, e))?;
    write_atomic(&rejects_path, &buf)?;
    writeln!(
        out,
        "{}",
        json!({
            "features": store.features.len(),
            "rejects": store.rejects.len(),
            "unknown_elements": store.unknown_elements,
            "store": cfg.data.store,
            "rejects_file": rejects_path,
        })
    )
    .map_err(io_out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Center {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Deserialize)]
struct CenterLine {
    lat: f64,
    lon: f64,
    #[serde(default)]
    id: Option<String>,
}

fn default_id(lat: f64, lon: f64) -> String {
    format!("{lat:.6},{lon:.6}")
}

/// Reads centres from CSV (`lat,lon[,id]`, header optional) or JSON lines.
pub fn read_centers(path: &Path) -> Result<Vec<Center>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |i: usize, msg: String| Error::Format(format!("{} line {}: {msg}", path.display(), i + 1));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.starts_with('{') {
            let c: CenterLine = serde_json::from_str(line).map_err(|e| bad(i, e.to_string()))?;
            out.push(Center {
                id: c.id.unwrap_or_else(|| default_id(c.lat, c.lon)),
                lat: c.lat,
                lon: c.lon,
            });
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let lat = cols.first().and_then(|s| s.parse::<f64>().ok());
        let lon = cols.get(1).and_then(|s| s.parse::<f64>().ok());
        match (lat, lon) {
            (Some(lat), Some(lon)) => out.push(Center {
                id: cols
                    .get(2)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| default_id(lat, lon)),
                lat,
                lon,
            }),
            _ if out.is_empty() && i == 0 => {}
            _ => return Err(bad(i, format!("expected `lat,lon[,id]`, got `{line}`"))),
        }
    }
    Ok(out)
}
