//! The `wcg` command-line front end.
//!
//! Every report starts with the same self-describing block (tool, version,
//! format, command, seed and the full argument echo). CSV reports carry it as
//! a single leading `#` comment line holding compact JSON; readers in this
//! module skip such lines. Floating-point numbers are written with nine
//! significant digits.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Serialize, Serializer};
use serde_json::{json, Value};

use crate::cid::{filter_pool, gain_from_mapped, item_features, run_trials, BenchmarkConfig, BenchmarkItem, PoolImage};
use crate::color::{convert_gamut, resolve_gamut, Gamut, LinearImage};
use crate::corpus::{gen_corpus, CorpusSpec};
use crate::criteria::{report, FeatureMatrix};
use crate::error::{Error, Result};
use crate::gamut_mapping::{GamutMapper, MapperKind};
use crate::image_io::{load_image, save_image, BitDepth, TransferFunction};
use crate::perceptual::Characterizer;
use crate::selection::{colorfulness, robustness_protocol, select_representative, ColorDomain, FeatureKind, SelectionConfig};
use crate::stats::{f_test, welch_t, Side};

pub const FORMAT_VERSION: u32 = 1;
pub const THREADS_ENV: &str = "WCG_THREADS";
const IMAGE_EXTENSIONS: [&str; 3] = ["png", "tif", "tiff"];

/// A gamut given on the command line, kept together with its spelling so the
/// config echo shows exactly what was typed.
#[derive(Debug, Clone)]
pub struct GamutArg {
    pub spec: String,
    pub gamut: Gamut,
}

impl Serialize for GamutArg {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.spec)
    }
}

fn gamut_arg(s: &str) -> std::result::Result<GamutArg, String> {
    resolve_gamut(s)
        .map(|gamut| GamutArg {
            spec: s.to_string(),
            gamut,
        })
        .map_err(|e| e.to_string())
}

fn parsed<T: std::str::FromStr<Err = Error>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn transfer_arg(s: &str) -> std::result::Result<TransferFunction, String> {
    parsed(s)
}
fn mapper_arg(s: &str) -> std::result::Result<MapperKind, String> {
    parsed(s)
}
fn feature_arg(s: &str) -> std::result::Result<FeatureKind, String> {
    parsed(s)
}
fn side_arg(s: &str) -> std::result::Result<Side, String> {
    parsed(s)
}
fn depth_arg(s: &str) -> std::result::Result<BitDepth, String> {
    parsed(s)
}

#[derive(Debug, Parser)]
#[command(name = "wcg", version, about = "Wide-color-gamut content characterization and gamut-mapping benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Map images from one gamut into another.
    Map(MapArgs),
    /// Predicted perceptual differences under successive gamut reduction.
    Characterize(CharacterizeArgs),
    /// Coverage and uniformity of a characterized dataset.
    Criteria(CriteriaArgs),
    /// Pick representative images by clustering.
    Select(SelectArgs),
    /// Compare two gamut mapping operators by CID gain.
    Benchmark(BenchmarkArgs),
    /// Welch t-test or F-test on two CSV columns.
    Stats(StatsArgs),
    /// Write a synthetic image corpus.
    GenCorpus(GenCorpusArgs),
}

#[derive(Debug, Args, Serialize)]
struct MapArgs {
    #[arg(long, value_parser = mapper_arg)]
    op: MapperKind,
    #[arg(long, value_parser = gamut_arg)]
    src: GamutArg,
    #[arg(long, value_parser = gamut_arg)]
    dst: GamutArg,
    /// Image file or directory of images.
    #[arg(long)]
    input: PathBuf,
    /// Output file, or directory when the input is a directory.
    #[arg(long)]
    output: PathBuf,
    /// Input transfer function; defaults by file type.
    #[arg(long, value_parser = transfer_arg)]
    transfer: Option<TransferFunction>,
    #[arg(long, value_parser = transfer_arg, default_value = "srgb")]
    out_transfer: TransferFunction,
    #[arg(long, value_parser = depth_arg, default_value = "16")]
    depth: BitDepth,
}

#[derive(Debug, Args, Serialize)]
struct CharacterizeArgs {
    #[arg(long = "ref", value_parser = gamut_arg, default_value = "P3")]
    reference: GamutArg,
    #[arg(long, value_parser = gamut_arg, value_delimiter = ',', default_value = "Rec709,Toy")]
    targets: Vec<GamutArg>,
    #[arg(long, value_parser = mapper_arg, default_value = "clip")]
    mapper: MapperKind,
    #[arg(long, value_parser = transfer_arg)]
    transfer: Option<TransferFunction>,
    /// Image files or directories.
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct CriteriaArgs {
    /// CSV written by `characterize`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = crate::criteria::DEFAULT_BINS)]
    bins: usize,
    #[arg(long, default_value_t = crate::criteria::DEFAULT_NORMALIZATION)]
    normalization: f64,
    /// Feature columns; defaults to every `d_*` column.
    #[arg(long, value_delimiter = ',')]
    columns: Vec<String>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct SelectArgs {
    /// CSV written by `characterize`; its rows are the candidates.
    #[arg(long)]
    features: PathBuf,
    #[arg(long, value_parser = feature_arg, default_value = "framework")]
    feature: FeatureKind,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 3)]
    per_cluster: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also run the repeated-selection robustness protocol.
    #[arg(long)]
    robustness: bool,
    #[arg(long, default_value_t = crate::selection::DEFAULT_TRIALS)]
    trials: usize,
    /// Column holding per-image ground truth for the robustness protocol;
    /// defaults to the mean of the `d_*` columns.
    #[arg(long)]
    mos_column: Option<String>,
    /// Gamut the candidate images are encoded in (colorfulness only).
    #[arg(long = "ref", value_parser = gamut_arg, default_value = "P3")]
    reference: GamutArg,
    #[arg(long, value_parser = transfer_arg)]
    transfer: Option<TransferFunction>,
    #[arg(long, value_parser = transfer_arg, default_value = "srgb")]
    display_transfer: TransferFunction,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct BenchmarkArgs {
    /// Directory of source images encoded in the reference gamut.
    #[arg(long)]
    pool: PathBuf,
    #[arg(long = "ref", value_parser = gamut_arg, default_value = "Rec2020")]
    reference: GamutArg,
    #[arg(long, value_parser = gamut_arg, value_delimiter = ',', default_value = "P3,Rec709,Toy")]
    targets: Vec<GamutArg>,
    /// Nested targets that define the framework feature vector.
    #[arg(long, value_parser = gamut_arg, value_delimiter = ',', default_value = "Rec709,Toy")]
    feature_targets: Vec<GamutArg>,
    #[arg(long, value_parser = mapper_arg, default_value = "compress")]
    mapper_a: MapperKind,
    #[arg(long, value_parser = mapper_arg, default_value = "clip")]
    mapper_b: MapperKind,
    /// Pre-mapped images for operator A, laid out as `<dir>/<target>/<file>`.
    #[arg(long, requires = "dir_b")]
    dir_a: Option<PathBuf>,
    #[arg(long, requires = "dir_a")]
    dir_b: Option<PathBuf>,
    /// Selection methods; the first is tested against each of the others.
    #[arg(long, value_parser = feature_arg, value_delimiter = ',', default_value = "framework,colorfulness")]
    select: Vec<FeatureKind>,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 3)]
    per_cluster: usize,
    #[arg(long, default_value_t = crate::selection::DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.005)]
    oog_threshold: f64,
    #[arg(long, value_parser = gamut_arg, default_value = "Rec709")]
    filter_gamut: GamutArg,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_parser = transfer_arg)]
    transfer: Option<TransferFunction>,
    #[arg(long, value_parser = transfer_arg, default_value = "srgb")]
    display_transfer: TransferFunction,
    /// Per-image gains as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Trial statistics and tests as JSON; written to stdout when omitted.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum TestKind {
    Welch,
    F,
}

fn test_arg(s: &str) -> std::result::Result<TestKind, String> {
    match s {
        "welch" | "t" => Ok(TestKind::Welch),
        "f" => Ok(TestKind::F),
        other => Err(format!("unknown test {other:?}; expected welch or f")),
    }
}

#[derive(Debug, Args, Serialize)]
struct StatsArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    a: String,
    #[arg(long)]
    b: String,
    #[arg(long, value_parser = test_arg, default_value = "welch")]
    test: TestKind,
    #[arg(long, value_parser = side_arg, default_value = "two-sided")]
    side: Side,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct GenCorpusArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 24)]
    sweep: usize,
    #[arg(long, default_value_t = 8)]
    in_gamut: usize,
    #[arg(long, default_value_t = 8)]
    noise: usize,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 64)]
    height: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_parser = gamut_arg, default_value = "P3")]
    gamut: GamutArg,
    #[arg(long, value_parser = transfer_arg, default_value = "srgb")]
    transfer: TransferFunction,
    #[arg(long, value_parser = depth_arg, default_value = "16")]
    depth: BitDepth,
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code: 0 on success, 2 on usage errors, 1 on runtime errors.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("wcg: error: {e}");
            1
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            // a pool that is already up keeps its size
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Map(a) => cmd_map(&a),
        Command::Characterize(a) => cmd_characterize(&a),
        Command::Criteria(a) => cmd_criteria(&a),
        Command::Select(a) => cmd_select(&a),
        Command::Benchmark(a) => cmd_benchmark(&a),
        Command::Stats(a) => cmd_stats(&a),
        Command::GenCorpus(a) => cmd_gen_corpus(&a),
    }
}

// Report plumbing.

/// Rounds to nine significant digits.
pub fn sig9(x: f64) -> f64 {
    if x.is_finite() {
        format!("{x:.8e}").parse().unwrap_or(x)
    } else {
        x
    }
}

fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().and_then(|x| serde_json::Number::from_f64(sig9(x))) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

fn header(command: &str, seed: Option<u64>, config: &impl Serialize) -> Result<Value> {
    Ok(json!({
        "tool": "wcg",
        "version": env!("CARGO_PKG_VERSION"),
        "format": FORMAT_VERSION,
        "command": command,
        "seed": seed,
        "config": serde_json::to_value(config)?,
    }))
}

fn json_report(command: &str, seed: Option<u64>, config: &impl Serialize, result: Value) -> Result<String> {
    let mut doc = header(command, seed, config)?;
    doc["result"] = result;
    round_floats(&mut doc);
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

fn csv_report(
    command: &str,
    seed: Option<u64>,
    config: &impl Serialize,
    extra: Value,
    headers: &[String],
    rows: &[Vec<String>],
) -> Result<String> {
    let mut meta = header(command, seed, config)?;
    if let Value::Object(map) = extra {
        for (k, v) in map {
            meta[k] = v;
        }
    }
    round_floats(&mut meta);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(headers)?;
    for r in rows {
        w.write_record(r)?;
    }
    let body = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut out = format!("# {}\n", serde_json::to_string(&meta)?);
    out.push_str(&String::from_utf8_lossy(&body));
    Ok(out)
}

fn num(x: f64) -> String {
    format!("{}", sig9(x))
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            std::fs::write(p, text).map_err(|e| Error::io(p, e))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn is_image(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Image files in a directory, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && is_image(&path) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn expand_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            files.extend(list_images(p)?);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(Error::Empty("no input images".into()));
    }
    Ok(files)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn path_string(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// A CSV report read back: leading `#` metadata (if any) plus the table.
pub struct Table {
    pub meta: Option<Value>,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Table> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let meta = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .find_map(|l| serde_json::from_str(l.trim_start_matches('#').trim()).ok());
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let headers = rdr.headers()?.iter().map(str::to_string).collect();
        let rows = rdr
            .records()
            .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
        Ok(Table { meta, headers, rows })
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidArgument(format!("no column {name:?}")))
    }

    /// Numeric column; empty cells are skipped.
    pub fn numbers(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.column_index(name)?;
        self.rows
            .iter()
            .filter(|r| r.get(i).is_some_and(|c| !c.trim().is_empty()))
            .map(|r| parse_number(&r[i], name))
            .collect()
    }

    fn d_columns(&self) -> Vec<String> {
        let mut cols: Vec<(usize, String)> = self
            .headers
            .iter()
            .filter_map(|h| h.strip_prefix("d_").and_then(|n| n.parse().ok()).map(|n: usize| (n, h.clone())))
            .collect();
        cols.sort();
        cols.into_iter().map(|(_, h)| h).collect()
    }

    fn matrix(&self, columns: &[String]) -> Result<Vec<Vec<f64>>> {
        let idx = columns.iter().map(|c| self.column_index(c)).collect::<Result<Vec<_>>>()?;
        self.rows
            .iter()
            .map(|r| idx.iter().map(|&i| parse_number(r.get(i).map_or("", String::as_str), &self.headers[i])).collect())
            .collect()
    }

    fn target_names(&self) -> Option<Vec<String>> {
        let targets = self.meta.as_ref()?.get("config")?.get("targets")?.as_array()?;
        targets.iter().map(|t| t.as_str().map(str::to_string)).collect()
    }
}

fn parse_number(cell: &str, column: &str) -> Result<f64> {
    cell.trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("non-numeric value {cell:?} in column {column:?}")))
}

// Subcommands.

fn map_one(mapper: &GamutMapper, a: &MapArgs, input: &Path, output: &Path) -> Result<()> {
    let img = load_image(input, a.transfer, &a.src.gamut)?;
    let mapped = mapper.apply(&img)?;
    save_image(&mapped, output, a.out_transfer, a.depth)
}

fn cmd_map(a: &MapArgs) -> Result<()> {
    let mapper = GamutMapper::new(a.op, &a.src.gamut, &a.dst.gamut)?;
    let mut written = Vec::new();
    if a.input.is_dir() {
        std::fs::create_dir_all(&a.output).map_err(|e| Error::io(&a.output, e))?;
        let files = list_images(&a.input)?;
        let outputs: Vec<PathBuf> = files
            .iter()
            .map(|f| a.output.join(f.file_name().unwrap_or_default()).with_extension("png"))
            .collect();
        files
            .par_iter()
            .zip(&outputs)
            .map(|(i, o)| map_one(&mapper, a, i, o))
            .collect::<Result<Vec<()>>>()?;
        written.extend(outputs);
    } else {
        map_one(&mapper, a, &a.input, &a.output)?;
        written.push(a.output.clone());
    }
    let files: Vec<String> = written.iter().map(|p| path_string(p)).collect();
    emit(None, &json_report("map", None, a, json!({ "written": files, "scale": mapper.scale() }))?)
}

fn cmd_characterize(a: &CharacterizeArgs) -> Result<()> {
    let targets: Vec<Gamut> = a.targets.iter().map(|t| t.gamut.clone()).collect();
    let ch = Characterizer::new(a.reference.gamut.clone(), targets, a.mapper)?;
    let files = expand_inputs(&a.input)?;
    let results = files
        .par_iter()
        .map(|f| {
            let img = load_image(f, a.transfer, &a.reference.gamut)?;
            ch.run(&img)
        })
        .collect::<Result<Vec<_>>>()?;
    let n = a.targets.len();
    let mut headers = vec!["path".to_string()];
    headers.extend((1..=n).map(|i| format!("d_{i}")));
    headers.extend((1..=n).map(|i| format!("cssim_{i}")));
    let rows: Vec<Vec<String>> = files
        .iter()
        .zip(&results)
        .map(|(f, fv)| {
            let mut row = vec![path_string(f)];
            row.extend(fv.values.iter().map(|&v| num(v)));
            row.extend(fv.cssim.iter().map(|&v| num(v)));
            row
        })
        .collect();
    let text = csv_report("characterize", None, a, json!({}), &headers, &rows)?;
    emit(a.output.as_deref(), &text)
}

fn cmd_criteria(a: &CriteriaArgs) -> Result<()> {
    let table = Table::read(&a.input)?;
    let columns = if a.columns.is_empty() { table.d_columns() } else { a.columns.clone() };
    if columns.is_empty() {
        return Err(Error::InvalidArgument("no feature columns".into()));
    }
    let z = FeatureMatrix::with_normalization(table.matrix(&columns)?, a.normalization)?;
    let rep = report(&z, a.bins)?;
    let names = table.target_names();
    let per_target: Vec<Value> = columns
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let target = c
                .strip_prefix("d_")
                .and_then(|n| n.parse::<usize>().ok())
                .and_then(|n| names.as_ref().and_then(|t| t.get(n.wrapping_sub(1)).cloned()));
            json!({
                "column": c,
                "target": target,
                "coverage": rep.coverage[i],
                "uniformity": rep.uniformity[i],
            })
        })
        .collect();
    let result = json!({
        "images": z.rows(),
        "bins": rep.bins,
        "per_target": per_target,
        "total": {
            "coverage": rep.total_coverage,
            "uniformity": rep.total_uniformity,
        },
    });
    emit(a.output.as_deref(), &json_report("criteria", None, a, result)?)
}

fn cmd_select(a: &SelectArgs) -> Result<()> {
    let table = Table::read(&a.features)?;
    let path_col = table.column_index("path")?;
    let paths: Vec<String> = table.rows.iter().map(|r| r[path_col].clone()).collect();
    let d_cols = table.d_columns();
    let framework = table.matrix(&d_cols)?;
    let features: Vec<Vec<f64>> = match a.feature {
        FeatureKind::Framework => framework.clone(),
        FeatureKind::Colorfulness => paths
            .par_iter()
            .map(|p| {
                let img = load_image(Path::new(p), a.transfer, &a.reference.gamut)?;
                Ok(vec![colorfulness(&img, ColorDomain::Display(a.display_transfer))?])
            })
            .collect::<Result<_>>()?,
        FeatureKind::Random => vec![Vec::new(); paths.len()],
    };
    let cfg = SelectionConfig {
        k: a.k,
        per_cluster: a.per_cluster,
        seed: a.seed,
        feature: a.feature,
    };
    let sel = select_representative(&features, &cfg)?;
    let names = |idx: &[usize]| idx.iter().map(|&i| paths[i].clone()).collect::<Vec<_>>();
    let clusters: Vec<Value> = sel
        .clusters
        .iter()
        .map(|c| {
            json!({
                "centroid": c.centroid,
                "members": names(&c.members),
                "selected": names(&c.selected),
            })
        })
        .collect();
    let mut result = json!({
        "candidates": paths.len(),
        "selected": names(&sel.selected()),
        "clusters": clusters,
        "shortfall": sel.shortfall,
    });
    if a.robustness {
        let mos: Vec<f64> = match &a.mos_column {
            Some(c) => table.matrix(std::slice::from_ref(c))?.into_iter().map(|r| r[0]).collect(),
            None => framework.iter().map(|r| crate::stats::mean(r)).collect(),
        };
        let out = robustness_protocol(&features, &mos, &cfg, a.trials)?;
        result["robustness"] = json!({
            "trials": a.trials,
            "mean_pcc": out.mean_pcc(),
            "pcc_trials": out.pcc,
            "excluded": out.excluded,
        });
    }
    emit(a.output.as_deref(), &json_report("select", Some(a.seed), a, result)?)
}

fn benchmark_config(a: &BenchmarkArgs) -> BenchmarkConfig {
    let mut cfg = BenchmarkConfig::new(
        a.reference.gamut.clone(),
        a.targets.iter().map(|t| t.gamut.clone()).collect(),
        a.seed,
    );
    cfg.feature_targets = a.feature_targets.iter().map(|t| t.gamut.clone()).collect();
    cfg.mapper_a = a.mapper_a;
    cfg.mapper_b = a.mapper_b;
    cfg.selections = a
        .select
        .iter()
        .map(|&feature| SelectionConfig {
            k: a.k,
            per_cluster: a.per_cluster,
            seed: a.seed,
            feature,
        })
        .collect();
    cfg.trials = a.trials;
    cfg.oog_threshold = a.oog_threshold;
    cfg.filter_gamut = a.filter_gamut.gamut.clone();
    cfg.alpha = a.alpha;
    cfg.display_transfer = a.display_transfer;
    cfg
}

fn premapped_gains(a: &BenchmarkArgs, item: &PoolImage, file: &str, cfg: &BenchmarkConfig) -> Result<Vec<f64>> {
    let (Some(dir_a), Some(dir_b)) = (&a.dir_a, &a.dir_b) else {
        return Err(Error::InvalidArgument("both --dir-a and --dir-b are required".into()));
    };
    a.targets
        .iter()
        .map(|t| {
            let load = |dir: &Path| -> Result<LinearImage> {
                let img = load_image(&dir.join(&t.spec).join(file), a.transfer, &t.gamut)?;
                convert_gamut(&img, &t.gamut, &cfg.reference)
            };
            gain_from_mapped(&item.image, &load(dir_a)?, &load(dir_b)?)
        })
        .collect()
}

fn cmd_benchmark(a: &BenchmarkArgs) -> Result<()> {
    if a.select.is_empty() {
        return Err(Error::InvalidArgument("at least one selection method required".into()));
    }
    let cfg = benchmark_config(a);
    let files = list_images(&a.pool)?;
    let pool = files
        .par_iter()
        .map(|f| {
            Ok(PoolImage {
                id: file_name(f),
                image: load_image(f, a.transfer, &cfg.reference)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (kept, filtered_out) = filter_pool(&pool, &cfg)?;
    let items = kept
        .par_iter()
        .map(|item| {
            let gains = if a.dir_a.is_some() {
                premapped_gains(a, item, &item.id, &cfg)?
            } else {
                crate::cid::item_gains(&item.image, &cfg)?
            };
            Ok(BenchmarkItem {
                id: item.id.clone(),
                gains,
                features: item_features(&item.image, &cfg)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rep = run_trials(&items, &cfg)?;
    rep.filtered_out = filtered_out;

    if a.csv.is_some() {
        let headers = ["image", "target", "gain"].map(String::from);
        let rows: Vec<Vec<String>> = rep
            .records
            .iter()
            .map(|r| vec![r.image.clone(), r.target.clone(), num(r.gain)])
            .collect();
        let extra = json!({ "cid_variant": rep.cid_variant });
        emit(a.csv.as_deref(), &csv_report("benchmark", Some(a.seed), a, extra, &headers, &rows)?)?;
    }

    let summary: Vec<Value> = rep
        .methods
        .iter()
        .map(|m| {
            let per_target: Vec<Value> = m
                .series
                .iter()
                .map(|s| {
                    json!({
                        "target": s.target,
                        "mean_of_means": crate::stats::mean(&s.means),
                        "std_of_means": crate::stats::sample_std(&s.means),
                        "mean_of_stds": crate::stats::mean(&s.stds),
                        "std_of_stds": crate::stats::sample_std(&s.stds),
                    })
                })
                .collect();
            json!({ "feature": m.feature, "seed": m.seed, "per_target": per_target })
        })
        .collect();
    let mut per_target_gain: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in &rep.records {
        per_target_gain.entry(r.target.clone()).or_default().push(r.gain);
    }
    let pool_mean: Vec<Value> = a
        .targets
        .iter()
        .map(|t| {
            let g = per_target_gain.get(&t.gamut.name).cloned().unwrap_or_default();
            json!({ "target": t.gamut.name, "mean_gain": crate::stats::mean(&g), "std_gain": crate::stats::sample_std(&g) })
        })
        .collect();
    let result = json!({
        "cid_variant": rep.cid_variant,
        "pool": rep.pool,
        "filtered_out": rep.filtered_out,
        "pool_gains": pool_mean,
        "summary": summary,
        "tests": serde_json::to_value(&rep.comparisons)?,
        "alpha": rep.alpha,
        "bonferroni_m": rep.comparisons_counted,
        "trials": serde_json::to_value(&rep.methods)?,
    });
    emit(a.json.as_deref(), &json_report("benchmark", Some(a.seed), a, result)?)
}

fn cmd_stats(a: &StatsArgs) -> Result<()> {
    let table = Table::read(&a.input)?;
    let x = table.numbers(&a.a)?;
    let y = table.numbers(&a.b)?;
    let r = match a.test {
        TestKind::Welch => welch_t(&x, &y, a.side)?,
        TestKind::F => f_test(&x, &y, a.side)?,
    };
    let result = json!({
        "n_a": x.len(),
        "n_b": y.len(),
        "statistic": r.statistic,
        "df": r.df,
        "p_value": r.p_value,
        "side": r.side,
    });
    emit(a.output.as_deref(), &json_report("stats", None, a, result)?)
}

fn cmd_gen_corpus(a: &GenCorpusArgs) -> Result<()> {
    let spec = CorpusSpec {
        sweep: a.sweep,
        in_gamut: a.in_gamut,
        noise: a.noise,
        width: a.width,
        height: a.height,
        seed: a.seed,
        gamut: a.gamut.gamut.clone(),
        transfer: a.transfer,
        depth: a.depth,
    };
    let files = gen_corpus(&a.out, &spec)?;
    let names: Vec<String> = files.iter().map(|f| file_name(f)).collect();
    let text = json_report("gen-corpus", Some(a.seed), a, json!({ "files": names }))?;
    emit(Some(&a.out.join("manifest.json")), &text)
}
