//! Sweep runner over (environment, wrapper, agent, seed) cells, CSV output and
//! an SVG plot of mean return against wrapper parameter.
//!
//! Cells run in parallel but rows are sorted before writing, and wall time is
//! only recorded on request, so the CSV is a pure function of the config.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{build_agent, evaluate, AgentSpec};
use crate::aggregators::FunctorSpec;
use crate::envs::EnvId;
use crate::error::{Error, Result};
use crate::wrappers::wrap;

pub const CSV_HEADER: [&str; 10] = [
    "env",
    "wrapper_family",
    "param",
    "agent",
    "seed",
    "mean_return",
    "std_return",
    "episodes",
    "status",
    "wall_ms",
];

/// Offset between training and evaluation seeds.
const EVAL_SEED_OFFSET: u64 = 1_000_000;

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

fn default_episodes() -> usize {
    2000
}

fn default_eval_episodes() -> usize {
    10
}

/// A sweep grid. Loaded from JSON; omitted fields take their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub envs: Vec<String>,
    pub wrappers: Vec<String>,
    pub agents: Vec<String>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Training episodes per cell.
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    /// Overrides the environments' default episode length.
    #[serde(default)]
    pub horizon: Option<usize>,
    /// Reward aggregator applied on top of every wrapper.
    #[serde(default)]
    pub har: Option<String>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Fills `wall_ms`; off by default because it breaks byte-determinism.
    #[serde(default)]
    pub record_wall_time: bool,
}

/// Running-sum powers `n ∈ {0..5}` and exponentially weighted sums
/// `λ ∈ {0, 0.2, .., 1}` on chain-5, for a memoryless and a windowed agent.
pub fn paper_grid() -> SweepConfig {
    let mut wrappers: Vec<String> = (0..=5).map(|n| format!("S^{n}")).collect();
    wrappers.extend((0..=5).map(|i| format!("S_l:{}", f64::from(i) / 5.0)));
    SweepConfig {
        envs: vec!["chain:5".into()],
        wrappers,
        agents: vec!["qwin:1".into(), "qwin:3".into()],
        seeds: default_seeds(),
        episodes: default_episodes(),
        eval_episodes: default_eval_episodes(),
        horizon: None,
        har: None,
        output: None,
        record_wall_time: false,
    }
}

impl SweepConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: SweepConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        SweepConfig::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.envs.is_empty() || self.wrappers.is_empty() || self.agents.is_empty() || self.seeds.is_empty() {
            return Err(Error::Validation("sweep grid is empty".into()));
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return Err(Error::Validation("seeds must be distinct".into()));
        }
        if self.episodes == 0 || self.eval_episodes == 0 {
            return Err(Error::Validation(
                "episodes and eval_episodes must be at least 1".into(),
            ));
        }
        if self.horizon == Some(0) {
            return Err(Error::Validation("horizon must be at least 1".into()));
        }
        for e in &self.envs {
            e.parse::<EnvId>()?;
        }
        for w in &self.wrappers {
            w.parse::<FunctorSpec>()?;
        }
        for a in &self.agents {
            a.parse::<AgentSpec>()?;
        }
        if let Some(h) = &self.har {
            h.parse::<FunctorSpec>()?;
        }
        Ok(())
    }

    /// Every cell of the grid, in config order.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        self.validate()?;
        let har = self.har.as_deref().map(str::parse).transpose()?;
        let mut out = Vec::new();
        for env in &self.envs {
            for wrapper in &self.wrappers {
                for agent in &self.agents {
                    for &seed in &self.seeds {
                        out.push(Cell {
                            env: env.parse()?,
                            wrapper: wrapper.parse()?,
                            har: har.clone(),
                            agent: agent.parse()?,
                            seed,
                            episodes: self.episodes,
                            eval_episodes: self.eval_episodes,
                            horizon: self.horizon,
                        });
                    }
                }
            }
        }
        Ok(out)
    }
}

/// One training-and-evaluation run.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub env: EnvId,
    pub wrapper: FunctorSpec,
    pub har: Option<FunctorSpec>,
    pub agent: AgentSpec,
    pub seed: u64,
    pub episodes: usize,
    pub eval_episodes: usize,
    pub horizon: Option<usize>,
}

impl Cell {
    /// Trains a fresh agent on the wrapped environment and evaluates it
    /// greedily on fresh seeds.
    pub fn run(&self) -> Result<(f64, f64)> {
        let base = self.env.build(self.horizon)?;
        let mut env = wrap(base, &self.wrapper, self.har.as_ref())?;
        let mut agent = build_agent(&self.agent, &self.env, &self.wrapper, env.num_actions())?;
        agent.train(env.as_mut(), self.episodes, self.seed)?;
        let horizon = self.horizon.unwrap_or(self.env.default_horizon());
        let eval = evaluate(
            agent.as_mut(),
            env.as_mut(),
            self.eval_episodes,
            horizon,
            self.seed.wrapping_add(EVAL_SEED_OFFSET),
        )?;
        Ok((eval.mean, eval.std))
    }
}

/// One CSV row. `mean_return` and `std_return` are absent for failed cells.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub env: String,
    pub wrapper_family: String,
    pub param: f64,
    pub agent: String,
    pub seed: u64,
    pub mean_return: Option<f64>,
    pub std_return: Option<f64>,
    pub episodes: usize,
    pub status: String,
    pub wall_ms: u64,
}

impl Row {
    fn key_cmp(&self, other: &Row) -> std::cmp::Ordering {
        self.env
            .cmp(&other.env)
            .then_with(|| self.wrapper_family.cmp(&other.wrapper_family))
            .then_with(|| self.param.total_cmp(&other.param))
            .then_with(|| self.agent.cmp(&other.agent))
            .then_with(|| self.seed.cmp(&other.seed))
    }

    fn fields(&self) -> [String; 10] {
        let opt = |x: Option<f64>| x.map(format_sig6).unwrap_or_default();
        [
            self.env.clone(),
            self.wrapper_family.clone(),
            format_sig6(self.param),
            self.agent.clone(),
            self.seed.to_string(),
            opt(self.mean_return),
            opt(self.std_return),
            self.episodes.to_string(),
            self.status.clone(),
            self.wall_ms.to_string(),
        ]
    }
}

/// Rounds to 6 significant digits and prints the shortest representation
/// of the rounded value.
pub fn format_sig6(x: f64) -> String {
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        "0".into()
    } else {
        rounded.to_string()
    }
}

fn run_cell(cell: &Cell, record_wall_time: bool) -> Row {
    let start = Instant::now();
    let result = cell.run();
    let (family, param) = cell.wrapper.family();
    let (mean, std, status) = match result {
        Ok((m, s)) => (Some(m), Some(s), "ok".to_string()),
        Err(e) => (None, None, format!("error: {e}")),
    };
    Row {
        env: cell.env.to_string(),
        wrapper_family: family,
        param,
        agent: cell.agent.to_string(),
        seed: cell.seed,
        mean_return: mean,
        std_return: std,
        episodes: cell.episodes,
        status,
        wall_ms: if record_wall_time {
            start.elapsed().as_millis() as u64
        } else {
            0
        },
    }
}

/// Runs every cell on `workers` threads. Failed cells become rows with an
/// error status; the rest of the sweep continues.
pub fn run_sweep(cfg: &SweepConfig, workers: usize) -> Result<Vec<Row>> {
    let cells = cfg.cells()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Validation(format!("cannot start worker pool: {e}")))?;
    let mut rows: Vec<Row> = pool.install(|| cells.par_iter().map(|c| run_cell(c, cfg.record_wall_time)).collect());
    rows.sort_by(Row::key_cmp);
    Ok(rows)
}

pub fn write_csv(rows: &[Row], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.fields()).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(rows: &[Row]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

/// Parses sweep CSV. Errors carry the 1-based line number.
pub fn read_csv(input: impl Read) -> Result<Vec<Row>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let line_of = |e: &csv::Error| e.position().map_or(1, |p| p.line() as usize);
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: line_of(&e),
            msg: e.to_string(),
        })?
        .clone();
    if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header {}", CSV_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: line_of(&e),
            msg: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let bad = |field: &str| Error::Parse {
            line,
            msg: format!("invalid {field}"),
        };
        let num = |i: usize, field: &str| -> Result<Option<f64>> {
            match &record[i] {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|_| bad(field)),
            }
        };
        rows.push(Row {
            env: record[0].to_string(),
            wrapper_family: record[1].to_string(),
            param: num(2, "param")?.ok_or_else(|| bad("param"))?,
            agent: record[3].to_string(),
            seed: record[4].parse().map_err(|_| bad("seed"))?,
            mean_return: num(5, "mean_return")?,
            std_return: num(6, "std_return")?,
            episodes: record[7].parse().map_err(|_| bad("episodes"))?,
            status: record[8].to_string(),
            wall_ms: record[9].parse().map_err(|_| bad("wall_ms"))?,
        });
    }
    Ok(rows)
}

/// Points of one plotted line: `(param, mean over seeds, std over seeds)`.
pub type Series = Vec<(f64, f64, f64)>;

/// Groups successful rows by `(agent, wrapper family)`.
pub fn series(rows: &[Row]) -> BTreeMap<(String, String), Series> {
    let mut grouped: BTreeMap<(String, String), BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for row in rows {
        if let (Some(mean), "ok") = (row.mean_return, row.status.as_str()) {
            grouped
                .entry((row.agent.clone(), row.wrapper_family.clone()))
                .or_default()
                .entry(row.param.to_bits())
                .or_default()
                .push(mean);
        }
    }
    grouped
        .into_iter()
        .map(|(key, by_param)| {
            let mut points: Series = by_param
                .into_iter()
                .map(|(bits, ys)| {
                    let n = ys.len() as f64;
                    let mean = ys.iter().sum::<f64>() / n;
                    let var = ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
                    (f64::from_bits(bits), mean, var.sqrt())
                })
                .collect();
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            (key, points)
        })
        .collect()
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Self-contained SVG with one polyline per series and vertical error bars.
pub fn render_svg(series: &BTreeMap<(String, String), Series>) -> Result<String> {
    let points = series.values().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y, e) in points {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(y - e);
        y1 = y1.max(y + e);
    }
    if !x0.is_finite() {
        return Err(Error::Parse {
            line: 1,
            msg: "no data rows to plot".into(),
        });
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let w = &mut svg;
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    writeln!(
        w,
        r#"<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>"#
    )
    .unwrap();
    writeln!(
        w,
        r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>"#
    )
    .unwrap();
    for (value, anchor) in [(x0, "start"), (x1, "end")] {
        writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="{anchor}">{}</text>"#,
            px(value),
            bottom + 18.0,
            format_sig6(value)
        )
        .unwrap();
    }
    for value in [y0, y1] {
        writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end">{}</text>"#,
            left - 6.0,
            py(value) + 4.0,
            format_sig6(value)
        )
        .unwrap();
    }
    writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">wrapper parameter</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0
    )
    .unwrap();
    writeln!(w, r#"<text x="16" y="{:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.2})">mean episode return</text>"#, HEIGHT / 2.0, HEIGHT / 2.0).unwrap();

    for (i, ((agent, family), pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let label = escape(&format!("{agent} / {family}"));
        writeln!(w, r#"<g class="series" data-label="{label}">"#).unwrap();
        let coords: Vec<String> = pts
            .iter()
            .map(|(x, y, _)| format!("{:.2},{:.2}", px(*x), py(*y)))
            .collect();
        writeln!(
            w,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            coords.join(" ")
        )
        .unwrap();
        for (x, y, e) in pts {
            writeln!(
                w,
                r#"<line class="errorbar" x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="{color}"/>"#,
                px(*x),
                py(y - e),
                py(y + e)
            )
            .unwrap();
        }
        let ly = top + 16.0 * i as f64;
        writeln!(
            w,
            r#"<text x="{:.2}" y="{ly:.2}" font-size="12" fill="{color}" text-anchor="end">{label}</text>"#,
            right
        )
        .unwrap();
        writeln!(w, "</g>").unwrap();
    }
    writeln!(w, "</svg>").unwrap();
    Ok(svg)
}

/// Reads a sweep CSV and writes the plot to `out`.
pub fn render_plot(csv_path: impl AsRef<Path>, out: impl AsRef<Path>) -> Result<()> {
    let rows = read_csv(std::fs::File::open(csv_path)?)?;
    let svg = render_svg(&series(&rows))?;
    std::fs::write(out, svg)?;
    Ok(())
}
