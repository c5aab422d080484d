//! `cohdeals`: batch front end reading JSON models and writing JSON or CSV.
//!
//! Exit codes: 0 success, 2 invalid input or model, 3 pricing condition
//! violated (certificate on stderr), 4 numerical failure, 64 usage.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use cohdeals::gaussian::{
    gamma_of, gaussian_hedges, gaussian_na_interval, gaussian_ngd_interval, GaussianInterval, GaussianMarket,
};
use cohdeals::geometry::{allocate, contribution, Generator};
use cohdeals::hedging::{ex1_closed_form, superhedge, ContinuousClaimSpec, Payoff, PriceLaw};
use cohdeals::markets::{
    check_containment_seeded, na_interval, ngd_interval, raroc_interval, MarketModel, PriceInterval,
};
use cohdeals::txcost::{convergence_sweep, txcost_solve, TreeEndpoint, TreeModel};
use cohdeals::{extreme_measure, tol, utility, CoreError, Pnl, RiskSpec, ScenarioSpace, Violation};

#[derive(Parser)]
#[command(name = "cohdeals", version, about = "Coherent risk, capital allocation and no-good-deal pricing")]
struct Cli {
    #[command(flatten)]
    output: OutputArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutputArgs {
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Result format; tables default to CSV, everything else to JSON.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Omit the `# cohdeals <version>` line.
    #[arg(long, global = true)]
    no_header: bool,
    /// Seed for the sampled profit/risk containment check.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct ModelRisk {
    /// Market model JSON.
    #[arg(long)]
    model: PathBuf,
    /// Risk spec as inline JSON or a path to a JSON file.
    #[arg(long)]
    risk: String,
}

#[derive(Subcommand)]
enum Command {
    /// Utility and risk of the model's payoff.
    Risk(ModelRisk),
    /// Extreme measure of the model's payoff.
    Extreme(ModelRisk),
    /// Capital allocation among the model's positions (or assets).
    Allocate {
        #[command(flatten)]
        base: ModelRisk,
        /// Emit the generator polygon vertices (two components) instead.
        #[arg(long)]
        polygon: bool,
    },
    /// Contribution of position `x` to position `y`.
    Contribute {
        #[command(flatten)]
        base: ModelRisk,
        #[arg(long, default_value_t = 0)]
        x: usize,
        #[arg(long, default_value_t = 1)]
        y: usize,
    },
    /// No-good-deal price interval of the payoff.
    Price(ModelRisk),
    /// RAROC-based price interval.
    RarocPrice {
        #[arg(long)]
        model: PathBuf,
        /// Profit spec (inline JSON or path).
        #[arg(long)]
        pd: String,
        /// Risk spec (inline JSON or path).
        #[arg(long)]
        rd: String,
        /// Acceptable RAROC level.
        #[arg(long = "raroc")]
        big_r: f64,
    },
    /// No-arbitrage price interval of the payoff.
    NaPrice {
        #[arg(long)]
        model: PathBuf,
    },
    /// Upper and lower prices with super- and sub-hedges.
    Hedge(ModelRisk),
    /// Closed-form prices of a convex claim on a continuous single asset.
    Ex1 {
        /// Claim JSON: meanlog, sdlog, lambda, s0, payoff.
        #[arg(long)]
        model: PathBuf,
    },
    /// Closed-form Gaussian pricing and hedging.
    Gaussian {
        #[arg(long)]
        model: PathBuf,
        /// Replaces the model's `gamma` with the factor of this law-invariant spec.
        #[arg(long)]
        risk: Option<String>,
        /// Also report the RAROC interval at this level.
        #[arg(long = "raroc")]
        big_r: Option<f64>,
    },
    /// Price interval on an event tree with proportional costs.
    Txcost {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        lambda: f64,
    },
    /// Intervals along decreasing cost levels plus the frictionless one.
    Sweep {
        #[arg(long)]
        tree: PathBuf,
        /// `geometric:RATIO:N` for RATIO^1..RATIO^N, or a comma-separated list.
        #[arg(long)]
        lambdas: String,
    },
}

/// Market model file. `s1` is asset-major; `positions` defaults to the
/// asset rows for allocation and contribution.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    probs: Vec<f64>,
    #[serde(default)]
    labels: Option<Vec<String>>,
    #[serde(default)]
    s0: Vec<f64>,
    #[serde(default)]
    s1: Vec<Vec<f64>>,
    #[serde(default)]
    payoff: Option<Vec<f64>>,
    #[serde(default)]
    positions: Option<Vec<Vec<f64>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ClaimFile {
    meanlog: f64,
    sdlog: f64,
    lambda: f64,
    s0: f64,
    payoff: Payoff,
}

enum Failure {
    Input(String),
    Usage(String),
    Core(CoreError),
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        Failure::Core(e)
    }
}

type Res<T> = Result<T, Failure>;

/// Tabular or structured command output.
enum Output {
    Json(Value),
    Csv(String),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(64) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, diag) = diagnostic(&f);
            eprintln!("{}", serde_json::to_string_pretty(&diag).expect("diagnostic serializes"));
            ExitCode::from(code)
        }
    }
}

fn diagnostic(f: &Failure) -> (u8, Value) {
    match f {
        Failure::Usage(m) => (64, json!({"error": "usage", "message": m})),
        Failure::Input(m) => (2, json!({"error": "input", "message": m})),
        Failure::Core(e) => {
            let kind = match e {
                CoreError::Structural(_) => "structural",
                CoreError::Domain(_) => "domain",
                CoreError::Model(_) => "model",
                CoreError::Numerical(_) => "numerical",
                CoreError::Violated(_) => "violated",
            };
            let mut v = json!({"error": kind, "message": e.to_string()});
            let code = match e {
                CoreError::Violated(cert) => {
                    v["certificate"] = certificate(cert);
                    3
                }
                CoreError::Numerical(_) => 4,
                _ => 2,
            };
            (code, v)
        }
    }
}

fn certificate(v: &Violation) -> Value {
    json!({
        "kind": format!("{:?}", v.kind),
        "portfolio": nums(&v.portfolio),
        "value": num(v.value),
    })
}

fn run(cli: &Cli) -> Res<()> {
    let out = execute(cli)?;
    let body = match (out, cli.output.format) {
        (Output::Json(v), None | Some(Format::Json)) => {
            serde_json::to_string_pretty(&v).expect("result serializes") + "\n"
        }
        (Output::Csv(s), None | Some(Format::Csv)) => s,
        (Output::Json(_), Some(Format::Csv)) => {
            return Err(Failure::Usage("this command has no CSV form".into()));
        }
        (Output::Csv(_), Some(Format::Json)) => unreachable!("tables honour an explicit JSON request"),
    };
    let mut text = String::new();
    if !cli.output.no_header {
        text.push_str(&format!("# cohdeals {}\n", env!("CARGO_PKG_VERSION")));
    }
    text.push_str(&body);
    match &cli.output.out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Input(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Input(format!("stdout: {e}"))),
    }
}

fn execute(cli: &Cli) -> Res<Output> {
    let want_json = cli.output.format == Some(Format::Json);
    match &cli.command {
        Command::Risk(a) => {
            let (m, spec) = load_with_risk(a)?;
            let x = m.payoff()?;
            let u = utility(&spec, &x)?;
            Ok(Output::Json(json!({"utility": num(u), "risk": num(-u)})))
        }
        Command::Extreme(a) => {
            let (m, spec) = load_with_risk(a)?;
            let r = extreme_measure(&spec, &m.payoff()?)?;
            Ok(Output::Json(json!({"utility": num(r.utility), "density": nums(r.density.values())})))
        }
        Command::Allocate { base, polygon } => {
            let (m, spec) = load_with_risk(base)?;
            let xs = m.positions()?;
            if *polygon {
                let g = Generator::new(spec, xs)?;
                let verts = g.polygon()?.to_vec();
                if want_json {
                    let rows: Vec<Value> = verts.iter().map(|v| json!(nums(v))).collect();
                    return Ok(Output::Json(json!({"vertices": rows})));
                }
                let rows = verts.iter().map(|v| vec![sig12(v[0]), sig12(v[1])]);
                return Ok(Output::Csv(csv_table(&["x1", "x2"], rows)?));
            }
            let a = allocate(&spec, &xs)?;
            let tolerance = reporting_tol()?;
            let unique = a.ranges.iter().all(|(lo, hi)| hi - lo <= tolerance);
            Ok(Output::Json(json!({
                "allocation": nums(&a.allocation),
                "unique": unique,
                "ranges": a.ranges.iter().map(|&(lo, hi)| json!([num(lo), num(hi)])).collect::<Vec<_>>(),
                "segment": a.segment.as_ref().map(|[p, q]| json!([nums(p), nums(q)])),
                "witness": nums(a.witness.values()),
            })))
        }
        Command::Contribute { base, x, y } => {
            let (m, spec) = load_with_risk(base)?;
            let xs = m.positions()?;
            let pick = |i: usize| {
                xs.get(i).cloned().ok_or_else(|| Failure::Input(format!("no position {i} among {}", xs.len())))
            };
            let uc = contribution(&spec, &pick(*x)?, &pick(*y)?)?;
            Ok(Output::Json(json!({"contribution": num(uc), "risk_contribution": num(-uc)})))
        }
        Command::Price(a) => {
            let (m, spec) = load_with_risk(a)?;
            Ok(Output::Json(interval_json(&ngd_interval(&m.market, &spec, &m.payoff()?)?)))
        }
        Command::RarocPrice { model, pd, rd, big_r } => {
            let m = Model::load(model)?;
            let (pd, rd) = (parse_spec(pd)?, parse_spec(rd)?);
            if let Some(seed) = cli.output.seed {
                check_containment_seeded(&pd, &rd, m.market.space(), seed)?;
            }
            Ok(Output::Json(interval_json(&raroc_interval(&m.market, &pd, &rd, *big_r, &m.payoff()?)?)))
        }
        Command::NaPrice { model } => {
            let m = Model::load(model)?;
            Ok(Output::Json(interval_json(&na_interval(&m.market, &m.payoff()?)?)))
        }
        Command::Hedge(a) => {
            let (m, spec) = load_with_risk(a)?;
            let r = superhedge(&m.market, &spec, &m.payoff()?)?;
            let range = |r: Option<(f64, f64)>| r.map(|(a, b)| json!([num(a), num(b)]));
            Ok(Output::Json(json!({
                "upper_price": num(r.upper_price),
                "lower_price": num(r.lower_price),
                "super_h": nums(&r.super_h),
                "sub_h": nums(&r.sub_h),
                "super_h_range": range(r.super_h_range),
                "sub_h_range": range(r.sub_h_range),
            })))
        }
        Command::Ex1 { model } => {
            let c: ClaimFile = read_json(model)?;
            let claim = ContinuousClaimSpec {
                law: PriceLaw::Lognormal { meanlog: c.meanlog, sdlog: c.sdlog },
                lambda: c.lambda,
                s0: c.s0,
                payoff: c.payoff,
            };
            let r = ex1_closed_form(&claim)?;
            Ok(Output::Json(json!({
                "upper": num(r.upper), "lower": num(r.lower),
                "super_h": num(r.super_h), "sub_h": num(r.sub_h),
                "a": num(r.a), "b": num(r.b), "c": num(r.c), "d": num(r.d),
            })))
        }
        Command::Gaussian { model, risk, big_r } => {
            let mut mkt: GaussianMarket = read_json(model)?;
            if let Some(r) = risk {
                mkt.gamma = gamma_of(&parse_spec(r)?)?;
            }
            let dec = mkt.decompose()?;
            let ngd = gaussian_ngd_interval(&mkt, None)?;
            let raroc = big_r.map(|r| gaussian_ngd_interval(&mkt, Some(r))).transpose()?;
            let (na_lo, na_hi) = gaussian_na_interval(&mkt)?;
            // Hedges need a nondegenerate interval; a replicable claim has none.
            let hedges = match gaussian_hedges(&mkt) {
                Ok(h) => json!({"super_h": nums(&h.super_h), "sub_h": nums(&h.sub_h)}),
                Err(CoreError::Domain(_)) => Value::Null,
                Err(e) => return Err(e.into()),
            };
            Ok(Output::Json(json!({
                "gamma": num(mkt.gamma),
                "b": nums(&dec.b),
                "sigma2": num(dec.sigma2),
                "center": num(dec.center),
                "ngd": gaussian_json(&ngd),
                "raroc": raroc.as_ref().map(gaussian_json),
                "na": {"lo": num(na_lo), "hi": num(na_hi)},
                "hedges": hedges,
            })))
        }
        Command::Txcost { tree, lambda } => {
            let t: TreeModel = read_json(tree)?;
            let r = txcost_solve(&t, *lambda)?;
            Ok(Output::Json(json!({
                "lambda": num(r.lambda),
                "lo": endpoint_json(&r.lo),
                "hi": endpoint_json(&r.hi),
            })))
        }
        Command::Sweep { tree, lambdas } => {
            let t: TreeModel = read_json(tree)?;
            let levels = parse_lambdas(lambdas)?;
            let s = convergence_sweep(&t, &levels)?;
            let nested = s.nested_within(reporting_tol()?);
            if want_json {
                let rows: Vec<Value> = s
                    .rows
                    .iter()
                    .map(|r| json!({"lambda": num(r.lambda), "lo": num(r.lo), "hi": num(r.hi), "error": r.error}))
                    .collect();
                return Ok(Output::Json(json!({
                    "rows": rows,
                    "frictionless": {"lo": num(s.lo0), "hi": num(s.hi0)},
                    "nested": nested,
                })));
            }
            if !nested {
                eprintln!("warning: intervals are not nested within the reporting tolerance");
            }
            Ok(Output::Csv(s.to_csv()?))
        }
    }
}

struct Model {
    market: MarketModel,
    payoff: Option<Vec<f64>>,
    positions: Option<Vec<Vec<f64>>>,
}

impl Model {
    fn load(path: &Path) -> Res<Self> {
        let f: ModelFile = read_json(path)?;
        let space = match f.labels {
            Some(labels) => ScenarioSpace::new(labels, f.probs)?,
            None => ScenarioSpace::from_probs(f.probs)?,
        };
        let s1 = f.s1.into_iter().map(|row| space.pnl(row)).collect::<Result<Vec<_>, _>>()?;
        let market = MarketModel::new(&space, f.s0, s1)?;
        Ok(Self { market, payoff: f.payoff, positions: f.positions })
    }

    fn payoff(&self) -> Res<Pnl> {
        let v = self.payoff.clone().ok_or_else(|| Failure::Input("model has no payoff".into()))?;
        Ok(self.market.space().pnl(v)?)
    }

    fn positions(&self) -> Res<Vec<Pnl>> {
        match &self.positions {
            Some(rows) => Ok(rows
                .iter()
                .map(|r| self.market.space().pnl(r.clone()))
                .collect::<Result<Vec<_>, _>>()?),
            None if self.market.dim() > 0 => Ok(self.market.s1().to_vec()),
            None => Err(Failure::Input("model has neither positions nor assets".into())),
        }
    }
}

fn load_with_risk(a: &ModelRisk) -> Res<(Model, RiskSpec)> {
    Ok((Model::load(&a.model)?, parse_spec(&a.risk)?))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Res<T> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

/// Inline JSON when the argument starts with `{`, otherwise a file path.
fn parse_spec(arg: &str) -> Res<RiskSpec> {
    if arg.trim_start().starts_with('{') {
        serde_json::from_str(arg).map_err(|e| Failure::Input(format!("risk spec: {e}")))
    } else {
        read_json(Path::new(arg))
    }
}

fn parse_lambdas(arg: &str) -> Res<Vec<f64>> {
    let bad = || Failure::Usage(format!("cannot read cost levels from {arg:?}"));
    if let Some(rest) = arg.strip_prefix("geometric:") {
        let (ratio, n) = rest.split_once(':').ok_or_else(bad)?;
        let ratio: f64 = ratio.parse().map_err(|_| bad())?;
        let n: i32 = n.parse().map_err(|_| bad())?;
        if !(ratio > 0.0 && ratio < 1.0) || n < 1 {
            return Err(bad());
        }
        return Ok((1..=n).map(|k| ratio.powi(k)).collect());
    }
    arg.split(',').map(|s| s.trim().parse::<f64>().map_err(|_| bad())).collect()
}

/// Reporting tolerance, overridable through `COHDEALS_TOL`.
fn reporting_tol() -> Res<f64> {
    match std::env::var("COHDEALS_TOL") {
        Ok(s) => match s.parse::<f64>() {
            Ok(t) if t >= 0.0 && t.is_finite() => Ok(t),
            _ => Err(Failure::Input(format!("COHDEALS_TOL={s:?} is not a nonnegative number"))),
        },
        Err(_) => Ok(tol::REPORTING),
    }
}

fn interval_json(iv: &PriceInterval) -> Value {
    json!({
        "lo": num(iv.lo),
        "hi": num(iv.hi),
        "lo_closed": iv.lo_closed,
        "hi_closed": iv.hi_closed,
        "lo_witness": iv.lo_witness.as_ref().map(|d| nums(d.values())),
        "hi_witness": iv.hi_witness.as_ref().map(|d| nums(d.values())),
    })
}

fn gaussian_json(iv: &GaussianInterval) -> Value {
    json!({"lo": num(iv.lo), "hi": num(iv.hi), "alpha": num(iv.alpha), "gamma": num(iv.gamma)})
}

fn endpoint_json(e: &TreeEndpoint) -> Value {
    json!({
        "price": num(e.price),
        "density": nums(e.density.values()),
        "shadow": e.shadow.iter().map(|m| m.as_ref().map(|m| nums(m))).collect::<Vec<_>>(),
    })
}

fn csv_table(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Res<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Failure::Input(format!("csv: {e}"));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Input(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// `x` rounded to 12 significant digits.
fn round12(x: f64) -> f64 {
    let r: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn sig12(x: f64) -> String {
    let r = round12(x);
    if r == 0.0 || (1e-4..1e15).contains(&r.abs()) {
        r.to_string()
    } else {
        format!("{r:e}")
    }
}

/// Finite numbers as rounded JSON numbers; infinities as the strings
/// `"inf"`/`"-inf"`, NaN as null.
fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(round12(x))
    } else if x.is_nan() {
        Value::Null
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}
