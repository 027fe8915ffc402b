//! The `cfcost` command line.
//!
//! Every subcommand produces a [`Report`]: a JSON `results` value, a table for
//! text/CSV output and a few summary lines. JSON output wraps the results in
//! `{tool_version, config_echo, results}`. Settings come from global flags,
//! then from an optional JSON `--config` file for anything the flags leave
//! unset. Progress messages go to standard error.

use crate::cf_core::{expand, reconstruct, AlgorithmKind, Rational};
use crate::costs::{lattice_detect, CostConfig, CostFunction};
use crate::diophantine::{dio_cost_probe, strongly_dio_report, DigitTuple, ProbeParams};
use crate::ensemble::{
    self, count, histogram, moments_table, EnsembleSpec, InputDomain, SmoothingSpec,
};
use crate::error::{invalid, Error, Result};
use crate::limit_lab::{
    self, alpha_calc, clt_sweep, ensemble_histogram, llt_smooth, region_profile, CenteringSpec, PlateauSide,
    RegionConfig, TestFunction,
};
use crate::transfer_op::{
    drift_dispersion, e_factor_at, resolvent_sweep, sigma_path, OperatorConfig, SpectralRow, TailMode, NU0,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::f64::consts::PI;
use std::io::Write;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Text,
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "cfcost", version, about = "Continued-fraction cost statistics")]
pub struct Cli {
    #[arg(long, global = true, value_enum)]
    pub algorithm: Option<AlgorithmKind>,
    /// one | constant:V | log | bitlength | indicator:A | identity | path to a JSON cost
    #[arg(long, global = true)]
    pub cost: Option<String>,
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON file with defaults for any of the settings
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Validate the configuration and stop before computing anything
    #[arg(long, global = true)]
    pub dry_run: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Default)]
pub struct OperatorArgs {
    /// Collocation nodes
    #[arg(long)]
    pub grid: Option<usize>,
    /// Largest branch digit summed explicitly
    #[arg(long)]
    pub m_max: Option<u64>,
    #[arg(long, value_enum)]
    pub tail_mode: Option<TailMode>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct LimitArgs {
    /// Drift; computed spectrally when absent
    #[arg(long)]
    pub mu: Option<f64>,
    /// Dispersion δ (not δ²); computed spectrally when absent
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Digits and signs of p/q
    Expand {
        p: u64,
        q: u64,
        #[arg(value_enum)]
        algorithm: Option<AlgorithmKind>,
    },
    /// Exact cost histogram over the ensemble
    Enumerate {
        #[arg(long)]
        n: Option<u64>,
        /// Use all pairs 1 ≤ p ≤ q instead of coprime ones
        #[arg(long)]
        all_pairs: bool,
        /// Restrict centered inputs to p ≤ q/2
        #[arg(long)]
        natural_domain: bool,
    },
    /// Mean and variance of the total cost for several N
    Moments {
        #[arg(long, value_delimiter = ',')]
        n_list: Vec<u64>,
    },
    /// Empirical characteristic function
    CharFn {
        #[arg(long)]
        n: Option<u64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        taus: Vec<f64>,
        /// start:end:count
        #[arg(long)]
        tau_range: Option<String>,
        /// Use the smoothed ensemble with ξ(N) = N^{-γ}
        #[arg(long)]
        smoothed: bool,
        #[arg(long)]
        gamma0: Option<f64>,
    },
    /// σ(iτ), E(iτ), drift and dispersion from the transfer operator
    Spectral {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        taus: Vec<f64>,
        #[command(flatten)]
        op: OperatorArgs,
        /// Repeat with doubled grid and truncation and flag drift changes above 1e-6
        #[arg(long)]
        refine: bool,
        /// Frequencies for a resolvent-norm sweep
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        probe_taus: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        t: f64,
    },
    /// Local limit comparison
    Llt {
        #[arg(long, value_delimiter = ',')]
        n_list: Vec<u64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0")]
        x_list: Vec<f64>,
        /// a,b for the window (a, b]
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        interval: Option<Vec<f64>>,
        /// a,b,smooth for a plateau function around (a, b]
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        plateau: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value = "upper")]
        side: SideArg,
        /// Convolve the test function with the Gaussian kernel of this width
        #[arg(long)]
        mollify: Option<f64>,
        #[arg(long)]
        smoothed: bool,
        #[command(flatten)]
        limit: LimitArgs,
        #[command(flatten)]
        op: OperatorArgs,
    },
    /// Kolmogorov distance to the normal law
    Clt {
        #[arg(long, value_delimiter = ',')]
        n_list: Vec<u64>,
        #[command(flatten)]
        limit: LimitArgs,
        #[command(flatten)]
        op: OperatorArgs,
    },
    /// Strongly-diophantine report for four periodic orbits
    Dio {
        /// Four tuples separated by ';', digits by ','
        #[arg(long)]
        tuples: String,
        #[arg(long, default_value_t = 3.0)]
        eta0: f64,
        #[arg(long, default_value_t = 1000)]
        q_max: u64,
        /// Also run the finite diophantine-cost probe at this τ
        #[arg(long)]
        probe_tau: Option<f64>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        probe_t: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        probe_theta: f64,
        #[arg(long, default_value_t = 2.0)]
        probe_beta: f64,
        #[arg(long, default_value_t = 1.0)]
        probe_eta: f64,
        #[arg(long, default_value_t = 3)]
        probe_p_max: usize,
    },
    /// Lower bound on α and the induced bounds on ε and r
    AlphaCalc {
        #[arg(long)]
        eta: f64,
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        sup_inv_deriv: f64,
    },
    /// |Ē_N(e^{iτC})| across the four frequency regions
    RegionProfile {
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        points: Option<usize>,
        /// Extend region 3 up to this frequency
        #[arg(long)]
        extend: Option<f64>,
        /// Add the spectral small-τ prediction to region 1
        #[arg(long)]
        predict: bool,
        #[command(flatten)]
        op: OperatorArgs,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum SideArg {
    Upper,
    Lower,
}

/// Either a short cost spec or a full cost object.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CostSetting {
    Spec(String),
    Full(CostConfig),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorSetting {
    pub n: Option<usize>,
    pub m_max: Option<u64>,
    pub tail_mode: Option<TailMode>,
}

/// Settings file; every field is optional and command-line flags win.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Option<AlgorithmKind>,
    pub cost: Option<CostSetting>,
    pub n: Option<u64>,
    pub n_list: Option<Vec<u64>>,
    pub taus: Option<Vec<f64>>,
    pub operator: Option<OperatorSetting>,
    pub smoothing: Option<SmoothingSpec>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub threads: Option<usize>,
    pub tolerance: Option<f64>,
}

/// Output of one subcommand.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub results: Value,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub summary: Vec<String>,
}

impl Report {
    fn table(header: &[&str]) -> Self {
        Report { header: header.iter().map(|s| s.to_string()).collect(), ..Default::default() }
    }

    fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }

    pub fn render(&self, format: Format, config_echo: &Value) -> String {
        match format {
            Format::Json => {
                let env = json!({
                    "tool_version": env!("CARGO_PKG_VERSION"),
                    "config_echo": config_echo,
                    "results": self.results,
                });
                serde_json::to_string_pretty(&env).expect("serializable") + "\n"
            }
            Format::Csv => {
                let mut out = String::new();
                if !self.header.is_empty() {
                    out += &self.header.join(",");
                    out.push('\n');
                }
                for r in &self.rows {
                    out += &r.join(",");
                    out.push('\n');
                }
                out
            }
            Format::Text => {
                let mut out = String::new();
                for s in &self.summary {
                    out += s;
                    out.push('\n');
                }
                if !self.rows.is_empty() {
                    let widths: Vec<usize> = (0..self.header.len())
                        .map(|j| {
                            self.rows
                                .iter()
                                .map(|r| r.get(j).map_or(0, |c| c.len()))
                                .chain([self.header[j].len()])
                                .max()
                                .unwrap_or(0)
                        })
                        .collect();
                    let line = |cells: &[String]| -> String {
                        cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect::<Vec<_>>().join("  ")
                    };
                    out += &line(&self.header);
                    out.push('\n');
                    for r in &self.rows {
                        out += &line(r);
                        out.push('\n');
                    }
                }
                out
            }
        }
    }
}

/// Fully resolved settings shared by all subcommands.
#[derive(Debug, Clone)]
pub struct Settings {
    pub algorithm: AlgorithmKind,
    pub cost: CostFunction,
    pub format: Format,
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
    pub file: RunConfig,
}

impl Settings {
    fn operator(&self, args: &OperatorArgs) -> Result<OperatorConfig> {
        let file = self.file.operator.clone().unwrap_or_default();
        let d = OperatorConfig::default();
        let cfg = OperatorConfig {
            n: args.grid.or(file.n).unwrap_or(d.n),
            m_max: args.m_max.or(file.m_max).unwrap_or(d.m_max),
            tail_mode: args.tail_mode.or(file.tail_mode).unwrap_or(d.tail_mode),
            algorithm: self.algorithm,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn n(&self, flag: Option<u64>) -> Result<u64> {
        let n = flag.or(self.file.n).ok_or_else(|| Error::InvalidInput("N is required (--n or config `n`)".into()))?;
        if n < 1 {
            return invalid("N must be at least 1");
        }
        Ok(n)
    }

    fn n_list(&self, flag: &[u64]) -> Result<Vec<u64>> {
        let list = if flag.is_empty() { self.file.n_list.clone().unwrap_or_default() } else { flag.to_vec() };
        if list.is_empty() {
            return invalid("an N list is required (--n-list or config `n_list`)");
        }
        if list.contains(&0) {
            return invalid("every N must be at least 1");
        }
        Ok(list)
    }

    fn taus(&self, flag: &[f64], range: Option<&str>) -> Result<Vec<f64>> {
        if let Some(r) = range {
            let parts: Vec<&str> = r.split(':').collect();
            if parts.len() != 3 {
                return invalid("--tau-range expects start:end:count");
            }
            let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::InvalidInput(format!("tau range: {e}")));
            let (a, b, k) = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
            if k < 2.0 || k.fract() != 0.0 {
                return invalid("tau range count must be an integer ≥ 2");
            }
            let k = k as usize;
            return Ok((0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect());
        }
        let list = if flag.is_empty() { self.file.taus.clone().unwrap_or_default() } else { flag.to_vec() };
        if list.is_empty() {
            return invalid("a τ grid is required (--taus, --tau-range or config `taus`)");
        }
        Ok(list)
    }

    fn spec(&self, n: u64) -> EnsembleSpec {
        EnsembleSpec { algorithm: self.algorithm, ..EnsembleSpec::new(n, self.cost.clone()) }
    }

    fn echo(&self, command: &Command) -> Value {
        json!({
            "command": format!("{command:?}"),
            "algorithm": self.algorithm,
            "cost": self.cost,
            "format": self.format,
            "threads": self.threads,
            "file": self.file,
        })
    }
}

pub fn resolve(cli: &Cli) -> Result<Settings> {
    let file: RunConfig = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("config file: {e}")))?
        }
        None => RunConfig::default(),
    };
    let cost = match (&cli.cost, &file.cost) {
        (Some(s), _) => CostFunction::parse_spec(s)?,
        (None, Some(CostSetting::Spec(s))) => CostFunction::parse_spec(s)?,
        (None, Some(CostSetting::Full(c))) => c.build()?,
        (None, None) => CostFunction::one(),
    };
    if let Some(s) = &file.smoothing {
        if s.m0_hat <= 0.0 {
            return invalid("smoothing m0_hat must be positive");
        }
    }
    let threads = cli.threads.or(file.threads);
    if threads == Some(0) {
        return invalid("--threads must be positive");
    }
    Ok(Settings {
        algorithm: cli.algorithm.or(file.algorithm).unwrap_or(AlgorithmKind::Ordinary),
        cost,
        format: cli.format.or(file.format).unwrap_or_default(),
        output: cli.output.clone().or_else(|| file.output.clone()),
        threads,
        file,
    })
}

fn fmt(v: f64) -> String {
    format!("{v:.12}")
}

fn spectral_constants(settings: &Settings, limit: &LimitArgs, op: &OperatorArgs) -> Result<(f64, f64, bool)> {
    match (limit.mu, limit.delta) {
        (Some(mu), Some(delta)) => {
            if !(delta > 0.0) {
                return invalid("--delta must be positive");
            }
            Ok((mu, delta, false))
        }
        (mu, delta) => {
            eprintln!("computing drift and dispersion from the transfer operator...");
            let dd = drift_dispersion(&settings.cost, &settings.operator(op)?)?;
            if !(dd.delta2 > 0.0) {
                return Err(Error::NonConvergence(format!("nonpositive dispersion {}", dd.delta2)));
            }
            Ok((mu.unwrap_or(dd.mu), delta.unwrap_or(dd.delta2.sqrt()), true))
        }
    }
}

fn parse_tuples(s: &str) -> Result<[DigitTuple; 4]> {
    let tuples = s
        .split(';')
        .map(|t| {
            let digits = t
                .split(',')
                .map(|d| d.trim().parse::<u64>().map_err(|e| Error::InvalidInput(format!("digit `{d}`: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            DigitTuple::new(digits)
        })
        .collect::<Result<Vec<_>>>()?;
    tuples.try_into().map_err(|v: Vec<DigitTuple>| Error::InvalidInput(format!("expected 4 tuples, got {}", v.len())))
}

/// Checks everything that can be checked without computing.
fn validate(cmd: &Command, settings: &Settings) -> Result<()> {
    match cmd {
        Command::Expand { p, q, .. } => Rational::new(*p, *q).map(|_| ()),
        Command::Enumerate { n, .. } => settings.n(*n).map(|_| ()),
        Command::Moments { n_list } => settings.n_list(n_list).map(|_| ()),
        Command::CharFn { n, taus, tau_range, .. } => {
            settings.n(*n)?;
            settings.taus(taus, tau_range.as_deref()).map(|_| ())
        }
        Command::Spectral { taus, op, sigma, .. } => {
            settings.operator(op)?;
            let taus = settings.taus(taus, None)?;
            if let Some(t) = taus.iter().find(|t| t.abs() >= NU0) {
                return invalid(format!("τ = {t} is outside the small-τ regime |τ| < {NU0}"));
            }
            if *sigma <= 0.5 {
                return invalid("Re s must exceed 1/2");
            }
            Ok(())
        }
        Command::Llt { n_list, interval, plateau, op, .. } => {
            settings.n_list(n_list)?;
            settings.operator(op)?;
            match (interval, plateau) {
                (Some(v), None) if v.len() == 2 && v[0] < v[1] => Ok(()),
                (None, Some(v)) if v.len() == 3 && v[0] < v[1] && v[2] > 0.0 => Ok(()),
                (None, None) => Ok(()),
                _ => invalid("give either --interval a,b or --plateau a,b,smooth with a < b"),
            }
        }
        Command::Clt { n_list, op, .. } => {
            settings.n_list(n_list)?;
            settings.operator(op).map(|_| ())
        }
        Command::Dio { tuples, q_max, .. } => {
            parse_tuples(tuples)?;
            if *q_max < 10 {
                return invalid("--q-max must be at least 10");
            }
            Ok(())
        }
        Command::AlphaCalc { eta, rho, sup_inv_deriv } => alpha_calc(*eta, *rho, *sup_inv_deriv).map(|_| ()),
        Command::RegionProfile { n, op, .. } => {
            settings.n(*n)?;
            settings.operator(op).map(|_| ())
        }
    }
}

pub fn execute(cmd: &Command, settings: &Settings) -> Result<Report> {
    match cmd {
        Command::Expand { p, q, algorithm } => {
            let alg = algorithm.unwrap_or(settings.algorithm);
            let r = Rational::new(*p, *q)?;
            let e = expand(r, alg);
            let back = reconstruct(&e)?;
            let digits = e.digits.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",");
            let mut rep = Report::table(&["j", "digit", "sign"]);
            for j in 0..e.depth() {
                rep.row(vec![(j + 1).to_string(), e.digits[j].to_string(), e.sign(j).to_string()]);
            }
            let mut line = format!("digits=[{digits}] depth={}", e.depth());
            if !e.signs.is_empty() {
                let signs = e.signs.iter().map(|s| if *s > 0 { "+" } else { "-" }).collect::<String>();
                line += &format!(" signs={signs}");
            }
            if e.normalized_first {
                line += " normalized_first=true";
            }
            rep.summary.push(line);
            rep.results = json!({"expansion": e, "reconstructed": [back.p(), back.q()]});
            Ok(rep)
        }
        Command::Enumerate { n, all_pairs, natural_domain } => {
            let n = settings.n(*n)?;
            let mut spec = settings.spec(n);
            spec.coprime_only = !all_pairs;
            if *natural_domain {
                spec.domain = InputDomain::Natural;
            }
            eprintln!("enumerating N = {n}...");
            let h = histogram(&spec)?;
            let total = count(n, spec.coprime_only)?;
            let ratio = total as f64 / (3.0 * (n as f64).powi(2) / (PI * PI));
            let mut rep = Report::table(&["cost", "count"]);
            for (v, c) in h.values() {
                rep.row(vec![fmt(v), c.to_string()]);
            }
            rep.summary.push(format!("pairs={} count(N)={total} ratio_to_3N2/pi2={ratio:.6}", h.total));
            rep.results = json!({"n": n, "pairs": h.total, "count": total, "ratio": ratio, "histogram": h.values().collect::<Vec<_>>()});
            Ok(rep)
        }
        Command::Moments { n_list } => {
            let ns = settings.n_list(n_list)?;
            eprintln!("enumerating up to N = {}...", ns.iter().max().expect("nonempty"));
            let rows = moments_table(&settings.spec(1), &ns)?;
            let mut rep = Report::table(&["N", "E_N", "V_N", "E_N/logN", "V_N/logN"]);
            for r in &rows {
                let l = (r.n as f64).ln();
                let (a, b) = if l > 0.0 { (fmt(r.mean / l), fmt(r.variance / l)) } else { ("nan".into(), "nan".into()) };
                rep.row(vec![r.n.to_string(), fmt(r.mean), fmt(r.variance), a, b]);
            }
            rep.results = json!({ "rows": rows });
            Ok(rep)
        }
        Command::CharFn { n, taus, tau_range, smoothed, gamma0 } => {
            let n = settings.n(*n)?;
            let taus = settings.taus(taus, tau_range.as_deref())?;
            let spec = settings.spec(n);
            let smoothing = match gamma0 {
                Some(g) => SmoothingSpec::power(*g),
                None => settings.file.smoothing.unwrap_or_default(),
            };
            eprintln!("enumerating N = {n}...");
            let h = ensemble_histogram(&spec, smoothed.then_some(&smoothing))?;
            let values = h.char_fn_many(&taus);
            let mut rep = Report::table(&["tau", "re", "im", "modulus"]);
            let mut rows = Vec::new();
            for (t, z) in taus.iter().zip(&values) {
                rep.row(vec![fmt(*t), fmt(z.re), fmt(z.im), fmt(z.norm())]);
                rows.push(json!({"tau": t, "re": z.re, "im": z.im, "modulus": z.norm()}));
            }
            rep.results = json!({"n": n, "smoothed": smoothed, "rows": rows});
            Ok(rep)
        }
        Command::Spectral { taus, op, refine, probe_taus, sigma, t } => {
            let cfg = settings.operator(op)?;
            let taus = settings.taus(taus, None)?;
            eprintln!("solving for σ(iτ) on {} frequencies...", taus.len());
            let path = sigma_path(&taus, &settings.cost, &cfg)?;
            let e0 = e_factor_at(num_complex::Complex64::new(1.0, 0.0), 0.0, &settings.cost, &cfg)?;
            let mut rep = Report::table(&["tau", "sigma_re", "sigma_im", "E_re", "E_im", "E_over_E0_sigma_abs"]);
            let mut rows = Vec::new();
            for (tau, sol) in taus.iter().zip(&path) {
                let e = e_factor_at(sol.sigma, *tau, &settings.cost, &cfg)?;
                let pred = (e / (e0 * sol.sigma)).norm();
                rep.row(vec![fmt(*tau), fmt(sol.sigma.re), fmt(sol.sigma.im), fmt(e.re), fmt(e.im), fmt(pred)]);
                rows.push(json!({"tau": tau, "sigma": sol.sigma, "residual": sol.residual, "e": e}));
            }
            eprintln!("computing drift and dispersion...");
            let dd = drift_dispersion(&settings.cost, &cfg)?;
            rep.summary.push(format!("mu={:.10} delta2={:.10}", dd.mu, dd.delta2));
            let mut refinement = Value::Null;
            if *refine {
                eprintln!("repeating with doubled grid and truncation...");
                let fine = drift_dispersion(&settings.cost, &cfg.refined())?;
                let change = (fine.mu - dd.mu).abs().max((fine.delta2 - dd.delta2).abs());
                let flagged = change > 1e-6;
                rep.summary.push(format!("refinement_change={change:.3e} flagged={flagged}"));
                refinement = json!({"mu": fine.mu, "delta2": fine.delta2, "change": change, "flagged": flagged});
            }
            let mut sweep = Value::Null;
            if !probe_taus.is_empty() {
                eprintln!("resolvent sweep over {} frequencies...", probe_taus.len());
                let sw = resolvent_sweep(*sigma, *t, probe_taus, &settings.cost, &cfg)?;
                let srows: Vec<SpectralRow> = sw
                    .rows
                    .iter()
                    .map(|r| SpectralRow {
                        s_re: r.sigma,
                        s_im: r.t,
                        tau: r.tau,
                        lambda_re: r.lambda.re,
                        lambda_im: r.lambda.im,
                        gap: r.distance_to_spectrum,
                        resolvent_norm: r.norm,
                    })
                    .collect();
                rep.summary.push(format!("resolvent fitted_alpha={:?}", sw.fitted_alpha));
                sweep = json!({"rows": srows, "fitted_alpha": sw.fitted_alpha});
            }
            rep.results = json!({
                "operator": cfg,
                "rows": rows,
                "mu": dd.mu,
                "delta2": dd.delta2,
                "diagnostics": dd,
                "refinement": refinement,
                "resolvent_sweep": sweep,
            });
            Ok(rep)
        }
        Command::Llt { n_list, x_list, interval, plateau, side, mollify, smoothed, limit, op } => {
            let ns = settings.n_list(n_list)?;
            let (mu, delta, spectral) = spectral_constants(settings, limit, op)?;
            let mut psi = match (interval, plateau) {
                (Some(v), None) => TestFunction::Interval { a: v[0], b: v[1] },
                (None, Some(v)) => {
                    let s = if *side == SideArg::Upper { PlateauSide::Upper } else { PlateauSide::Lower };
                    TestFunction::plateau(v[0], v[1], v[2], s)?
                }
                _ => TestFunction::Interval { a: -0.5, b: 0.5 },
            };
            if let Some(d) = mollify {
                psi = psi.mollify(*d)?;
            }
            let smoothing = settings.file.smoothing.unwrap_or_default();
            let mut rep = Report::table(&["N", "x", "lhs", "target", "ratio"]);
            let mut rows = Vec::new();
            for &n in &ns {
                eprintln!("enumerating N = {n}...");
                let h = ensemble_histogram(&settings.spec(n), smoothed.then_some(&smoothing))?;
                for &x in x_list {
                    let row = llt_smooth(&h, &CenteringSpec::new(x, n, mu, delta)?, &psi)?;
                    rep.row(row.csv().split(',').map(String::from).collect());
                    rows.push(row);
                }
            }
            rep.summary.push(format!("mu={mu:.10} delta={delta:.10} spectral={spectral}"));
            rep.results = json!({"mu": mu, "delta": delta, "test_function": psi, "rows": rows});
            Ok(rep)
        }
        Command::Clt { n_list, limit, op } => {
            let ns = settings.n_list(n_list)?;
            let (mu, delta, _) = spectral_constants(settings, limit, op)?;
            eprintln!("enumerating {} ensembles...", ns.len());
            let sw = clt_sweep(&settings.spec(1), &ns, mu, delta)?;
            let mut rep = Report::table(&["N", "distance", "distance_sqrt_logN"]);
            for r in &sw.rows {
                rep.row(vec![r.n.to_string(), fmt(r.distance), fmt(r.scaled)]);
            }
            rep.summary.push(format!("C_hat={:.6} inversions={}", sw.c_hat, sw.inversions));
            rep.results = json!({"mu": mu, "delta": delta, "sweep": sw});
            Ok(rep)
        }
        Command::Dio { tuples, eta0, q_max, probe_tau, probe_t, probe_theta, probe_beta, probe_eta, probe_p_max } => {
            let ts = parse_tuples(tuples)?;
            let report = strongly_dio_report(&ts, &settings.cost, *eta0, *q_max)?;
            let lattice = lattice_detect(&settings.cost, 64)?;
            let mut rep = Report::table(&["quantity", "value"]);
            for j in 0..3 {
                rep.row(vec![format!("L_1{}", j + 2), fmt(report.l[j].value)]);
                rep.row(vec![format!("Lhat_1{}", j + 2), fmt(report.l_hat[j])]);
            }
            for j in 0..3 {
                for k in 0..3 {
                    if j != k {
                        rep.row(vec![format!("Ltilde_{}{}", j + 2, k + 2), fmt(report.l_tilde[j][k])]);
                    }
                }
            }
            rep.summary.push(format!(
                "verdict={:?} L13_nonzero={} Lhat12_nonzero={} Ltilde23_nonzero={}",
                report.verdict, report.l13_nonzero, report.l_hat12_nonzero, report.l_tilde23_nonzero
            ));
            let mut probe = Value::Null;
            if let Some(tau) = probe_tau {
                let mut h0: Vec<u64> = ts.iter().flat_map(|t| t.digits.iter().copied()).collect();
                h0.sort_unstable();
                h0.dedup();
                let params = ProbeParams {
                    tau: *tau,
                    t: *probe_t,
                    theta: *probe_theta,
                    beta: *probe_beta,
                    eta: *probe_eta,
                    p_max: *probe_p_max,
                };
                let w = dio_cost_probe(&settings.cost, &h0, &params)?;
                rep.summary.push(format!("probe word={:?} margin={:.6e} (finite probe)", w.word, w.margin));
                probe = json!({"h0": h0, "params": params, "witness": w});
            }
            rep.results = json!({"report": report, "lattice": lattice, "probe": probe});
            Ok(rep)
        }
        Command::AlphaCalc { eta, rho, sup_inv_deriv } => {
            let b = alpha_calc(*eta, *rho, *sup_inv_deriv)?;
            let mut rep = Report::table(&["g", "alpha_min", "eps_max", "r_min"]);
            rep.row(vec![fmt(b.g), fmt(b.alpha_min), fmt(b.eps_max), fmt(b.r_min)]);
            rep.results = serde_json::to_value(b).expect("serializable");
            Ok(rep)
        }
        Command::RegionProfile { n, points, extend, predict, op } => {
            let n = settings.n(*n)?;
            let mut cfg = RegionConfig { extend_region3_to: *extend, ..Default::default() };
            if let Some(p) = points {
                cfg.points_per_region = *p;
            }
            if let Some(s) = settings.file.smoothing {
                cfg.smoothing = s;
            }
            let opcfg = settings.operator(op)?;
            eprintln!("enumerating N = {n}...");
            let prof = region_profile(&settings.spec(n), &cfg, predict.then_some(&opcfg))?;
            let mut rep = Report::table(&["region", "tau", "modulus", "envelope"]);
            for r in &prof.rows {
                rep.row(vec![r.region.to_string(), fmt(r.tau), fmt(r.modulus), r.envelope.map_or(String::new(), fmt)]);
            }
            rep.summary.push(format!(
                "tau_N={:.6} L_N={:.6} region3_end={:.6} ordered={} gamma2_hat={:.6} alpha_prime_min={}",
                prof.tau_n, prof.l_n, prof.region3_end, prof.scales_ordered, prof.gamma2_hat, prof.region3.alpha_prime_min
            ));
            rep.results = serde_json::to_value(&prof).expect("serializable");
            Ok(rep)
        }
    }
}

fn emit(text: &str, output: Option<&PathBuf>) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| Error::InvalidInput(format!("stdout: {e}")))
        }
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = (|| -> Result<()> {
        let settings = resolve(&cli)?;
        if let Some(t) = settings.threads {
            // a pool may already exist when called repeatedly in one process
            let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
        }
        validate(&cli.command, &settings)?;
        let echo = settings.echo(&cli.command);
        if cli.dry_run {
            let rep = Report {
                results: json!({"dry_run": true, "valid": true}),
                summary: vec!["configuration valid (dry run)".into()],
                ..Default::default()
            };
            return emit(&rep.render(settings.format, &echo), settings.output.as_ref());
        }
        let rep = execute(&cli.command, &settings)?;
        emit(&rep.render(settings.format, &echo), settings.output.as_ref())
    })();
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Parses `args` (including the program name) and runs them.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            code
        }
    }
}

/// Re-exported for callers that want the table helpers without the binary.
pub use limit_lab::LltRow;
pub use ensemble::MomentRow;
