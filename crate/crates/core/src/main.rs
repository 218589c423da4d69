use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use escape_lab::ctmc::{par_map, simulate_stream, JumpTables};
use escape_lab::experiments::{run_experiment, ExperimentConfig, ExperimentKind, Subdivision};
use escape_lab::families::{generate, FamilyKind, FamilySpec, RateForm};
use escape_lab::graph::{shortest_path_metric, VertexId};
use escape_lab::io::{load_graph, save_graph, save_modified, LoadedGraph};
use escape_lab::modify::{design_subdivision, subdivide, verify_modification_geometry, SubdivisionPlan};
use escape_lab::rate::{conservativeness_test, volume_profile, RateFunction, DEFAULT_C, DEFAULT_R_HAT};
use escape_lab::schrodinger::{build_schrodinger_pair, verify_supersolution};
use escape_lab::{Error, Result};

#[derive(Parser)]
#[command(
    name = "escape-lab",
    version,
    about = "Escape rates, graph subdivision and chain simulation on weighted graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a truncated family graph with its adapted σ.
    Generate {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Subdivide a graph's edges and check the resulting geometry.
    Modify {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value = "0")]
        center: VertexId,
        /// Design counts from ball volumes up to this radius.
        #[arg(long, conflicts_with = "uniform", required_unless_present = "uniform")]
        rmax: Option<f64>,
        /// Use the same count on every edge instead.
        #[arg(long)]
        uniform: Option<u32>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Print d_σ from a source as `vertex_id,distance`.
    Metric {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value = "0")]
        source: VertexId,
        #[arg(long, default_value_t = f64::INFINITY)]
        radius: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Tabulate ψ and its inverse from the measured volume profile.
    Psi {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value = "0")]
        center: VertexId,
        #[arg(long)]
        rmax: f64,
        #[arg(long, default_value_t = DEFAULT_C)]
        c: f64,
        #[arg(long, default_value_t = DEFAULT_R_HAT)]
        rhat: f64,
        /// Number of points in the inverse table.
        #[arg(long, default_value_t = 64)]
        points: usize,
        /// Directory for `psi.csv` and `psi_inverse.csv`; stdout if omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Simulate trajectories, one `t,vertex_id,status` CSV each.
    Simulate {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value = "0")]
        start: VertexId,
        #[arg(long)]
        horizon: f64,
        #[arg(long, default_value_t = 1_000_000)]
        budget: u64,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Check (Δ + u) φ >= 0 on a subdivided graph; exit 1 on violation.
    VerifySupersolution {
        #[arg(long)]
        graph: PathBuf,
        /// Per-vertex residual CSV; stdout if omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run a Monte Carlo experiment; exit 1 if its criterion fails.
    Experiment(ExperimentArgs),
    /// Summarize an experiment output directory; exit 1 if it failed.
    Report { dir: PathBuf },
}

#[derive(Args, Default)]
struct FamilyArgs {
    #[arg(long)]
    family: Option<FamilyKind>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Lattice dimension.
    #[arg(long)]
    d: Option<u32>,
    /// Constant vertex measure.
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long = "trunc")]
    truncation: Option<u32>,
}

impl FamilyArgs {
    fn spec(&self) -> Result<Option<FamilySpec>> {
        let Some(kind) = self.family else {
            return Ok(None);
        };
        let trunc = self
            .truncation
            .ok_or_else(|| Error::InvalidConfig("--trunc is required with --family".into()))?;
        let mut s = FamilySpec::new(kind, trunc);
        s.alpha = self.alpha.unwrap_or(0.0);
        s.beta = self.beta.unwrap_or(0.0);
        s.gamma = self.gamma.unwrap_or(0.0);
        s.d = self.d.unwrap_or(1);
        s.mu = self.mu.unwrap_or(1.0);
        Ok(Some(s))
    }
}

#[derive(Args)]
struct ExperimentArgs {
    kind: ExperimentKind,
    /// JSON config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long, conflicts_with = "family")]
    graph: Option<PathBuf>,
    #[arg(long)]
    center: Option<VertexId>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// none, uniform:N or design:R.
    #[arg(long)]
    subdivision: Option<Subdivision>,
    #[arg(long)]
    t_burn: Option<f64>,
    /// Comma-separated constants for the exceedance curve.
    #[arg(long, value_delimiter = ',')]
    c_grid: Option<Vec<f64>>,
    #[arg(long)]
    rhat: Option<f64>,
    /// sqrt-t-log-t, power:A[:B], exp-power:P, exp or double-exp.
    #[arg(long, value_parser = parse_rate_form)]
    closed_form: Option<RateForm>,
    /// Skip the ψ-based candidate.
    #[arg(long)]
    no_psi: bool,
    #[arg(long, value_delimiter = ',')]
    checkpoints: Option<Vec<f64>>,
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(short, long)]
    output: PathBuf,
}

fn parse_rate_form(s: &str) -> std::result::Result<RateForm, String> {
    let num = |x: &str| x.parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        ["sqrt-t-log-t"] => Ok(RateForm::SqrtTLogT),
        ["power", a] => Ok(RateForm::Power {
            exponent: num(a)?,
            log_exponent: 0.0,
        }),
        ["power", a, b] => Ok(RateForm::Power {
            exponent: num(a)?,
            log_exponent: num(b)?,
        }),
        ["exp-power", p] => Ok(RateForm::ExpPower { exponent: num(p)? }),
        ["exp"] => Ok(RateForm::Exp),
        ["double-exp"] => Ok(RateForm::DoubleExp),
        _ => Err(format!(
            "unknown rate form {s:?} (expected sqrt-t-log-t, power:A[:B], exp-power:P, exp or double-exp)"
        )),
    }
}

/// A finished command either passed its check or did not.
enum Outcome {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            let usage = matches!(
                e,
                Error::InvalidConfig(_) | Error::Parse(_) | Error::Io(_) | Error::Json(_) | Error::UnknownVertex(_)
            );
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn require_modified(loaded: LoadedGraph, path: &Path) -> Result<escape_lab::modify::ModifiedGraph> {
    loaded.modified.ok_or_else(|| {
        Error::InvalidConfig(format!(
            "{} has no provenance section; run `escape-lab modify` first",
            path.display()
        ))
    })
}

fn dispatch(command: Command) -> Result<Outcome> {
    match command {
        Command::Generate { family, output } => {
            let spec = family
                .spec()?
                .ok_or_else(|| Error::InvalidConfig("--family is required".into()))?;
            let fg = generate(&spec)?;
            save_graph(&output, &fg.graph, Some(&fg.sigma))?;
            eprintln!(
                "wrote {} ({} vertices, {} edges)",
                output.display(),
                fg.graph.len(),
                fg.graph.edge_count()
            );
            Ok(Outcome::Pass)
        }
        Command::Modify {
            graph,
            center,
            rmax,
            uniform,
            output,
        } => {
            let loaded = load_graph(&graph)?;
            if loaded.modified.is_some() {
                return Err(Error::InvalidConfig(format!(
                    "{} is already subdivided",
                    graph.display()
                )));
            }
            let g = loaded.graph;
            let sigma = loaded
                .sigma
                .unwrap_or_else(|| escape_lab::graph::default_adapted_weight(&g));
            let plan = match (rmax, uniform) {
                (_, Some(n)) => SubdivisionPlan::uniform(&g, n)?,
                (Some(r), None) => design_subdivision(&g, &sigma, center, r)?,
                (None, None) => unreachable!("clap requires one of them"),
            };
            let m = subdivide(&g, &sigma, &plan)?;
            save_modified(&output, &m)?;
            let reach = rmax.unwrap_or_else(|| {
                let metric = shortest_path_metric(&g, &sigma, center, f64::INFINITY).ok();
                metric.map_or(1.0, |m| m.certified_radius().min(64.0))
            });
            let radii: Vec<f64> = (1..=8).map(|k| reach * k as f64 / 8.0).collect();
            let geo = verify_modification_geometry(&m, center, &radii)?;
            eprintln!(
                "wrote {} ({} vertices); {} distance pairs checked, max error {:e}",
                output.display(),
                m.graph.len(),
                geo.pairs_checked,
                geo.max_distance_error
            );
            for v in &geo.violations {
                eprintln!("violation: {v}");
            }
            Ok(if geo.passed() { Outcome::Pass } else { Outcome::Fail })
        }
        Command::Metric {
            graph,
            source,
            radius,
            output,
        } => {
            let loaded = load_graph(&graph)?;
            let (g, sigma) = match &loaded.modified {
                Some(m) => (&m.graph, m.sigma.clone()),
                None => (
                    &loaded.graph,
                    loaded
                        .sigma
                        .clone()
                        .unwrap_or_else(|| escape_lab::graph::default_adapted_weight(&loaded.graph)),
                ),
            };
            let metric = shortest_path_metric(g, &sigma, source, radius)?;
            let mut text = String::from("vertex_id,distance\n");
            for (v, d) in metric.iter(g) {
                text.push_str(&format!("{v},{d}\n"));
            }
            write_or_print(output.as_deref(), &text)?;
            eprintln!("certified radius {}", metric.certified_radius());
            Ok(Outcome::Pass)
        }
        Command::Psi {
            graph,
            center,
            rmax,
            c,
            rhat,
            points,
            output,
        } => {
            let loaded = load_graph(&graph)?;
            let (g, sigma) = match &loaded.modified {
                Some(m) => (m.graph.clone(), m.sigma.clone()),
                None => {
                    let s = loaded
                        .sigma
                        .clone()
                        .unwrap_or_else(|| escape_lab::graph::default_adapted_weight(&loaded.graph));
                    (loaded.graph.clone(), s)
                }
            };
            let profile = Arc::new(volume_profile(&g, &sigma, center, &[])?);
            let verdict = conservativeness_test(profile.as_ref(), rmax)?;
            let rate = RateFunction::new(profile, c, rhat, rmax)?;
            let mut forward = String::from("R,psi\n");
            for &(r, p) in rate.table() {
                forward.push_str(&format!("{r},{p}\n"));
            }
            let mut inverse = String::from("t,psi_inverse\n");
            let hi = rate.psi_max();
            for k in 0..=points.max(1) {
                let t = hi * k as f64 / points.max(1) as f64;
                inverse.push_str(&format!("{t},{}\n", rate.inverse(t)?));
            }
            match output {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)?;
                    std::fs::write(dir.join("psi.csv"), forward)?;
                    std::fs::write(dir.join("psi_inverse.csv"), inverse)?;
                }
                None => {
                    write_or_print(None, &forward)?;
                    write_or_print(None, &inverse)?;
                }
            }
            eprintln!(
                "integral test on [{}, {}]: {:?} (partial integral {})",
                verdict.range.0, verdict.range.1, verdict.verdict, verdict.partial_integral
            );
            Ok(Outcome::Pass)
        }
        Command::Simulate {
            graph,
            start,
            horizon,
            budget,
            n,
            seed,
            output,
        } => {
            let loaded = load_graph(&graph)?;
            let g = match &loaded.modified {
                Some(m) => &m.graph,
                None => &loaded.graph,
            };
            if n < 1 {
                return Err(Error::InvalidConfig("--n must be at least 1".into()));
            }
            std::fs::create_dir_all(&output)?;
            let tables = JumpTables::new(g);
            let width = (n - 1).to_string().len().max(4);
            let rows = par_map(n, |i| -> Result<serde_json::Value> {
                let traj = simulate_stream(&tables, start, horizon, budget, seed, i as u64)?;
                let name = format!("trajectory_{i:0width$}.csv");
                std::fs::write(output.join(&name), traj.to_csv())?;
                Ok(serde_json::json!({
                    "file": name,
                    "stream": i,
                    "status": traj.status.as_str(),
                    "jumps": traj.jump_count(),
                    "end_time": traj.end_time,
                }))
            });
            let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
            let manifest = serde_json::json!({
                "graph": graph,
                "start": start,
                "horizon": horizon,
                "budget": budget,
                "seed": seed,
                "n": n,
                "trajectories": rows,
            });
            std::fs::write(
                output.join("manifest.json"),
                serde_json::to_string_pretty(&manifest)? + "\n",
            )?;
            eprintln!("wrote {n} trajectories to {}", output.display());
            Ok(Outcome::Pass)
        }
        Command::VerifySupersolution { graph, output } => {
            let m = require_modified(load_graph(&graph)?, &graph)?;
            let pair = build_schrodinger_pair(&m)?;
            let rep = verify_supersolution(&m, &pair)?;
            let mut text = String::from("vertex_id,residual\n");
            for (v, r) in &rep.residuals {
                text.push_str(&format!("{v},{r}\n"));
            }
            write_or_print(output.as_deref(), &text)?;
            eprintln!(
                "min (Δ+u)φ = {} at {}; φ in [{}, {}]; {} boundary vertices skipped",
                rep.min_value,
                rep.argmin.map_or("-".into(), |v| v.to_string()),
                rep.phi_min,
                rep.phi_max,
                rep.excluded.len()
            );
            Ok(if rep.passed() { Outcome::Pass } else { Outcome::Fail })
        }
        Command::Experiment(args) => {
            let config = experiment_config(&args)?;
            let report = run_experiment(&config)?;
            let files = report.write(&args.output, &config)?;
            for m in &report.metrics {
                eprintln!("{} = {}", m.name, m.value);
            }
            eprintln!("wrote {} files to {}", files.len(), args.output.display());
            Ok(match report.passed {
                Some(false) => Outcome::Fail,
                _ => Outcome::Pass,
            })
        }
        Command::Report { dir } => {
            let summary = std::fs::read_to_string(dir.join("report.csv"))?;
            let manifest: serde_json::Value =
                serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
            print!("{summary}");
            let passed = manifest.get("passed").and_then(|p| p.as_bool());
            println!(
                "kind={} config_hash={} passed={}",
                manifest["kind"].as_str().unwrap_or("?"),
                manifest["config_hash"].as_str().unwrap_or("?"),
                passed.map_or("n/a".into(), |p| p.to_string())
            );
            Ok(if passed == Some(false) {
                Outcome::Fail
            } else {
                Outcome::Pass
            })
        }
    }
}

fn experiment_config(a: &ExperimentArgs) -> Result<ExperimentConfig> {
    let mut c = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            let mut v: serde_json::Value = serde_json::from_str(&text)?;
            // The subcommand decides the kind.
            if let Some(o) = v.as_object_mut() {
                o.insert("kind".into(), serde_json::to_value(a.kind)?);
            }
            serde_json::from_value(v)?
        }
        None => ExperimentConfig::new(a.kind),
    };
    if let Some(spec) = a.family.spec()? {
        c.family = Some(spec);
        c.graph = None;
    }
    if let Some(g) = &a.graph {
        c.graph = Some(g.clone());
        c.family = None;
    }
    macro_rules! set {
        ($field:ident, $value:expr) => {
            if let Some(v) = $value {
                c.$field = v;
            }
        };
    }
    set!(center, a.center);
    set!(n_trajectories, a.n);
    set!(horizon, a.horizon);
    set!(jump_budget, a.budget);
    set!(seed, a.seed);
    set!(subdivision, a.subdivision);
    set!(t_burn, a.t_burn);
    set!(c_grid, a.c_grid.clone());
    set!(r_hat, a.rhat);
    set!(checkpoints, a.checkpoints.clone());
    set!(bootstrap, a.bootstrap);
    set!(epsilon, a.epsilon);
    if a.closed_form.is_some() {
        c.rate_form = a.closed_form;
    }
    if a.no_psi {
        c.use_psi = false;
    }
    c.output = Some(a.output.clone());
    c.validate()?;
    Ok(c)
}
