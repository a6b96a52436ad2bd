mod args;

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use serde::Serialize;
use serde_json::{json, Value};

use args::{Cli, Command, FrameArgs, Global, SampleKind, Scenario};
use macrostate::correlations::observational_discord;
use macrostate::entropy::{observational_deficit_with, observational_entropy, von_neumann_entropy_with};
use macrostate::evolve::{evolve_with, EvolutionRow, InitialState};
use macrostate::json::{
    channel_from_json, channel_to_json, frame_inputs_from_json, frame_to_json, operator_from_json, parse_document, povm_from_json,
    povm_to_json, representation_from_json, state_from_json, state_to_json, to_pretty,
};
use macrostate::mppp::{compute_mppp_with, macro_test, InferentialFrame};
use macrostate::numerics::Tolerance;
use macrostate::par::{self, Execution};
use macrostate::quantum::DensityMatrix;
use macrostate::random::{random_channel, random_density_matrix, random_frame_inputs, random_frame_kind, seeded};
use macrostate::resources::{classify_channel, scenario_asymmetry_seeded, scenario_athermality, scenario_coherence};
use macrostate::ErrorKind;

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_document(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load<T>(path: &Path, f: impl FnOnce(&Value, &str) -> macrostate::Result<T>) -> Result<T> {
    let v = read_json(path)?;
    f(&v, "$").with_context(|| format!("in {}", path.display()))
}

fn tolerance(g: &Global) -> Result<Tolerance> {
    Ok(Tolerance::new(g.abs_tol, g.tol, g.rank_tol)?)
}

fn load_frame(args: &FrameArgs, tol: &Tolerance) -> Result<InferentialFrame> {
    let (povm, prior) = match (&args.frame, &args.povm, &args.prior) {
        (Some(f), _, _) => load(f, frame_inputs_from_json)?,
        (None, Some(p), Some(g)) => (load(p, povm_from_json)?, load(g, state_from_json)?),
        _ => anyhow::bail!(macrostate::Error::Schema {
            path: "--frame".into(),
            message: "give --frame or both --povm and --prior".into(),
        }),
    };
    Ok(compute_mppp_with(&povm, &prior, tol)?)
}

/// Runs `f` on every input file, in parallel when there is more than one.
fn batch<R: Send>(items: &[PathBuf], g: &Global, f: impl Fn(&PathBuf) -> Result<R> + Sync + Send) -> Result<Vec<R>> {
    let mode = if items.len() > 1 { Execution::available() } else { Execution::Sequential };
    let run = |p: &PathBuf| f(p).with_context(|| format!("input {}", p.display()));
    par::with_threads(g.jobs, || par::map(items, mode, run)).into_iter().collect()
}

fn code_of(e: &anyhow::Error) -> u8 {
    if let Some(m) = e.downcast_ref::<macrostate::Error>() {
        return match m.kind() {
            ErrorKind::Schema => 2,
            ErrorKind::Precondition => 3,
            ErrorKind::TheoremViolation => 4,
        };
    }
    if e.downcast_ref::<std::io::Error>().is_some() {
        return 2;
    }
    1
}

fn one_or_many(mut values: Vec<Value>) -> Value {
    if values.len() == 1 {
        values.pop().unwrap()
    } else {
        Value::Array(values)
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("results serialize")
}

fn emit(g: &Global, text: &str) -> Result<()> {
    match &g.output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn format_number(x: f64) -> String {
    format!("{x:.11e}")
}

/// Scalar leaves of a JSON value, keyed by dotted path.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                flatten(&key(k), x, out);
            }
        }
        Value::Number(n) => out.push((prefix.to_string(), format_number(n.as_f64().unwrap_or(f64::NAN)))),
        Value::Bool(b) => out.push((prefix.to_string(), b.to_string())),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Null => out.push((prefix.to_string(), String::new())),
        Value::Array(_) => {}
    }
}

fn append_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    if fresh {
        writeln!(f, "{}", header.join(","))?;
    }
    for r in rows {
        writeln!(f, "{}", r.join(","))?;
    }
    Ok(())
}

fn record(g: &Global, labels: &[String], results: &[Value]) -> Result<()> {
    let Some(path) = &g.csv else { return Ok(()) };
    let mut header = vec!["input".to_string()];
    let mut rows = Vec::new();
    for (label, v) in labels.iter().zip(results) {
        let mut cells = Vec::new();
        flatten("", v, &mut cells);
        if rows.is_empty() {
            header.extend(cells.iter().map(|(k, _)| k.clone()));
        }
        let mut row = vec![label.clone()];
        row.extend(cells.into_iter().map(|(_, x)| x));
        rows.push(row);
    }
    append_csv(path, &header, &rows)
}

fn finish(g: &Global, labels: Vec<String>, results: Vec<Value>) -> Result<()> {
    record(g, &labels, &results)?;
    emit(g, &(to_pretty(&one_or_many(results)) + "\n"))
}

fn names(paths: &[PathBuf]) -> Vec<String> {
    paths.iter().map(|p| p.display().to_string()).collect()
}

fn evolution_csv(rows: &[EvolutionRow]) -> String {
    let mut s = String::from("t,von_neumann,observational,deficit\n");
    for r in rows {
        s += &format!(
            "{},{},{},{}\n",
            format_number(r.t),
            format_number(r.entropy),
            format_number(r.observational_entropy),
            format_number(r.deficit)
        );
    }
    s
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let tol = tolerance(g)?;
    match &cli.command {
        Command::Mppp { povm, prior } => {
            let frame = compute_mppp_with(&load(povm, povm_from_json)?, &load(prior, state_from_json)?, &tol)?;
            finish(g, vec!["mppp".into()], vec![frame_to_json(&frame)])
        }
        Command::Entropy { state, povm } => {
            let p = load(povm, povm_from_json)?;
            let results = batch(state, g, |path| {
                let rho = load(path, state_from_json)?;
                let vn = von_neumann_entropy_with(&rho, &tol);
                let obs = observational_entropy(&rho, &p)?;
                let deficit = observational_deficit_with(&rho, &DensityMatrix::maximally_mixed(rho.dim()), &p, &tol)?;
                Ok(json!({ "von_neumann": vn, "observational": obs, "deficit_uniform": deficit }))
            })?;
            finish(g, names(state), results)
        }
        Command::Deficit { state, povm, prior } => {
            let p = load(povm, povm_from_json)?;
            let gamma = load(prior, state_from_json)?;
            let results = batch(state, g, |path| {
                let rho = load(path, state_from_json)?;
                Ok(json!({ "deficit": observational_deficit_with(&rho, &gamma, &p, &tol)? }))
            })?;
            finish(g, names(state), results)
        }
        Command::MacroTest { state, frame } => {
            let frame = load_frame(frame, &tol)?;
            let results = batch(state, g, |path| Ok(to_value(&macro_test(&load(path, state_from_json)?, &frame)?)))?;
            finish(g, names(state), results)
        }
        Command::Classify { channel, frame } => {
            let frame = load_frame(frame, &tol)?;
            let results = batch(channel, g, |path| {
                let e = load(path, channel_from_json)?;
                let c = classify_channel(&e, &frame)?;
                Ok(json!({
                    "cco": c.is_cco,
                    "rco": c.is_rco,
                    "mno": c.is_mno,
                    "residuals": { "cco": c.cco_residual, "rco": c.rco_residual, "mno": c.mno_residual },
                }))
            })?;
            finish(g, names(channel), results)
        }
        Command::Discord { state, povm, dims } => {
            let p = load(povm, povm_from_json)?;
            let results = batch(state, g, |path| {
                Ok(to_value(&observational_discord(&load(path, state_from_json)?, &p, *dims)?))
            })?;
            finish(g, names(state), results)
        }
        Command::Evolve {
            frame,
            hamiltonian,
            t_max,
            steps,
            macro_weights,
            state,
        } => {
            let frame = load_frame(frame, &tol)?;
            let h = load(hamiltonian, operator_from_json)?;
            let init = match (macro_weights, state) {
                (Some(w), _) => InitialState::Macroscopic(w.clone()),
                (None, Some(s)) => InitialState::State(load(s, state_from_json)?),
                (None, None) => unreachable!("clap requires one of them"),
            };
            let rows = par::with_threads(g.jobs, || evolve_with(&frame, &h, *t_max, *steps, &init, Execution::available()))?;
            let text = evolution_csv(&rows);
            if let Some(path) = &g.csv {
                let body: Vec<Vec<String>> = text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
                let header: Vec<String> = text.lines().next().unwrap_or_default().split(',').map(String::from).collect();
                append_csv(path, &header, &body)?;
            }
            emit(g, &text)
        }
        Command::Scenario { which } => {
            let frame = match which {
                Scenario::Coherence { dim } => scenario_coherence(*dim)?,
                Scenario::Athermality { hamiltonian, beta, povm } => {
                    scenario_athermality(&load(hamiltonian, operator_from_json)?, *beta, &load(povm, povm_from_json)?)?
                }
                Scenario::Asymmetry { rep } => scenario_asymmetry_seeded(&load(rep, representation_from_json)?, g.seed)?,
            };
            finish(g, vec!["scenario".into()], vec![frame_to_json(&frame)])
        }
        Command::Sample { what, dim, count } => {
            let mut rng = seeded(g.seed);
            if *dim == 0 {
                anyhow::bail!(macrostate::Error::PreconditionViolated("dimension must be positive".into()));
            }
            let v = match what {
                SampleKind::State => state_to_json(&random_density_matrix(*dim, &mut rng)),
                SampleKind::Frame => {
                    let kind = random_frame_kind(&mut rng);
                    let (p, gamma) = random_frame_inputs(*dim, *count, kind, &mut rng);
                    json!({ "povm": povm_to_json(&p), "prior": state_to_json(&gamma) })
                }
                SampleKind::Channel => channel_to_json(&random_channel(*dim, *dim, *count, &mut rng)),
            };
            emit(g, &(to_pretty(&v) + "\n"))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code_of(&e))
        }
    }
}
