//! The `adapt` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 input or data error, 3 the
//! simulation halted on its cascade cap.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::ariel::{compile_source, disassemble, read_acode, verify, write_acode, ACodeProgram, Bundle, Vocabulary};
use crate::asi::{time_execution, Snapshot, TimingRecord};
use crate::pareto::{derive_scenarios, pareto_front, read_points_csv, FrontReport, Orientation, QoSPoint};
use crate::scenario::ScenarioError;
use crate::sim::{SimConfig, SimError, Simulation};
use crate::tuple_space::{EntityRef, TupleSpace, Value};
use crate::voting::{run_trial, summarize, sweep, sweep_csv, Policy, VotingConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_HALT: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "adapt",
    version,
    about = "Ariel toolchain, scenario simulator and adaptation demos"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ariel compiler and disassembler.
    #[command(subcommand)]
    Art(ArtCommand),
    /// Bundle per-scenario a-code sets into one file.
    Rcodenv(RcodenvArgs),
    /// Pareto frontier and scenario derivation.
    #[command(subcommand)]
    Pareto(ParetoCommand),
    /// Node network simulation.
    #[command(subcommand)]
    Sim(SimCommand),
    /// Case-study workloads.
    #[command(subcommand)]
    Demo(DemoCommand),
    /// Time ASI execution of an a-code program.
    Bench(BenchArgs),
}

#[derive(Debug, Subcommand)]
enum ArtCommand {
    /// Compile an Ariel script to a-code.
    Compile {
        input: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Program name; defaults to the input file stem.
        #[arg(long)]
        name: Option<String>,
        /// Extra metric names accepted in guards.
        #[arg(long = "metric")]
        metrics: Vec<String>,
    },
    /// Print a symbolic listing of an a-code file.
    Disasm {
        input: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct RcodenvArgs {
    /// Bundle file to write.
    output: PathBuf,
    /// `scenario:file` pairs in priority order; files may be `.acode` or `.ariel`.
    #[arg(required = true)]
    entries: Vec<String>,
    /// Scenario predicate as `NAME=PREDICATE`.
    #[arg(long = "predicate")]
    predicates: Vec<String>,
    /// Also write a C header (default path: output with `.h` appended).
    #[arg(long, num_args = 0..=1)]
    emit_c_header: Option<Option<PathBuf>>,
}

#[derive(Debug, Args)]
struct OrientArgs {
    /// Dimension to maximize (repeatable, order matters).
    #[arg(long = "max")]
    maximize: Vec<String>,
    /// Dimension to minimize (repeatable).
    #[arg(long = "min")]
    minimize: Vec<String>,
}

impl OrientArgs {
    fn orientation(&self) -> Orientation {
        let mut o = Orientation::new();
        for d in &self.maximize {
            o = o.maximize(d.clone());
        }
        for d in &self.minimize {
            o = o.minimize(d.clone());
        }
        o
    }
}

#[derive(Debug, Subcommand)]
enum ParetoCommand {
    /// Non-dominated points of a CSV file, as a JSON report.
    Front {
        points: PathBuf,
        #[command(flatten)]
        orient: OrientArgs,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Scenario predicates around frontier points.
    Scenarios {
        /// Points CSV, or a front report written by `pareto front`.
        input: PathBuf,
        #[command(flatten)]
        orient: OrientArgs,
        /// Box half-width as `dim=value` (one per dimension).
        #[arg(long = "margin", required = true)]
        margins: Vec<String>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum SimCommand {
    /// Run a simulation config.
    Run {
        config: PathBuf,
        #[arg(long)]
        until: Option<u64>,
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Subcommand)]
enum DemoCommand {
    /// Adaptive m-out-of-n voting.
    Voting {
        /// Demo config (JSON); defaults apply when omitted.
        config: Option<PathBuf>,
        /// Run every fixed m and the adaptive policy.
        #[arg(long)]
        sweep: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        intervals: Option<u32>,
        /// CSV table destination (stdout when omitted).
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// JSON summary destination.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    program: PathBuf,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    /// Stations in the synthetic snapshot.
    #[arg(long, default_value_t = 4)]
    stations: u32,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Data(String),
    Halt(String),
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Scenario(ScenarioError::CascadeCapExceeded { .. }) => Failure::Halt(e.to_string()),
            e => Failure::Data(e.to_string()),
        }
    }
}

type Res<T> = Result<T, Failure>;

fn data<E: std::fmt::Display>(ctx: impl std::fmt::Display) -> impl FnOnce(E) -> Failure {
    move |e| Failure::Data(format!("{ctx}: {e}"))
}

fn read(path: &Path) -> Res<String> {
    std::fs::read_to_string(path).map_err(data(path.display()))
}

fn write_or_print(path: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Res<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(data(p.display())),
        None => stdout.write_all(text.as_bytes()).map_err(data("stdout")),
    }
}

/// Runs the CLI with explicit arguments (including the program name) and
/// output streams; returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = dispatch(cli.command, stdout, stderr);
    let _ = stdout.flush();
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Data(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_DATA
        }
        Err(Failure::Halt(msg)) => {
            let _ = writeln!(stderr, "halted: {msg}");
            EXIT_HALT
        }
    }
}

fn dispatch(cmd: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Res<()> {
    match cmd {
        Command::Art(ArtCommand::Compile {
            input,
            out,
            name,
            metrics,
        }) => {
            let name = name.unwrap_or_else(|| stem(&input));
            let mut vocab = Vocabulary::default();
            vocab.extend(metrics);
            let program = compile_source(&read(&input)?, &name, &vocab).map_err(data(input.display()))?;
            let text = write_acode(&program).map_err(data(&name))?;
            write_or_print(out.as_deref(), &text, stdout)?;
            if out.is_some() {
                let _ = writeln!(stderr, "{name}: {} triplets", program.len());
            }
            Ok(())
        }
        Command::Art(ArtCommand::Disasm { input, out }) => {
            let program = load_program(&input, &Vocabulary::default())?;
            write_or_print(out.as_deref(), &disassemble(&program), stdout)
        }
        Command::Rcodenv(args) => rcodenv(args, stderr),
        Command::Pareto(ParetoCommand::Front { points, orient, out }) => {
            let pts = read_points_csv(read(&points)?.as_bytes()).map_err(data(points.display()))?;
            let orientation = orient.orientation();
            let front = pareto_front(&pts, &orientation).map_err(data(points.display()))?;
            let report = FrontReport {
                orientation,
                points: pts.len(),
                front,
            };
            let text = serde_json::to_string_pretty(&report).map_err(data("report"))? + "\n";
            write_or_print(out.as_deref(), &text, stdout)
        }
        Command::Pareto(ParetoCommand::Scenarios {
            input,
            orient,
            margins,
            out,
        }) => {
            let text = read(&input)?;
            let (front, orientation): (Vec<QoSPoint>, Orientation) = if input.extension().is_some_and(|e| e == "json") {
                let r: FrontReport = serde_json::from_str(&text).map_err(data(input.display()))?;
                let o = if orient.maximize.is_empty() && orient.minimize.is_empty() {
                    r.orientation
                } else {
                    orient.orientation()
                };
                (r.front, o)
            } else {
                let pts = read_points_csv(text.as_bytes()).map_err(data(input.display()))?;
                let o = orient.orientation();
                (pareto_front(&pts, &o).map_err(data(input.display()))?, o)
            };
            let mut m = BTreeMap::new();
            for spec in &margins {
                let (d, v) = spec
                    .split_once('=')
                    .ok_or_else(|| Failure::Data(format!("margin `{spec}` is not dim=value")))?;
                let v: f64 = v.parse().map_err(data(format!("margin `{spec}`")))?;
                m.insert(d.to_string(), v);
            }
            let derived = derive_scenarios(&front, &orientation, &m).map_err(data("derive"))?;
            for w in &derived.warnings {
                let _ = writeln!(stderr, "warning: {}", w.message);
            }
            write_or_print(out.as_deref(), &derived.to_text(), stdout)
        }
        Command::Sim(SimCommand::Run {
            config,
            until,
            trace,
            seed,
        }) => sim_run(&config, until, trace.as_deref(), seed, stdout),
        Command::Demo(DemoCommand::Voting {
            config,
            sweep: do_sweep,
            seed,
            intervals,
            out,
            summary,
        }) => {
            let mut cfg: VotingConfig = match &config {
                Some(p) => serde_json::from_str(&read(p)?).map_err(data(p.display()))?,
                None => VotingConfig::default(),
            };
            if let Some(s) = seed {
                cfg.model.seed = s;
            }
            if let Some(n) = intervals {
                cfg.intervals = n;
            }
            let rows = if do_sweep {
                sweep(&cfg).map_err(data("voting"))?
            } else {
                vec![run_trial(&cfg, Policy::Adaptive).map_err(data("voting"))?]
            };
            write_or_print(out.as_deref(), &sweep_csv(&rows), stdout)?;
            if let Some(p) = summary {
                let s = summarize(&cfg, rows);
                let text = serde_json::to_string_pretty(&s).map_err(data("summary"))? + "\n";
                std::fs::write(&p, text).map_err(data(p.display()))?;
            }
            Ok(())
        }
        Command::Bench(args) => {
            let program = load_program(&args.program, &Vocabulary::default())?;
            let snapshot = bench_snapshot(args.stations);
            let rec: TimingRecord = time_execution(&program, &snapshot, args.reps).map_err(data("bench"))?;
            let text = format!("{}\n{}\n", TimingRecord::CSV_HEADER, rec.csv_row());
            write_or_print(args.out.as_deref(), &text, stdout)
        }
    }
}

fn stem(p: &Path) -> String {
    p.file_stem().and_then(|s| s.to_str()).unwrap_or("program").to_string()
}

/// Reads `.acode` files directly and compiles anything else as Ariel.
fn load_program(path: &Path, vocab: &Vocabulary) -> Res<ACodeProgram> {
    let text = read(path)?;
    let program = if path.extension().is_some_and(|e| e == "acode") {
        read_acode(&text).map_err(data(path.display()))?
    } else {
        compile_source(&text, &stem(path), vocab).map_err(data(path.display()))?
    };
    verify(&program).map_err(data(path.display()))?;
    Ok(program)
}

fn rcodenv(args: RcodenvArgs, stderr: &mut dyn Write) -> Res<()> {
    let mut preds = BTreeMap::new();
    for p in &args.predicates {
        let (n, pred) = p
            .split_once('=')
            .ok_or_else(|| Failure::Data(format!("predicate `{p}` is not NAME=PREDICATE")))?;
        preds.insert(n.trim().to_string(), pred.trim().to_string());
    }
    let mut items = Vec::new();
    for e in &args.entries {
        let (name, file) = e
            .split_once(':')
            .ok_or_else(|| Failure::Data(format!("entry `{e}` is not scenario:file")))?;
        let program = load_program(Path::new(file), &Vocabulary::default())?;
        items.push((name.to_string(), program, preds.remove(name)));
    }
    if let Some(extra) = preds.keys().next() {
        return Err(Failure::Data(format!("predicate given for unknown scenario `{extra}`")));
    }
    let bundle = Bundle::new(items).map_err(data("bundle"))?;
    let text = bundle.to_text().map_err(data("bundle"))?;
    std::fs::write(&args.output, text).map_err(data(args.output.display()))?;
    if let Some(header) = args.emit_c_header {
        let path = header.unwrap_or_else(|| {
            let mut s = args.output.clone().into_os_string();
            s.push(".h");
            PathBuf::from(s)
        });
        std::fs::write(&path, bundle.to_c_header()).map_err(data(path.display()))?;
    }
    let _ = writeln!(
        stderr,
        "{}: {} scenarios ({})",
        args.output.display(),
        bundle.len(),
        bundle.order().join(", ")
    );
    Ok(())
}

fn sim_run(
    path: &Path,
    until: Option<u64>,
    trace: Option<&Path>,
    seed: Option<u64>,
    stdout: &mut dyn Write,
) -> Res<()> {
    let mut config = SimConfig::from_path(path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let bundle = config.load_bundle(base)?;
    let until = until.or(config.until).unwrap_or(1000);
    let mut sim = Simulation::build(config, bundle, None)?;
    sim.set_tracing(trace.is_some());
    let outcome = sim.run_until(until).map(|_| ());
    if let Some(t) = trace {
        let f = std::fs::File::create(t).map_err(data(t.display()))?;
        sim.write_trace(std::io::BufWriter::new(f)).map_err(data(t.display()))?;
    }
    let state = sim.manager().state();
    let summary = json!({
        "until": until,
        "events": sim.events_processed(),
        "scenario": state.current,
        "entered_at": state.entered_at,
        "switches": state.switch_count,
        "executions": sim.manager().executions(),
        "tuples": sim.space().len(),
        "halted": outcome.as_ref().err().map(|e| e.to_string()),
    });
    writeln!(stdout, "{summary}").map_err(data("stdout"))?;
    outcome.map_err(Failure::from)
}

/// Stations reporting mid-range CPU and energy, none down.
fn bench_snapshot(stations: u32) -> Snapshot {
    let mut space = TupleSpace::new();
    space.register_producer("CD");
    for id in 1..=stations {
        space.entities_mut().add_station(id);
        let s: Value = EntityRef::station(id).into();
        let _ = space.out("CD", "cpu_usage_pct", vec![s.clone(), Value::Real(40.0 + id as f64)]);
        let _ = space.out("CD", "energy_pct", vec![s, Value::Real(80.0)]);
    }
    Snapshot::of(&space)
}
