//! `corrective`: run, serve, score and fit corrective shared-autonomy sessions.

mod demo;

use clap::{Parser, Subcommand};
use corrective_core::dmp::{rollout, Direction, DmpConfig, DmpModelDoc, DmpSegmentModel};
use corrective_core::plan::ScenarioDoc;
use corrective_core::plant::OutcomeDetail;
use corrective_core::session::{
    compute_metrics, open_session, InputSource, InputThresholds, Metrics, ReplayUser, ScriptedUser, Session,
    SessionOptions, SessionTrace, TraceError, ZeroInput,
};
use corrective_core::tasks;
use corrective_server::ServeConfig;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "corrective", version, about = "Corrective shared autonomy on a simulated robot")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario headless against a scripted or replayed operator.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Scripted operator (.toml) or a trace to replay (.jsonl); no input if omitted.
        #[arg(long)]
        user: Option<PathBuf>,
        #[arg(long)]
        record: PathBuf,
        /// Overrides the scenario's control step (s).
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        max_time: Option<f64>,
    },
    /// Run a scenario live, steered over a websocket.
    Serve {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        record: Option<PathBuf>,
        /// Directory with the operator UI build.
        #[arg(long)]
        assets: Option<PathBuf>,
        #[arg(long)]
        dt: Option<f64>,
        /// Simulated seconds per wall-clock second.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        /// Start ticking only once an operator has connected.
        #[arg(long)]
        wait: bool,
        #[arg(long, default_value_t = 60.0)]
        state_rate: f64,
    },
    /// Print input times, duration, outcome and saturation counts of a trace.
    Metrics {
        trace: PathBuf,
        /// Device displacement threshold (m).
        #[arg(long)]
        d: Option<f64>,
        /// Device speed threshold (m/s).
        #[arg(long)]
        v_alpha: Option<f64>,
        #[arg(long)]
        json: bool,
    },
    /// Fit a segment primitive to a demonstration CSV.
    Fit {
        #[arg(long)]
        demo: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DmpConfig::default().bases)]
        bases: usize,
        /// Sample step when the CSV has no `t` column.
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Write the built-in task scenarios and scripted operators.
    Export {
        #[arg(long, default_value = "scenarios")]
        out: PathBuf,
    },
}

/// Failure with its process exit code.
enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn config(e: impl ToString) -> Self {
        Failure::Config(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            user,
            record,
            dt,
            max_time,
        } => run(&scenario, user.as_deref(), &record, dt, max_time),
        Command::Serve {
            scenario,
            port,
            host,
            record,
            assets,
            dt,
            speed,
            wait,
            state_rate,
        } => serve(&scenario, &host, port, record, assets, dt, speed, wait, state_rate),
        Command::Metrics { trace, d, v_alpha, json } => metrics(&trace, d, v_alpha, json),
        Command::Fit { demo, out, bases, dt } => fit(&demo, &out, bases, dt),
        Command::Export { out } => export(&out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("fault: {msg}");
            ExitCode::from(3)
        }
    }
}

fn open(scenario: &Path, dt: Option<f64>, max_time: Option<f64>) -> Result<Session, Failure> {
    let doc = ScenarioDoc::load(scenario).map_err(Failure::config)?;
    let options = SessionOptions {
        max_time,
        ..SessionOptions::default()
    };
    open_session(&doc, scenario.parent(), dt, options).map_err(Failure::config)
}

fn operator(user: Option<&Path>) -> Result<Box<dyn InputSource>, Failure> {
    let Some(path) = user else {
        return Ok(Box::new(ZeroInput));
    };
    if path.extension().is_some_and(|e| e == "jsonl") {
        let trace = SessionTrace::load(path).map_err(Failure::config)?;
        Ok(Box::new(ReplayUser::from_trace(&trace)))
    } else {
        Ok(Box::new(ScriptedUser::load(path).map_err(Failure::Config)?))
    }
}

fn run(scenario: &Path, user: Option<&Path>, record: &Path, dt: Option<f64>, max_time: Option<f64>) -> Result<(), Failure> {
    let session = open(scenario, dt, max_time)?;
    let mut source = operator(user)?;
    let trace = session.run(source.as_mut());
    trace.save(record).map_err(|e| Failure::Runtime(e.to_string()))?;
    let footer = trace.footer.as_ref().expect("finished runs have a footer");
    println!(
        "{}: {} ticks, {:.3} s, {}",
        trace.header.scenario,
        footer.ticks,
        footer.ticks as f64 * trace.header.dt,
        if footer.completed { "completed" } else { "stopped early" }
    );
    for w in &footer.warnings {
        println!("warning: {w}");
    }
    println!("trace written to {}", record.display());
    match &footer.fault {
        Some(fault) => Err(Failure::Runtime(fault.clone())),
        None => Ok(()),
    }
}

#[allow(clippy::too_many_arguments)]
fn serve(
    scenario: &Path,
    host: &str,
    port: u16,
    record: Option<PathBuf>,
    assets: Option<PathBuf>,
    dt: Option<f64>,
    speed: f64,
    wait: bool,
    state_rate: f64,
) -> Result<(), Failure> {
    let addr: SocketAddr = format!("{host}:{port}").parse().map_err(Failure::config)?;
    let positive = |x: f64| x > 0.0 && !x.is_nan();
    if !(positive(state_rate) && state_rate.is_finite()) || !positive(speed) {
        return Err(Failure::Config("state rate and speed must be positive".into()));
    }
    let session = open(scenario, dt, None)?;
    let config = ServeConfig {
        addr,
        speed,
        state_rate,
        record,
        assets,
        wait_for_client: wait,
        ..ServeConfig::default()
    };
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Runtime(e.to_string()))?;
    let trace = rt
        .block_on(async {
            let server = corrective_server::start(session, config).await?;
            println!("operator endpoint: ws://{}/ws", server.local_addr());
            server.finish().await
        })
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    let footer = trace.footer.as_ref().expect("finished runs have a footer");
    println!("session ended after {} ticks", footer.ticks);
    match &footer.fault {
        Some(fault) => Err(Failure::Runtime(fault.clone())),
        None => Ok(()),
    }
}

fn metrics(path: &Path, d: Option<f64>, v_alpha: Option<f64>, json: bool) -> Result<(), Failure> {
    let trace = SessionTrace::load(path).map_err(|e| match e {
        TraceError::Io(_) | TraceError::VersionMismatch { .. } | TraceError::MissingHeader => Failure::config(e),
        other => Failure::Runtime(other.to_string()),
    })?;
    let mut thresholds = InputThresholds::default();
    thresholds.d = d.unwrap_or(thresholds.d);
    thresholds.v_alpha = v_alpha.unwrap_or(thresholds.v_alpha);
    let m = compute_metrics(&trace, thresholds).map_err(Failure::config)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&m).expect("metrics serialize"));
    } else {
        print_metrics(&trace, &m);
    }
    Ok(())
}

fn print_metrics(trace: &SessionTrace, m: &Metrics) {
    println!("scenario            {}", trace.header.scenario);
    if m.partial {
        println!("partial             yes (trace ends before the plan finished)");
    }
    println!("t_total             {:.3} s", m.t_total);
    println!("t_input corrective  {:.3} s  (d = {} m)", m.t_input_corrective, m.thresholds.d);
    println!("t_input motion      {:.3} s  (v = {} m/s)", m.t_input_motion, m.thresholds.v_alpha);
    let s = &m.saturation;
    println!(
        "saturation ticks    param_clamped {}  normal_scaled {}  force_floored {}  scaling_zeroed {}",
        s.param_clamped, s.normal_scaled, s.force_floored, s.scaling_zeroed
    );
    let Some(outcome) = &m.outcome else {
        println!("outcome             no task criteria");
        return;
    };
    let verdict = if outcome.success { "success" } else { "failure" };
    match &outcome.detail {
        OutcomeDetail::Insertion { rivets } => {
            let ok = rivets.iter().filter(|r| r.success).count();
            println!("outcome             {verdict}: {ok}/{} rivets inserted", rivets.len());
            for r in rivets {
                match r.lateral_error {
                    Some(e) => println!("  {:<16}  lateral error {:.2} mm", r.id, e * 1000.0),
                    None => println!("  {:<16}  not attempted", r.id),
                }
            }
        }
        OutcomeDetail::Polishing {
            region_dose,
            threshold,
            cleared,
            ..
        } => println!(
            "outcome             {verdict}: defect dose {region_dose:.2} N s of {threshold:.2} required ({})",
            if *cleared { "cleared" } else { "not cleared" }
        ),
        OutcomeDetail::Layup {
            crease,
            bad_bins,
            max_deviation,
        } => println!(
            "outcome             {verdict}: {} ({} bins out of bound, max deviation {:.2} mm)",
            if *crease { "crease" } else { "no crease" },
            bad_bins.len(),
            max_deviation * 1000.0
        ),
    }
}

fn fit(demo_path: &Path, out: &Path, bases: usize, dt: Option<f64>) -> Result<(), Failure> {
    let demo = demo::load_csv(demo_path, dt).map_err(Failure::Config)?;
    let config = DmpConfig {
        bases,
        ..DmpConfig::default()
    };
    let model = DmpSegmentModel::fit(&demo, &config).map_err(Failure::config)?;
    let traj = rollout(&model, Direction::Forward, |_| 1.0, demo.dt()).map_err(|e| Failure::Runtime(e.to_string()))?;
    DmpModelDoc::new(model.clone()).save(out).map_err(Failure::config)?;
    println!(
        "fitted {} channels, {} bases, {:.3} s from {} samples",
        model.channel_count(),
        bases,
        model.duration,
        demo.len()
    );
    for (c, spec) in demo.channels().iter().enumerate() {
        let want = demo.channel(c);
        let got = traj.channel(c);
        let lo = want.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = want.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let err = want.iter().zip(&got).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let rel = if hi > lo { format!("{:.2}% of range", 100.0 * err / (hi - lo)) } else { "constant".into() };
        println!("  {:<8} max rollout error {err:.3e} {}  ({rel})", spec.name, spec.kind.units());
    }
    println!("model written to {}", out.display());
    Ok(())
}

fn export(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(Failure::config)?;
    let scenarios = [
        ("insertion", tasks::insertion_scenario(), Some(tasks::insertion_corrective_user())),
        ("polishing", tasks::polishing_scenario(), Some(tasks::polishing_corrective_user())),
        ("layup", tasks::layup_scenario(), Some(tasks::layup_corrective_user())),
        ("draw", tasks::three_segment_scenario(), None),
    ];
    for (name, doc, user) in scenarios {
        let path = dir.join(format!("{name}.toml"));
        doc.save(&path).map_err(Failure::config)?;
        println!("wrote {}", path.display());
        if let Some(user) = user {
            let path = dir.join(format!("{name}_corrective_user.toml"));
            std::fs::write(&path, user.to_toml().map_err(Failure::Config)?).map_err(Failure::config)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}
